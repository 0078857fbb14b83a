#include "delayprof/io.h"

#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>
#include <system_error>

#include <openssl/evp.h>
#include <zlib.h>

namespace fs = std::filesystem;

namespace delayprof {

// --- line_reader ------------------------------------------------------------

struct line_reader::impl {
  gzFile gz{nullptr};
  std::ifstream in;
  std::string buf;
};

line_reader::line_reader(fs::path const& path) : impl_{std::make_unique<impl>()} {
  if (path.extension() == ".gz") {
    impl_->gz = gzopen(path.string().c_str(), "rb");
    if (impl_->gz == nullptr) {
      throw io_error("cannot open " + path.string());
    }
    gzbuffer(impl_->gz, 1U << 17U);
  } else {
    impl_->in.open(path, std::ios::binary);
    if (!impl_->in) {
      throw io_error("cannot open " + path.string());
    }
  }
}

line_reader::~line_reader() {
  if (impl_ && impl_->gz != nullptr) {
    gzclose(impl_->gz);
  }
}

bool line_reader::next(std::string& line) {
  line.clear();
  if (impl_->gz != nullptr) {
    char chunk[8192];
    bool got_any = false;
    while (gzgets(impl_->gz, chunk, sizeof(chunk)) != nullptr) {
      got_any = true;
      auto const len = std::strlen(chunk);
      line.append(chunk, len);
      if (len > 0 && chunk[len - 1] == '\n') {
        break;
      }
    }
    if (!got_any) {
      int err = 0;
      auto const* msg = gzerror(impl_->gz, &err);
      if (err != Z_OK && err != Z_STREAM_END) {
        throw io_error(std::string{"gzip read error: "} + msg);
      }
      return false;
    }
    if (!line.empty() && line.back() == '\n') {
      line.pop_back();
    }
  } else if (!std::getline(impl_->in, line)) {
    return false;
  }
  if (!line.empty() && line.back() == '\r') {
    line.pop_back();
  }
  ++line_no_;
  return true;
}

// --- whole files ------------------------------------------------------------

std::string read_file(fs::path const& path) {
  std::ifstream in{path, std::ios::binary};
  if (!in) {
    throw io_error("cannot open " + path.string());
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

void write_file(fs::path const& path, std::string_view content) {
  if (path.has_parent_path()) {
    fs::create_directories(path.parent_path());
  }
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out{tmp, std::ios::binary | std::ios::trunc};
    if (!out) {
      throw io_error("cannot write " + tmp.string());
    }
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) {
      throw io_error("write failed for " + tmp.string());
    }
  }
  fs::rename(tmp, path);
}

// --- csv --------------------------------------------------------------------

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    auto const c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\n\r") == std::string_view::npos) {
    return std::string{field};
  }
  std::string out = "\"";
  for (auto const c : field) {
    if (c == '"') {
      out += "\"\"";
    } else {
      out.push_back(c);
    }
  }
  out.push_back('"');
  return out;
}

csv_table csv_table::parse(std::string_view content, std::string name) {
  csv_table t;
  t.name_ = std::move(name);
  // strip UTF-8 BOM, common in GTFS exports
  if (content.starts_with("\xEF\xBB\xBF")) {
    content.remove_prefix(3);
  }
  std::size_t line_no = 0;
  std::size_t pos = 0;
  bool have_header = false;
  while (pos < content.size()) {
    auto end = content.find('\n', pos);
    if (end == std::string_view::npos) {
      end = content.size();
    }
    auto line = content.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') {
      line.remove_suffix(1);
    }
    if (trim(line).empty()) {
      continue;
    }
    auto fields = split_csv_line(line);
    for (auto& f : fields) {
      f = std::string{trim(f)};
    }
    if (!have_header) {
      t.header_ = std::move(fields);
      have_header = true;
      continue;
    }
    fields.resize(t.header_.size());
    t.rows_.push_back(std::move(fields));
    t.lines_.push_back(line_no);
  }
  return t;
}

std::optional<std::size_t> csv_table::column(std::string_view name) const {
  for (std::size_t i = 0; i < header_.size(); ++i) {
    if (header_[i] == name) {
      return i;
    }
  }
  return std::nullopt;
}

std::size_t csv_table::require_column(std::string_view name) const {
  auto const c = column(name);
  if (!c) {
    throw io_error(name_ + ": missing required column '" + std::string{name} +
                   "'");
  }
  return *c;
}

// --- zip --------------------------------------------------------------------

namespace {

std::uint16_t le16(std::string const& d, std::size_t off) {
  if (off + 2 > d.size()) {
    throw io_error("zip: truncated archive");
  }
  return static_cast<std::uint16_t>(static_cast<unsigned char>(d[off]) |
                                    (static_cast<unsigned char>(d[off + 1]) << 8U));
}

std::uint32_t le32(std::string const& d, std::size_t off) {
  return static_cast<std::uint32_t>(le16(d, off)) |
         (static_cast<std::uint32_t>(le16(d, off + 2)) << 16U);
}

}  // namespace

zip_archive::zip_archive(fs::path const& path) : data_{read_file(path)} {
  constexpr std::uint32_t eocd_sig = 0x06054b50;
  constexpr std::uint32_t central_sig = 0x02014b50;
  if (data_.size() < 22) {
    throw io_error("zip: " + path.string() + " too small");
  }
  std::size_t eocd = std::string::npos;
  for (std::size_t i = data_.size() - 22;; --i) {
    if (le32(data_, i) == eocd_sig) {
      eocd = i;
      break;
    }
    if (i == 0 || data_.size() - i > 22 + 65535) {
      break;
    }
  }
  if (eocd == std::string::npos) {
    throw io_error("zip: no end-of-central-directory in " + path.string());
  }
  auto const count = le16(data_, eocd + 10);
  std::size_t off = le32(data_, eocd + 16);
  for (std::size_t i = 0; i < count; ++i) {
    if (le32(data_, off) != central_sig) {
      throw io_error("zip: corrupt central directory");
    }
    entry e{};
    e.method = le16(data_, off + 10);
    e.compressed_size = le32(data_, off + 20);
    e.uncompressed_size = le32(data_, off + 24);
    auto const name_len = le16(data_, off + 28);
    auto const extra_len = le16(data_, off + 30);
    auto const comment_len = le16(data_, off + 32);
    e.local_header_offset = le32(data_, off + 42);
    auto name = data_.substr(off + 46, name_len);
    // feeds are sometimes zipped inside a top-level folder
    if (auto const slash = name.rfind('/'); slash != std::string::npos) {
      name = name.substr(slash + 1);
    }
    if (!name.empty()) {
      entries_.emplace(std::move(name), e);
    }
    off += 46U + name_len + extra_len + comment_len;
  }
}

bool zip_archive::contains(std::string const& name) const {
  return entries_.contains(name);
}

std::string zip_archive::read(std::string const& name) const {
  auto const it = entries_.find(name);
  if (it == end(entries_)) {
    throw io_error("zip: no entry " + name);
  }
  auto const& e = it->second;
  auto const lh = e.local_header_offset;
  if (le32(data_, lh) != 0x04034b50) {
    throw io_error("zip: bad local header for " + name);
  }
  auto const start = lh + 30U + le16(data_, lh + 26) + le16(data_, lh + 28);
  if (start + e.compressed_size > data_.size()) {
    throw io_error("zip: truncated entry " + name);
  }
  if (e.method == 0) {
    return data_.substr(start, e.compressed_size);
  }
  if (e.method != 8) {
    throw io_error("zip: unsupported compression method for " + name);
  }
  std::string out(e.uncompressed_size, '\0');
  z_stream zs{};
  if (inflateInit2(&zs, -MAX_WBITS) != Z_OK) {
    throw io_error("zip: inflateInit failed");
  }
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(data_.data() + start));
  zs.avail_in = e.compressed_size;
  zs.next_out = reinterpret_cast<Bytef*>(out.data());
  zs.avail_out = e.uncompressed_size;
  auto const rc = inflate(&zs, Z_FINISH);
  inflateEnd(&zs);
  if (rc != Z_STREAM_END) {
    throw io_error("zip: inflate failed for " + name);
  }
  return out;
}

// --- digests ----------------------------------------------------------------

std::string sha256_hex(std::string_view data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) !=
      1) {
    throw std::runtime_error("sha256 failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned i = 0; i < len; ++i) {
    out.push_back(hex[md[i] >> 4U]);
    out.push_back(hex[md[i] & 0xFU]);
  }
  return out;
}

std::string file_sha256(fs::path const& path) {
  return sha256_hex(read_file(path));
}

// --- numbers ----------------------------------------------------------------

std::string format_double(double v) {
  char buf[64];
  auto const [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc{}) {
    throw std::runtime_error("format_double failed");
  }
  return std::string(buf, ptr);
}

std::string format_fixed(double v, int decimals) {
  char buf[64];
  auto const [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v,
                                       std::chars_format::fixed, decimals);
  if (ec != std::errc{}) {
    throw std::runtime_error("format_fixed failed");
  }
  return std::string(buf, ptr);
}

double parse_double(std::string_view s) {
  s = trim(s);
  double v = 0.0;
  auto const [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) {
    throw std::invalid_argument("not a number: '" + std::string{s} + "'");
  }
  return v;
}

std::int64_t parse_int(std::string_view s) {
  s = trim(s);
  if (s.starts_with('+')) {
    s.remove_prefix(1);
  }
  std::int64_t v = 0;
  auto const [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) {
    throw std::invalid_argument("not an integer: '" + std::string{s} + "'");
  }
  return v;
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    auto const end = s.find(sep, pos);
    out.emplace_back(s.substr(pos, end == std::string_view::npos ? end : end - pos));
    if (end == std::string_view::npos) {
      break;
    }
    pos = end + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
    s.remove_prefix(1);
  }
  while (!s.empty() &&
         (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

}  // namespace delayprof
