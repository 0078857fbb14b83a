#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace delayprof {

struct io_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Reads text line by line; files ending in ".gz" are decompressed on the fly.
class line_reader {
public:
  explicit line_reader(std::filesystem::path const& path);
  ~line_reader();
  line_reader(line_reader const&) = delete;
  line_reader& operator=(line_reader const&) = delete;

  // Returns false at end of input. Trailing '\r' is stripped.
  bool next(std::string& line);
  std::size_t line_number() const { return line_no_; }

private:
  struct impl;
  std::unique_ptr<impl> impl_;
  std::size_t line_no_{0};
};

std::string read_file(std::filesystem::path const& path);

// Writes through a temporary sibling and renames, so readers never observe a
// half-written artifact.
void write_file(std::filesystem::path const& path, std::string_view content);

// RFC 4180 field splitting for a single physical line.
std::vector<std::string> split_csv_line(std::string_view line);
std::string csv_escape(std::string_view field);

// Header-indexed access to a CSV table held in memory.
class csv_table {
public:
  static csv_table parse(std::string_view content, std::string name);

  std::optional<std::size_t> column(std::string_view name) const;
  std::size_t require_column(std::string_view name) const;

  std::vector<std::string> const& header() const { return header_; }
  std::vector<std::vector<std::string>> const& rows() const { return rows_; }
  std::string const& name() const { return name_; }
  // 1-based line number in the source for row i (header is line 1).
  std::size_t line_of(std::size_t row) const { return lines_[row]; }

private:
  std::string name_;
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
  std::vector<std::size_t> lines_;
};

// Minimal reader for .zip archives (stored and deflate entries only).
class zip_archive {
public:
  explicit zip_archive(std::filesystem::path const& path);

  bool contains(std::string const& name) const;
  std::string read(std::string const& name) const;

private:
  struct entry {
    std::uint16_t method;
    std::uint32_t compressed_size;
    std::uint32_t uncompressed_size;
    std::uint32_t local_header_offset;
  };
  std::string data_;
  std::map<std::string, entry> entries_;
};

// Hex SHA-256.
std::string sha256_hex(std::string_view data);
std::string file_sha256(std::filesystem::path const& path);

// Shortest decimal representation that round-trips to the same double.
std::string format_double(double v);
// Fixed-point with the given number of decimals.
std::string format_fixed(double v, int decimals);

double parse_double(std::string_view s);
std::int64_t parse_int(std::string_view s);

std::vector<std::string> split(std::string_view s, char sep);
std::string_view trim(std::string_view s);

}  // namespace delayprof
