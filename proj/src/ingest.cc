#include "delayprof/ingest.h"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "json.hpp"

#include "delayprof/io.h"

namespace fs = std::filesystem;
using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace delayprof {

char to_char(vehicle_type t) { return static_cast<char>(t); }

std::optional<vehicle_type> vehicle_type_from(std::string_view s) {
  if (s == "b") {
    return vehicle_type::bus;
  }
  if (s == "t") {
    return vehicle_type::tram;
  }
  return std::nullopt;
}

namespace {

template <typename T>
int three_way(T const& a, T const& b) {
  return a < b ? -1 : (b < a ? 1 : 0);
}

json const& field(json const& obj, char const* name, std::size_t line_no) {
  auto const it = obj.find(name);
  if (it == obj.end() || it->is_null()) {
    throw record_error(line_no, std::string{"missing field '"} + name + "'");
  }
  return *it;
}

std::int64_t int_field(json const& obj, char const* name, std::size_t line_no) {
  auto const& v = field(obj, name, line_no);
  try {
    if (v.is_number_integer()) {
      return v.get<std::int64_t>();
    }
    if (v.is_string()) {
      return parse_int(v.get_ref<std::string const&>());
    }
  } catch (std::invalid_argument const&) {
  }
  throw record_error(line_no, std::string{"field '"} + name +
                                  "' is not an integer");
}

double float_field(json const& obj, char const* name, std::size_t line_no) {
  auto const& v = field(obj, name, line_no);
  try {
    if (v.is_number()) {
      return v.get<double>();
    }
    if (v.is_string()) {
      return parse_double(v.get_ref<std::string const&>());
    }
  } catch (std::invalid_argument const&) {
  }
  throw record_error(line_no,
                     std::string{"field '"} + name + "' is not a number");
}

std::string text_field(json const& obj, char const* name, std::size_t line_no) {
  auto const& v = field(obj, name, line_no);
  if (v.is_string()) {
    return v.get<std::string>();
  }
  if (v.is_number_integer()) {
    return std::to_string(v.get<std::int64_t>());
  }
  throw record_error(line_no, std::string{"field '"} + name + "' is not text");
}

}  // namespace

int compare_content(vehicle_snapshot const& a, vehicle_snapshot const& b) {
  if (auto c = three_way(a.course_id, b.course_id); c != 0) return c;
  if (auto c = three_way(a.vehicle_id, b.vehicle_id); c != 0) return c;
  if (auto c = three_way(a.latitude, b.latitude); c != 0) return c;
  if (auto c = three_way(a.longitude, b.longitude); c != 0) return c;
  if (auto c = a.line_no.compare(b.line_no); c != 0) return c < 0 ? -1 : 1;
  if (auto c = three_way(a.type, b.type); c != 0) return c;
  if (auto c = a.direction.compare(b.direction); c != 0) return c < 0 ? -1 : 1;
  if (auto c = three_way(a.delay_ms, b.delay_ms); c != 0) return c;
  if (auto c = a.stop_no.compare(b.stop_no); c != 0) return c < 0 ? -1 : 1;
  return 0;
}

bool canonical_less(vehicle_snapshot const& a, vehicle_snapshot const& b) {
  if (a.course_id != b.course_id) {
    return a.course_id < b.course_id;
  }
  if (a.time != b.time) {
    return a.time < b.time;
  }
  return compare_content(a, b) < 0;
}

std::optional<vehicle_snapshot> parse_snapshot_record(std::string_view line,
                                                      std::size_t line_no) {
  if (trim(line).empty()) {
    return std::nullopt;
  }
  auto const obj = json::parse(line, nullptr, false);
  if (obj.is_discarded() || !obj.is_object()) {
    throw record_error(line_no, "not a JSON object");
  }

  vehicle_snapshot s;
  s.course_id = int_field(obj, "course_id", line_no);
  s.vehicle_id = int_field(obj, "vehicle_id", line_no);
  s.latitude = float_field(obj, "latitude", line_no);
  s.longitude = float_field(obj, "longitude", line_no);
  if (!(s.latitude >= -90.0 && s.latitude <= 90.0) ||
      !(s.longitude >= -180.0 && s.longitude <= 180.0)) {
    throw record_error(line_no, "coordinates out of range");
  }
  s.line_no = text_field(obj, "line_no", line_no);
  s.direction = text_field(obj, "direction", line_no);
  s.delay_ms = int_field(obj, "delay", line_no);
  s.stop_no = text_field(obj, "stop_no", line_no);
  try {
    s.time = civil_time::parse(text_field(obj, "time", line_no));
  } catch (std::invalid_argument const& e) {
    throw record_error(line_no, std::string{"bad time: "} + e.what());
  }
  auto const type = text_field(obj, "type", line_no);
  auto const vt = vehicle_type_from(type);
  if (!vt) {
    throw rejected_record(line_no, "unknown vehicle type '" + type + "'");
  }
  s.type = *vt;
  return s;
}

std::string serialize_snapshot(vehicle_snapshot const& s) {
  ordered_json j;
  j["course_id"] = s.course_id;
  j["vehicle_id"] = s.vehicle_id;
  j["latitude"] = s.latitude;
  j["longitude"] = s.longitude;
  j["line_no"] = s.line_no;
  j["type"] = std::string(1, to_char(s.type));
  j["direction"] = s.direction;
  j["delay"] = s.delay_ms;
  j["time"] = s.time.to_string();
  j["stop_no"] = s.stop_no;
  return j.dump();
}

std::string ingest_stats::to_json() const {
  ordered_json j;
  j["total_records"] = total_records;
  j["unique_records"] = unique_records;
  j["window_records"] = window_records;
  j["malformed_records"] = malformed_records;
  j["rejected_records"] = rejected_records;
  j["unique_fraction"] =
      total_records == 0 ? 0.0
                         : static_cast<double>(unique_records) /
                               static_cast<double>(total_records);
  return j.dump(2) + "\n";
}

dedup_result deduplicate(std::vector<vehicle_snapshot> records) {
  dedup_result r;
  r.total_records = records.size();
  std::sort(begin(records), end(records), [](auto const& a, auto const& b) {
    auto const c = compare_content(a, b);
    return c != 0 ? c < 0 : a.time < b.time;
  });
  auto const last = std::unique(
      begin(records), end(records),
      [](auto const& a, auto const& b) { return compare_content(a, b) == 0; });
  records.erase(last, end(records));
  std::sort(begin(records), end(records), canonical_less);
  r.unique_records = records.size();
  r.records = std::move(records);
  return r;
}

bool service_window::contains(civil_time const& t) const {
  if (weekdays_only && !t.is_weekday()) {
    return false;
  }
  auto const h = t.hour();
  return h >= start_hour && h <= end_hour;
}

service_window service_window::parse(std::string_view spec, bool weekdays_only) {
  auto const parts = split(spec, ':');
  if (parts.size() != 2) {
    throw std::invalid_argument("window must be START:END, got '" +
                                std::string{spec} + "'");
  }
  service_window w;
  w.start_hour = static_cast<int>(parse_int(parts[0]));
  w.end_hour = static_cast<int>(parse_int(parts[1])) - 1;
  w.weekdays_only = weekdays_only;
  if (w.start_hour < 0 || w.end_hour > 23 || w.start_hour > w.end_hour) {
    throw std::invalid_argument("window hours out of range: '" +
                                std::string{spec} + "'");
  }
  return w;
}

std::string service_window::to_string() const {
  return std::to_string(start_hour) + ":" + std::to_string(end_hour + 1);
}

std::vector<vehicle_snapshot> filter_service_window(
    std::vector<vehicle_snapshot> records, service_window const& window) {
  std::erase_if(records,
                [&](auto const& r) { return !window.contains(r.time); });
  return records;
}

ingest_result ingest_files(std::vector<fs::path> const& inputs,
                           service_window const& window) {
  std::vector<vehicle_snapshot> parsed;
  ingest_stats stats;
  std::string line;
  for (auto const& path : inputs) {
    line_reader reader{path};
    while (reader.next(line)) {
      try {
        if (auto rec = parse_snapshot_record(line, reader.line_number())) {
          parsed.push_back(std::move(*rec));
        }
      } catch (rejected_record const&) {
        ++stats.rejected_records;
      } catch (record_error const&) {
        ++stats.malformed_records;
      }
    }
  }

  auto dedup = deduplicate(std::move(parsed));
  stats.total_records = dedup.total_records;
  stats.unique_records = dedup.unique_records;

  ingest_result result;
  result.records = filter_service_window(std::move(dedup.records), window);
  stats.window_records = result.records.size();
  result.stats = stats;
  return result;
}

void write_snapshots(fs::path const& path,
                     std::vector<vehicle_snapshot> const& records) {
  std::string out;
  out.reserve(records.size() * 200);
  for (auto const& r : records) {
    out += serialize_snapshot(r);
    out.push_back('\n');
  }
  write_file(path, out);
}

std::vector<vehicle_snapshot> read_snapshots(fs::path const& path) {
  std::vector<vehicle_snapshot> out;
  line_reader reader{path};
  std::string line;
  while (reader.next(line)) {
    if (auto rec = parse_snapshot_record(line, reader.line_number())) {
      out.push_back(std::move(*rec));
    }
  }
  return out;
}

}  // namespace delayprof
