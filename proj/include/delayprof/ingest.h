#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "delayprof/civil_time.h"

namespace delayprof {

enum class vehicle_type : char { bus = 'b', tram = 't' };

char to_char(vehicle_type t);
std::optional<vehicle_type> vehicle_type_from(std::string_view s);

// One AVL report.
struct vehicle_snapshot {
  std::int64_t course_id{0};
  std::int64_t vehicle_id{0};
  double latitude{0.0};
  double longitude{0.0};
  std::string line_no;
  vehicle_type type{vehicle_type::bus};
  std::string direction;
  std::int64_t delay_ms{0};
  civil_time time;
  std::string stop_no;

  friend bool operator==(vehicle_snapshot const&,
                         vehicle_snapshot const&) = default;
};

// Ordering on every field except time. Two reports equal under this ordering
// are the same report delivered more than once.
int compare_content(vehicle_snapshot const& a, vehicle_snapshot const& b);

// Canonical output order: course, time, then content.
bool canonical_less(vehicle_snapshot const& a, vehicle_snapshot const& b);

struct record_error : std::runtime_error {
  record_error(std::size_t line, std::string const& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what),
        line_{line} {}
  std::size_t line() const { return line_; }

private:
  std::size_t line_;
};

// Structurally fine record whose vehicle type is neither bus nor tram.
struct rejected_record : record_error {
  using record_error::record_error;
};

// Parses one JSON record. Blank lines yield nullopt. Throws record_error for
// malformed input and rejected_record for an unknown vehicle type.
std::optional<vehicle_snapshot> parse_snapshot_record(std::string_view line,
                                                      std::size_t line_no = 0);

// Canonical single-line JSON, fields in the feed's column order.
std::string serialize_snapshot(vehicle_snapshot const& s);

struct ingest_stats {
  std::size_t total_records{0};
  std::size_t unique_records{0};
  std::size_t window_records{0};
  std::size_t malformed_records{0};
  std::size_t rejected_records{0};

  std::string to_json() const;
};

struct dedup_result {
  std::vector<vehicle_snapshot> records;
  std::size_t total_records{0};
  std::size_t unique_records{0};
};

// Keeps the earliest report of each content group. Output is canonically
// ordered, so the result does not depend on input order.
dedup_result deduplicate(std::vector<vehicle_snapshot> records);

// Hour bounds are inclusive: start 6 and end 20 admit 06:00:00-20:59:59.
struct service_window {
  int start_hour{6};
  int end_hour{20};
  bool weekdays_only{true};

  bool contains(civil_time const& t) const;
  int hour_count() const { return end_hour - start_hour + 1; }

  // "START:END" with END exclusive, e.g. "6:21".
  static service_window parse(std::string_view spec, bool weekdays_only);
  std::string to_string() const;
};

std::vector<vehicle_snapshot> filter_service_window(
    std::vector<vehicle_snapshot> records, service_window const& window);

struct ingest_result {
  std::vector<vehicle_snapshot> records;
  ingest_stats stats;
};

// Parse, deduplicate, and window-filter the given files. Malformed and
// rejected records are counted and skipped.
ingest_result ingest_files(std::vector<std::filesystem::path> const& inputs,
                           service_window const& window);

void write_snapshots(std::filesystem::path const& path,
                     std::vector<vehicle_snapshot> const& records);
std::vector<vehicle_snapshot> read_snapshots(std::filesystem::path const& path);

}  // namespace delayprof
