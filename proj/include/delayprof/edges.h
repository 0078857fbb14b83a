#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "delayprof/civil_time.h"
#include "delayprof/gtfs.h"
#include "delayprof/ingest.h"

namespace delayprof {

struct edge_key {
  std::string stop_from;
  std::string stop_to;

  std::string to_string() const { return stop_from + "->" + stop_to; }

  friend auto operator<=>(edge_key const&, edge_key const&) = default;
  friend bool operator==(edge_key const&, edge_key const&) = default;
};

struct delay_change_event {
  edge_key edge;
  std::int64_t delay_delta_ms{0};  // positive: delay grew on the edge
  civil_time observed_at;          // arrival detected at stop_to
  std::int64_t course_id{0};
  vehicle_type type{vehicle_type::bus};
  std::string line_no;

  double delay_delta_minutes() const {
    return static_cast<double>(delay_delta_ms) / 60000.0;
  }

  friend bool operator==(delay_change_event const&,
                         delay_change_event const&) = default;
};

struct edge_observations {
  edge_key edge;
  std::vector<delay_change_event> events;

  std::size_t support() const { return events.size(); }
};

// One event per adjacent pair of snapshots whose stop_no differs. The course
// must be time-ordered and belong to a single course_id.
std::vector<delay_change_event> extract_delay_changes(
    std::span<vehicle_snapshot const> course);

// Splits canonically ordered records into courses and extracts each.
std::vector<delay_change_event> extract_all_delay_changes(
    std::span<vehicle_snapshot const> records);

// Groups by edge, edges in lexicographic order. Events within a group keep a
// canonical order (time, course, delta) so the result is input-order free.
std::vector<edge_observations> group_by_edge(
    std::vector<delay_change_event> events);

std::vector<edge_observations> filter_by_schedule(
    std::vector<edge_observations> groups, schedule_edge_set const& schedule);

// Keeps groups with support strictly greater than min_support.
std::vector<edge_observations> filter_by_support(
    std::vector<edge_observations> groups, std::size_t min_support);

struct sweep_row {
  std::size_t threshold;
  std::size_t surviving_edges;
};

std::vector<sweep_row> support_sweep(std::span<edge_observations const> groups,
                                     std::span<std::size_t const> thresholds);

std::vector<delay_change_event> flatten(
    std::span<edge_observations const> groups);

void write_events(std::filesystem::path const& path,
                  std::span<delay_change_event const> events);
std::vector<delay_change_event> read_events(std::filesystem::path const& path);

}  // namespace delayprof
