#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>

namespace delayprof {

struct gtfs_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct stop {
  std::string stop_id;
  double latitude{0.0};
  double longitude{0.0};
  std::string name;
};

using stop_map = std::map<std::string, stop>;

// Directed consecutive stop pair served by a scheduled trip.
using schedule_edge = std::pair<std::string, std::string>;

struct schedule_edge_set {
  std::set<schedule_edge> edges;
  // Pairs served by at least one trip with regular pickup and drop-off at
  // both ends. Always a subset of `edges`.
  std::set<schedule_edge> mandatory_edges;

  bool is_mandatory(std::string const& from, std::string const& to) const {
    return mandatory_edges.contains({from, to});
  }
};

// Reads a table from either a feed directory or a .zip archive.
std::string read_feed_table(std::filesystem::path const& feed,
                            std::string const& file_name);

stop_map load_stops(std::filesystem::path const& feed);
stop_map parse_stops(std::string_view stops_txt);

schedule_edge_set load_schedule_edges(std::filesystem::path const& feed);
schedule_edge_set parse_schedule_edges(std::string_view stop_times_txt);

// "stop_from,stop_to,mandatory" with a header row.
void write_edge_set(std::filesystem::path const& path,
                    schedule_edge_set const& set);
schedule_edge_set read_edge_set(std::filesystem::path const& path);

}  // namespace delayprof
