#include "delayprof/gtfs.h"

#include <unordered_map>
#include <vector>

#include "delayprof/io.h"

namespace fs = std::filesystem;

namespace delayprof {

std::string read_feed_table(fs::path const& feed, std::string const& file_name) {
  if (fs::is_directory(feed)) {
    auto const p = feed / file_name;
    if (!fs::exists(p)) {
      throw gtfs_error("feed " + feed.string() + " has no " + file_name);
    }
    return read_file(p);
  }
  if (!fs::exists(feed)) {
    throw gtfs_error("feed " + feed.string() + " does not exist");
  }
  zip_archive const zip{feed};
  if (!zip.contains(file_name)) {
    throw gtfs_error("feed " + feed.string() + " has no " + file_name);
  }
  return zip.read(file_name);
}

stop_map parse_stops(std::string_view stops_txt) {
  auto const t = csv_table::parse(stops_txt, "stops.txt");
  auto const id_col = t.require_column("stop_id");
  auto const lat_col = t.require_column("stop_lat");
  auto const lon_col = t.require_column("stop_lon");
  auto const name_col = t.column("stop_name");

  stop_map stops;
  for (std::size_t r = 0; r < t.rows().size(); ++r) {
    auto const& row = t.rows()[r];
    stop s;
    s.stop_id = row[id_col];
    try {
      s.latitude = parse_double(row[lat_col]);
      s.longitude = parse_double(row[lon_col]);
    } catch (std::invalid_argument const& e) {
      throw gtfs_error("stops.txt line " + std::to_string(t.line_of(r)) +
                       ": " + e.what());
    }
    if (s.latitude < -90.0 || s.latitude > 90.0 || s.longitude < -180.0 ||
        s.longitude > 180.0) {
      throw gtfs_error("stops.txt: coordinates out of range for stop " +
                       s.stop_id);
    }
    if (name_col) {
      s.name = row[*name_col];
    }
    auto id = s.stop_id;
    if (!stops.emplace(id, std::move(s)).second) {
      throw gtfs_error("stops.txt: duplicate stop_id " + id);
    }
  }
  return stops;
}

stop_map load_stops(fs::path const& feed) {
  return parse_stops(read_feed_table(feed, "stops.txt"));
}

schedule_edge_set parse_schedule_edges(std::string_view stop_times_txt) {
  auto const t = csv_table::parse(stop_times_txt, "stop_times.txt");
  auto const trip_col = t.require_column("trip_id");
  auto const seq_col = t.require_column("stop_sequence");
  auto const stop_col = t.require_column("stop_id");
  auto const pickup_col = t.column("pickup_type");
  auto const dropoff_col = t.column("drop_off_type");

  struct visit {
    std::int64_t seq;
    std::string const* stop_id;
    bool regular;
  };
  auto const flag = [&](auto const& row, auto const& col) -> std::int64_t {
    if (!col || row[*col].empty()) {
      return 0;
    }
    return parse_int(row[*col]);
  };

  std::unordered_map<std::string, std::vector<visit>> trips;
  for (std::size_t r = 0; r < t.rows().size(); ++r) {
    auto const& row = t.rows()[r];
    visit v{};
    try {
      v.seq = parse_int(row[seq_col]);
      v.regular = flag(row, pickup_col) == 0 && flag(row, dropoff_col) == 0;
    } catch (std::invalid_argument const& e) {
      throw gtfs_error("stop_times.txt line " + std::to_string(t.line_of(r)) +
                       ": " + e.what());
    }
    v.stop_id = &row[stop_col];
    auto& seq = trips[row[trip_col]];
    if (!seq.empty() && seq.back().seq >= v.seq) {
      throw gtfs_error("stop_times.txt: trip " + row[trip_col] +
                       " has unsorted or duplicated stop_sequence at line " +
                       std::to_string(t.line_of(r)));
    }
    seq.push_back(v);
  }

  schedule_edge_set result;
  for (auto const& [trip, seq] : trips) {
    for (std::size_t i = 0; i + 1 < seq.size(); ++i) {
      auto const& a = seq[i];
      auto const& b = seq[i + 1];
      if (*a.stop_id == *b.stop_id) {
        continue;
      }
      schedule_edge e{*a.stop_id, *b.stop_id};
      if (a.regular && b.regular) {
        result.mandatory_edges.insert(e);
      }
      result.edges.insert(std::move(e));
    }
  }
  return result;
}

schedule_edge_set load_schedule_edges(fs::path const& feed) {
  return parse_schedule_edges(read_feed_table(feed, "stop_times.txt"));
}

void write_edge_set(fs::path const& path, schedule_edge_set const& set) {
  std::string out = "stop_from,stop_to,mandatory\n";
  for (auto const& e : set.edges) {
    out += csv_escape(e.first);
    out += ',';
    out += csv_escape(e.second);
    out += set.mandatory_edges.contains(e) ? ",1\n" : ",0\n";
  }
  write_file(path, out);
}

schedule_edge_set read_edge_set(fs::path const& path) {
  auto const t = csv_table::parse(read_file(path), path.string());
  auto const from_col = t.require_column("stop_from");
  auto const to_col = t.require_column("stop_to");
  auto const mand_col = t.require_column("mandatory");
  schedule_edge_set set;
  for (auto const& row : t.rows()) {
    schedule_edge e{row[from_col], row[to_col]};
    if (row[mand_col] == "1") {
      set.mandatory_edges.insert(e);
    }
    set.edges.insert(std::move(e));
  }
  return set;
}

}  // namespace delayprof
