#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "delayprof/civil_time.h"
#include "delayprof/edges.h"
#include "delayprof/features.h"
#include "delayprof/gtfs.h"
#include "delayprof/ingest.h"

namespace delayprof {

struct synth_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A planted delay-change distribution. `weights` has one entry per delay bin;
// `hourly` replaces it for the listed hours of day.
struct planted_profile {
  std::string id;
  std::vector<double> weights;
  std::map<int, std::vector<double>> hourly;
  double headway_minutes{30.0};
  double duplicate_rate{0.0};
  double dropout_rate{0.0};

  std::vector<double> const& weights_at(int hour) const;
  void validate(binning_scheme const& scheme) const;
};

// The four behaviours the generator plants by default: on time, delay
// increase, strong decrease, small decrease.
std::vector<planted_profile> archetype_profiles(binning_scheme const& scheme);
planted_profile archetype(std::string_view name, binning_scheme const& scheme);

struct synth_line {
  std::string line_no;
  vehicle_type type{vehicle_type::bus};
  std::vector<std::string> stops;  // in travel order
};

struct synth_network {
  std::vector<stop> stops;
  std::vector<synth_line> lines;
  std::vector<edge_key> edges;  // line by line, in travel order

  std::size_t edge_index(edge_key const& e) const;
};

// `edge_count` edges split over straight lines of `edges_per_line` edges,
// trams and buses alternating. Stops are never shared between lines.
synth_network build_network(std::size_t edge_count,
                            std::size_t edges_per_line = 5);

struct synth_options {
  std::size_t days{20};
  std::uint64_t seed{1};
  civil_time start{civil_time::from_fields(2017, 2, 1, 0, 0, 0)};
  bool weekends{false};         // count and emit Saturdays and Sundays too
  int first_departure_hour{5};
  int last_departure_hour{21};  // exclusive
  int travel_minutes{2};        // between consecutive stops
};

struct synth_corpus {
  std::vector<vehicle_snapshot> records;  // noise included, time ordered
  std::vector<std::size_t> edge_profile;  // per network edge
};

// Each course reports on arrival at a stop and once mid-way to the next one.
// The delay reported at stop k+1 is the delay at stop k plus a change drawn
// from the profile of edge (k, k+1) for the hour of arrival. Noise is drawn
// from its own random stream, so it never changes the sampled delays.
synth_corpus generate_corpus(synth_network const& network,
                             std::span<std::size_t const> edge_profile,
                             std::span<planted_profile const> profiles,
                             binning_scheme const& scheme,
                             synth_options const& options);

// Edge i gets profile i mod profile count.
std::vector<std::size_t> interleaved_assignment(std::size_t edges,
                                                std::size_t profiles);

// Profiles file: {"profiles": [...]} where each entry is either
// {"id": ..., "archetype": "on_time"} or {"id": ..., "bands": {"(lo,hi]": w}}
// plus optional "hourly", "headway_minutes", "duplicate_rate" and
// "dropout_rate". Top-level "edges_per_line", "start_date", "weekends" and
// "travel_minutes" are optional.
struct synth_spec {
  std::vector<planted_profile> profiles;
  std::size_t edges_per_line{5};
  synth_options options;
};

synth_spec parse_synth_spec(std::string_view json_text,
                            binning_scheme const& scheme);

// Minimal GTFS feed: stops.txt, routes.txt, trips.txt, stop_times.txt.
void write_gtfs_feed(std::filesystem::path const& dir,
                     synth_network const& network, synth_options const& options,
                     std::span<planted_profile const> profiles,
                     std::span<std::size_t const> edge_profile);

// Writes avl/<date>.jsonl per day, gtfs/, labels.csv and pipeline.cfg.
void write_synth_output(std::filesystem::path const& dir,
                        synth_network const& network, synth_corpus const& corpus,
                        std::span<planted_profile const> profiles,
                        synth_options const& options);

}  // namespace delayprof
