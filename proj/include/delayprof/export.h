#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "delayprof/clustering.h"
#include "delayprof/features.h"
#include "delayprof/gtfs.h"

namespace delayprof {

struct edge_assignment {
  edge_key edge;
  std::size_t cluster{0};
};

struct geojson_filter {
  std::optional<std::size_t> cluster;
  std::optional<char> mode;  // 'b', 't' or 'm'
};

struct export_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One straight LineString per edge, coordinates in [lon, lat] order, features
// sorted by edge key. Throws export_error listing every unknown stop id.
nlohmann::ordered_json export_geojson(std::span<edge_assignment const> assignments,
                                      stop_map const& stops,
                                      std::span<edge_summary const> summaries,
                                      geojson_filter const& filter = {});

// Rounded for reports: six decimals, shortest representation.
std::string format_probability(double p);

// One row per cluster: size, the three-way split, pooled split when known,
// mode counts and dominant delay bands.
std::string profile_summary_csv(std::span<cluster_profile const> profiles,
                                binning_scheme const& scheme,
                                std::span<std::string const> lineage = {});

// Dense grid of a cluster's mean matrix, one delay band per line.
std::string profile_matrix_text(cluster_profile const& profile,
                                binning_scheme const& scheme);

struct written_profiles {
  std::filesystem::path summary;
  std::vector<std::filesystem::path> matrices;
};

written_profiles export_profiles(std::span<cluster_profile const> profiles,
                                 binning_scheme const& scheme,
                                 std::filesystem::path const& dir,
                                 std::string const& stem,
                                 std::span<std::string const> lineage = {});

// "stop_from,stop_to,k<a>,k<b>,..." table.
std::string assignments_csv(std::span<edge_key const> edges,
                            std::span<std::size_t const> cuts,
                            std::span<std::vector<std::size_t> const> labels);
std::vector<edge_assignment> read_assignments(std::filesystem::path const& path,
                                              std::size_t k);

}  // namespace delayprof
