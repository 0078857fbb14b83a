#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "delayprof/edges.h"
#include "delayprof/emd.h"
#include "delayprof/features.h"

namespace delayprof {

struct clustering_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Leaves carry ids 0..n-1; the cluster created by merge s has id n+s.
// left < right always.
struct merge {
  std::size_t left{0};
  std::size_t right{0};
  double height{0.0};
  std::size_t new_size{0};

  friend bool operator==(merge const&, merge const&) = default;
};

struct dendrogram {
  std::size_t n_leaves{0};
  std::vector<merge> merges;
  std::vector<edge_key> labels;        // leaf id -> edge
  std::vector<std::size_t> leaf_order;  // left-to-right leaf sequence
  std::vector<std::size_t> inversions;  // merges lower than their predecessor
};

// Squared-distance Lance-Williams update for Ward linkage after s and t
// merge, giving the distance from the merged cluster to v.
double ward_update(double d_vs, double d_vt, double d_st, double n_v,
                   double n_s, double n_t);

// Agglomerates until one cluster remains, always merging the closest pair.
// Equal distances are resolved in favor of the lowest (left, right) id pair.
dendrogram ward_linkage(condensed_distance_matrix const& dist);

// Left-to-right leaf order of a merge list.
std::vector<std::size_t> leaf_order(std::size_t n_leaves,
                                    std::span<merge const> merges);

// Cluster label (1..k) for each leaf, after undoing the last k-1 merges.
// Labels follow the order in which clusters first appear in leaf_order.
std::vector<std::size_t> cut(dendrogram const& d, std::size_t k);

double adjusted_rand_index(std::span<std::size_t const> a,
                           std::span<std::size_t const> b);

// Per-edge facts that only the raw events know.
struct edge_summary {
  edge_key edge;
  std::size_t bus_events{0};
  std::size_t tram_events{0};
  std::vector<std::uint64_t> delay_bin_counts;  // pooled over hours

  char mode() const;  // 'b', 't' or 'm' (mixed)
};

std::vector<edge_summary> summarize_edges(
    std::span<edge_observations const> groups, binning_scheme const& scheme);

struct mode_breakdown {
  std::size_t bus_edges{0};
  std::size_t tram_edges{0};
  std::size_t mixed_edges{0};
  std::size_t bus_events{0};
  std::size_t tram_events{0};
};

struct cluster_profile {
  std::size_t label{0};
  std::vector<edge_key> members;
  std::size_t rows{0};
  std::size_t cols{0};
  std::vector<double> mean_matrix;
  double p_no_change{0.0};
  double p_increase{0.0};
  double p_decrease{0.0};
  std::vector<double> band_likelihood;  // row mass per delay bin
  std::optional<mode_breakdown> modes;
  // event-pooled alternative to the edge-mean split above
  std::optional<double> pooled_no_change;
  std::optional<double> pooled_increase;
  std::optional<double> pooled_decrease;

  // Indices of the delay bins with the most mass, largest first.
  std::vector<std::size_t> dominant_bands(std::size_t count) const;
};

// `assignment[i]` is the label of features[i]. `summaries` may be empty;
// otherwise it is matched to features by edge key.
std::vector<cluster_profile> cluster_profiles(
    std::span<std::size_t const> assignment,
    std::span<feature_matrix const> features,
    std::span<edge_summary const> summaries, binning_scheme const& scheme);

void write_dendrogram(std::filesystem::path const& path, dendrogram const& d);
dendrogram read_dendrogram(std::filesystem::path const& path);

}  // namespace delayprof
