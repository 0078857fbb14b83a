#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "delayprof/edges.h"
#include "delayprof/features.h"

namespace delayprof {

struct emd_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// How the unbounded outer delay bins get a finite midpoint.
enum class surrogate_rule {
  offset,    // outermost finite boundary pushed out by surrogate_offset
  boundary,  // the outermost finite boundary itself
};

struct ground_config {
  double delay_scale{4.0};       // delay minutes are divided by this
  double surrogate_offset{2.5};  // minutes beyond +-30.5 for the open bins
  surrogate_rule rule{surrogate_rule::offset};
  double time_unit_hours{1.0};   // one time-axis unit, in hours

  void validate() const;
};

struct bin_coordinate {
  double time_mid{0.0};
  double delay_mid_scaled{0.0};
};

// One coordinate per flattened bin (delay bin major).
std::vector<bin_coordinate> bin_coordinates(binning_scheme const& scheme,
                                            ground_config const& config);

// Dense symmetric matrix of bin-to-bin costs.
class ground_distance_matrix {
public:
  ground_distance_matrix() = default;
  ground_distance_matrix(std::size_t n, std::vector<double> entries);

  std::size_t size() const { return n_; }
  double operator()(std::size_t i, std::size_t j) const {
    return d_[i * n_ + j];
  }
  std::span<double const> row(std::size_t i) const {
    return {d_.data() + i * n_, n_};
  }

private:
  std::size_t n_{0};
  std::vector<double> d_;
};

ground_distance_matrix ground_distances(
    std::span<bin_coordinate const> coords);

// Exact balanced transportation problem solver. Keeps its scratch buffers
// between calls; one instance per thread.
class emd_solver {
public:
  // Masses must be non-negative and each sum to 1 within mass_tolerance.
  double solve(std::span<double const> a, std::span<double const> b,
               ground_distance_matrix const& ground);

  // Same, with an explicit m x n cost matrix (row-major) between the entries
  // of a and b. Masses must balance within mass_tolerance.
  double solve_dense(std::span<double const> a, std::span<double const> b,
                     std::span<double const> cost);

  std::size_t last_pivots() const { return pivots_; }

  static constexpr double mass_tolerance = 1e-9;

private:
  double run(std::size_t m, std::size_t n);

  std::vector<double> supply_;
  std::vector<double> cost_;
  std::vector<std::uint32_t> rows_;
  std::vector<std::uint32_t> cols_;

  // network simplex state
  std::vector<double> flow_;
  std::vector<std::uint8_t> in_tree_;
  std::vector<std::uint32_t> tree_arcs_;
  std::vector<double> pi_;
  std::vector<std::int32_t> parent_;
  std::vector<std::int32_t> pred_;
  std::vector<std::uint8_t> pred_up_;
  std::vector<std::int32_t> depth_;
  std::vector<std::vector<std::uint32_t>> tree_adj_;
  std::vector<std::int32_t> stack_;
  std::size_t pivots_{0};
};

double emd(std::span<double const> a, std::span<double const> b,
           ground_distance_matrix const& ground);

// n(n-1)/2 pairwise distances, entry (i<j) stored at
// n*i - i*(i+1)/2 + (j-i-1).
struct condensed_distance_matrix {
  std::size_t n{0};
  std::vector<edge_key> labels;
  std::vector<double> values;
  std::map<std::string, std::string> metadata;

  static std::size_t index(std::size_t n, std::size_t i, std::size_t j);
  double at(std::size_t i, std::size_t j) const;
};

// Computes every pair with `threads` workers; the values do not depend on the
// thread count. threads == 0 means hardware concurrency.
condensed_distance_matrix pairwise_distances(
    std::span<feature_matrix const> features,
    ground_distance_matrix const& ground, unsigned threads = 1);

// Text layout unless the path ends in ".bin".
void write_distance_matrix(std::filesystem::path const& path,
                           condensed_distance_matrix const& m);
condensed_distance_matrix read_distance_matrix(
    std::filesystem::path const& path);

}  // namespace delayprof
