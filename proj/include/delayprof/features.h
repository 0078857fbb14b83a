#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "delayprof/civil_time.h"
#include "delayprof/edges.h"

namespace delayprof {

// Delay-change bins are half-open (lo, hi] intervals in minutes; the first and
// last are unbounded. Time bins are whole local hours starting at
// first_hour.
struct binning_scheme {
  std::vector<double> delay_boundaries;  // finite, strictly increasing
  int first_hour{6};
  int hour_bins{15};

  // 23 delay bins x 15 hourly bins (06-21).
  static binning_scheme standard();

  std::size_t delay_bins() const { return delay_boundaries.size() + 1; }
  std::size_t time_bins() const { return static_cast<std::size_t>(hour_bins); }
  std::size_t cells() const { return delay_bins() * time_bins(); }

  // Index of the (-0.5, 0.5] bin, i.e. the one containing 0.
  std::size_t no_change_bin() const;

  // Lower/upper bound of delay bin i; infinite at the ends.
  double lower(std::size_t i) const;
  double upper(std::size_t i) const;
  std::string delay_label(std::size_t i) const;

  void validate() const;
};

std::size_t delay_bin_index(double delta_minutes, binning_scheme const& scheme);
std::size_t delay_bin_index_ms(std::int64_t delta_ms,
                               binning_scheme const& scheme);

// Throws std::out_of_range when t falls outside the scheme's hours.
std::size_t time_bin_index(civil_time const& t, binning_scheme const& scheme);

// Row-major (delay bin major) grid of event counts.
struct count_grid {
  std::size_t rows{0};
  std::size_t cols{0};
  std::vector<std::uint64_t> counts;

  count_grid() = default;
  count_grid(std::size_t r, std::size_t c) : rows{r}, cols{c}, counts(r * c) {}

  std::uint64_t& at(std::size_t r, std::size_t c) { return counts[r * cols + c]; }
  std::uint64_t at(std::size_t r, std::size_t c) const {
    return counts[r * cols + c];
  }
  std::uint64_t total() const;
  std::uint64_t column_total(std::size_t c) const;
};

count_grid build_histogram(edge_observations const& obs,
                           binning_scheme const& scheme);

struct normalized {
  std::vector<double> values;  // empty when rejected
  std::string reject_reason;

  bool accepted() const { return reject_reason.empty(); }
};

// Column-wise normalization followed by division by the grand total. A grid
// with any empty hourly column is rejected.
normalized normalize(count_grid const& counts);

struct feature_matrix {
  edge_key edge;
  std::size_t support{0};
  std::size_t rows{0};
  std::size_t cols{0};
  std::vector<double> values;

  double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
  double row_mass(std::size_t r) const;
};

struct rejected_edge {
  edge_key edge;
  std::size_t support{0};
  std::string reason;
};

struct featurize_result {
  std::vector<feature_matrix> accepted;
  std::vector<rejected_edge> rejected;
};

featurize_result featurize(std::span<edge_observations const> groups,
                           binning_scheme const& scheme);

void write_features(std::filesystem::path const& path,
                    std::span<feature_matrix const> features);
std::vector<feature_matrix> read_features(std::filesystem::path const& path);

void write_rejects(std::filesystem::path const& path,
                   std::span<rejected_edge const> rejects);

}  // namespace delayprof
