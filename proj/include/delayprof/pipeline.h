#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "delayprof/emd.h"
#include "delayprof/features.h"
#include "delayprof/ingest.h"

namespace delayprof {

struct pipeline_error : std::runtime_error {
  pipeline_error(std::string stage, std::string const& cause)
      : std::runtime_error("stage " + stage + ": " + cause),
        stage_{std::move(stage)} {}
  std::string const& stage() const { return stage_; }

private:
  std::string stage_;
};

struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Flat "key = value" settings. Lines starting with '#' are comments.
//
//   avl_input        comma-separated files or directories of JSON-lines records
//   gtfs_feed        feed directory or zip
//   window           service hours, END exclusive            (6:21)
//   weekdays_only    true | false                            (true)
//   min_support      edges need strictly more events than this (200)
//   sweep            thresholds reported for comparison      (0,20,50,100,200)
//   schedule_filter  keep only scheduled mandatory edges     (true)
//   delay_boundaries finite delay bin edges in minutes       (standard 22)
//   delay_scale      delay-axis divisor                      (4)
//   surrogate_offset minutes beyond the outer boundaries     (2.5)
//   surrogate_rule   offset | boundary                       (offset)
//   time_unit_hours  hours per time-axis unit                (1)
//   cuts             cluster counts to export                (2,3,4)
//   threads          distance workers, 0 = all cores         (0)
//   distance_format  text | binary                           (text)
struct pipeline_config {
  std::vector<std::filesystem::path> avl_input;
  std::filesystem::path gtfs_feed;
  service_window window{};
  std::size_t min_support{200};
  std::vector<std::size_t> sweep{0, 20, 50, 100, 200};
  bool schedule_filter{true};
  binning_scheme scheme{binning_scheme::standard()};
  ground_config ground{};
  std::vector<std::size_t> cuts{2, 3, 4};
  unsigned threads{0};
  bool binary_distances{false};

  // Relative paths resolve against base_dir.
  static pipeline_config parse(std::string_view text,
                               std::filesystem::path const& base_dir = {});
  static pipeline_config load(std::filesystem::path const& path);

  void validate() const;
};

struct stage_record {
  std::string name;
  bool reused{false};
};

struct pipeline_result {
  std::vector<stage_record> stages;
  std::filesystem::path manifest;
};

// Runs every stage into out_dir. A stage whose key (parameters and input
// digests) and outputs match the existing manifest is not recomputed.
pipeline_result run_pipeline(pipeline_config const& config,
                             std::filesystem::path const& out_dir);

}  // namespace delayprof
