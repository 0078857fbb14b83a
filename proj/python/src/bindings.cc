#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "delayprof/clustering.h"
#include "delayprof/emd.h"
#include "delayprof/features.h"
#include "delayprof/ingest.h"
#include "delayprof/io.h"
#include "delayprof/pipeline.h"
#include "delayprof/synth.h"

namespace py = pybind11;
namespace dp = delayprof;

namespace {

dp::ground_distance_matrix ground(double delay_scale, double surrogate_offset,
                                  std::string const& rule) {
  dp::ground_config g;
  g.delay_scale = delay_scale;
  g.surrogate_offset = surrogate_offset;
  if (rule == "offset") {
    g.rule = dp::surrogate_rule::offset;
  } else if (rule == "boundary") {
    g.rule = dp::surrogate_rule::boundary;
  } else {
    throw std::invalid_argument("surrogate rule is 'offset' or 'boundary'");
  }
  g.validate();
  return dp::ground_distances(dp::bin_coordinates(dp::binning_scheme::standard(), g));
}

py::dict stats_dict(dp::ingest_stats const& s) {
  py::dict d;
  d["total_records"] = s.total_records;
  d["unique_records"] = s.unique_records;
  d["window_records"] = s.window_records;
  d["malformed_records"] = s.malformed_records;
  d["rejected_records"] = s.rejected_records;
  return d;
}

std::vector<dp::feature_matrix> as_features(std::vector<std::vector<double>> const& rows) {
  auto const s = dp::binning_scheme::standard();
  std::vector<dp::feature_matrix> fs;
  fs.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != s.cells()) {
      throw std::invalid_argument("feature " + std::to_string(i) + " has " +
                                  std::to_string(rows[i].size()) + " values, expected " +
                                  std::to_string(s.cells()));
    }
    fs.push_back({.edge = {std::to_string(i), std::to_string(i)},
                  .support = 0,
                  .rows = s.delay_bins(),
                  .cols = s.time_bins(),
                  .values = rows[i]});
  }
  return fs;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Transit delay-change profiles: histograms, EMD distances, Ward clustering";

  py::register_exception<dp::pipeline_error>(m, "PipelineError", PyExc_RuntimeError);
  py::register_exception<dp::config_error>(m, "ConfigError", PyExc_ValueError);

  m.def("delay_boundaries", [] { return dp::binning_scheme::standard().delay_boundaries; },
        "Finite delay bin edges in minutes.");
  m.def("delay_labels", [] {
    auto const s = dp::binning_scheme::standard();
    std::vector<std::string> out;
    for (std::size_t i = 0; i < s.delay_bins(); ++i) {
      out.push_back(s.delay_label(i));
    }
    return out;
  });
  m.def("delay_bin_index",
        [](double minutes) { return dp::delay_bin_index(minutes, dp::binning_scheme::standard()); },
        py::arg("minutes"));

  m.def(
      "normalize",
      [](std::vector<std::vector<std::uint64_t>> const& counts) {
        if (counts.empty()) {
          throw std::invalid_argument("empty grid");
        }
        dp::count_grid g{counts.size(), counts.front().size()};
        for (std::size_t r = 0; r < counts.size(); ++r) {
          if (counts[r].size() != g.cols) {
            throw std::invalid_argument("ragged grid");
          }
          for (std::size_t c = 0; c < g.cols; ++c) {
            g.at(r, c) = counts[r][c];
          }
        }
        auto n = dp::normalize(g);
        if (!n.accepted()) {
          throw std::invalid_argument(n.reject_reason);
        }
        return n.values;
      },
      py::arg("counts"), "Row-major delay x hour counts to a flat feature.");

  m.def(
      "ingest",
      [](std::vector<std::filesystem::path> const& inputs, std::string const& window,
         bool weekdays_only, std::optional<std::filesystem::path> const& output) {
        auto r = dp::ingest_files(inputs, dp::service_window::parse(window, weekdays_only));
        if (output) {
          dp::write_snapshots(*output, r.records);
        }
        return stats_dict(r.stats);
      },
      py::arg("inputs"), py::arg("window") = "6:21", py::arg("weekdays_only") = true,
      py::arg("output") = py::none());

  m.def(
      "emd",
      [](std::vector<double> const& a, std::vector<double> const& b, double delay_scale,
         double surrogate_offset, std::string const& rule) {
        return dp::emd(a, b, ground(delay_scale, surrogate_offset, rule));
      },
      py::arg("a"), py::arg("b"), py::arg("delay_scale") = 4.0,
      py::arg("surrogate_offset") = 2.5, py::arg("surrogate_rule") = "offset");

  m.def(
      "emd_dense",
      [](std::vector<double> const& a, std::vector<double> const& b,
         std::vector<std::vector<double>> const& cost) {
        std::vector<double> flat;
        for (auto const& row : cost) {
          if (row.size() != b.size()) {
            throw std::invalid_argument("cost rows must match len(b)");
          }
          flat.insert(end(flat), begin(row), end(row));
        }
        if (cost.size() != a.size()) {
          throw std::invalid_argument("cost must have len(a) rows");
        }
        dp::emd_solver s;
        return s.solve_dense(a, b, flat);
      },
      py::arg("a"), py::arg("b"), py::arg("cost"));

  m.def(
      "pairwise_distances",
      [](std::vector<std::vector<double>> const& features, unsigned threads,
         double delay_scale, double surrogate_offset) {
        auto const fs = as_features(features);
        auto const g = ground(delay_scale, surrogate_offset, "offset");
        py::gil_scoped_release release;
        return dp::pairwise_distances(fs, g, threads).values;
      },
      py::arg("features"), py::arg("threads") = 1, py::arg("delay_scale") = 4.0,
      py::arg("surrogate_offset") = 2.5, "Condensed upper triangle, row by row.");

  m.def(
      "ward_linkage",
      [](std::vector<double> const& condensed, std::size_t n) {
        dp::condensed_distance_matrix d;
        d.n = n;
        d.values = condensed;
        for (std::size_t i = 0; i < n; ++i) {
          d.labels.push_back({std::to_string(i), std::to_string(i)});
        }
        std::vector<std::tuple<std::size_t, std::size_t, double, std::size_t>> out;
        for (auto const& mg : dp::ward_linkage(d).merges) {
          out.emplace_back(mg.left, mg.right, mg.height, mg.new_size);
        }
        return out;
      },
      py::arg("condensed"), py::arg("n"),
      "Merges as (left, right, height, size); merge s creates cluster n + s.");

  m.def(
      "cut",
      [](std::vector<std::tuple<std::size_t, std::size_t, double, std::size_t>> const& merges,
         std::size_t k) {
        dp::dendrogram d;
        d.n_leaves = merges.size() + 1;
        for (auto const& [l, r, h, s] : merges) {
          d.merges.push_back({l, r, h, s});
        }
        d.leaf_order = dp::leaf_order(d.n_leaves, d.merges);
        return dp::cut(d, k);
      },
      py::arg("merges"), py::arg("k"));

  m.def(
      "adjusted_rand_index",
      [](std::vector<std::size_t> const& a, std::vector<std::size_t> const& b) {
        return dp::adjusted_rand_index(a, b);
      },
      py::arg("a"), py::arg("b"));

  m.def(
      "synth",
      [](std::filesystem::path const& out, std::size_t edges, std::size_t days,
         std::uint64_t seed, std::optional<std::string> const& profiles_json) {
        auto const s = dp::binning_scheme::standard();
        dp::synth_spec spec;
        if (profiles_json) {
          spec = dp::parse_synth_spec(*profiles_json, s);
        } else {
          spec.profiles = dp::archetype_profiles(s);
        }
        spec.options.days = days;
        spec.options.seed = seed;
        auto const net = dp::build_network(edges, spec.edges_per_line);
        auto const assign = dp::interleaved_assignment(edges, spec.profiles.size());
        auto const corpus = dp::generate_corpus(net, assign, spec.profiles, s, spec.options);
        dp::write_synth_output(out, net, corpus, spec.profiles, spec.options);
        return corpus.records.size();
      },
      py::arg("out"), py::arg("edges") = 200, py::arg("days") = 20, py::arg("seed") = 1,
      py::arg("profiles_json") = py::none(),
      "Writes a planted corpus, GTFS feed, labels.csv and pipeline.cfg.");

  m.def(
      "run_pipeline",
      [](std::filesystem::path const& config, std::filesystem::path const& out) {
        auto const c = dp::pipeline_config::load(config);
        dp::pipeline_result r;
        {
          py::gil_scoped_release release;
          r = dp::run_pipeline(c, out);
        }
        std::vector<std::pair<std::string, bool>> stages;
        for (auto const& st : r.stages) {
          stages.emplace_back(st.name, st.reused);
        }
        return stages;
      },
      py::arg("config"), py::arg("out"), "Returns (stage, reused) pairs in run order.");
}
