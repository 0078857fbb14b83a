#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "delayprof/clustering.h"
#include "delayprof/edges.h"
#include "delayprof/emd.h"
#include "delayprof/export.h"
#include "delayprof/features.h"
#include "delayprof/gtfs.h"
#include "delayprof/ingest.h"
#include "delayprof/io.h"
#include "delayprof/pipeline.h"
#include "delayprof/synth.h"

namespace fs = std::filesystem;
using namespace delayprof;

namespace {

std::vector<std::size_t> parse_list(std::string const& s) {
  std::vector<std::size_t> out;
  for (auto const& part : split(s, ',')) {
    if (!trim(part).empty()) {
      out.push_back(static_cast<std::size_t>(parse_int(trim(part))));
    }
  }
  return out;
}

std::vector<edge_summary> summaries_from(fs::path const& events,
                                         binning_scheme const& scheme) {
  if (events.empty()) {
    return {};
  }
  return summarize_edges(group_by_edge(read_events(events)), scheme);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Per-edge delay profiles from AVL snapshots"};
  app.require_subcommand(1);

  // ingest
  std::vector<std::string> ingest_inputs;
  std::string ingest_output;
  std::string window_spec = "6:21";
  bool weekdays_only = false;
  auto* ingest = app.add_subcommand("ingest", "Deduplicate and window-filter AVL records");
  ingest->add_option("--input", ingest_inputs, "JSON-lines files (.gz accepted)")
      ->required()
      ->check(CLI::ExistingFile);
  ingest->add_option("--output", ingest_output, "Output JSON-lines file")->required();
  ingest->add_option("--window", window_spec, "Service hours START:END, END exclusive");
  ingest->add_flag("--weekdays-only", weekdays_only, "Drop Saturday and Sunday");

  // gtfs-edges
  std::string feed;
  std::string gtfs_output;
  auto* gtfs = app.add_subcommand("gtfs-edges", "Scheduled stop edges from a GTFS feed");
  gtfs->add_option("--feed", feed, "Feed directory or zip")->required()->check(CLI::ExistingPath);
  gtfs->add_option("--output", gtfs_output, "Edge CSV")->required();

  // extract-edges
  std::string snapshots;
  std::string schedule;
  std::size_t min_support = 200;
  std::string events_output;
  std::string sweep;
  auto* extract = app.add_subcommand("extract-edges", "Delay-change events grouped by stop edge");
  extract->add_option("--input", snapshots, "Ingested JSON-lines file")->required()->check(CLI::ExistingFile);
  extract->add_option("--schedule", schedule, "Edge CSV from gtfs-edges")->check(CLI::ExistingFile);
  extract->add_option("--min-support", min_support, "Keep edges with more events than this");
  extract->add_option("--output", events_output, "Event CSV")->required();
  extract->add_option("--sweep", sweep, "Thresholds to report, e.g. 0,20,50,100,200");

  // featurize
  std::string events_input;
  std::string features_output;
  std::string rejects_output;
  auto* featurize_cmd = app.add_subcommand("featurize", "Normalized delay-by-hour matrices per edge");
  featurize_cmd->add_option("--events", events_input, "Event CSV")->required()->check(CLI::ExistingFile);
  featurize_cmd->add_option("--output", features_output, "Feature CSV")->required();
  featurize_cmd->add_option("--rejects", rejects_output, "Rejected edges CSV");

  // distances
  std::string features_input;
  ground_config ground;
  std::string rule_name = "offset";
  std::string distances_output;
  unsigned threads = 0;
  auto* distances = app.add_subcommand("distances", "Pairwise earth mover's distances");
  distances->add_option("--features", features_input, "Feature CSV")->required()->check(CLI::ExistingFile);
  distances->add_option("--delay-scale", ground.delay_scale, "Delay-axis divisor");
  distances->add_option("--surrogate-offset", ground.surrogate_offset,
                        "Minutes beyond the outer boundaries for the open bins");
  distances->add_option("--surrogate-rule", rule_name, "offset or boundary")
      ->check(CLI::IsMember({"offset", "boundary"}));
  distances->add_option("--time-unit-hours", ground.time_unit_hours, "Hours per time-axis unit");
  distances->add_option("--output", distances_output, "Distance file (.bin for binary)")->required();
  distances->add_option("--threads", threads, "Workers, 0 = all cores");

  // cluster
  std::string distances_input;
  std::string cuts = "2,3,4";
  std::string cluster_features;
  std::string cluster_events;
  std::string cluster_dir;
  auto* cluster = app.add_subcommand("cluster", "Ward clustering and per-cluster profiles");
  cluster->add_option("--distances", distances_input, "Distance file")->required()->check(CLI::ExistingFile);
  cluster->add_option("--cuts", cuts, "Cluster counts, e.g. 2,3,4");
  cluster->add_option("--features", cluster_features, "Feature CSV")->required()->check(CLI::ExistingFile);
  cluster->add_option("--events", cluster_events, "Event CSV for mode breakdowns")->check(CLI::ExistingFile);
  cluster->add_option("--output-dir", cluster_dir, "Output directory")->required();

  // export
  std::string assignments;
  std::size_t export_k = 4;
  std::string export_feed;
  std::string export_events;
  std::string geojson_output;
  std::optional<std::size_t> only_cluster;
  std::string only_mode;
  auto* export_cmd = app.add_subcommand("export", "GeoJSON map layer for one cut");
  export_cmd->add_option("--assignments", assignments, "assignments.csv")->required()->check(CLI::ExistingFile);
  export_cmd->add_option("--k", export_k, "Which cut");
  export_cmd->add_option("--feed", export_feed, "GTFS feed for stop coordinates")->required()->check(CLI::ExistingPath);
  export_cmd->add_option("--events", export_events, "Event CSV for mode and support")->check(CLI::ExistingFile);
  export_cmd->add_option("--cluster", only_cluster, "Only this cluster");
  export_cmd->add_option("--mode", only_mode, "Only edges of this mode: b, t or m")
      ->check(CLI::IsMember({"b", "t", "m"}));
  export_cmd->add_option("--output", geojson_output, "GeoJSON file")->required();

  // run
  std::string config_path;
  std::string run_out;
  auto* run = app.add_subcommand("run", "Every stage from a config file, resumable");
  run->add_option("--config", config_path, "key = value config")->required()->check(CLI::ExistingFile);
  run->add_option("--out", run_out, "Artifact directory")->required();

  // synth
  std::size_t synth_edges = 200;
  std::string profiles_path;
  std::size_t synth_days = 20;
  std::uint64_t seed = 1;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "Synthetic corpus with planted edge profiles");
  synth->add_option("--edges", synth_edges, "Number of edges");
  synth->add_option("--profiles", profiles_path, "Profile file (JSON); default: four archetypes")
      ->check(CLI::ExistingFile);
  synth->add_option("--days", synth_days, "Service days");
  synth->add_option("--seed", seed, "Random seed");
  synth->add_option("--out", synth_out, "Output directory")->required();

  CLI11_PARSE(app, argc, argv);

  auto const scheme = binning_scheme::standard();
  try {
    if (*ingest) {
      std::vector<fs::path> paths(begin(ingest_inputs), end(ingest_inputs));
      auto const r =
          ingest_files(paths, service_window::parse(window_spec, weekdays_only));
      write_snapshots(ingest_output, r.records);
      std::cout << r.stats.to_json();
    } else if (*gtfs) {
      auto const edges = load_schedule_edges(feed);
      write_edge_set(gtfs_output, edges);
      std::cout << edges.edges.size() << " scheduled edges, "
                << edges.mandatory_edges.size() << " mandatory\n";
    } else if (*extract) {
      auto const records = read_snapshots(snapshots);
      auto groups = group_by_edge(extract_all_delay_changes(records));
      std::cout << "inferred edges: " << groups.size() << "\n";
      if (!sweep.empty()) {
        auto const thresholds = parse_list(sweep);
        std::cout << "threshold,edges\n";
        for (auto const& row : support_sweep(groups, thresholds)) {
          std::cout << row.threshold << "," << row.surviving_edges << "\n";
        }
      }
      groups = filter_by_support(std::move(groups), min_support);
      std::cout << "support > " << min_support << ": " << groups.size() << "\n";
      if (!schedule.empty()) {
        groups = filter_by_schedule(std::move(groups), read_edge_set(schedule));
        std::cout << "scheduled: " << groups.size() << "\n";
      }
      write_events(events_output, flatten(groups));
    } else if (*featurize_cmd) {
      auto const r = featurize(group_by_edge(read_events(events_input)), scheme);
      write_features(features_output, r.accepted);
      if (!rejects_output.empty()) {
        write_rejects(rejects_output, r.rejected);
      }
      std::cout << r.accepted.size() << " accepted, " << r.rejected.size()
                << " rejected\n";
    } else if (*distances) {
      ground.rule =
          rule_name == "offset" ? surrogate_rule::offset : surrogate_rule::boundary;
      auto const feats = read_features(features_input);
      auto m = pairwise_distances(
          feats, ground_distances(bin_coordinates(scheme, ground)), threads);
      m.metadata["delay_scale"] = format_double(ground.delay_scale);
      m.metadata["surrogate_offset"] = format_double(ground.surrogate_offset);
      m.metadata["surrogate_rule"] = rule_name;
      m.metadata["time_unit_hours"] = format_double(ground.time_unit_hours);
      write_distance_matrix(distances_output, m);
      std::cout << m.values.size() << " pairs\n";
    } else if (*cluster) {
      auto const m = read_distance_matrix(distances_input);
      auto const feats = read_features(cluster_features);
      auto const summaries = summaries_from(cluster_events, scheme);
      auto const d = ward_linkage(m);
      fs::path const dir{cluster_dir};
      fs::create_directories(dir);
      write_dendrogram(dir / "dendrogram.csv", d);
      auto const ks = parse_list(cuts);
      std::vector<std::vector<std::size_t>> labels;
      for (auto const k : ks) {
        labels.push_back(cut(d, k));
      }
      write_file(dir / "assignments.csv", assignments_csv(m.labels, ks, labels));

      std::map<edge_key, std::size_t> pos;
      for (std::size_t i = 0; i < m.labels.size(); ++i) {
        pos[m.labels[i]] = i;
      }
      for (std::size_t c = 0; c < ks.size(); ++c) {
        std::vector<std::size_t> assignment;
        for (auto const& f : feats) {
          assignment.push_back(labels[c].at(pos.at(f.edge)));
        }
        auto const profiles =
            cluster_profiles(assignment, feats, summaries, scheme);
        auto const sub = dir / ("k" + std::to_string(ks[c]));
        fs::create_directories(sub);
        export_profiles(profiles, scheme, sub, "profiles");
        std::cout << "k=" << ks[c] << ":";
        for (auto const& p : profiles) {
          std::cout << " " << p.members.size();
        }
        std::cout << "\n";
      }
    } else if (*export_cmd) {
      auto const assigned = read_assignments(assignments, export_k);
      geojson_filter filter;
      filter.cluster = only_cluster;
      if (!only_mode.empty()) {
        filter.mode = only_mode.front();
      }
      auto const fc = export_geojson(assigned, load_stops(export_feed),
                                     summaries_from(export_events, scheme), filter);
      write_file(geojson_output, fc.dump(1) + "\n");
      std::cout << fc["features"].size() << " features\n";
    } else if (*run) {
      auto const r = run_pipeline(pipeline_config::load(config_path), run_out);
      for (auto const& s : r.stages) {
        std::cout << s.name << ": " << (s.reused ? "reused" : "computed") << "\n";
      }
    } else if (*synth) {
      synth_spec spec;
      if (profiles_path.empty()) {
        spec.profiles = archetype_profiles(scheme);
      } else {
        spec = parse_synth_spec(read_file(profiles_path), scheme);
      }
      spec.options.days = synth_days;
      spec.options.seed = seed;
      auto const net = build_network(synth_edges, spec.edges_per_line);
      auto const assignment =
          interleaved_assignment(net.edges.size(), spec.profiles.size());
      auto const corpus =
          generate_corpus(net, assignment, spec.profiles, scheme, spec.options);
      write_synth_output(synth_out, net, corpus, spec.profiles, spec.options);
      std::cout << corpus.records.size() << " records over " << net.edges.size()
                << " edges\n";
    }
  } catch (std::exception const& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
