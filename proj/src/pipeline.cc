#include "delayprof/pipeline.h"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <functional>
#include <map>
#include <optional>

#include "json.hpp"

#include "delayprof/clustering.h"
#include "delayprof/edges.h"
#include "delayprof/export.h"
#include "delayprof/gtfs.h"
#include "delayprof/io.h"

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace delayprof {

namespace {

constexpr auto tie_break_policy = "lowest (left, right) cluster id pair";

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes") {
    return true;
  }
  if (v == "false" || v == "0" || v == "no") {
    return false;
  }
  throw config_error("config: " + std::string(key) + " expects true or false");
}

std::vector<std::size_t> parse_sizes(std::string_view key, std::string_view v) {
  std::vector<std::size_t> out;
  for (auto const& part : split(v, ',')) {
    auto const t = trim(part);
    if (t.empty()) {
      continue;
    }
    auto const x = parse_int(t);
    if (x < 0) {
      throw config_error("config: " + std::string(key) + " must be non-negative");
    }
    out.push_back(static_cast<std::size_t>(x));
  }
  return out;
}

}  // namespace

pipeline_config pipeline_config::parse(std::string_view text,
                                       fs::path const& base_dir) {
  pipeline_config c;
  std::string window_spec = "6:21";
  bool weekdays_only = true;
  auto const resolve = [&](std::string_view p) {
    fs::path path{std::string(p)};
    return path.is_relative() && !base_dir.empty() ? base_dir / path : path;
  };

  std::size_t line_no = 0;
  for (auto const& raw : split(text, '\n')) {
    ++line_no;
    auto const line = trim(raw);
    if (line.empty() || line.front() == '#') {
      continue;
    }
    auto const eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw config_error("config line " + std::to_string(line_no) +
                         ": expected key = value");
    }
    auto const key = std::string(trim(line.substr(0, eq)));
    auto const value = trim(line.substr(eq + 1));
    try {
      if (key == "avl_input") {
        c.avl_input.clear();
        for (auto const& p : split(value, ',')) {
          if (!trim(p).empty()) {
            c.avl_input.push_back(resolve(trim(p)));
          }
        }
      } else if (key == "gtfs_feed") {
        c.gtfs_feed = resolve(value);
      } else if (key == "window") {
        window_spec = std::string(value);
      } else if (key == "weekdays_only") {
        weekdays_only = parse_bool(key, value);
      } else if (key == "min_support") {
        c.min_support = parse_sizes(key, value).at(0);
      } else if (key == "sweep") {
        c.sweep = parse_sizes(key, value);
      } else if (key == "schedule_filter") {
        c.schedule_filter = parse_bool(key, value);
      } else if (key == "delay_boundaries") {
        c.scheme.delay_boundaries.clear();
        for (auto const& p : split(value, ',')) {
          c.scheme.delay_boundaries.push_back(parse_double(trim(p)));
        }
      } else if (key == "delay_scale") {
        c.ground.delay_scale = parse_double(value);
      } else if (key == "surrogate_offset") {
        c.ground.surrogate_offset = parse_double(value);
      } else if (key == "surrogate_rule") {
        if (value == "offset") {
          c.ground.rule = surrogate_rule::offset;
        } else if (value == "boundary") {
          c.ground.rule = surrogate_rule::boundary;
        } else {
          throw config_error("config: surrogate_rule is offset or boundary");
        }
      } else if (key == "time_unit_hours") {
        c.ground.time_unit_hours = parse_double(value);
      } else if (key == "cuts") {
        c.cuts = parse_sizes(key, value);
      } else if (key == "threads") {
        c.threads = static_cast<unsigned>(parse_sizes(key, value).at(0));
      } else if (key == "distance_format") {
        if (value != "text" && value != "binary") {
          throw config_error("config: distance_format is text or binary");
        }
        c.binary_distances = value == "binary";
      } else {
        throw config_error("config: unknown key '" + key + "'");
      }
    } catch (config_error const&) {
      throw;
    } catch (std::exception const& e) {
      throw config_error("config line " + std::to_string(line_no) + " (" + key +
                         "): " + e.what());
    }
  }
  try {
    c.window = service_window::parse(window_spec, weekdays_only);
    c.scheme.first_hour = c.window.start_hour;
    c.scheme.hour_bins = c.window.hour_count();
  } catch (std::exception const& e) {
    throw config_error(std::string("config: window: ") + e.what());
  }
  c.validate();
  return c;
}

pipeline_config pipeline_config::load(fs::path const& path) {
  return parse(read_file(path), path.parent_path());
}

void pipeline_config::validate() const {
  if (avl_input.empty()) {
    throw config_error("config: avl_input is required");
  }
  if (gtfs_feed.empty()) {
    throw config_error("config: gtfs_feed is required");
  }
  if (cuts.empty()) {
    throw config_error("config: cuts must name at least one cluster count");
  }
  for (auto const k : cuts) {
    if (k < 1) {
      throw config_error("config: cuts must be positive");
    }
  }
  if (scheme.first_hour != window.start_hour ||
      scheme.hour_bins != window.hour_count()) {
    throw config_error("config: time bins must cover the service window");
  }
  try {
    scheme.validate();
    ground.validate();
  } catch (std::exception const& e) {
    throw config_error(std::string("config: ") + e.what());
  }
}

namespace {

std::vector<fs::path> expand_inputs(std::vector<fs::path> const& inputs) {
  std::vector<fs::path> files;
  for (auto const& p : inputs) {
    if (fs::is_directory(p)) {
      std::vector<fs::path> found;
      for (auto const& e : fs::directory_iterator(p)) {
        auto const name = e.path().filename().string();
        if (e.is_regular_file() &&
            (name.ends_with(".jsonl") || name.ends_with(".jsonl.gz") ||
             name.ends_with(".json"))) {
          found.push_back(e.path());
        }
      }
      std::sort(begin(found), end(found));
      files.insert(end(files), begin(found), end(found));
    } else if (fs::exists(p)) {
      files.push_back(p);
    } else {
      throw io_error("input not found: " + p.string());
    }
  }
  return files;
}

std::string feed_digest(fs::path const& feed) {
  return sha256_hex(read_feed_table(feed, "stops.txt") + '\0' +
                    read_feed_table(feed, "stop_times.txt"));
}

std::string write_stops_table(stop_map const& stops) {
  std::string out = "stop_id,stop_name,stop_lat,stop_lon\n";
  for (auto const& [id, s] : stops) {
    out += csv_escape(id) + "," + csv_escape(s.name) + "," +
           format_double(s.latitude) + "," + format_double(s.longitude) + "\n";
  }
  return out;
}

struct stage_outputs {
  ordered_json entry;  // manifest record
  std::string key;
  std::map<std::string, std::string> digests;
};

class stage_runner {
public:
  stage_runner(fs::path out_dir, ordered_json previous)
      : out_(std::move(out_dir)), previous_(std::move(previous)) {}

  // `compute` writes the stage's files and returns their paths relative to
  // the output directory.
  stage_outputs run(std::string const& name, ordered_json params,
                    ordered_json inputs,
                    std::function<std::vector<std::string>()> const& compute,
                    pipeline_result& result) {
    ordered_json keyed;
    keyed["stage"] = name;
    keyed["params"] = params;
    keyed["inputs"] = inputs;
    auto const key = sha256_hex(keyed.dump());

    stage_outputs s;
    s.key = key;
    s.entry["name"] = name;
    s.entry["key"] = key;
    s.entry["params"] = std::move(params);
    s.entry["inputs"] = std::move(inputs);

    if (auto reused = try_reuse(name, key)) {
      s.entry["outputs"] = *reused;
      s.entry["status"] = "reused";
      for (auto const& [path, digest] : reused->items()) {
        s.digests[path] = digest.get<std::string>();
      }
      result.stages.push_back({name, true});
      return s;
    }

    std::vector<std::string> files;
    try {
      files = compute();
    } catch (pipeline_error const&) {
      throw;
    } catch (std::exception const& e) {
      throw pipeline_error(name, e.what());
    }
    std::sort(begin(files), end(files));
    ordered_json outputs = ordered_json::object();
    for (auto const& f : files) {
      auto const digest = file_sha256(out_ / f);
      outputs[f] = digest;
      s.digests[f] = digest;
    }
    s.entry["outputs"] = std::move(outputs);
    s.entry["status"] = "computed";
    result.stages.push_back({name, false});
    return s;
  }

private:
  std::optional<ordered_json> try_reuse(std::string const& name,
                                        std::string const& key) const {
    if (!previous_.is_object() || !previous_.contains("stages")) {
      return std::nullopt;
    }
    for (auto const& st : previous_["stages"]) {
      if (!st.is_object() || st.value("name", "") != name) {
        continue;
      }
      if (st.value("key", "") != key || !st.contains("outputs") ||
          !st["outputs"].is_object()) {
        return std::nullopt;
      }
      for (auto const& [path, digest] : st["outputs"].items()) {
        auto const p = out_ / path;
        if (!digest.is_string() || !fs::is_regular_file(p) ||
            file_sha256(p) != digest.get<std::string>()) {
          return std::nullopt;
        }
      }
      return st["outputs"];
    }
    return std::nullopt;
  }

  fs::path out_;
  ordered_json previous_;
};

std::string utc_timestamp() {
  auto const now = std::chrono::system_clock::to_time_t(
      std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

pipeline_result run_pipeline(pipeline_config const& config,
                             fs::path const& out_dir) {
  config.validate();
  fs::create_directories(out_dir);
  auto const manifest_path = out_dir / "manifest.json";

  ordered_json previous;
  if (fs::exists(manifest_path)) {
    try {
      previous = ordered_json::parse(read_file(manifest_path));
    } catch (std::exception const&) {
      previous = nullptr;
    }
  }

  pipeline_result result;
  result.manifest = manifest_path;
  stage_runner runner(out_dir, previous);
  std::vector<ordered_json> stage_entries;

  // ingest
  std::vector<fs::path> inputs;
  ordered_json input_digests = ordered_json::array();
  try {
    inputs = expand_inputs(config.avl_input);
    for (auto const& p : inputs) {
      input_digests.push_back({{"path", p.string()}, {"sha256", file_sha256(p)}});
    }
  } catch (std::exception const& e) {
    throw pipeline_error("ingest", e.what());
  }
  auto const ingest = runner.run(
      "ingest",
      {{"window", config.window.to_string()},
       {"weekdays_only", config.window.weekdays_only}},
      {{"avl_input", input_digests}},
      [&] {
        auto r = ingest_files(inputs, config.window);
        write_snapshots(out_dir / "snapshots.jsonl", r.records);
        write_file(out_dir / "ingest_stats.json", r.stats.to_json());
        return std::vector<std::string>{"snapshots.jsonl", "ingest_stats.json"};
      },
      result);
  stage_entries.push_back(ingest.entry);

  // gtfs
  std::string feed_sha;
  try {
    feed_sha = feed_digest(config.gtfs_feed);
  } catch (std::exception const& e) {
    throw pipeline_error("gtfs", e.what());
  }
  auto const gtfs = runner.run(
      "gtfs", ordered_json::object(),
      {{"gtfs_feed", {{"path", config.gtfs_feed.string()}, {"sha256", feed_sha}}}},
      [&] {
        write_edge_set(out_dir / "schedule_edges.csv",
                       load_schedule_edges(config.gtfs_feed));
        write_file(out_dir / "stops.csv",
                   write_stops_table(load_stops(config.gtfs_feed)));
        return std::vector<std::string>{"schedule_edges.csv", "stops.csv"};
      },
      result);
  stage_entries.push_back(gtfs.entry);

  // edges
  auto const edges = runner.run(
      "edges",
      {{"min_support", config.min_support},
       {"sweep", config.sweep},
       {"schedule_filter", config.schedule_filter}},
      {{"snapshots.jsonl", ingest.digests.at("snapshots.jsonl")},
       {"schedule_edges.csv", gtfs.digests.at("schedule_edges.csv")},
       {"after", {ingest.key, gtfs.key}}},
      [&] {
        auto const records = read_snapshots(out_dir / "snapshots.jsonl");
        auto groups = group_by_edge(extract_all_delay_changes(records));
        auto const schedule = read_edge_set(out_dir / "schedule_edges.csv");
        auto const inferred = groups.size();

        auto const raw_sweep = support_sweep(groups, config.sweep);
        std::vector<sweep_row> scheduled_sweep;
        if (config.schedule_filter) {
          scheduled_sweep = support_sweep(filter_by_schedule(groups, schedule),
                                          config.sweep);
        }
        std::string sweep_csv = "threshold,edges,scheduled_edges\n";
        for (std::size_t i = 0; i < raw_sweep.size(); ++i) {
          sweep_csv += std::to_string(raw_sweep[i].threshold) + "," +
                       std::to_string(raw_sweep[i].surviving_edges) + ",";
          if (config.schedule_filter) {
            sweep_csv += std::to_string(scheduled_sweep[i].surviving_edges);
          }
          sweep_csv += "\n";
        }
        write_file(out_dir / "support_sweep.csv", sweep_csv);

        groups = filter_by_support(std::move(groups), config.min_support);
        auto const after_support = groups.size();
        if (config.schedule_filter) {
          groups = filter_by_schedule(std::move(groups), schedule);
        }
        ordered_json counts;
        counts["inferred_edges"] = inferred;
        counts["after_support"] = after_support;
        counts["after_schedule"] = groups.size();
        write_file(out_dir / "edge_counts.json", counts.dump(2) + "\n");
        write_events(out_dir / "events.csv", flatten(groups));
        return std::vector<std::string>{"events.csv", "support_sweep.csv",
                                        "edge_counts.json"};
      },
      result);
  stage_entries.push_back(edges.entry);

  // features
  auto const features = runner.run(
      "features",
      {{"delay_boundaries", config.scheme.delay_boundaries},
       {"first_hour", config.scheme.first_hour},
       {"hour_bins", config.scheme.hour_bins}},
      {{"events.csv", edges.digests.at("events.csv")}, {"after", {edges.key}}},
      [&] {
        auto const groups = group_by_edge(read_events(out_dir / "events.csv"));
        auto const r = featurize(groups, config.scheme);
        write_features(out_dir / "features.csv", r.accepted);
        write_rejects(out_dir / "rejects.csv", r.rejected);
        return std::vector<std::string>{"features.csv", "rejects.csv"};
      },
      result);
  stage_entries.push_back(features.entry);

  // distances
  std::string const dist_file =
      config.binary_distances ? "distances.bin" : "distances.txt";
  auto const rule_name =
      config.ground.rule == surrogate_rule::offset ? "offset" : "boundary";
  auto const distances = runner.run(
      "distances",
      {{"delay_scale", config.ground.delay_scale},
       {"surrogate_offset", config.ground.surrogate_offset},
       {"surrogate_rule", rule_name},
       {"time_unit_hours", config.ground.time_unit_hours},
       {"format", config.binary_distances ? "binary" : "text"}},
      {{"features.csv", features.digests.at("features.csv")},
       {"after", {features.key}}},
      [&] {
        auto const feats = read_features(out_dir / "features.csv");
        auto const ground =
            ground_distances(bin_coordinates(config.scheme, config.ground));
        auto m = pairwise_distances(feats, ground, config.threads);
        m.metadata["delay_scale"] = format_double(config.ground.delay_scale);
        m.metadata["surrogate_offset"] =
            format_double(config.ground.surrogate_offset);
        m.metadata["surrogate_rule"] = rule_name;
        m.metadata["time_unit_hours"] =
            format_double(config.ground.time_unit_hours);
        write_distance_matrix(out_dir / dist_file, m);
        return std::vector<std::string>{dist_file};
      },
      result);
  stage_entries.push_back(distances.entry);

  // cluster
  auto const cluster = runner.run(
      "cluster", {{"cuts", config.cuts}, {"tie_break", tie_break_policy}},
      {{dist_file, distances.digests.at(dist_file)}, {"after", {distances.key}}},
      [&] {
        auto const m = read_distance_matrix(out_dir / dist_file);
        if (m.n < 2) {
          throw clustering_error("need at least two accepted edges, got " +
                                 std::to_string(m.n));
        }
        auto d = ward_linkage(m);
        write_dendrogram(out_dir / "dendrogram.csv", d);
        std::vector<std::vector<std::size_t>> labels;
        for (auto const k : config.cuts) {
          if (k > m.n) {
            throw clustering_error("cut " + std::to_string(k) + " exceeds " +
                                   std::to_string(m.n) + " edges");
          }
          labels.push_back(cut(d, k));
        }
        write_file(out_dir / "assignments.csv",
                   assignments_csv(m.labels, config.cuts, labels));
        return std::vector<std::string>{"dendrogram.csv", "assignments.csv"};
      },
      result);
  stage_entries.push_back(cluster.entry);

  // export
  auto const exported = runner.run(
      "export", {{"cuts", config.cuts}},
      {{"assignments.csv", cluster.digests.at("assignments.csv")},
       {"features.csv", features.digests.at("features.csv")},
       {"events.csv", edges.digests.at("events.csv")},
       {"stops.csv", gtfs.digests.at("stops.csv")},
       {"after", {cluster.key, features.key, edges.key, gtfs.key}}},
      [&] {
        std::vector<std::string> files;
        auto const feats = read_features(out_dir / "features.csv");
        auto const groups = group_by_edge(read_events(out_dir / "events.csv"));
        auto const summaries = summarize_edges(groups, config.scheme);
        auto const stops = parse_stops(read_file(out_dir / "stops.csv"));

        std::optional<std::map<edge_key, std::size_t>> coarser;
        std::size_t coarser_k = 0;
        auto sorted_cuts = config.cuts;
        std::sort(begin(sorted_cuts), end(sorted_cuts));
        sorted_cuts.erase(std::unique(begin(sorted_cuts), end(sorted_cuts)),
                          end(sorted_cuts));
        for (auto const k : sorted_cuts) {
          auto const assigned = read_assignments(out_dir / "assignments.csv", k);
          std::map<edge_key, std::size_t> label_of;
          for (auto const& a : assigned) {
            label_of[a.edge] = a.cluster;
          }
          std::vector<std::size_t> assignment;
          for (auto const& f : feats) {
            auto const it = label_of.find(f.edge);
            if (it == end(label_of)) {
              throw export_error("no assignment for edge " + f.edge.to_string());
            }
            assignment.push_back(it->second);
          }
          auto const profiles =
              cluster_profiles(assignment, feats, summaries, config.scheme);

          std::vector<std::string> lineage;
          for (auto const& p : profiles) {
            std::string l;
            if (coarser && !p.members.empty()) {
              l = "k" + std::to_string(coarser_k) + ":" +
                  std::to_string(coarser->at(p.members.front()));
            }
            lineage.push_back(std::move(l));
          }

          auto const dir_name = "k" + std::to_string(k);
          fs::create_directories(out_dir / dir_name);
          auto const written = export_profiles(profiles, config.scheme,
                                               out_dir / dir_name, "profiles",
                                               lineage);
          files.push_back(dir_name + "/" + written.summary.filename().string());
          for (auto const& mpath : written.matrices) {
            files.push_back(dir_name + "/" + mpath.filename().string());
          }

          write_file(out_dir / dir_name / "edges.geojson",
                     export_geojson(assigned, stops, summaries).dump(1) + "\n");
          files.push_back(dir_name + "/edges.geojson");
          for (auto const& p : profiles) {
            auto const name = "edges_c" + std::to_string(p.label) + ".geojson";
            write_file(out_dir / dir_name / name,
                       export_geojson(assigned, stops, summaries,
                                      {.cluster = p.label, .mode = {}})
                               .dump(1) +
                           "\n");
            files.push_back(dir_name + "/" + name);
          }
          coarser = std::move(label_of);
          coarser_k = k;
        }
        return files;
      },
      result);
  stage_entries.push_back(exported.entry);

  ordered_json manifest;
  manifest["created_at"] = utc_timestamp();
  manifest["config"] = {
      {"avl_input", [&] {
         auto a = ordered_json::array();
         for (auto const& p : config.avl_input) {
           a.push_back(p.string());
         }
         return a;
       }()},
      {"gtfs_feed", config.gtfs_feed.string()},
      {"window", config.window.to_string()},
      {"window_start_hour", config.window.start_hour},
      {"window_end_hour", config.window.end_hour},
      {"weekdays_only", config.window.weekdays_only},
      {"min_support", config.min_support},
      {"support_rule", "support > min_support"},
      {"sweep", config.sweep},
      {"schedule_filter", config.schedule_filter},
      {"delay_boundaries", config.scheme.delay_boundaries},
      {"delay_scale", config.ground.delay_scale},
      {"surrogate_offset", config.ground.surrogate_offset},
      {"surrogate_rule", rule_name},
      {"time_unit_hours", config.ground.time_unit_hours},
      {"cuts", config.cuts},
      {"threads", config.threads},
      {"distance_format", config.binary_distances ? "binary" : "text"},
      {"tie_break", tie_break_policy}};
  manifest["stages"] = stage_entries;
  write_file(manifest_path, manifest.dump(2) + "\n");
  return result;
}

}  // namespace delayprof
