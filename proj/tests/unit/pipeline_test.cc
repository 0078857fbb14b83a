#include <gtest/gtest.h>

#include <map>

#include "json.hpp"

#include "delayprof/io.h"
#include "delayprof/pipeline.h"
#include "delayprof/synth.h"

#include "temp_dir.h"

using namespace delayprof;
namespace fs = std::filesystem;

namespace {

// Small corpus: 12 edges, 5 weekdays, about 150 in-window events per edge.
void make_corpus(fs::path const& dir) {
  auto const s = binning_scheme::standard();
  auto const net = build_network(12, 4);
  auto ps = archetype_profiles(s);
  ps[1].duplicate_rate = 0.05;
  auto const assign = interleaved_assignment(12, 4);
  synth_options o;
  o.days = 5;
  o.seed = 11;
  write_synth_output(dir, net, generate_corpus(net, assign, ps, s, o), ps, o);
}

pipeline_config small_config(fs::path const& corpus) {
  return pipeline_config::parse(
      "avl_input = avl\ngtfs_feed = gtfs\nmin_support = 100\ncuts = 2,4\nthreads = 2\n",
      corpus);
}

std::map<std::string, bool> reuse_map(pipeline_result const& r) {
  std::map<std::string, bool> m;
  for (auto const& s : r.stages) {
    m[s.name] = s.reused;
  }
  return m;
}

std::map<std::string, std::string> tree(fs::path const& root) {
  std::map<std::string, std::string> out;
  for (auto const& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) {
      out[fs::relative(e.path(), root).generic_string()] = read_file(e.path());
    }
  }
  return out;
}

}  // namespace

TEST(Config, DefaultsAndOverrides) {
  auto const c = pipeline_config::parse(
      "# comment\n"
      "avl_input = a.jsonl, more\n"
      "gtfs_feed = feed.zip\n"
      "window = 7:20\n"
      "weekdays_only = false\n"
      "min_support = 50\n"
      "sweep = 0,10\n"
      "schedule_filter = false\n"
      "delay_scale = 2\n"
      "surrogate_rule = boundary\n"
      "cuts = 3\n"
      "threads = 4\n"
      "distance_format = binary\n",
      "/base");
  ASSERT_EQ(c.avl_input.size(), 2U);
  EXPECT_EQ(c.avl_input[0], fs::path("/base/a.jsonl"));
  EXPECT_EQ(c.avl_input[1], fs::path("/base/more"));
  EXPECT_EQ(c.gtfs_feed, fs::path("/base/feed.zip"));
  EXPECT_EQ(c.window.start_hour, 7);
  EXPECT_EQ(c.window.end_hour, 19);
  EXPECT_FALSE(c.window.weekdays_only);
  EXPECT_EQ(c.scheme.first_hour, 7);
  EXPECT_EQ(c.scheme.hour_bins, 13);
  EXPECT_EQ(c.min_support, 50U);
  EXPECT_EQ(c.sweep, (std::vector<std::size_t>{0, 10}));
  EXPECT_FALSE(c.schedule_filter);
  EXPECT_DOUBLE_EQ(c.ground.delay_scale, 2.0);
  EXPECT_EQ(c.ground.rule, surrogate_rule::boundary);
  EXPECT_EQ(c.cuts, (std::vector<std::size_t>{3}));
  EXPECT_EQ(c.threads, 4U);
  EXPECT_TRUE(c.binary_distances);

  auto const d = pipeline_config::parse("avl_input = x\ngtfs_feed = y\n");
  EXPECT_EQ(d.min_support, 200U);
  EXPECT_EQ(d.cuts, (std::vector<std::size_t>{2, 3, 4}));
  EXPECT_EQ(d.window.to_string(), "6:21");
  EXPECT_TRUE(d.window.weekdays_only);
  EXPECT_DOUBLE_EQ(d.ground.delay_scale, 4.0);
  EXPECT_DOUBLE_EQ(d.ground.surrogate_offset, 2.5);
}

TEST(Config, Errors) {
  EXPECT_THROW((void)pipeline_config::parse("avl_input = x\ngtfs_feed = y\nbogus = 1\n"),
               config_error);
  EXPECT_THROW((void)pipeline_config::parse("avl_input x\n"), config_error);
  EXPECT_THROW((void)pipeline_config::parse("gtfs_feed = y\n"), config_error);
  EXPECT_THROW(
      (void)pipeline_config::parse("avl_input = x\ngtfs_feed = y\ncuts = 0\n"),
      config_error);
  EXPECT_THROW(
      (void)pipeline_config::parse("avl_input = x\ngtfs_feed = y\nsurrogate_rule = z\n"),
      config_error);
  EXPECT_THROW(
      (void)pipeline_config::parse("avl_input = x\ngtfs_feed = y\nmin_support = -1\n"),
      std::exception);
}

TEST(Pipeline, RunsRerunsAndRecomputesDownstream) {
  testing_support::temp_dir dir;
  make_corpus(dir / "corpus");
  auto config = small_config(dir / "corpus");

  auto const first = run_pipeline(config, dir / "out");
  ASSERT_EQ(first.stages.size(), 7U);
  for (auto const& s : first.stages) {
    EXPECT_FALSE(s.reused) << s.name;
  }
  for (auto const* f : {"snapshots.jsonl", "ingest_stats.json", "schedule_edges.csv",
                        "events.csv", "support_sweep.csv", "features.csv", "rejects.csv",
                        "distances.txt", "dendrogram.csv", "assignments.csv",
                        "k2/profiles.csv", "k4/edges.geojson", "k4/profiles_c4.txt",
                        "manifest.json"}) {
    EXPECT_TRUE(fs::exists(dir / "out" / f)) << f;
  }
  auto const assignments = csv_table::parse(read_file(dir / "out" / "assignments.csv"), "a");
  EXPECT_EQ(assignments.rows().size(), 12U);

  auto const again = run_pipeline(config, dir / "out");
  for (auto const& s : again.stages) {
    EXPECT_TRUE(s.reused) << s.name;
  }

  config.min_support = 50;
  auto const m = reuse_map(run_pipeline(config, dir / "out"));
  EXPECT_TRUE(m.at("ingest"));
  EXPECT_TRUE(m.at("gtfs"));
  EXPECT_FALSE(m.at("edges"));
  EXPECT_FALSE(m.at("features"));
  EXPECT_FALSE(m.at("distances"));
  EXPECT_FALSE(m.at("cluster"));
  EXPECT_FALSE(m.at("export"));

  // a damaged output forces its stage to run again
  write_file(dir / "out" / "features.csv", "tampered\n");
  auto const n = reuse_map(run_pipeline(config, dir / "out"));
  EXPECT_TRUE(n.at("edges"));
  EXPECT_FALSE(n.at("features"));
}

TEST(Pipeline, TwoRunsProduceIdenticalArtifacts) {
  testing_support::temp_dir dir;
  make_corpus(dir / "corpus");
  auto config = small_config(dir / "corpus");
  run_pipeline(config, dir / "a");
  config.threads = 1;
  run_pipeline(config, dir / "b");
  auto a = tree(dir / "a");
  auto b = tree(dir / "b");
  ASSERT_EQ(a.size(), b.size());
  for (auto const& [name, content] : a) {
    if (name == "manifest.json") {
      continue;
    }
    EXPECT_EQ(content, b.at(name)) << name;
  }
  auto ma = nlohmann::json::parse(a.at("manifest.json"));
  auto mb = nlohmann::json::parse(b.at("manifest.json"));
  EXPECT_TRUE(ma.contains("created_at"));
  ma.erase("created_at");
  mb.erase("created_at");
  ma["config"].erase("threads");
  mb["config"].erase("threads");
  EXPECT_EQ(ma, mb);
}

TEST(Pipeline, StageErrorsNameTheStage) {
  testing_support::temp_dir dir;
  make_corpus(dir / "corpus");
  auto config = small_config(dir / "corpus");
  config.gtfs_feed = dir / "missing";
  try {
    run_pipeline(config, dir / "out");
    FAIL();
  } catch (pipeline_error const& e) {
    EXPECT_EQ(e.stage(), "gtfs");
  }
}
