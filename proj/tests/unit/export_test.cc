#include <gtest/gtest.h>

#include <random>

#include "delayprof/export.h"
#include "delayprof/io.h"

#include "temp_dir.h"

using namespace delayprof;

namespace {

stop_map two_stops() {
  stop_map m;
  m["A"] = {"A", 51.1, 17.0, "Alpha"};
  m["B"] = {"B", 51.2, 17.1, "Beta"};
  return m;
}

edge_summary summary(edge_key e, std::size_t bus, std::size_t tram) {
  edge_summary s;
  s.edge = std::move(e);
  s.bus_events = bus;
  s.tram_events = tram;
  return s;
}

cluster_profile profile_with(std::size_t label, std::vector<double> band_mass) {
  auto const s = binning_scheme::standard();
  cluster_profile p;
  p.label = label;
  p.rows = 23;
  p.cols = 15;
  p.mean_matrix.assign(345, 0.0);
  p.band_likelihood = band_mass;
  for (std::size_t r = 0; r < 23; ++r) {
    for (std::size_t c = 0; c < 15; ++c) {
      p.mean_matrix[r * 15 + c] = band_mass[r] / 15.0;
    }
    (r == s.no_change_bin() ? p.p_no_change
                            : (r < s.no_change_bin() ? p.p_decrease : p.p_increase)) +=
        band_mass[r];
  }
  p.members = {{"A", "B"}};
  return p;
}

}  // namespace

TEST(GeoJson, SingleEdge) {
  std::vector<edge_assignment> const a{{{"A", "B"}, 2}};
  std::vector<edge_summary> const s{summary({"A", "B"}, 250, 0)};
  auto const j = export_geojson(a, two_stops(), s);
  EXPECT_EQ(j["type"], "FeatureCollection");
  ASSERT_EQ(j["features"].size(), 1U);
  auto const& f = j["features"][0];
  EXPECT_EQ(f["geometry"]["type"], "LineString");
  auto const& c = f["geometry"]["coordinates"];
  EXPECT_DOUBLE_EQ(c[0][0].get<double>(), 17.0);
  EXPECT_DOUBLE_EQ(c[0][1].get<double>(), 51.1);
  EXPECT_DOUBLE_EQ(c[1][0].get<double>(), 17.1);
  EXPECT_DOUBLE_EQ(c[1][1].get<double>(), 51.2);
  EXPECT_EQ(f["properties"]["cluster"], 2);
  EXPECT_EQ(f["properties"]["mode"], "b");
  EXPECT_EQ(f["properties"]["support"], 250);
}

TEST(GeoJson, EmptyInput) {
  auto const j = export_geojson({}, two_stops(), {});
  EXPECT_EQ(j["type"], "FeatureCollection");
  EXPECT_TRUE(j["features"].empty());
}

TEST(GeoJson, UnknownStopsAreListed) {
  std::vector<edge_assignment> const a{{{"A", "Q1"}, 1}, {{"Q2", "B"}, 1}};
  try {
    (void)export_geojson(a, two_stops(), {});
    FAIL();
  } catch (export_error const& e) {
    std::string const msg = e.what();
    EXPECT_NE(msg.find("Q1"), std::string::npos);
    EXPECT_NE(msg.find("Q2"), std::string::npos);
  }
}

TEST(GeoJson, FiltersPartitionTheEdges) {
  std::mt19937 rng(5);
  stop_map stops;
  for (int i = 0; i < 30; ++i) {
    auto const id = std::to_string(i);
    stops[id] = {id, 51.0 + i * 0.01, 17.0 + i * 0.01, ""};
  }
  std::vector<edge_assignment> a;
  std::vector<edge_summary> s;
  for (int i = 0; i < 200; ++i) {
    edge_key const e{std::to_string(rng() % 30), std::to_string(rng() % 30) + "x"};
    if (!stops.contains(e.stop_to)) {
      stops[e.stop_to] = {e.stop_to, 51.5, 17.5, ""};
    }
    a.push_back({e, 1 + rng() % 4});
    s.push_back(summary(e, rng() % 3, rng() % 3 == 0 ? 1 : 0));
  }
  // keep unique edges only
  std::map<edge_key, std::size_t> seen;
  std::vector<edge_assignment> ua;
  std::vector<edge_summary> us;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (seen.emplace(a[i].edge, i).second) {
      ua.push_back(a[i]);
      us.push_back(s[i]);
    }
  }
  auto const total = export_geojson(ua, stops, us)["features"].size();
  EXPECT_EQ(total, ua.size());
  std::size_t by_cluster = 0;
  for (std::size_t k = 1; k <= 4; ++k) {
    by_cluster += export_geojson(ua, stops, us, {.cluster = k, .mode = {}})["features"].size();
  }
  EXPECT_EQ(by_cluster, total);
  std::size_t by_mode = 0;
  for (char m : {'b', 't', 'm'}) {
    by_mode += export_geojson(ua, stops, us, {.cluster = {}, .mode = m})["features"].size();
  }
  EXPECT_EQ(by_mode, total);
}

TEST(GeoJson, FeaturesAreSortedByEdge) {
  auto stops = two_stops();
  stops["C"] = {"C", 51.3, 17.2, ""};
  std::vector<edge_assignment> const a{{{"B", "C"}, 1}, {{"A", "C"}, 1}, {{"A", "B"}, 2}};
  auto const j = export_geojson(a, stops, {});
  ASSERT_EQ(j["features"].size(), 3U);
  EXPECT_EQ(j["features"][0]["properties"]["stop_to"], "B");
  EXPECT_EQ(j["features"][1]["properties"]["stop_to"], "C");
  EXPECT_EQ(j["features"][2]["properties"]["stop_from"], "B");
  EXPECT_EQ(j["features"][0]["properties"]["mode"], "?");
}

TEST(Report, ProbabilityFormatting) {
  EXPECT_EQ(format_probability(0.67), "0.67");
  EXPECT_EQ(format_probability(0.1 + 0.2), "0.3");
  EXPECT_EQ(format_probability(1.0), "1");
  EXPECT_EQ(format_probability(0.0), "0");
  EXPECT_EQ(format_probability(0.1234567), "0.123457");
}

TEST(Report, SummaryCsv) {
  auto const s = binning_scheme::standard();
  std::vector<double> mass(23, 0.0);
  mass[11] = 0.67;
  mass[12] = 0.16;
  mass[10] = 0.12;
  mass[13] = 0.03;
  mass[9] = 0.02;
  std::vector<cluster_profile> const ps{profile_with(1, mass)};
  std::vector<std::string> const lineage{"k2:1"};
  auto const csv = profile_summary_csv(ps, s, lineage);
  auto const t = csv_table::parse(csv, "summary");
  ASSERT_EQ(t.rows().size(), 1U);
  auto const& row = t.rows()[0];
  EXPECT_EQ(row[t.require_column("cluster")], "1");
  EXPECT_EQ(row[t.require_column("lineage")], "k2:1");
  EXPECT_EQ(row[t.require_column("size")], "1");
  EXPECT_EQ(row[t.require_column("p_no_change")], "0.67");
  EXPECT_EQ(row[t.require_column("p_increase")], "0.19");
  EXPECT_EQ(row[t.require_column("p_decrease")], "0.14");
  EXPECT_EQ(row[t.require_column("pooled_no_change")], "");
  EXPECT_EQ(row[t.require_column("dominant_bands")],
            "(-0.5,0.5]=0.67 (0.5,1.5]=0.16 (-1.5,-0.5]=0.12");
}

TEST(Report, MatrixTextShape) {
  auto const s = binning_scheme::standard();
  std::vector<double> mass(23, 0.0);
  mass[11] = 1.0;
  auto const txt = profile_matrix_text(profile_with(3, mass), s);
  auto const t = csv_table::parse(txt, "matrix");
  EXPECT_EQ(t.header().size(), 16U);
  EXPECT_EQ(t.header()[1], "h06");
  EXPECT_EQ(t.header()[15], "h20");
  ASSERT_EQ(t.rows().size(), 23U);
  EXPECT_EQ(t.rows().front()[0], "(30.5,inf]");
  EXPECT_EQ(t.rows().back()[0], "(-inf,-30.5]");
  for (auto const& row : t.rows()) {
    EXPECT_EQ(row.size(), 16U);
  }
  EXPECT_EQ(parse_double(t.rows()[11][1]), 1.0 / 15.0);
}

TEST(Report, ExportProfilesWritesFiles) {
  testing_support::temp_dir dir;
  auto const s = binning_scheme::standard();
  std::vector<double> mass(23, 0.0);
  mass[11] = 1.0;
  std::vector<cluster_profile> const ps{profile_with(1, mass), profile_with(2, mass)};
  auto const w = export_profiles(ps, s, dir.path(), "profiles");
  EXPECT_TRUE(std::filesystem::exists(w.summary));
  ASSERT_EQ(w.matrices.size(), 2U);
  EXPECT_EQ(w.matrices[1].filename(), "profiles_c2.txt");
  EXPECT_EQ(read_file(w.matrices[0]), profile_matrix_text(ps[0], s));
}

TEST(Assignments, CsvRoundTrip) {
  testing_support::temp_dir dir;
  std::vector<edge_key> const edges{{"A", "B"}, {"B,1", "C"}};
  std::vector<std::size_t> const cuts{2, 3};
  std::vector<std::vector<std::size_t>> const labels{{1, 2}, {1, 3}};
  auto const csv = assignments_csv(edges, cuts, labels);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "stop_from,stop_to,k2,k3");
  write_file(dir / "a.csv", csv);
  auto const back = read_assignments(dir / "a.csv", 3);
  ASSERT_EQ(back.size(), 2U);
  EXPECT_EQ(back[1].edge, edges[1]);
  EXPECT_EQ(back[1].cluster, 3U);
  EXPECT_THROW((void)read_assignments(dir / "a.csv", 4), std::exception);
}
