#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "delayprof/clustering.h"

#include "naive_ward.h"
#include "temp_dir.h"

using namespace delayprof;

namespace {

condensed_distance_matrix from_full(std::vector<std::vector<double>> const& d) {
  condensed_distance_matrix m;
  m.n = d.size();
  for (std::size_t i = 0; i < m.n; ++i) {
    m.labels.push_back({"s" + std::to_string(i), "t"});
    for (std::size_t j = i + 1; j < m.n; ++j) {
      m.values.push_back(d[i][j]);
    }
  }
  return m;
}

std::vector<std::vector<double>> random_points_matrix(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(0.0, 10.0);
  std::vector<std::array<double, 3>> p(n);
  for (auto& q : p) {
    q = {u(rng), u(rng), u(rng)};
  }
  std::vector<std::vector<double>> d(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      d[i][j] = std::hypot(p[i][0] - p[j][0], p[i][1] - p[j][1], p[i][2] - p[j][2]);
    }
  }
  return d;
}

feature_matrix point_mass(std::string const& name, std::size_t row) {
  feature_matrix f{.edge = {name, "z"}, .support = 300, .rows = 23, .cols = 15, .values = {}};
  f.values.assign(345, 0.0);
  for (std::size_t c = 0; c < 15; ++c) {
    f.values[row * 15 + c] = 1.0 / 15.0;
  }
  return f;
}

}  // namespace

TEST(Ward, UpdateFormula) {
  // merged {s,t} to v, all unit sizes, equilateral
  EXPECT_DOUBLE_EQ(ward_update(1.0, 1.0, 1.0, 1, 1, 1), 1.0);
  EXPECT_DOUBLE_EQ(ward_update(2.0, 2.0, 0.0, 1, 1, 1), std::sqrt(16.0 / 3.0));
  EXPECT_GE(ward_update(0.0, 0.0, 5.0, 1, 1, 1), 0.0);
}

TEST(Ward, TwoLeaves) {
  auto const d = ward_linkage(from_full({{0, 3}, {3, 0}}));
  ASSERT_EQ(d.merges.size(), 1U);
  EXPECT_EQ(d.merges[0], (merge{0, 1, 3.0, 2}));
  EXPECT_EQ(d.leaf_order, (std::vector<std::size_t>{0, 1}));
}

TEST(Ward, EquidistantTriple) {
  auto const d = ward_linkage(from_full({{0, 1, 1}, {1, 0, 1}, {1, 1, 0}}));
  ASSERT_EQ(d.merges.size(), 2U);
  EXPECT_EQ(d.merges[0].left, 0U);
  EXPECT_EQ(d.merges[0].right, 1U);
  EXPECT_DOUBLE_EQ(d.merges[0].height, 1.0);
  EXPECT_EQ(d.merges[1].left, 2U);
  EXPECT_EQ(d.merges[1].right, 3U);
  EXPECT_DOUBLE_EQ(d.merges[1].height, 1.0);
  EXPECT_EQ(d.merges[1].new_size, 3U);
}

TEST(Ward, MatchesNaiveReference) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 30; ++trial) {
    auto const n = 2 + rng() % 40;
    auto const full = random_points_matrix(rng, n);
    auto const d = ward_linkage(from_full(full));
    auto const ref = oracle::naive_ward(n, full);
    ASSERT_EQ(d.merges.size(), ref.size());
    for (std::size_t s = 0; s < ref.size(); ++s) {
      EXPECT_EQ(d.merges[s].left, ref[s].left) << "n=" << n << " step " << s;
      EXPECT_EQ(d.merges[s].right, ref[s].right) << "n=" << n << " step " << s;
      EXPECT_NEAR(d.merges[s].height, ref[s].height, 1e-9);
      EXPECT_EQ(d.merges[s].new_size, ref[s].size);
    }
  }
}

TEST(Ward, TiesMatchNaiveReference) {
  // small integer distances force many ties
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 30; ++trial) {
    auto const n = 3 + rng() % 12;
    std::vector<std::vector<double>> full(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        full[i][j] = full[j][i] = 1.0 + static_cast<double>(rng() % 2);
      }
    }
    auto const d = ward_linkage(from_full(full));
    auto const ref = oracle::naive_ward(n, full);
    for (std::size_t s = 0; s < ref.size(); ++s) {
      EXPECT_EQ(d.merges[s].left, ref[s].left);
      EXPECT_EQ(d.merges[s].right, ref[s].right);
      EXPECT_NEAR(d.merges[s].height, ref[s].height, 1e-9);
    }
  }
}

TEST(Ward, RejectsBadDistances) {
  auto m = from_full({{0, 1}, {1, 0}});
  m.values[0] = -1.0;
  EXPECT_THROW((void)ward_linkage(m), clustering_error);
  m.values[0] = std::nan("");
  EXPECT_THROW((void)ward_linkage(m), clustering_error);
}

TEST(Cut, ExtremesAndPartitionSizes) {
  std::mt19937_64 rng(23);
  auto const n = 25U;
  auto const d = ward_linkage(from_full(random_points_matrix(rng, n)));
  auto const one = cut(d, 1);
  EXPECT_TRUE(std::all_of(begin(one), end(one), [](auto l) { return l == 1; }));
  auto const all = cut(d, n);
  EXPECT_EQ(std::set<std::size_t>(begin(all), end(all)).size(), n);
  for (std::size_t k = 1; k <= n; ++k) {
    auto const labels = cut(d, k);
    std::set<std::size_t> const distinct(begin(labels), end(labels));
    EXPECT_EQ(distinct.size(), k);
    EXPECT_EQ(*distinct.begin(), 1U);
    EXPECT_EQ(*distinct.rbegin(), k);
  }
  EXPECT_THROW((void)cut(d, 0), clustering_error);
  EXPECT_THROW((void)cut(d, n + 1), clustering_error);
}

TEST(Cut, CutsAreNested) {
  std::mt19937_64 rng(24);
  auto const d = ward_linkage(from_full(random_points_matrix(rng, 30)));
  for (std::size_t k = 2; k <= 10; ++k) {
    auto const coarse = cut(d, k - 1);
    auto const fine = cut(d, k);
    for (std::size_t i = 0; i < 30; ++i) {
      for (std::size_t j = 0; j < 30; ++j) {
        if (fine[i] == fine[j]) {
          EXPECT_EQ(coarse[i], coarse[j]);
        }
      }
    }
  }
}

TEST(Cut, LabelsFollowLeafOrder) {
  std::mt19937_64 rng(25);
  auto const d = ward_linkage(from_full(random_points_matrix(rng, 20)));
  auto const labels = cut(d, 5);
  std::size_t next = 1;
  for (auto const leaf : d.leaf_order) {
    EXPECT_LE(labels[leaf], next);
    if (labels[leaf] == next) {
      ++next;
    }
  }
}

TEST(LeafOrder, IsPermutation) {
  std::mt19937_64 rng(26);
  auto const d = ward_linkage(from_full(random_points_matrix(rng, 17)));
  auto order = leaf_order(d.n_leaves, d.merges);
  EXPECT_EQ(order, d.leaf_order);
  std::sort(begin(order), end(order));
  for (std::size_t i = 0; i < order.size(); ++i) {
    EXPECT_EQ(order[i], i);
  }
}

TEST(Ari, KnownValues) {
  std::vector<std::size_t> const a{1, 1, 2, 2};
  std::vector<std::size_t> const relabeled{2, 2, 1, 1};
  std::vector<std::size_t> const split{1, 2, 1, 2};
  EXPECT_DOUBLE_EQ(adjusted_rand_index(a, a), 1.0);
  EXPECT_DOUBLE_EQ(adjusted_rand_index(a, relabeled), 1.0);
  EXPECT_DOUBLE_EQ(adjusted_rand_index(a, split), -0.5);
  // hand-computed: contingency [[2,1],[0,3]] over six items
  std::vector<std::size_t> const x{1, 1, 1, 2, 2, 2};
  std::vector<std::size_t> const y{1, 1, 2, 2, 2, 2};
  double const index = 1.0 + 3.0;
  double const sa = 3.0 + 3.0;
  double const sb = 1.0 + 6.0;
  double const expected = sa * sb / 15.0;
  EXPECT_NEAR(adjusted_rand_index(x, y),
              (index - expected) / (0.5 * (sa + sb) - expected), 1e-15);
  std::vector<std::size_t> const short_one{1};
  EXPECT_THROW((void)adjusted_rand_index(a, short_one), std::invalid_argument);
}

TEST(Profiles, SingleEdgeClusterIsItsFeature) {
  auto const s = binning_scheme::standard();
  std::vector<feature_matrix> const fs{point_mass("a", 11)};
  std::vector<std::size_t> const labels{1};
  auto const p = cluster_profiles(labels, fs, {}, s);
  ASSERT_EQ(p.size(), 1U);
  EXPECT_EQ(p[0].mean_matrix, fs[0].values);
  EXPECT_NEAR(p[0].p_no_change, 1.0, 1e-15);
  EXPECT_EQ(p[0].p_increase, 0.0);
  EXPECT_EQ(p[0].p_decrease, 0.0);
  EXPECT_FALSE(p[0].modes);
}

TEST(Profiles, PlantedSplit) {
  auto const s = binning_scheme::standard();
  // 60% centre, 26% one step up, 12% one step down, 2% far up
  feature_matrix f{.edge = {"a", "b"}, .support = 500, .rows = 23, .cols = 15, .values = {}};
  f.values.assign(345, 0.0);
  for (std::size_t c = 0; c < 15; ++c) {
    f.values[11 * 15 + c] = 0.60 / 15.0;
    f.values[12 * 15 + c] = 0.26 / 15.0;
    f.values[10 * 15 + c] = 0.12 / 15.0;
    f.values[20 * 15 + c] = 0.02 / 15.0;
  }
  auto g = f;
  g.edge = {"b", "c"};
  std::vector<feature_matrix> const fs{f, g, point_mass("x", 0)};
  std::vector<std::size_t> const labels{1, 1, 2};
  auto const p = cluster_profiles(labels, fs, {}, s);
  ASSERT_EQ(p.size(), 2U);
  EXPECT_NEAR(p[0].p_no_change, 0.60, 1e-12);
  EXPECT_NEAR(p[0].p_increase, 0.28, 1e-12);
  EXPECT_NEAR(p[0].p_decrease, 0.12, 1e-12);
  EXPECT_NEAR(p[0].p_no_change + p[0].p_increase + p[0].p_decrease, 1.0, 1e-12);
  EXPECT_EQ(p[0].dominant_bands(3), (std::vector<std::size_t>{11, 12, 10}));
  EXPECT_EQ(p[0].members.size(), 2U);
  EXPECT_NEAR(p[1].p_decrease, 1.0, 1e-12);
}

TEST(Profiles, ModesAndPooledSplit) {
  auto const s = binning_scheme::standard();
  std::vector<feature_matrix> const fs{point_mass("a", 11), point_mass("b", 11)};
  std::vector<edge_observations> groups(2);
  groups[0].edge = fs[0].edge;
  groups[1].edge = fs[1].edge;
  for (int i = 0; i < 3; ++i) {
    groups[0].events.push_back({.edge = fs[0].edge, .delay_delta_ms = 0, .type = vehicle_type::bus});
  }
  groups[1].events.push_back({.edge = fs[1].edge, .delay_delta_ms = 60000, .type = vehicle_type::tram});
  groups[1].events.push_back({.edge = fs[1].edge, .delay_delta_ms = 0, .type = vehicle_type::bus});
  auto const summaries = summarize_edges(groups, s);
  EXPECT_EQ(summaries[0].mode(), 'b');
  EXPECT_EQ(summaries[1].mode(), 'm');
  std::vector<std::size_t> const labels{1, 1};
  auto const p = cluster_profiles(labels, fs, summaries, s);
  ASSERT_TRUE(p[0].modes);
  EXPECT_EQ(p[0].modes->bus_edges, 1U);
  EXPECT_EQ(p[0].modes->mixed_edges, 1U);
  EXPECT_EQ(p[0].modes->bus_events, 4U);
  EXPECT_EQ(p[0].modes->tram_events, 1U);
  EXPECT_DOUBLE_EQ(*p[0].pooled_no_change, 0.8);
  EXPECT_DOUBLE_EQ(*p[0].pooled_increase, 0.2);
  std::vector<edge_summary> const partial{summaries[0]};
  EXPECT_THROW((void)cluster_profiles(labels, fs, partial, s), clustering_error);
}

TEST(DendrogramFile, RoundTrip) {
  testing_support::temp_dir dir;
  std::mt19937_64 rng(27);
  auto m = from_full(random_points_matrix(rng, 12));
  m.labels[3] = {"a,b", "c\"d"};
  auto const d = ward_linkage(m);
  write_dendrogram(dir / "d.csv", d);
  auto const back = read_dendrogram(dir / "d.csv");
  EXPECT_EQ(back.n_leaves, d.n_leaves);
  EXPECT_EQ(back.merges, d.merges);
  EXPECT_EQ(back.labels, d.labels);
  EXPECT_EQ(back.leaf_order, d.leaf_order);
  EXPECT_EQ(back.inversions, d.inversions);
}
