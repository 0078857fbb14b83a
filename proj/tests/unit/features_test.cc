#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "delayprof/features.h"

#include "temp_dir.h"

using namespace delayprof;

namespace {

delay_change_event event(std::int64_t delta_ms, std::string const& hms) {
  delay_change_event e;
  e.edge = {"A", "B"};
  e.delay_delta_ms = delta_ms;
  e.observed_at = civil_time::parse("2017-03-02 " + hms);
  return e;
}

count_grid full_grid(std::mt19937& rng, std::uint64_t max_count = 50) {
  count_grid g{23, 15};
  for (std::size_t c = 0; c < 15; ++c) {
    for (std::size_t r = 0; r < 23; ++r) {
      g.at(r, c) = rng() % 3 == 0 ? rng() % (max_count + 1) : 0;
    }
    g.at(rng() % 23, c) += 1 + rng() % max_count;
  }
  return g;
}

}  // namespace

TEST(Binning, StandardShape) {
  auto const s = binning_scheme::standard();
  EXPECT_EQ(s.delay_bins(), 23U);
  EXPECT_EQ(s.time_bins(), 15U);
  EXPECT_EQ(s.cells(), 345U);
  EXPECT_EQ(s.no_change_bin(), 11U);
  EXPECT_EQ(s.delay_label(11), "(-0.5,0.5]");
  EXPECT_EQ(s.delay_label(0), "(-inf,-30.5]");
  EXPECT_EQ(s.delay_label(22), "(30.5,inf]");
}

TEST(Binning, SpecificDeltas) {
  auto const s = binning_scheme::standard();
  EXPECT_EQ(delay_bin_index_ms(11000, s), s.no_change_bin());
  EXPECT_EQ(delay_bin_index(-0.5, s), 10U);
  EXPECT_EQ(s.delay_label(delay_bin_index(-0.5, s)), "(-1.5,-0.5]");
  EXPECT_EQ(delay_bin_index(-45.0, s), 0U);
  EXPECT_EQ(delay_bin_index(45.0, s), 22U);
  EXPECT_EQ(delay_bin_index_ms(-30000, s), 10U);
  EXPECT_EQ(delay_bin_index_ms(-29999, s), 11U);
  EXPECT_THROW((void)delay_bin_index(std::nan(""), s), std::invalid_argument);
}

TEST(Binning, EveryBoundaryFallsInTheBinBelow) {
  auto const s = binning_scheme::standard();
  auto const& b = s.delay_boundaries;
  for (std::size_t i = 0; i < b.size(); ++i) {
    auto const idx = delay_bin_index(b[i], s);
    EXPECT_EQ(idx, i) << b[i];
    EXPECT_EQ(s.upper(idx), b[i]);
    EXPECT_EQ(delay_bin_index(std::nextafter(b[i], 1e9), s), i + 1) << b[i];
  }
}

TEST(Binning, TimeBins) {
  auto const s = binning_scheme::standard();
  EXPECT_EQ(time_bin_index(civil_time::parse("2017-03-02 06:00:00"), s), 0U);
  EXPECT_EQ(time_bin_index(civil_time::parse("2017-03-02 20:59:59"), s), 14U);
  EXPECT_EQ(time_bin_index(civil_time::parse("2017-03-02 10:28:54"), s), 4U);
  EXPECT_THROW((void)time_bin_index(civil_time::parse("2017-03-02 21:00:00"), s),
               std::out_of_range);
  EXPECT_THROW((void)time_bin_index(civil_time::parse("2017-03-02 05:59:59"), s),
               std::out_of_range);
}

TEST(Binning, ValidationRejectsBadSchemes) {
  binning_scheme s = binning_scheme::standard();
  s.delay_boundaries[3] = s.delay_boundaries[2];
  EXPECT_THROW(s.validate(), std::invalid_argument);
  s = binning_scheme::standard();
  s.hour_bins = 20;
  EXPECT_THROW(s.validate(), std::invalid_argument);
}

TEST(Histogram, SingleEvent) {
  auto const s = binning_scheme::standard();
  edge_observations obs{{"A", "B"}, {event(60000, "07:30:00")}};
  auto const g = build_histogram(obs, s);
  EXPECT_EQ(g.total(), 1U);
  EXPECT_EQ(g.at(delay_bin_index(1.0, s), 1), 1U);
  EXPECT_EQ(s.delay_label(delay_bin_index(1.0, s)), "(0.5,1.5]");
}

TEST(Histogram, EmptyObservations) {
  auto const g = build_histogram({{"A", "B"}, {}}, binning_scheme::standard());
  EXPECT_EQ(g.rows, 23U);
  EXPECT_EQ(g.cols, 15U);
  EXPECT_EQ(g.total(), 0U);
}

TEST(Histogram, MatchesIndependentRecount) {
  auto const s = binning_scheme::standard();
  std::mt19937 rng(12);
  edge_observations obs{{"A", "B"}, {}};
  std::vector<std::vector<int>> expected(23, std::vector<int>(15, 0));
  auto const& b = s.delay_boundaries;
  for (int i = 0; i < 1000; ++i) {
    auto const delta = static_cast<std::int64_t>(rng() % 4'000'001) - 2'000'000;
    auto const secs = 6 * 3600 + static_cast<int>(rng() % (15 * 3600));
    auto const two = [](int v) { return (v < 10 ? "0" : "") + std::to_string(v); };
    obs.events.push_back(
        event(delta, two(secs / 3600) + ":" + two(secs / 60 % 60) + ":" + two(secs % 60)));
    // linear scan: first boundary at or above the delta
    auto const minutes = static_cast<double>(delta) / 60000.0;
    std::size_t row = b.size();
    for (std::size_t k = 0; k < b.size(); ++k) {
      if (minutes <= b[k]) {
        row = k;
        break;
      }
    }
    ++expected[row][static_cast<std::size_t>(secs / 3600 - 6)];
  }
  auto const g = build_histogram(obs, s);
  for (std::size_t r = 0; r < 23; ++r) {
    for (std::size_t c = 0; c < 15; ++c) {
      EXPECT_EQ(g.at(r, c), static_cast<std::uint64_t>(expected[r][c]));
    }
  }
}

TEST(Normalize, EmptyColumnRejected) {
  std::mt19937 rng(1);
  auto g = full_grid(rng);
  for (std::size_t r = 0; r < 23; ++r) {
    g.at(r, 7) = 0;
  }
  auto const n = normalize(g);
  EXPECT_FALSE(n.accepted());
  EXPECT_TRUE(n.values.empty());
  EXPECT_NE(n.reject_reason.find('7'), std::string::npos);
}

TEST(Normalize, CenterRowOnly) {
  count_grid g{23, 15};
  for (std::size_t c = 0; c < 15; ++c) {
    g.at(11, c) = 1 + c;
  }
  auto const n = normalize(g);
  ASSERT_TRUE(n.accepted());
  for (std::size_t r = 0; r < 23; ++r) {
    for (std::size_t c = 0; c < 15; ++c) {
      EXPECT_DOUBLE_EQ(n.values[r * 15 + c], r == 11 ? 1.0 / 15.0 : 0.0);
    }
  }
}

TEST(Normalize, RandomGridsColumnAndTotalMass) {
  std::mt19937 rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    auto const g = full_grid(rng);
    auto const n = normalize(g);
    ASSERT_TRUE(n.accepted());
    double total = 0.0;
    for (std::size_t c = 0; c < 15; ++c) {
      double col = 0.0;
      for (std::size_t r = 0; r < 23; ++r) {
        auto const v = n.values[r * 15 + c];
        EXPECT_GE(v, 0.0);
        // direct arithmetic: count / column total / 15
        EXPECT_NEAR(v,
                    static_cast<double>(g.at(r, c)) /
                        static_cast<double>(g.column_total(c)) / 15.0,
                    1e-15);
        col += v;
      }
      EXPECT_NEAR(col, 1.0 / 15.0, 1e-12);
      total += col;
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
}

TEST(Normalize, ColumnScalingIsBitExact) {
  std::mt19937 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    auto const g = full_grid(rng);
    auto scaled = g;
    for (std::size_t c = 0; c < 15; ++c) {
      auto const k = 1 + rng() % 1000;
      for (std::size_t r = 0; r < 23; ++r) {
        scaled.at(r, c) *= k;
      }
    }
    EXPECT_EQ(normalize(g).values, normalize(scaled).values);
  }
}

TEST(Featurize, SplitsAcceptedAndRejected) {
  auto const s = binning_scheme::standard();
  edge_observations full{{"A", "B"}, {}};
  for (int h = 6; h <= 20; ++h) {
    full.events.push_back(event(0, (h < 10 ? "0" : "") + std::to_string(h) + ":15:00"));
  }
  edge_observations gap{{"B", "C"}, {event(0, "07:00:00")}};
  std::vector<edge_observations> const gs{full, gap};
  auto const r = featurize(gs, s);
  ASSERT_EQ(r.accepted.size(), 1U);
  ASSERT_EQ(r.rejected.size(), 1U);
  EXPECT_EQ(r.accepted[0].edge, full.edge);
  EXPECT_EQ(r.accepted[0].support, 15U);
  EXPECT_EQ(r.rejected[0].edge, gap.edge);
  EXPECT_NEAR(r.accepted[0].row_mass(11), 1.0, 1e-15);
}

TEST(FeaturesFile, RoundTripIsExact) {
  testing_support::temp_dir dir;
  std::mt19937 rng(3);
  std::vector<feature_matrix> fs;
  for (int i = 0; i < 4; ++i) {
    auto const n = normalize(full_grid(rng));
    fs.push_back({.edge = {"S" + std::to_string(i), "T"},
                  .support = 10U + static_cast<std::size_t>(i),
                  .rows = 23,
                  .cols = 15,
                  .values = n.values});
  }
  write_features(dir / "f.csv", fs);
  auto const back = read_features(dir / "f.csv");
  ASSERT_EQ(back.size(), fs.size());
  for (std::size_t i = 0; i < fs.size(); ++i) {
    EXPECT_EQ(back[i].edge, fs[i].edge);
    EXPECT_EQ(back[i].support, fs[i].support);
    EXPECT_EQ(back[i].rows, 23U);
    EXPECT_EQ(back[i].cols, 15U);
    EXPECT_EQ(back[i].values, fs[i].values);
  }
}
