#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "vocl/eval/hungarian.hpp"
#include "vocl/eval/metrics.hpp"

using namespace vocl;
using eval::MaskSequence;

namespace {

MaskSequence seq(std::vector<int> labels, int h, int w, int t = 1, bool gt = false) {
  MaskSequence m;
  m.labels = std::move(labels);
  m.length = t;
  m.height = h;
  m.width = w;
  m.source = gt ? eval::MaskSource::ground_truth : eval::MaskSource::prediction;
  return m;
}

MaskSequence relabel(MaskSequence m, const std::map<int, int>& map) {
  for (int& l : m.labels) l = map.at(l);
  return m;
}

}  // namespace

TEST(Ari, MatchesPairCountingOracle) {
  Rng rng = make_rng(11, "ari");
  for (int i = 0; i < 200; ++i) {
    const auto [p, g] = oracle::random_pair(rng);
    for (bool fg : {false, true}) {
      const auto a = eval::ari(p, g, fg), b = oracle::ari(p, g, fg);
      ASSERT_EQ(a.has_value(), b.has_value());
      if (a) {
        EXPECT_NEAR(*a, *b, 1e-9) << "pair " << i;
      }
    }
  }
}

TEST(Ari, IdenticalPartitionsScoreOne) {
  const auto g = seq({0, 0, 1, 1, 2, 2}, 2, 3, 1, true);
  const auto p = seq({3, 3, 1, 1, 2, 2}, 2, 3);
  EXPECT_DOUBLE_EQ(*eval::ari(p, g, false), 1.0);
}

TEST(Ari, SymmetricInArguments) {
  Rng rng = make_rng(3, "sym");
  for (int i = 0; i < 50; ++i) {
    const auto [p, g] = oracle::random_pair(rng);
    EXPECT_NEAR(*eval::ari(p, g, false), *eval::ari(g, p, false), 1e-12);
  }
}

TEST(Ari, ForegroundOnlyEmptyIsNotApplicable) {
  const auto g = seq({0, 0, 0, 0}, 2, 2, 1, true);
  const auto p = seq({1, 2, 1, 2}, 2, 2);
  EXPECT_FALSE(eval::ari(p, g, true).has_value());
  EXPECT_FALSE(eval::mbo(p, g).has_value());
  EXPECT_FALSE(eval::miou(p, g).has_value());
}

TEST(Ari, SingleClusterBothSidesIsOne) {
  const auto g = seq({1, 1, 1, 1}, 2, 2, 1, true);
  const auto p = seq({4, 4, 4, 4}, 2, 2);
  EXPECT_DOUBLE_EQ(*eval::ari(p, g, false), 1.0);
}

TEST(Ari, WholeClipScoringPenalisesIdentitySwaps) {
  // Frame 2 swaps the two predicted labels: per-frame ARI is perfect, clip ARI is not.
  const auto g = seq({1, 1, 2, 2, 1, 1, 2, 2}, 2, 2, 2, true);
  const auto p = seq({1, 1, 2, 2, 2, 2, 1, 1}, 2, 2, 2);
  EXPECT_DOUBLE_EQ(*eval::ari_per_frame(p, g, true), 1.0);
  EXPECT_LT(*eval::ari(p, g, true), 0.5);
}

TEST(Miou, MatchesExhaustivePermutationOracle) {
  Rng rng = make_rng(12, "miou");
  for (int i = 0; i < 200; ++i) {
    const auto [p, g] = oracle::random_pair(rng);
    const auto a = eval::miou(p, g), b = oracle::miou(p, g);
    ASSERT_EQ(a.has_value(), b.has_value());
    if (a) {
      EXPECT_NEAR(*a, *b, 1e-9) << "pair " << i;
    }
  }
}

TEST(Miou, PerfectAndRelabelInvariant) {
  const auto g = seq({0, 1, 1, 2, 2, 3}, 2, 3, 1, true);
  const auto p = seq({4, 1, 1, 2, 2, 3}, 2, 3);
  EXPECT_DOUBLE_EQ(*eval::miou(p, g), 1.0);
  const auto q = relabel(p, {{1, 2}, {2, 1}, {3, 4}, {4, 3}});
  EXPECT_DOUBLE_EQ(*eval::miou(q, g), 1.0);
  EXPECT_DOUBLE_EQ(*eval::mbo(q, g), *eval::mbo(p, g));
  EXPECT_DOUBLE_EQ(*eval::ari(q, g, true), *eval::ari(p, g, true));
}

TEST(Miou, UnmatchedInstancesScoreZero) {
  // Two instances but a single predicted label: one instance goes unmatched.
  const auto g = seq({1, 1, 2, 2}, 2, 2, 1, true);
  const auto p = seq({1, 1, 1, 1}, 2, 2);
  EXPECT_DOUBLE_EQ(*eval::miou(p, g), 0.25);
  EXPECT_DOUBLE_EQ(*eval::mbo(p, g), 0.5);
}

TEST(Mbo, NotSymmetric) {
  const auto a = seq({1, 2, 3, 3}, 2, 2, 1, true);
  const auto b = seq({1, 1, 2, 2}, 2, 2, 1, true);
  EXPECT_NE(*eval::mbo(a, b), *eval::mbo(b, a));
  EXPECT_NE(*eval::miou(seq({1, 1, 1, 1}, 2, 2), a), *eval::miou(a, seq({1, 1, 1, 1}, 2, 2, 1, true)));
}

TEST(Metrics, ShapeMismatchThrows) {
  const auto g = seq({0, 1, 1, 0}, 2, 2, 1, true);
  const auto p = seq({1, 1, 1}, 1, 3);
  EXPECT_THROW(eval::ari(p, g, false), ShapeError);
  EXPECT_THROW(eval::miou(p, g), ShapeError);
}

TEST(Metrics, NearestUpsampling) {
  const auto m = seq({1, 2, 3, 4}, 2, 2);
  const auto u = eval::upsample_nearest(m, 4, 4);
  const std::vector<int> want{1, 1, 2, 2, 1, 1, 2, 2, 3, 3, 4, 4, 3, 3, 4, 4};
  EXPECT_EQ(u.labels, want);
}

TEST(Hungarian, MatchesBruteForceOnRectangularMatrices) {
  Rng rng = make_rng(5, "hung");
  for (int trial = 0; trial < 100; ++trial) {
    const int r = uniform_int(rng, 1, 4), c = uniform_int(rng, 1, 5);
    Matrix w(r, c);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = uniform_real(rng, 0, 1);
    const auto match = eval::hungarian_max(w);
    double got = 0;
    std::set<int> used;
    for (int i = 0; i < r; ++i)
      if (match[i] >= 0) {
        got += w(i, match[i]);
        EXPECT_TRUE(used.insert(match[i]).second);
      }
    std::vector<int> cols(std::max(r, c));
    std::iota(cols.begin(), cols.end(), 0);
    double best = 0;
    do {
      double s = 0;
      for (int i = 0; i < r; ++i)
        if (cols[i] < c) s += w(i, cols[i]);
      best = std::max(best, s);
    } while (std::next_permutation(cols.begin(), cols.end()));
    EXPECT_NEAR(got, best, 1e-12);
  }
}
