#include "trajviz/analytics.hpp"

#include "fixtures.hpp"

#include <gmock/gmock.h>

#include <cmath>

using namespace trajviz;
using fixtures::random_series;
using fixtures::series_from;

namespace {

// Three orthogonal axes at t=0 (every cosine is 0, ranks fall back to ids);
// at t=1 c tilts towards b, which reverses every node's ranking.
EmbeddingSeries swap_fixture() {
  oracle::Series s(2);
  s[0] = {{0, {1, 0, 0}}, {1, {0, 1, 0}}, {2, {0, 0, 1}}};
  s[1] = {{0, {1, 0, 0}}, {1, {0, 1, 0}}, {2, {0.6, 0.8, 0}}};
  return series_from(s, 3);
}

MetricConfig depth(std::size_t n, std::size_t m) {
  MetricConfig c;
  c.n = n;
  c.m = m;
  return c;
}

std::vector<NodeId> random_permutation(SplitMix64& rng, std::size_t n) {
  std::vector<NodeId> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = static_cast<NodeId>(i);
  rng.shuffle(std::span(v));
  return v;
}

}  // namespace

// --- list-level ------------------------------------------------------------------

TEST(ListMetrics, JaccardExamples) {
  const std::vector<NodeId> abc{0, 1, 2}, bcd{1, 2, 3}, xyz{7, 8, 9};
  EXPECT_EQ(jaccard_index(abc, abc), 1.0);
  EXPECT_EQ(jaccard_index(abc, bcd), 0.5);
  EXPECT_EQ(jaccard_index(abc, xyz), 0.0);
}

TEST(ListMetrics, RboExamples) {
  const std::vector<NodeId> abc{0, 1, 2}, acb{0, 2, 1}, xyz{7, 8, 9};
  const auto same = rank_biased_overlap(abc, abc, 3, 0.9);
  EXPECT_NEAR(same.raw, 0.271, 1e-12);
  EXPECT_NEAR(same.normalized, 1.0, 1e-12);
  EXPECT_NEAR(rank_biased_overlap(abc, acb, 3, 0.9).raw, 0.226, 1e-12);
  const auto none = rank_biased_overlap(abc, xyz, 3, 0.9);
  EXPECT_EQ(none.raw, 0.0);
  EXPECT_EQ(none.normalized, 0.0);
}

TEST(ListMetrics, ArcExamples) {
  const std::vector<NodeId> bc{1, 2}, cb{2, 1};
  EXPECT_EQ(average_rank_change(bc, bc, 3), 0.0);
  EXPECT_NEAR(average_rank_change(bc, cb, 3), 2.0 / 3.0, 1e-15);
  EXPECT_THROW(average_rank_change(bc, std::vector<NodeId>{1}, 3), ValidationError);
}

TEST(ListMetrics, FullReversalMatchesRankDifferenceOracle) {
  for (std::size_t len = 1; len < 30; ++len) {
    std::vector<NodeId> fwd(len), rev(len);
    for (std::size_t k = 0; k < len; ++k) fwd[k] = rev[len - 1 - k] = static_cast<NodeId>(k + 1);
    double diff = 0;
    for (std::size_t k = 0; k < len; ++k) diff += std::fabs(static_cast<double>(len - 1 - k) - static_cast<double>(k));
    EXPECT_NEAR(average_rank_change(fwd, rev, len + 1), diff / static_cast<double>(len + 1), 1e-12);
  }
}

TEST(ListMetrics, BoundsIdentityAndSymmetry) {
  SplitMix64 rng(1);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t universe = 2 + rng.below(30);
    const auto a = random_permutation(rng, universe);
    const auto b = random_permutation(rng, universe);
    const std::size_t m = 1 + rng.below(universe);
    const double p = 0.05 + 0.9 * rng.uniform();
    const std::span<const NodeId> pa(a.data(), m), pb(b.data(), m);

    const double j = jaccard_index(pa, pb);
    EXPECT_GE(j, 0.0);
    EXPECT_LE(j, 1.0);
    EXPECT_EQ(j, jaccard_index(pb, pa));

    const auto r = rank_biased_overlap(a, b, m, p);
    EXPECT_GE(r.raw, 0.0);
    EXPECT_LE(r.raw, 1.0 - std::pow(p, static_cast<double>(m)) + 1e-15);
    EXPECT_GE(r.normalized, 0.0);
    EXPECT_LE(r.normalized, 1.0 + 1e-12);
    EXPECT_NEAR(r.raw, rank_biased_overlap(b, a, m, p).raw, 1e-15);
    EXPECT_NEAR(r.raw, oracle::rbo_raw({a.begin(), a.end()}, {b.begin(), b.end()}, m, p), 1e-12);

    const auto self = rank_biased_overlap(a, a, m, p);
    EXPECT_NEAR(self.normalized, 1.0, 1e-12);
    EXPECT_NEAR(self.raw, 1.0 - std::pow(p, static_cast<double>(m)), 1e-12);
    EXPECT_EQ(jaccard_index(pa, pa), 1.0);

    EXPECT_EQ(average_rank_change(a, a, universe + 1), 0.0);
    EXPECT_GE(average_rank_change(a, b, universe + 1), 0.0);
    EXPECT_EQ(average_rank_change(a, b, universe + 1), average_rank_change(b, a, universe + 1));
  }
}

TEST(ListMetrics, RboEmphasisesTopRanksMoreAsDampingFalls) {
  // Agreement only at the top: lower p puts more weight there.
  const std::vector<NodeId> a{0, 1, 2, 3, 4, 5}, b{0, 9, 8, 7, 6, 5};
  double prev = 1.0 + 1e-12;
  for (double p : {0.1, 0.3, 0.5, 0.7, 0.9, 0.99}) {
    const double r = rank_biased_overlap(a, b, 6, p).normalized;
    EXPECT_LE(r, prev);
    prev = r;
  }
}

TEST(ListMetrics, ConfigValidation) {
  EXPECT_NO_THROW(MetricConfig{}.validate());
  EXPECT_THROW(depth(0, 3).validate(), UsageError);
  auto c = depth(3, 3);
  c.p = 1.0;
  EXPECT_THROW(c.validate(), UsageError);
  EXPECT_THROW(parse_neighbor_space("latent"), UsageError);
  EXPECT_EQ(parse_movement_variant("unit_normalized"), MovementVariant::unit_normalized);
}

// --- node-level --------------------------------------------------------------------

TEST(NodeMetrics, SwapFixture) {
  const auto ps = PointSeries::from_embeddings(swap_fixture());
  for (NodeId i = 0; i < 3; ++i) EXPECT_NEAR(arc(ps, i, 1), 2.0 / 3.0, 1e-15) << i;
  EXPECT_NEAR(narc(ps), 1.0, 1e-12);
  EXPECT_EQ(ranked_neighbors(ps, 0, 0, 2).neighbors, (std::vector<NodeId>{1, 2}));
  EXPECT_EQ(ranked_neighbors(ps, 0, 1, 2).neighbors, (std::vector<NodeId>{2, 1}));
  EXPECT_EQ(jaccard_n(ps, 0, 1, 2), 1.0);
  EXPECT_EQ(jaccard_n(ps, 0, 1, 1), 0.0);
}

TEST(NodeMetrics, DepthAndPresenceErrors) {
  const auto ps = PointSeries::from_embeddings(swap_fixture());
  EXPECT_THROW(rbo(ps, 0, 3, 1, 0.9), ValidationError);  // only two other common nodes
  EXPECT_THROW(jaccard_n(ps, 0, 0, 1), ValidationError);
  EXPECT_THROW(ranked_neighbors(ps, 0, 0, 3), ValidationError);
  oracle::Series s(2);
  s[0] = {{0, {1, 0}}, {1, {0, 1}}};
  s[1] = {{1, {0, 1}}, {2, {1, 1}}};
  const auto gap = PointSeries::from_embeddings(series_from(s, 3));
  EXPECT_THROW(arc(gap, 0, 1), ValidationError);
  EXPECT_THROW(narc(gap), ValidationError);
}

TEST(Movement, ThreeFourFive) {
  oracle::Series s(2);
  s[0] = {{0, {0, 0}}};
  s[1] = {{0, {3, 4}}};
  const auto r = movement_lp(PointSeries::from_embeddings(series_from(s, 1)));
  EXPECT_EQ(r.l2, 5.0);
  EXPECT_EQ(r.l1, 7.0);
  ASSERT_EQ(r.per_node.size(), 1u);
  EXPECT_EQ(r.per_node[0].t, 1u);
}

TEST(Movement, SkipsTransitionsWithoutCommonNodes) {
  oracle::Series s(3);
  s[0] = {{0, {0, 0}}};
  s[1] = {{1, {5, 5}}};
  s[2] = {{1, {5, 6}}};
  const auto r = movement_lp(PointSeries::from_embeddings(series_from(s, 2)));
  EXPECT_EQ(r.l2, 1.0);
  EXPECT_EQ(r.l1, 1.0);
}

TEST(Movement, UnitNormalisedIgnoresPositiveRescaling) {
  SplitMix64 rng(2);
  const auto s = random_series(rng, 20, 4, 5, 0.8, 5);
  const auto series = series_from(s, 20);
  auto scaled = s;
  for (auto& snap : scaled)
    for (auto& [id, v] : snap) {
      const double k = 0.1 + 10 * rng.uniform();
      for (auto& x : v) x *= k;
    }
  const auto a = movement_lp(series, nullptr, MovementVariant::unit_normalized);
  const auto b = movement_lp(series_from(scaled, 20), nullptr, MovementVariant::unit_normalized);
  EXPECT_NEAR(a.l1, b.l1, 1e-12);
  EXPECT_NEAR(a.l2, b.l2, 1e-12);
  EXPECT_THROW(movement_lp(series, nullptr, MovementVariant::projected), UsageError);
}

// --- whole-series -------------------------------------------------------------------

TEST(Report, ConstantSeriesShowsNoChange) {
  SplitMix64 rng(3);
  auto s = random_series(rng, 12, 1, 4, 1.0, 12);
  s.push_back(s[0]);
  s.push_back(s[0]);
  const auto rep = compute_report(series_from(s, 12), nullptr, depth(5, 5));
  EXPECT_EQ(rep.transitions, 2u);
  EXPECT_EQ(rep.rows.size(), 24u);
  for (const auto& r : rep.rows) {
    EXPECT_EQ(r.jaccard, 1.0);
    EXPECT_NEAR(r.rbo_normalized, 1.0, 1e-12);
    EXPECT_EQ(r.arc, 0.0);
    EXPECT_EQ(r.l2, 0.0);
  }
  EXPECT_EQ(rep.narc, 0.0);
  EXPECT_NEAR(rep.macro_rbo_normalized, 1.0, 1e-12);
  EXPECT_NEAR(rep.macro_rbo_raw, 1.0 - std::pow(0.9, 5), 1e-12);
  EXPECT_EQ(rep.l1, 0.0);
}

TEST(Report, MatchesBruteForceOracle) {
  SplitMix64 rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t N = 6 + rng.below(45), T = 2 + rng.below(5), d = 2 + rng.below(6);
    const auto s = random_series(rng, N, T, d, 0.5 + 0.5 * rng.uniform(), 5);
    MetricConfig cfg = depth(1 + rng.below(4), 1 + rng.below(4));
    cfg.p = 0.5 + 0.45 * rng.uniform();
    const auto rep = compute_report(series_from(s, N), nullptr, cfg);
    const auto expect = oracle::brute_force(s, cfg.n, cfg.m, cfg.p, true);
    ASSERT_EQ(rep.rows.size(), expect.rows.size()) << "trial " << trial;
    for (std::size_t k = 0; k < rep.rows.size(); ++k) {
      const auto& a = rep.rows[k];
      const auto& b = expect.rows[k];
      ASSERT_EQ(a.node, b.node);
      ASSERT_EQ(a.t, b.t);
      EXPECT_NEAR(a.jaccard, b.jaccard, 1e-12);
      EXPECT_NEAR(a.rbo_raw, b.rbo_raw, 1e-12);
      EXPECT_NEAR(a.rbo_normalized, b.rbo_norm, 1e-12);
      EXPECT_NEAR(a.arc, b.arc, 1e-12);
      EXPECT_NEAR(a.l1, b.l1, 1e-12);
      EXPECT_NEAR(a.l2, b.l2, 1e-12);
    }
    EXPECT_NEAR(rep.narc, expect.narc, 1e-12);
    EXPECT_NEAR(rep.macro_rbo_raw, expect.macro_raw, 1e-12);
    EXPECT_NEAR(rep.macro_rbo_normalized, expect.macro_norm, 1e-12);
    EXPECT_NEAR(rep.l1, expect.l1, 1e-12);
    EXPECT_NEAR(rep.l2, expect.l2, 1e-12);
  }
}

TEST(Report, MacroRboIsMeanOfNodeValues) {
  SplitMix64 rng(5);
  const auto s = random_series(rng, 15, 4, 6, 0.85, 6);
  const auto ps = PointSeries::from_embeddings(series_from(s, 15));
  double total_raw = 0, total_norm = 0;
  for (std::size_t t = 1; t < 4; ++t) {
    const auto c = ps.common(t);
    double raw = 0, norm = 0;
    for (auto i : c) {
      const auto r = rbo(ps, i, 4, t, 0.9);
      raw += r.raw;
      norm += r.normalized;
    }
    total_raw += raw / static_cast<double>(c.size());
    total_norm += norm / static_cast<double>(c.size());
  }
  const auto macro = macro_rbo(ps, 4, 0.9);
  EXPECT_NEAR(macro.raw, total_raw / 3, 1e-12);
  EXPECT_NEAR(macro.normalized, total_norm / 3, 1e-12);
}

TEST(Report, SingleTransitionMacroEqualsNodeRbo) {
  oracle::Series s(2);
  s[0] = {{0, {1, 0}}, {1, {0, 1}}, {2, {1, 1}}};
  s[1] = {{0, {1, 0}}, {1, {1, 0.1}}, {2, {0, 1}}};
  const auto ps = PointSeries::from_embeddings(series_from(s, 3));
  double raw = 0;
  for (NodeId i = 0; i < 3; ++i) raw += rbo(ps, i, 2, 1, 0.9).raw;
  EXPECT_NEAR(macro_rbo(ps, 2, 0.9).raw, raw / 3, 1e-15);
}

TEST(Report, ProjectedSpaceUsesEuclideanRanking) {
  TrajectorySet set;
  set.labels = {"a", "b", "c"};
  set.points = {{{0, 0, 0}, {1, 0, 0}}, {{0, 1, 0}, {1, 3, 0}}, {{0, 3, 0}, {1, 1, 0}}};
  const auto ps = PointSeries::from_trajectories(set);
  EXPECT_EQ(ps.metric(), PointSeries::Metric::euclidean);
  EXPECT_EQ(ranked_neighbors(ps, 0, 0, 2).neighbors, (std::vector<NodeId>{1, 2}));
  EXPECT_EQ(ranked_neighbors(ps, 0, 1, 2).neighbors, (std::vector<NodeId>{2, 1}));
  oracle::Series s(2);
  for (std::size_t t = 0; t < 2; ++t)
    for (unsigned i = 0; i < 3; ++i) s[t][i] = {set.points[i][t].x, set.points[i][t].y};
  EXPECT_NEAR(narc(ps), oracle::brute_force(s, 1, 1, 0.9, false).narc, 1e-12);
}

TEST(Report, SummaryJsonCarriesScalars) {
  const auto rep = compute_report(swap_fixture(), nullptr, depth(1, 1));
  const auto j = rep.summary_json();
  EXPECT_NEAR(j.at("narc").get<double>(), 1.0, 1e-12);
  for (const char* key : {"macro_rbo_raw", "macro_rbo_normalized", "L1", "L2"}) EXPECT_TRUE(j.contains(key)) << key;
  EXPECT_EQ(j.at("config_fingerprint").get<std::string>(), rep.config.fingerprint());
}
