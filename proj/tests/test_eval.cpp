#include <gtest/gtest.h>

#include <algorithm>
#include <functional>
#include <random>
#include <set>

#include "mgtad/eval.hpp"

using namespace mgtad;

namespace {

Detection det(double s, double e, int label, double score) { return {s, e, label, score}; }
ActionInstance gt(double s, double e, int label) { return {s, e, label, false}; }

/// Maximum number of disjoint eligible (same label, tIoU >= thr) pairs by
/// exhaustive search over assignments.
std::size_t max_matching(const std::vector<Detection>& preds, const std::vector<ActionInstance>& gts,
                         double thr) {
  std::vector<bool> used(gts.size(), false);
  std::function<std::size_t(std::size_t)> go = [&](std::size_t p) -> std::size_t {
    if (p == preds.size()) return 0;
    std::size_t best = go(p + 1);
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (used[g] || gts[g].label != preds[p].label) continue;
      if (tiou(preds[p].interval(), gts[g].interval()) < thr) continue;
      used[g] = true;
      best = std::max(best, 1 + go(p + 1));
      used[g] = false;
    }
    return best;
  };
  return go(0);
}

struct Case {
  std::vector<Detection> preds;
  std::vector<ActionInstance> gts;
};

/// Up to 6 ground truths on a short timeline; predictions are jittered copies
/// of ground truths or background boxes.
Case random_case(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> count(1, 6), label(0, 1);
  std::uniform_real_distribution<double> pos(0.0, 20.0), len(0.5, 4.0), jitter(-0.8, 0.8),
      score(0.0, 1.0), coin(0.0, 1.0);
  Case c;
  const int ng = count(rng), np = count(rng);
  for (int i = 0; i < ng; ++i) {
    const double s = pos(rng);
    c.gts.push_back(gt(s, s + len(rng), label(rng)));
  }
  for (int i = 0; i < np; ++i) {
    double s, e;
    int l;
    if (coin(rng) < 0.7) {
      const auto& g = c.gts[std::uniform_int_distribution<std::size_t>(0, c.gts.size() - 1)(rng)];
      s = g.start_s + jitter(rng);
      e = std::max(s + 0.2, g.end_s + jitter(rng));
      l = coin(rng) < 0.9 ? g.label : 1 - g.label;
    } else {
      s = pos(rng);
      e = s + len(rng);
      l = label(rng);
    }
    c.preds.push_back(det(s, e, l, score(rng)));
  }
  return c;
}

void expect_valid(const MatchResult& m, const std::vector<Detection>& preds,
                  const std::vector<ActionInstance>& gts, double thr) {
  std::set<std::size_t> ps, gs;
  for (const auto& pr : m.pairs) {
    EXPECT_TRUE(ps.insert(pr.pred).second);
    EXPECT_TRUE(gs.insert(pr.gt).second);
    EXPECT_EQ(preds[pr.pred].label, gts[pr.gt].label);
    EXPECT_GE(pr.tiou, thr);
  }
  EXPECT_EQ(m.pairs.size() + m.unmatched_preds.size(), preds.size());
  EXPECT_EQ(m.pairs.size() + m.unmatched_gts.size(), gts.size());
  for (std::size_t p : m.unmatched_preds) EXPECT_EQ(ps.count(p), 0u);
  for (std::size_t g : m.unmatched_gts) EXPECT_EQ(gs.count(g), 0u);
}

}  // namespace

TEST(Tiou, Examples) {
  EXPECT_EQ(tiou({0, 2}, {0, 2}), 1.0);
  EXPECT_EQ(tiou({0, 2}, {2, 4}), 0.0);
  EXPECT_DOUBLE_EQ(tiou({0, 2}, {1, 3}), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(tiou({0, 4}, {1, 2}), 0.25);
}

TEST(Tiou, DegenerateRejected) {
  EXPECT_THROW(tiou({1, 1}, {0, 2}), std::invalid_argument);
  EXPECT_THROW(tiou({0, 2}, {3, 2}), std::invalid_argument);
}

TEST(Tiou, SymmetricAndBounded) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  for (int i = 0; i < 500; ++i) {
    const double a = u(rng), b = u(rng), c = u(rng), d = u(rng);
    const Interval x{std::min(a, b), std::max(a, b) + 1e-3}, y{std::min(c, d), std::max(c, d) + 1e-3};
    const double v = tiou(x, y);
    EXPECT_EQ(v, tiou(y, x));
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
    EXPECT_EQ(v == 0.0, std::min(x.end, y.end) <= std::max(x.start, y.start));
  }
}

TEST(Match, ExactPredictionsAllMatch) {
  const std::vector<ActionInstance> gts{gt(0, 1, 0), gt(2, 4, 1), gt(5, 6, 0)};
  std::vector<Detection> preds;
  for (const auto& g : gts) preds.push_back(det(g.start_s, g.end_s, g.label, 1.0));
  const auto m = match(preds, gts);
  EXPECT_EQ(m.pairs.size(), 3u);
  const Prf1 r = prf1(m, preds.size(), gts.size());
  EXPECT_EQ(r.precision, 1.0);
  EXPECT_EQ(r.recall, 1.0);
  EXPECT_EQ(r.f1, 1.0);
}

TEST(Match, PrefersHigherTiou) {
  // [1,3] vs [0,2]: 1/3; vs [1.5,3.5]: 1.5/2.5 = 0.6
  const std::vector<ActionInstance> gts{gt(0, 2, 0), gt(1.5, 3.5, 0)};
  const auto m = match({det(1, 3, 0, 0.9)}, gts, 0.3);
  ASSERT_EQ(m.pairs.size(), 1u);
  EXPECT_EQ(m.pairs[0].gt, 1u);
  EXPECT_DOUBLE_EQ(m.pairs[0].tiou, 0.6);
  EXPECT_EQ(m.unmatched_gts, std::vector<std::size_t>{0});
}

TEST(Match, WrongLabelUnmatched) {
  const auto m = match({det(0, 2, 1, 0.9)}, {gt(0, 2, 0)});
  EXPECT_TRUE(m.pairs.empty());
  EXPECT_EQ(m.unmatched_preds, std::vector<std::size_t>{0});
  EXPECT_EQ(m.unmatched_gts, std::vector<std::size_t>{0});
}

TEST(Match, HigherScoreClaimsFirst) {
  // both preds want the only gt; the higher score wins even with lower tIoU
  const std::vector<Detection> preds{det(0, 2, 0, 0.5), det(0.2, 2, 0, 0.9)};
  const auto m = match(preds, {gt(0, 2, 0)});
  ASSERT_EQ(m.pairs.size(), 1u);
  EXPECT_EQ(m.pairs[0].pred, 1u);
  EXPECT_EQ(m.unmatched_preds, std::vector<std::size_t>{0});
}

TEST(Match, ThresholdIsInclusive) {
  // [0,2] vs [1,3] has tIoU exactly 1/3
  EXPECT_EQ(match({det(0, 2, 0, 1)}, {gt(1, 3, 0)}, 1.0 / 3.0).pairs.size(), 1u);
  EXPECT_TRUE(match({det(0, 2, 0, 1)}, {gt(1, 3, 0)}, 0.34).pairs.empty());
}

TEST(Prf1, HandComputed) {
  // P = 14/35 = 0.4, R = 14/40 = 0.35, F1 = 0.28 / 0.75
  const Prf1 r = prf1(14, 35, 40);
  EXPECT_NEAR(r.precision, 0.4, 1e-12);
  EXPECT_NEAR(r.recall, 0.35, 1e-12);
  EXPECT_NEAR(r.f1, 0.28 / 0.75, 1e-12);
  EXPECT_NEAR(prf1(3, 5, 5).f1, 0.6, 1e-12);
}

TEST(Prf1, UndefinedCases) {
  const Prf1 no_gt = prf1(0, 4, 0);
  EXPECT_FALSE(no_gt.recall_defined);
  EXPECT_TRUE(no_gt.precision_defined);
  EXPECT_EQ(no_gt.f1, 0.0);
  const Prf1 no_pred = prf1(0, 0, 4);
  EXPECT_FALSE(no_pred.precision_defined);
  EXPECT_EQ(no_pred.recall, 0.0);
  EXPECT_EQ(no_pred.f1, 0.0);
  EXPECT_EQ(prf1(0, 3, 3).f1, 0.0);
  EXPECT_THROW(prf1(4, 3, 5), std::invalid_argument);
  EXPECT_THROW(prf1(4, 5, 3), std::invalid_argument);
}

TEST(Match, PermutationInvariant) {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 200; ++i) {
    Case c = random_case(rng);
    const auto base = match(c.preds, c.gts);
    std::vector<std::size_t> perm(c.preds.size());
    for (std::size_t k = 0; k < perm.size(); ++k) perm[k] = k;
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<Detection> shuffled;
    for (std::size_t k : perm) shuffled.push_back(c.preds[k]);
    const auto other = match(shuffled, c.gts);
    ASSERT_EQ(base.pairs.size(), other.pairs.size());
    for (std::size_t k = 0; k < base.pairs.size(); ++k) {
      EXPECT_EQ(base.pairs[k].pred, perm[other.pairs[k].pred]);
      EXPECT_EQ(base.pairs[k].gt, other.pairs[k].gt);
    }
  }
}

TEST(Match, GreedyAgainstExhaustiveOracle) {
  std::mt19937_64 rng(2024);
  int equal = 0;
  for (int i = 0; i < 1000; ++i) {
    const Case c = random_case(rng);
    const auto m = match(c.preds, c.gts);
    expect_valid(m, c.preds, c.gts, 0.5);
    const std::size_t best = max_matching(c.preds, c.gts, 0.5);
    ASSERT_LE(m.pairs.size(), best);
    equal += m.pairs.size() == best;
    const Prf1 r = prf1(m, c.preds.size(), c.gts.size());
    EXPECT_GE(r.f1, 0.0);
    EXPECT_LE(r.f1, 1.0);
  }
  EXPECT_GE(equal, 950);
}

TEST(Evaluate, IgnoresDuplicateCopiesAndCountsUnknownVideos) {
  VideoAnnotation a{"a", 28, 4, 10, {gt(0, 2, 0), gt(3, 5, 1)}};
  a.instances.push_back({0, 2, 0, true});
  const VideoAnnotation b{"b", 28, 4, 10, {gt(1, 2, 1)}};
  DetectionSet preds;
  preds["a"] = {det(0, 2, 0, 0.9), det(0.1, 2, 0, 0.8)};
  preds["c"] = {det(0, 1, 1, 0.5)};
  const EvalReport rep = evaluate(preds, {a, b});
  EXPECT_EQ(rep.total.gts, 3u);
  EXPECT_EQ(rep.total.preds, 3u);
  EXPECT_EQ(rep.total.matched, 1u);
  EXPECT_NEAR(rep.overall.precision, 1.0 / 3.0, 1e-12);
  EXPECT_NEAR(rep.overall.recall, 1.0 / 3.0, 1e-12);
  EXPECT_EQ(rep.per_class.at(1).gts, 2u);
  EXPECT_EQ(rep.per_class.at(1).preds, 1u);

  EXPECT_THROW(evaluate(preds, {a, a}), std::invalid_argument);
}

TEST(Evaluate, ReportJsonInPercent) {
  const VideoAnnotation a{"a", 28, 4, 10, {gt(0, 2, 0), gt(3, 5, 0)}};
  DetectionSet preds;
  preds["a"] = {det(0, 2, 0, 0.9)};
  const auto j = report_json(evaluate(preds, {a}));
  EXPECT_DOUBLE_EQ(j["overall"]["precision"].get<double>(), 100.0);
  EXPECT_DOUBLE_EQ(j["overall"]["recall"].get<double>(), 50.0);
  EXPECT_NEAR(j["overall"]["f1"].get<double>(), 200.0 / 3.0, 1e-9);
  ASSERT_EQ(j["pairs"].size(), 1u);
  EXPECT_EQ(j["pairs"][0]["video_id"], "a");
  EXPECT_DOUBLE_EQ(j["pairs"][0]["tiou"].get<double>(), 1.0);
  EXPECT_EQ(j["per_class"][0]["ground_truth"], 2);

  const auto empty = report_json(evaluate({}, {}));
  EXPECT_EQ(empty["overall"]["recall_undefined"], "no ground truth");
  EXPECT_EQ(empty["overall"]["precision_undefined"], "no predictions");
}
