#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "mgtad/diagnose.hpp"
#include "mgtad/svg.hpp"

using namespace mgtad;

namespace {

Detection det(double s, double e, int label, double score) { return {s, e, label, score}; }
ActionInstance gt(double s, double e, int label) { return {s, e, label, false}; }

VideoAnnotation video(std::string id, double duration, std::vector<ActionInstance> gts) {
  VideoAnnotation v;
  v.video_id = std::move(id);
  v.duration_s = duration;
  v.instances = std::move(gts);
  return v;
}

struct World {
  std::vector<VideoAnnotation> videos;
  DetectionSet preds;
};

/// A few videos of mixed lengths and densities with noisy detections.
World random_world(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> nvid(1, 4), ngt(0, 25), npred(0, 30), label(0, 2);
  std::uniform_real_distribution<double> unit(0.0, 1.0), len(0.3, 12.0), jitter(-1.0, 1.0);
  World w;
  const int nv = nvid(rng);
  for (int v = 0; v < nv; ++v) {
    const double duration = 60.0 + 240.0 * unit(rng);
    std::vector<ActionInstance> gts;
    const int n = ngt(rng);
    for (int i = 0; i < n; ++i) {
      const double l = len(rng), s = (duration - l) * unit(rng);
      gts.push_back(gt(s, s + l, label(rng)));
    }
    auto& preds = w.preds["v" + std::to_string(v)];
    const int np = npred(rng);
    for (int i = 0; i < np; ++i) {
      double s, e;
      if (!gts.empty() && unit(rng) < 0.7) {
        const auto& g = gts[std::uniform_int_distribution<std::size_t>(0, gts.size() - 1)(rng)];
        s = std::max(0.0, g.start_s + jitter(rng));
        e = std::max(s + 0.1, g.end_s + jitter(rng));
      } else {
        const double l = len(rng);
        s = (duration - l) * unit(rng);
        e = s + l;
      }
      preds.push_back(det(s, e, label(rng), unit(rng)));
    }
    w.videos.push_back(video("v" + std::to_string(v), duration, std::move(gts)));
  }
  return w;
}

}  // namespace

TEST(ClassifyFp, Categories) {
  const std::vector<ActionInstance> gts{gt(0, 2, 0), gt(10, 12, 1)};
  const std::vector<bool> matched{true, false};
  EXPECT_EQ(classify_fp(det(0, 2, 0, 1), gts, matched), FpCategory::DoubleDetection);
  EXPECT_EQ(classify_fp(det(10, 12, 0, 1), gts, matched), FpCategory::WrongLabel);
  // [0,2] vs [1.4,3.4]: 0.6 / 3.4 = 0.176; vs [0,6]: 2/6 = 0.333
  EXPECT_EQ(classify_fp(det(0, 6, 0, 1), gts, matched), FpCategory::Localization);
  EXPECT_EQ(classify_fp(det(10, 16, 0, 1), gts, matched), FpCategory::Confusion);
  EXPECT_EQ(classify_fp(det(30, 31, 0, 1), gts, matched), FpCategory::Background);
  // tIoU 0.05 is below the localization band
  EXPECT_EQ(classify_fp(det(1.9, 3.9, 0, 1), gts, matched), FpCategory::Background);
}

TEST(ClassifyFp, PriorityOrder) {
  // overlaps a matched same-label gt and a different-label gt at tIoU 1
  const std::vector<ActionInstance> gts{gt(0, 2, 1), gt(0, 2, 0)};
  EXPECT_EQ(classify_fp(det(0, 2, 0, 1), gts, {false, true}), FpCategory::DoubleDetection);
  // wrong label beats same-label localization
  const std::vector<ActionInstance> g2{gt(0, 2, 1), gt(0, 6, 0)};
  EXPECT_EQ(classify_fp(det(0, 2, 0, 1), g2, {false, false}), FpCategory::WrongLabel);
}

TEST(Bins, LeftClosedBoundaries) {
  const BinSpec b;
  EXPECT_EQ(bin_index(b.length_edges_s, 0.0), 0u);
  EXPECT_EQ(bin_index(b.length_edges_s, 1.999), 0u);
  EXPECT_EQ(bin_index(b.length_edges_s, 2.0), 1u);
  EXPECT_EQ(bin_index(b.length_edges_s, 9.75), 4u);
  EXPECT_EQ(bin_index(b.length_edges_s, 1e9), 4u);
  EXPECT_EQ(bin_index(b.instance_edges, 15.0), 1u);
  EXPECT_EQ(bin_index(b.instance_edges, 14.0), 0u);
  EXPECT_EQ(bin_index(b.instance_edges, 250.0), 3u);
  EXPECT_EQ(bin_index(b.coverage_edges, 1.0), 4u);
  EXPECT_EQ(bin_index(b.coverage_edges, 0.02), 1u);
  EXPECT_THROW(bin_index(b.coverage_edges, -0.1), std::out_of_range);
  EXPECT_EQ(b.bin_count(Characteristic::Instances), 4u);
}

TEST(Bins, ValidationNamesProblem) {
  BinSpec b;
  b.length_edges_s = {0, 2, 2, 5};
  EXPECT_THROW(b.validate(), std::invalid_argument);
  b = {};
  b.labels = {"a", "b"};
  EXPECT_THROW(b.validate(), std::invalid_argument);
}

TEST(FnProfile, LengthExample) {
  const auto v = video("a", 100, {gt(0, 1, 0), gt(10, 14, 0), gt(20, 28, 0)});
  DetectionSet preds;
  preds["a"] = {det(10, 14, 0, 0.9), det(20, 28, 0, 0.8)};
  const auto prof = fn_profile({v}, evaluate(preds, {v}));
  const auto& len = prof.bins[static_cast<std::size_t>(Characteristic::Length)];
  EXPECT_EQ(len[0].rate(), 1.0);
  EXPECT_EQ(len[1].rate(), 0.0);
  EXPECT_FALSE(len[2].rate().has_value());
  EXPECT_EQ(len[3].rate(), 0.0);
  EXPECT_FALSE(len[4].rate().has_value());
  EXPECT_EQ(prof.total_missed, 1u);
  // 3 instances: all in the XS density bin
  const auto& inst = prof.bins[static_cast<std::size_t>(Characteristic::Instances)];
  EXPECT_EQ(inst[0].total, 3u);
  EXPECT_EQ(inst[0].missed, 1u);
  // coverage 0.01, 0.04, 0.08
  const auto& cov = prof.bins[static_cast<std::size_t>(Characteristic::Coverage)];
  EXPECT_EQ(cov[0].missed, 1u);
  EXPECT_EQ(cov[2].total, 1u);
  EXPECT_EQ(cov[4].total, 1u);
}

TEST(FnProfile, AllMatchedGivesZeroRates) {
  const auto v = video("a", 50, {gt(0, 1, 0), gt(5, 9, 1)});
  DetectionSet preds;
  for (const auto& g : v.instances) preds["a"].push_back(det(g.start_s, g.end_s, g.label, 1));
  const auto prof = fn_profile({v}, evaluate(preds, {v}));
  for (const auto& bins : prof.bins) {
    for (const auto& b : bins) EXPECT_TRUE(!b.rate() || *b.rate() == 0.0);
  }
}

TEST(Sensitivity, PerfectDetections) {
  const auto v = video("a", 100, {gt(0, 1, 0), gt(10, 14, 1), gt(20, 28, 0)});
  DetectionSet preds;
  for (const auto& g : v.instances) preds["a"].push_back(det(g.start_s, g.end_s, g.label, 1));
  const auto s = sensitivity({v}, evaluate(preds, {v}));
  for (std::size_t c = 0; c < kCharacteristics; ++c) {
    EXPECT_EQ(s.spread[c], 0.0);
    for (const auto& b : s.bins[c]) {
      if (b.gts) EXPECT_EQ(b.f1, 1.0);
    }
  }
}

TEST(Sensitivity, MissingShortInstances) {
  const auto v = video("a", 100, {gt(0, 1, 0), gt(3, 4, 0), gt(10, 14, 1), gt(20, 23, 0),
                                  gt(30, 38, 1)});
  DetectionSet preds;
  preds["a"] = {det(10, 14, 1, 0.9), det(20, 23, 0, 0.8), det(30, 34, 1, 0.7)};
  const auto s = sensitivity({v}, evaluate(preds, {v}));
  const auto& len = s.bins[static_cast<std::size_t>(Characteristic::Length)];
  EXPECT_EQ(len[0].f1, 0.0);
  EXPECT_EQ(len[1].f1, 1.0);
  // the L instance is predicted at half length: tIoU 0.5 still matches
  EXPECT_EQ(len[3].f1, 1.0);
  EXPECT_DOUBLE_EQ(s.spread[static_cast<std::size_t>(Characteristic::Length)],
                   *len[1].f1 - *len[0].f1);
}

TEST(Sensitivity, EmptyPredictions) {
  const auto v = video("a", 100, {gt(0, 1, 0), gt(10, 14, 1)});
  const auto s = sensitivity({v}, evaluate({}, {v}));
  for (std::size_t c = 0; c < kCharacteristics; ++c) {
    EXPECT_EQ(s.spread[c], 0.0);
    for (const auto& b : s.bins[c]) {
      if (b.gts) EXPECT_EQ(b.f1, 0.0);
    }
  }
}

TEST(Sensitivity, BackgroundPredictionsCountEverywhere) {
  const auto v = video("a", 100, {gt(0, 1, 0), gt(10, 14, 0)});
  DetectionSet preds;
  preds["a"] = {det(0, 1, 0, 0.9), det(10, 14, 0, 0.8), det(50, 60, 0, 0.7)};
  const auto s = sensitivity({v}, evaluate(preds, {v}));
  const auto& len = s.bins[static_cast<std::size_t>(Characteristic::Length)];
  // each populated bin: 1 match, 2 predictions, 1 gt
  EXPECT_NEAR(*len[0].f1, 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(*len[1].f1, 2.0 / 3.0, 1e-12);
}

TEST(FpBudgets, SmallExample) {
  const auto v = video("a", 100, {gt(0, 2, 0), gt(10, 12, 1)});
  DetectionSet preds;
  preds["a"] = {det(0, 2, 0, 0.9), det(0, 2, 0, 0.8), det(50, 52, 1, 0.7), det(10, 12, 1, 0.6),
                det(10, 12, 0, 0.5)};
  const auto budgets = fp_budgets(evaluate(preds, {v}));
  ASSERT_EQ(budgets.size(), 10u);
  EXPECT_EQ(budgets[0].considered, 2u);
  EXPECT_EQ(budgets[0].true_positives, 1u);
  EXPECT_EQ(budgets[0].counts[0], 1u);  // double detection
  EXPECT_EQ(budgets[1].considered, 4u);
  EXPECT_EQ(budgets[1].true_positives, 2u);
  EXPECT_EQ(budgets[1].counts[static_cast<std::size_t>(FpCategory::Background)], 1u);
  EXPECT_EQ(budgets[2].considered, 5u);
  EXPECT_EQ(budgets[2].counts[static_cast<std::size_t>(FpCategory::WrongLabel)], 1u);
}

TEST(Diagnose, PartitionsOnRandomSets) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 500; ++i) {
    const World w = random_world(rng);
    const EvalReport eval = evaluate(w.preds, w.videos);
    const auto budgets = fp_budgets(eval);
    const std::size_t n_preds = eval.total.preds, G = eval.total.gts;
    for (const auto& b : budgets) {
      std::size_t sum = b.true_positives;
      for (std::size_t c : b.counts) sum += c;
      ASSERT_EQ(sum, b.considered);
      ASSERT_EQ(b.considered, std::min(b.k * G, n_preds));
      ASSERT_LE(b.true_positives, eval.total.matched);
    }
    const auto prof = fn_profile(w.videos, eval);
    ASSERT_EQ(prof.total_missed, G - eval.total.matched);
    for (const auto& bins : prof.bins) {
      std::size_t missed = 0, total = 0;
      for (const auto& b : bins) missed += b.missed, total += b.total;
      ASSERT_EQ(missed, prof.total_missed);
      ASSERT_EQ(total, G);
    }
    const auto sens = sensitivity(w.videos, eval);
    for (std::size_t c = 0; c < kCharacteristics; ++c) {
      ASSERT_GE(sens.spread[c], 0.0);
      ASSERT_LE(sens.spread[c], 1.0);
    }
  }
}

TEST(Diagnose, FnProfileIgnoresMonotoneRescaling) {
  std::mt19937_64 rng(12);
  for (int i = 0; i < 200; ++i) {
    World w = random_world(rng);
    const auto before = fn_profile(w.videos, evaluate(w.preds, w.videos));
    for (auto& [id, dets] : w.preds) {
      for (auto& d : dets) d.score = 0.2 + 0.5 * std::pow(d.score, 3.0);
    }
    const auto after = fn_profile(w.videos, evaluate(w.preds, w.videos));
    for (std::size_t c = 0; c < kCharacteristics; ++c) {
      for (std::size_t b = 0; b < before.bins[c].size(); ++b) {
        ASSERT_EQ(before.bins[c][b].missed, after.bins[c][b].missed);
        ASSERT_EQ(before.bins[c][b].total, after.bins[c][b].total);
      }
    }
  }
}

TEST(Diagnose, ReportJsonAndCharts) {
  const auto v = video("a", 100, {gt(0, 1, 0), gt(10, 14, 1)});
  DetectionSet preds;
  preds["a"] = {det(0, 1, 0, 0.9), det(40, 44, 1, 0.5)};
  const DiagnosisReport rep = diagnose(preds, {v});
  const auto j = report_json(rep);
  EXPECT_EQ(j["false_positive"]["budgets"].size(), 10u);
  EXPECT_EQ(j["false_positive"]["budgets"][0]["background"], 1);
  EXPECT_EQ(j["false_negative"]["length"][1]["rate"], 1.0);
  EXPECT_TRUE(j["false_negative"]["length"][2]["rate"].is_null());
  EXPECT_EQ(j["false_negative"]["length"][4]["upper"], "inf");
  EXPECT_EQ(j["false_negative"]["instances"].size(), 4u);
  EXPECT_TRUE(j["sensitivity"]["coverage"]["spread"].is_number());

  const auto dir = std::filesystem::temp_directory_path() / "mgtad_test_diagnose";
  std::filesystem::remove_all(dir);
  write_svg_charts(rep, dir);
  for (const char* name : {"false_positive.svg", "false_negative.svg", "sensitivity.svg"}) {
    std::ifstream in(dir / name);
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string body = ss.str();
    EXPECT_EQ(body.rfind("<svg", 0), 0u) << name;
    EXPECT_NE(body.find("</svg>"), std::string::npos) << name;
  }
}

TEST(Svg, EscapesTextAndSkipsMissingBars) {
  svg::BarChart c{"a<b & c", "", {"x", "y"}, {{"s", {1.0, std::nullopt}}}, false, {}};
  const std::string out = svg::render(c);
  EXPECT_NE(out.find("a&lt;b &amp; c"), std::string::npos);
  EXPECT_EQ(std::count(out.begin(), out.end(), '\n') > 0, true);
  std::size_t rects = 0;
  for (std::size_t p = out.find("<rect x="); p != std::string::npos; p = out.find("<rect x=", p + 1)) {
    ++rects;
  }
  EXPECT_EQ(rects, 1u);
}
