#include "mgtad/eval.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "mgtad/infer.hpp"

namespace mgtad {

double tiou(const Interval& a, const Interval& b) {
  if (!(a.end > a.start) || !(b.end > b.start)) {
    throw std::invalid_argument("tiou: degenerate interval");
  }
  const double inter = std::max(0.0, std::min(a.end, b.end) - std::max(a.start, b.start));
  const double uni = std::max(a.end, b.end) - std::min(a.start, b.start);
  return inter / uni;
}

std::vector<std::size_t> score_order(const std::vector<Detection>& preds) {
  std::vector<std::size_t> order(preds.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return detection_before(preds[a], preds[b]);
  });
  return order;
}

MatchResult match(const std::vector<Detection>& preds, const std::vector<ActionInstance>& gts,
                  double threshold) {
  MatchResult out;
  std::vector<bool> taken(gts.size(), false);
  for (std::size_t p : score_order(preds)) {
    double best = -1.0;
    std::size_t best_gt = 0;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (taken[g] || gts[g].label != preds[p].label) continue;
      const double iou = tiou(preds[p].interval(), gts[g].interval());
      if (iou >= threshold && iou > best) best = iou, best_gt = g;
    }
    if (best >= 0.0) {
      taken[best_gt] = true;
      out.pairs.push_back({p, best_gt, best});
    } else {
      out.unmatched_preds.push_back(p);
    }
  }
  std::sort(out.unmatched_preds.begin(), out.unmatched_preds.end());
  for (std::size_t g = 0; g < gts.size(); ++g) {
    if (!taken[g]) out.unmatched_gts.push_back(g);
  }
  return out;
}

Prf1 prf1(std::size_t matched, std::size_t n_preds, std::size_t n_gts) {
  if (matched > n_preds || matched > n_gts) {
    throw std::invalid_argument("prf1: matched count exceeds predictions or ground truth");
  }
  Prf1 r;
  r.precision_defined = n_preds > 0;
  r.recall_defined = n_gts > 0;
  r.precision = r.precision_defined ? static_cast<double>(matched) / n_preds : 0.0;
  r.recall = r.recall_defined ? static_cast<double>(matched) / n_gts : 0.0;
  if (r.recall_defined && r.precision + r.recall > 0.0) {
    r.f1 = 2.0 * r.precision * r.recall / (r.precision + r.recall);
  }
  return r;
}

EvalReport evaluate(const DetectionSet& preds, const std::vector<VideoAnnotation>& gts,
                    double threshold) {
  EvalReport rep;
  rep.threshold = threshold;
  for (const auto& v : gts) {
    if (rep.videos.count(v.video_id)) {
      throw std::invalid_argument("evaluate: duplicate video_id " + v.video_id);
    }
    auto& vm = rep.videos[v.video_id];
    for (const auto& a : v.instances) {
      if (!a.duplicate) vm.gts.push_back(a);
    }
  }
  for (const auto& [id, dets] : preds) rep.videos[id].preds = dets;
  for (auto& [id, vm] : rep.videos) {
    vm.result = match(vm.preds, vm.gts, threshold);
    rep.total.matched += vm.result.pairs.size();
    rep.total.preds += vm.preds.size();
    rep.total.gts += vm.gts.size();
    for (const auto& d : vm.preds) ++rep.per_class[d.label].preds;
    for (const auto& g : vm.gts) ++rep.per_class[g.label].gts;
    for (const auto& p : vm.result.pairs) ++rep.per_class[vm.preds[p.pred].label].matched;
  }
  rep.overall = prf1(rep.total.matched, rep.total.preds, rep.total.gts);
  return rep;
}

namespace {

nlohmann::json prf_json(const Prf1& r) {
  nlohmann::json j{{"precision", 100.0 * r.precision},
                   {"recall", 100.0 * r.recall},
                   {"f1", 100.0 * r.f1}};
  if (!r.precision_defined) j["precision_undefined"] = "no predictions";
  if (!r.recall_defined) j["recall_undefined"] = "no ground truth";
  return j;
}

}  // namespace

nlohmann::json report_json(const EvalReport& report) {
  nlohmann::json j;
  j["tiou_threshold"] = report.threshold;
  j["overall"] = prf_json(report.overall);
  j["overall"]["matched"] = report.total.matched;
  j["overall"]["predictions"] = report.total.preds;
  j["overall"]["ground_truth"] = report.total.gts;
  auto classes = nlohmann::json::array();
  for (const auto& [label, c] : report.per_class) {
    auto cj = prf_json(prf1(c.matched, c.preds, c.gts));
    cj["label"] = label;
    cj["matched"] = c.matched;
    cj["predictions"] = c.preds;
    cj["ground_truth"] = c.gts;
    classes.push_back(cj);
  }
  j["per_class"] = classes;
  auto pairs = nlohmann::json::array();
  for (const auto& [id, vm] : report.videos) {
    for (const auto& p : vm.result.pairs) {
      const auto& d = vm.preds[p.pred];
      const auto& g = vm.gts[p.gt];
      pairs.push_back({{"video_id", id},
                       {"label", d.label},
                       {"pred", {d.start_s, d.end_s}},
                       {"score", d.score},
                       {"gt", {g.start_s, g.end_s}},
                       {"tiou", p.tiou}});
    }
  }
  j["pairs"] = pairs;
  return j;
}

}  // namespace mgtad
