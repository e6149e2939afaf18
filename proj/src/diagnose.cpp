#include "mgtad/diagnose.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "mgtad/infer.hpp"
#include "mgtad/svg.hpp"

namespace mgtad {

std::string_view to_string(FpCategory c) {
  switch (c) {
    case FpCategory::DoubleDetection: return "double_detection";
    case FpCategory::WrongLabel: return "wrong_label";
    case FpCategory::Localization: return "localization";
    case FpCategory::Confusion: return "confusion";
    case FpCategory::Background: return "background";
  }
  return "?";
}

std::string_view to_string(Characteristic c) {
  switch (c) {
    case Characteristic::Length: return "length";
    case Characteristic::Coverage: return "coverage";
    case Characteristic::Instances: return "instances";
  }
  return "?";
}

const std::vector<double>& BinSpec::edges(Characteristic c) const {
  switch (c) {
    case Characteristic::Length: return length_edges_s;
    case Characteristic::Coverage: return coverage_edges;
    case Characteristic::Instances: return instance_edges;
  }
  throw std::invalid_argument("unknown characteristic");
}

void BinSpec::validate() const {
  for (std::size_t i = 0; i < kCharacteristics; ++i) {
    const auto c = static_cast<Characteristic>(i);
    const auto& e = edges(c);
    if (e.size() < 2) {
      throw std::invalid_argument(std::string(to_string(c)) + " bins need at least two edges");
    }
    for (std::size_t k = 1; k < e.size(); ++k) {
      if (!(e[k] > e[k - 1])) {
        throw std::invalid_argument(std::string(to_string(c)) +
                                    " bin edges must be strictly increasing");
      }
    }
    if (e.size() - 1 > labels.size()) {
      throw std::invalid_argument(std::string(to_string(c)) + " has more bins than labels");
    }
  }
}

std::size_t bin_index(const std::vector<double>& edges, double v) {
  if (!(v >= edges.front() && v <= edges.back())) {
    throw std::out_of_range("value " + std::to_string(v) + " outside bin edges");
  }
  const auto it = std::upper_bound(edges.begin(), edges.end(), v);
  const auto idx = static_cast<std::size_t>(it - edges.begin());
  return std::min(idx, edges.size() - 1) - 1;
}

FpCategory classify_fp(const Detection& pred, const std::vector<ActionInstance>& gts,
                       const std::vector<bool>& matched, double threshold, double low) {
  bool wrong_label = false, localization = false, confusion = false;
  for (std::size_t g = 0; g < gts.size(); ++g) {
    const double iou = tiou(pred.interval(), gts[g].interval());
    const bool same = gts[g].label == pred.label;
    if (iou >= threshold) {
      if (same && matched[g]) return FpCategory::DoubleDetection;
      wrong_label |= !same;
    } else if (iou >= low) {
      (same ? localization : confusion) = true;
    }
  }
  if (wrong_label) return FpCategory::WrongLabel;
  if (localization) return FpCategory::Localization;
  if (confusion) return FpCategory::Confusion;
  return FpCategory::Background;
}

double GtTraits::value(Characteristic c) const {
  switch (c) {
    case Characteristic::Length: return length_s;
    case Characteristic::Coverage: return coverage;
    case Characteristic::Instances: return video_instances;
  }
  return 0.0;
}

namespace {

std::size_t counted_instances(const VideoAnnotation& video) {
  return static_cast<std::size_t>(std::count_if(video.instances.begin(), video.instances.end(),
                                                [](const auto& a) { return !a.duplicate; }));
}

std::vector<GtTraits> video_traits(const VideoAnnotation& video,
                                   const std::vector<ActionInstance>& gts) {
  std::vector<GtTraits> out;
  out.reserve(gts.size());
  for (const auto& g : gts) out.push_back(traits(g, video));
  return out;
}

/// Annotations by id, checked against the ground truth held by the report.
std::map<std::string, const VideoAnnotation*> index_videos(
    const std::vector<VideoAnnotation>& annotations, const EvalReport& report) {
  std::map<std::string, const VideoAnnotation*> out;
  for (const auto& v : annotations) out[v.video_id] = &v;
  for (const auto& [id, vm] : report.videos) {
    if (!vm.gts.empty() && !out.count(id)) {
      throw std::invalid_argument("no annotation for evaluated video " + id);
    }
  }
  return out;
}

}  // namespace

GtTraits traits(const ActionInstance& gt, const VideoAnnotation& video) {
  if (!(video.duration_s > 0.0)) {
    throw std::invalid_argument("video " + video.video_id + " has no positive duration");
  }
  const double length = gt.end_s - gt.start_s;
  return {length, std::min(1.0, length / video.duration_s),
          static_cast<double>(counted_instances(video))};
}

std::vector<FpBudget> fp_budgets(const EvalReport& report, std::size_t max_k, double low) {
  struct Ranked {
    const Detection* det;
    std::size_t video;
    bool tp;
    FpCategory category;
  };
  std::vector<Ranked> ranked;
  std::size_t video = 0;
  for (const auto& [id, vm] : report.videos) {
    std::vector<bool> matched(vm.gts.size(), false), is_tp(vm.preds.size(), false);
    for (const auto& p : vm.result.pairs) {
      matched[p.gt] = true;
      is_tp[p.pred] = true;
    }
    for (std::size_t p = 0; p < vm.preds.size(); ++p) {
      const FpCategory cat = is_tp[p] ? FpCategory::Background
                                      : classify_fp(vm.preds[p], vm.gts, matched,
                                                    report.threshold, low);
      ranked.push_back({&vm.preds[p], video, is_tp[p], cat});
    }
    ++video;
  }
  std::stable_sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
    if (detection_before(*a.det, *b.det)) return true;
    if (detection_before(*b.det, *a.det)) return false;
    return a.video < b.video;
  });

  std::vector<FpBudget> out;
  for (std::size_t k = 1; k <= max_k; ++k) {
    FpBudget b;
    b.k = k;
    b.considered = std::min(k * report.total.gts, ranked.size());
    for (std::size_t i = 0; i < b.considered; ++i) {
      if (ranked[i].tp) {
        ++b.true_positives;
      } else {
        ++b.counts[static_cast<std::size_t>(ranked[i].category)];
      }
    }
    out.push_back(b);
  }
  return out;
}

FnProfile fn_profile(const std::vector<VideoAnnotation>& annotations, const EvalReport& report,
                     const BinSpec& bins) {
  bins.validate();
  const auto videos = index_videos(annotations, report);
  FnProfile out;
  for (std::size_t c = 0; c < kCharacteristics; ++c) {
    out.bins[c].assign(bins.bin_count(static_cast<Characteristic>(c)), {});
  }
  for (const auto& [id, vm] : report.videos) {
    if (vm.gts.empty()) continue;
    const auto tr = video_traits(*videos.at(id), vm.gts);
    std::vector<bool> missed(vm.gts.size(), false);
    for (std::size_t g : vm.result.unmatched_gts) missed[g] = true;
    for (std::size_t g = 0; g < vm.gts.size(); ++g) {
      out.total_missed += missed[g];
      for (std::size_t c = 0; c < kCharacteristics; ++c) {
        const auto ch = static_cast<Characteristic>(c);
        auto& bin = out.bins[c][bin_index(bins.edges(ch), tr[g].value(ch))];
        ++bin.total;
        bin.missed += missed[g];
      }
    }
  }
  return out;
}

Sensitivity sensitivity(const std::vector<VideoAnnotation>& annotations,
                        const EvalReport& report, const BinSpec& bins) {
  bins.validate();
  const auto videos = index_videos(annotations, report);
  Sensitivity out;
  for (std::size_t c = 0; c < kCharacteristics; ++c) {
    const auto ch = static_cast<Characteristic>(c);
    const std::size_t nbins = bins.bin_count(ch);
    std::vector<ClassCounts> counts(nbins);
    for (const auto& [id, vm] : report.videos) {
      std::vector<std::size_t> gt_bin;
      if (!vm.gts.empty()) {
        for (const auto& t : video_traits(*videos.at(id), vm.gts)) {
          gt_bin.push_back(bin_index(bins.edges(ch), t.value(ch)));
        }
      }
      // bin a prediction follows, or nbins when it overlaps no ground truth
      std::vector<std::size_t> pred_bin(vm.preds.size(), nbins);
      for (std::size_t p = 0; p < vm.preds.size(); ++p) {
        double best = 0.0;
        for (std::size_t g = 0; g < vm.gts.size(); ++g) {
          const double iou = tiou(vm.preds[p].interval(), vm.gts[g].interval());
          if (iou > best) best = iou, pred_bin[p] = gt_bin[g];
        }
      }
      for (std::size_t b = 0; b < nbins; ++b) {
        std::vector<ActionInstance> gts;
        std::vector<Detection> preds;
        for (std::size_t g = 0; g < vm.gts.size(); ++g) {
          if (gt_bin[g] == b) gts.push_back(vm.gts[g]);
        }
        for (std::size_t p = 0; p < vm.preds.size(); ++p) {
          if (pred_bin[p] == b || pred_bin[p] == nbins) preds.push_back(vm.preds[p]);
        }
        counts[b].matched += match(preds, gts, report.threshold).pairs.size();
        counts[b].preds += preds.size();
        counts[b].gts += gts.size();
      }
    }
    out.bins[c].resize(nbins);
    double lo = 0.0, hi = 0.0;
    bool any = false;
    for (std::size_t b = 0; b < nbins; ++b) {
      auto& sb = out.bins[c][b];
      sb.gts = counts[b].gts;
      if (sb.gts == 0) continue;
      const double f1 = prf1(counts[b].matched, counts[b].preds, counts[b].gts).f1;
      sb.f1 = f1;
      lo = any ? std::min(lo, f1) : f1;
      hi = any ? std::max(hi, f1) : f1;
      any = true;
    }
    out.spread[c] = hi - lo;
  }
  return out;
}

DiagnosisReport diagnose(const DetectionSet& preds, const std::vector<VideoAnnotation>& annotations,
                         double threshold, const BinSpec& bins) {
  bins.validate();
  DiagnosisReport rep;
  rep.threshold = threshold;
  rep.bins = bins;
  const EvalReport eval = evaluate(preds, annotations, threshold);
  rep.budgets = fp_budgets(eval);
  rep.false_negatives = fn_profile(annotations, eval, bins);
  rep.sensitivity = sensitivity(annotations, eval, bins);
  return rep;
}

namespace {

nlohmann::json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

nlohmann::json edge_json(double v) {
  return std::isinf(v) ? nlohmann::json("inf") : nlohmann::json(v);
}

}  // namespace

nlohmann::json report_json(const DiagnosisReport& report) {
  nlohmann::json j;
  j["tiou_threshold"] = report.threshold;

  auto budgets = nlohmann::json::array();
  for (const auto& b : report.budgets) {
    nlohmann::json bj{{"k", b.k}, {"considered", b.considered},
                      {"true_positive", b.true_positives}};
    for (std::size_t c = 0; c < kFpCategories; ++c) {
      bj[std::string(to_string(static_cast<FpCategory>(c)))] = b.counts[c];
    }
    budgets.push_back(bj);
  }
  j["false_positive"] = {{"budgets", budgets}};

  nlohmann::json fn{{"total_missed", report.false_negatives.total_missed}};
  nlohmann::json sens;
  for (std::size_t c = 0; c < kCharacteristics; ++c) {
    const auto ch = static_cast<Characteristic>(c);
    const auto& edges = report.bins.edges(ch);
    auto fbins = nlohmann::json::array(), sbins = nlohmann::json::array();
    for (std::size_t b = 0; b + 1 < edges.size(); ++b) {
      const nlohmann::json range{{"label", report.bins.labels[b]},
                                 {"lower", edge_json(edges[b])},
                                 {"upper", edge_json(edges[b + 1])}};
      const auto& fb = report.false_negatives.bins[c][b];
      auto fj = range;
      fj["total"] = fb.total;
      fj["missed"] = fb.missed;
      fj["rate"] = optional_json(fb.rate());
      fbins.push_back(fj);
      const auto& sb = report.sensitivity.bins[c][b];
      auto sj = range;
      sj["ground_truth"] = sb.gts;
      sj["f1"] = optional_json(sb.f1);
      sbins.push_back(sj);
    }
    fn[std::string(to_string(ch))] = fbins;
    sens[std::string(to_string(ch))] = {{"bins", sbins},
                                        {"spread", report.sensitivity.spread[c]}};
  }
  j["false_negative"] = fn;
  j["sensitivity"] = sens;
  return j;
}

void write_svg_charts(const DiagnosisReport& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto write = [&](const std::string& name, const std::string& body) {
    std::ofstream out(dir / name);
    if (!out) throw std::runtime_error("cannot write " + (dir / name).string());
    out << body;
  };

  svg::BarChart fp;
  fp.title = "False positives at top-kG";
  fp.y_label = "predictions";
  fp.stacked = true;
  for (const auto& b : report.budgets) fp.categories.push_back(std::to_string(b.k) + "G");
  fp.series.push_back({"true_positive", {}});
  for (const auto& b : report.budgets) {
    fp.series[0].values.push_back(static_cast<double>(b.true_positives));
  }
  for (std::size_t c = 0; c < kFpCategories; ++c) {
    svg::Series s{std::string(to_string(static_cast<FpCategory>(c))), {}};
    for (const auto& b : report.budgets) s.values.push_back(static_cast<double>(b.counts[c]));
    fp.series.push_back(std::move(s));
  }
  write("false_positive.svg", svg::render(fp));

  std::vector<svg::BarChart> fn_charts, sens_charts;
  for (std::size_t c = 0; c < kCharacteristics; ++c) {
    const auto ch = static_cast<Characteristic>(c);
    const std::size_t nbins = report.bins.bin_count(ch);
    const std::vector<std::string> labels(report.bins.labels.begin(),
                                          report.bins.labels.begin() + nbins);
    svg::BarChart f{std::string(to_string(ch)), "miss rate", labels, {{"miss rate", {}}}, false, 1.0};
    svg::BarChart s{std::string(to_string(ch)), "F1", labels, {{"F1", {}}}, false, 1.0};
    for (std::size_t b = 0; b < nbins; ++b) {
      f.series[0].values.push_back(report.false_negatives.bins[c][b].rate());
      s.series[0].values.push_back(report.sensitivity.bins[c][b].f1);
    }
    fn_charts.push_back(std::move(f));
    sens_charts.push_back(std::move(s));
  }
  write("false_negative.svg", svg::render_row(fn_charts));
  write("sensitivity.svg", svg::render_row(sens_charts));
}

}  // namespace mgtad
