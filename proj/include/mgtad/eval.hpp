#pragma once

#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "mgtad/types.hpp"

namespace mgtad {

/// Temporal IoU of two intervals; throws on end <= start.
double tiou(const Interval& a, const Interval& b);

struct MatchPair {
  std::size_t pred = 0;
  std::size_t gt = 0;
  double tiou = 0.0;
};

struct MatchResult {
  std::vector<MatchPair> pairs;  // in greedy order
  std::vector<std::size_t> unmatched_preds;
  std::vector<std::size_t> unmatched_gts;
};

/// Greedy one-to-one matching: predictions by score descending (ties: earlier
/// start, lower label) each take the unmatched same-label ground truth with
/// the highest tIoU >= threshold.
MatchResult match(const std::vector<Detection>& preds, const std::vector<ActionInstance>& gts,
                  double threshold = 0.5);

/// Prediction indices in the order match() visits them.
std::vector<std::size_t> score_order(const std::vector<Detection>& preds);

struct Prf1 {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool precision_defined = true;  // false when there are no predictions
  bool recall_defined = true;     // false when there is no ground truth
};

Prf1 prf1(std::size_t matched, std::size_t n_preds, std::size_t n_gts);
inline Prf1 prf1(const MatchResult& m, std::size_t n_preds, std::size_t n_gts) {
  return prf1(m.pairs.size(), n_preds, n_gts);
}

struct ClassCounts {
  std::size_t matched = 0;
  std::size_t preds = 0;
  std::size_t gts = 0;
};

struct VideoMatch {
  std::vector<Detection> preds;
  std::vector<ActionInstance> gts;
  MatchResult result;
};

struct EvalReport {
  double threshold = 0.5;
  ClassCounts total;
  Prf1 overall;
  std::map<int, ClassCounts> per_class;
  std::map<std::string, VideoMatch> videos;
};

/// Ground-truth copies flagged as duplicates are ignored. Predictions for
/// videos without ground truth count as false positives.
EvalReport evaluate(const DetectionSet& preds, const std::vector<VideoAnnotation>& gts,
                    double threshold = 0.5);

/// Report with P/R/F1 in percent plus per-class counts and match pairs.
nlohmann::json report_json(const EvalReport& report);

}  // namespace mgtad
