#pragma once

#include <array>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "mgtad/eval.hpp"
#include "mgtad/types.hpp"

namespace mgtad {

enum class FpCategory { DoubleDetection, WrongLabel, Localization, Confusion, Background };
inline constexpr std::size_t kFpCategories = 5;
std::string_view to_string(FpCategory c);

enum class Characteristic { Length, Coverage, Instances };
inline constexpr std::size_t kCharacteristics = 3;
std::string_view to_string(Characteristic c);

/// Bins are left-closed and right-open; the last bin also takes its upper edge.
struct BinSpec {
  static constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> length_edges_s{0.0, 2.0, 5.0, 7.0, 9.75, kInf};
  std::vector<double> instance_edges{-1.0, 15.0, 100.0, 200.0, kInf};
  std::vector<double> coverage_edges{0.0, 0.02, 0.04, 0.06, 0.08, 1.0};
  std::vector<std::string> labels{"XS", "S", "M", "L", "XL"};

  const std::vector<double>& edges(Characteristic c) const;
  std::size_t bin_count(Characteristic c) const { return edges(c).size() - 1; }
  /// Throws unless every edge list is strictly increasing and labelled.
  void validate() const;
};

/// Index of the bin holding v; throws if v lies outside the edges.
std::size_t bin_index(const std::vector<double>& edges, double v);

/// Category of a prediction left unmatched by match(). `matched[g]` tells
/// whether ground truth g was taken by some prediction.
FpCategory classify_fp(const Detection& pred, const std::vector<ActionInstance>& gts,
                       const std::vector<bool>& matched, double threshold = 0.5,
                       double low = 0.1);

/// Per-instance characteristic values.
struct GtTraits {
  double length_s = 0.0;
  double coverage = 0.0;
  double video_instances = 0.0;

  double value(Characteristic c) const;
};

GtTraits traits(const ActionInstance& gt, const VideoAnnotation& video);

struct FpBudget {
  std::size_t k = 0;
  std::size_t considered = 0;  // min(k * G, number of predictions)
  std::size_t true_positives = 0;
  std::array<std::size_t, kFpCategories> counts{};
};

struct FnBin {
  std::size_t total = 0;
  std::size_t missed = 0;
  std::optional<double> rate() const {
    if (total == 0) return std::nullopt;
    return static_cast<double>(missed) / static_cast<double>(total);
  }
};

struct FnProfile {
  std::array<std::vector<FnBin>, kCharacteristics> bins;
  std::size_t total_missed = 0;
};

struct SensitivityBin {
  std::size_t gts = 0;
  std::optional<double> f1;  // empty when no ground truth falls in the bin
};

struct Sensitivity {
  std::array<std::vector<SensitivityBin>, kCharacteristics> bins;
  std::array<double, kCharacteristics> spread{};
};

/// Predictions ranked across all videos by score; at each budget k * G the
/// considered predictions split exactly into true positives and FP categories.
std::vector<FpBudget> fp_budgets(const EvalReport& report, std::size_t max_k = 10,
                                 double low = 0.1);

/// Missed ground truth per characteristic bin. Depends on the matching only,
/// so any strictly monotone rescaling of scores leaves it unchanged.
FnProfile fn_profile(const std::vector<VideoAnnotation>& annotations, const EvalReport& report,
                     const BinSpec& bins = {});

/// F1 recomputed with the ground truth restricted to each bin. A prediction
/// follows the ground truth it overlaps most; predictions overlapping nothing
/// count against every bin.
Sensitivity sensitivity(const std::vector<VideoAnnotation>& annotations,
                        const EvalReport& report, const BinSpec& bins = {});

struct DiagnosisReport {
  double threshold = 0.5;
  BinSpec bins;
  std::vector<FpBudget> budgets;
  FnProfile false_negatives;
  Sensitivity sensitivity;
};

DiagnosisReport diagnose(const DetectionSet& preds, const std::vector<VideoAnnotation>& annotations,
                         double threshold = 0.5, const BinSpec& bins = {});

nlohmann::json report_json(const DiagnosisReport& report);

/// Writes false_positive.svg, false_negative.svg and sensitivity.svg into dir.
void write_svg_charts(const DiagnosisReport& report, const std::filesystem::path& dir);

}  // namespace mgtad
