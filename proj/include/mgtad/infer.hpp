#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <vector>

#include "json.hpp"
#include "mgtad/grid.hpp"
#include "mgtad/head.hpp"
#include "mgtad/model.hpp"
#include "mgtad/types.hpp"

namespace mgtad {

struct InferConfig {
  double score_threshold = 0.1;  // decode gate, in (0, 1)
  double nms_sigma = 0.5;
  double min_score = 0.001;
  /// Detections scoring below this after soft-NMS are not reported.
  double report_threshold = 0.3;
  std::size_t window = 512;  // base steps

  void validate() const;
};

void to_json(nlohmann::json& j, const InferConfig& c);
void from_json(const nlohmann::json& j, InferConfig& c);

struct Timing {
  double fps = 28.0;
  int feature_stride = 4;
  double step_seconds() const { return static_cast<double>(feature_stride) / fps; }
};

/// Decoded intervals are shifted by `offset_steps` and clipped to
/// [clip_start, clip_end] (all in base steps); empty results are dropped.
struct DecodeSpan {
  double offset_steps = 0.0;
  double clip_start = 0.0;
  double clip_end = 0.0;
};

std::vector<Detection> decode(const HeadOutputs& outputs, const Timing& timing,
                              double score_threshold, const DecodeSpan& span);

/// Orders by score descending, then earlier start, then lower label.
bool detection_before(const Detection& a, const Detection& b);

/// Gaussian soft-NMS applied per class; output sorted with detection_before.
std::vector<Detection> soft_nms(std::vector<Detection> detections, double sigma,
                                double min_score);

/// Offline detection over a whole [C x T] sequence. Sequences longer than the
/// window are tiled with hop window/2 and merged by soft-NMS.
std::vector<Detection> detect_offline(const Model& model, const Grid& features,
                                      const Timing& timing, const InferConfig& cfg);

/// Pull-based time-major feature reader.
class FeatureSource {
 public:
  virtual ~FeatureSource() = default;
  virtual std::size_t channels() const = 0;
  /// Appends up to `max_steps` steps as columns of a [C x k] grid; k == 0 at
  /// the end of the stream.
  virtual Grid read(std::size_t max_steps) = 0;
};

class GridSource : public FeatureSource {
 public:
  explicit GridSource(const Grid& features) : features_(features) {}
  std::size_t channels() const override { return features_.rows(); }
  Grid read(std::size_t max_steps) override;

 private:
  const Grid& features_;
  std::size_t cursor_ = 0;
};

/// Streams an MGFB feature file without loading it whole.
class FileSource : public FeatureSource {
 public:
  explicit FileSource(const std::filesystem::path& path);
  std::size_t channels() const override { return channels_; }
  std::size_t length() const { return length_; }
  Grid read(std::size_t max_steps) override;

 private:
  std::ifstream in_;
  std::string name_;
  std::size_t channels_ = 0;
  std::size_t length_ = 0;
  std::size_t cursor_ = 0;
};

using DetectionSink = std::function<void(const std::vector<Detection>&)>;

/// Windowed detection that emits each group of mutually overlapping
/// same-label detections once no later window can touch it. The union of
/// emitted detections equals detect_offline on the same sequence.
std::vector<Detection> detect_stream(FeatureSource& source, const Model& model,
                                     const Timing& timing, const InferConfig& cfg,
                                     const DetectionSink& sink = {});

}  // namespace mgtad
