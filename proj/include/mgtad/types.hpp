#pragma once

#include <map>
#include <string>
#include <vector>

namespace mgtad {

struct Interval {
  double start = 0.0;
  double end = 0.0;

  double length() const { return end - start; }
};

/// One annotated micro-gesture occurrence. `duplicate` marks copies added by
/// annotation augmentation.
struct ActionInstance {
  double start_s = 0.0;
  double end_s = 0.0;
  int label = 0;
  bool duplicate = false;

  Interval interval() const { return {start_s, end_s}; }
  friend bool operator==(const ActionInstance&, const ActionInstance&) = default;
};

struct VideoAnnotation {
  std::string video_id;
  double fps = 28.0;
  int feature_stride = 4;
  double duration_s = 0.0;
  std::vector<ActionInstance> instances;

  /// Seconds per feature time step.
  double step_seconds() const { return static_cast<double>(feature_stride) / fps; }
  /// Throws std::invalid_argument naming the violated invariant.
  void validate() const;

  friend bool operator==(const VideoAnnotation&, const VideoAnnotation&) = default;
};

struct Detection {
  double start_s = 0.0;
  double end_s = 0.0;
  int label = 0;
  double score = 0.0;

  Interval interval() const { return {start_s, end_s}; }
  friend bool operator==(const Detection&, const Detection&) = default;
};

/// Predictions keyed by video id.
using DetectionSet = std::map<std::string, std::vector<Detection>>;

}  // namespace mgtad
