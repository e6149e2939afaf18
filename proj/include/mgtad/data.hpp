#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "mgtad/errors.hpp"
#include "mgtad/grid.hpp"
#include "mgtad/types.hpp"

namespace mgtad {

// ---------------------------------------------------------------------------
// JSON mapping

void to_json(nlohmann::json& j, const ActionInstance& a);
void from_json(const nlohmann::json& j, ActionInstance& a);
void to_json(nlohmann::json& j, const VideoAnnotation& v);
void from_json(const nlohmann::json& j, VideoAnnotation& v);
void to_json(nlohmann::json& j, const Detection& d);
void from_json(const nlohmann::json& j, Detection& d);

// ---------------------------------------------------------------------------
// Annotation files: JSON-lines, one VideoAnnotation per line. Blank lines are
// skipped; record numbers in diagnostics are 1-based line numbers.

std::vector<VideoAnnotation> parse_annotations(const std::string& text);
std::string format_annotations(const std::vector<VideoAnnotation>& videos);
std::vector<VideoAnnotation> load_annotations(const std::filesystem::path& path);
void save_annotations(const std::vector<VideoAnnotation>& videos,
                      const std::filesystem::path& path);

/// Prediction files: JSON-lines, one detection per line with a "video_id".
DetectionSet parse_predictions(const std::string& text);
std::string format_predictions(const DetectionSet& detections);
DetectionSet load_predictions(const std::filesystem::path& path);
void save_predictions(const DetectionSet& detections, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Feature files: "MGFB", u32 version = 1, u32 T, u32 C, then T*C float32
// values, time-major, all little-endian. In memory features are [C x T].

inline constexpr char kFeatureMagic[4] = {'M', 'G', 'F', 'B'};
inline constexpr std::uint32_t kFeatureVersion = 1;
inline constexpr std::size_t kFeatureHeaderBytes = 16;

struct FeatureHeader {
  std::uint32_t length = 0;    // T
  std::uint32_t channels = 0;  // C
};

/// Validates magic, version and C from the first 16 bytes.
FeatureHeader decode_feature_header(const std::vector<unsigned char>& bytes,
                                    const std::string& source = "feature data");
/// Checks that a payload of `available` bytes matches the header exactly.
void check_feature_payload(const FeatureHeader& header, std::uint64_t available,
                           const std::string& source);

std::vector<unsigned char> encode_features(const Grid& features);
Grid decode_features(const std::vector<unsigned char>& bytes,
                     const std::string& source = "feature data");
void save_features(const Grid& features, const std::filesystem::path& path);
Grid load_features(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Statistics

/// Per-category instance counts; labels outside [0, num_classes) are rejected.
std::vector<std::size_t> class_histogram(const std::vector<VideoAnnotation>& videos,
                                         std::size_t num_classes);

// ---------------------------------------------------------------------------
// Synthetic long-tailed dataset

struct SynthSpec {
  std::size_t num_classes = 5;
  std::size_t channels = 16;
  double zipf_exponent = 0.0;
  /// Per-class duration range in seconds; empty selects a default spread.
  std::vector<std::pair<double, double>> durations_s;
  double noise = 0.1;
  double signature_scale = 1.0;
  std::size_t num_videos = 30;
  std::size_t min_length = 256;  // feature steps
  std::size_t max_length = 512;
  std::size_t min_instances = 2;
  std::size_t max_instances = 5;
  std::size_t min_gap = 4;  // steps between consecutive instances
  double fps = 28.0;
  int feature_stride = 4;
  std::string id_prefix = "synth";
  /// Seed for the class signatures; unset uses the generation seed. Splits
  /// generated with different seeds share classes when this is fixed.
  std::optional<std::uint64_t> signature_seed;

  void validate() const;
  std::pair<double, double> duration_range(std::size_t label) const;
};

void to_json(nlohmann::json& j, const SynthSpec& s);
void from_json(const nlohmann::json& j, SynthSpec& s);

struct SynthVideo {
  VideoAnnotation annotation;
  Grid features;  // [C x T]
};

struct SynthDataset {
  Grid signatures;  // [K x C]
  std::vector<SynthVideo> videos;
};

/// Deterministic for a given (spec, seed).
SynthDataset synth_generate(const SynthSpec& spec, std::uint64_t seed);

/// Writes <dir>/<split>.jsonl and <dir>/features/<video_id>.mgfb.
void write_split(const std::vector<SynthVideo>& videos, const std::filesystem::path& dir,
                 const std::string& split);

/// Loads <dir>/<annotation_file> plus the matching feature files.
struct LoadedVideo {
  VideoAnnotation annotation;
  Grid features;
};
std::vector<LoadedVideo> load_split(const std::filesystem::path& dir,
                                    const std::string& annotation_file);

}  // namespace mgtad
