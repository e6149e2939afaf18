#include "mgtad/data.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "binary_io.hpp"

namespace mgtad {

void VideoAnnotation::validate() const {
  if (video_id.empty()) throw std::invalid_argument("video_id is empty");
  if (!(fps > 0.0) || !std::isfinite(fps)) {
    throw std::invalid_argument("video " + video_id + ": fps must be > 0");
  }
  if (feature_stride < 1) {
    throw std::invalid_argument("video " + video_id + ": feature_stride must be >= 1");
  }
  if (!(duration_s >= 0.0) || !std::isfinite(duration_s)) {
    throw std::invalid_argument("video " + video_id + ": duration_s must be >= 0");
  }
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const auto& a = instances[i];
    if (!(a.start_s >= 0.0 && a.start_s < a.end_s && a.end_s <= duration_s)) {
      throw std::invalid_argument("video " + video_id + ": instance " + std::to_string(i) +
                                  " violates 0 <= start_s < end_s <= duration_s (" +
                                  std::to_string(a.start_s) + ", " + std::to_string(a.end_s) +
                                  ")");
    }
    if (a.label < 0) {
      throw std::invalid_argument("video " + video_id + ": instance " + std::to_string(i) +
                                  " has negative label");
    }
  }
}

void to_json(nlohmann::json& j, const ActionInstance& a) {
  j = nlohmann::json{{"start_s", a.start_s}, {"end_s", a.end_s}, {"label", a.label}};
  if (a.duplicate) j["duplicate"] = true;
}

void from_json(const nlohmann::json& j, ActionInstance& a) {
  j.at("start_s").get_to(a.start_s);
  j.at("end_s").get_to(a.end_s);
  j.at("label").get_to(a.label);
  a.duplicate = j.value("duplicate", false);
}

void to_json(nlohmann::json& j, const VideoAnnotation& v) {
  j = nlohmann::json{{"video_id", v.video_id},
                     {"fps", v.fps},
                     {"feature_stride", v.feature_stride},
                     {"duration_s", v.duration_s},
                     {"instances", v.instances}};
}

void from_json(const nlohmann::json& j, VideoAnnotation& v) {
  j.at("video_id").get_to(v.video_id);
  j.at("fps").get_to(v.fps);
  j.at("feature_stride").get_to(v.feature_stride);
  j.at("duration_s").get_to(v.duration_s);
  v.instances = j.value("instances", std::vector<ActionInstance>{});
}

void to_json(nlohmann::json& j, const Detection& d) {
  j = nlohmann::json{
      {"start_s", d.start_s}, {"end_s", d.end_s}, {"label", d.label}, {"score", d.score}};
}

void from_json(const nlohmann::json& j, Detection& d) {
  j.at("start_s").get_to(d.start_s);
  j.at("end_s").get_to(d.end_s);
  j.at("label").get_to(d.label);
  j.at("score").get_to(d.score);
}

namespace {

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

template <typename Fn>
void for_each_record(const std::string& text, Fn&& fn) {
  std::istringstream in(text);
  std::string line;
  std::size_t record = 0;
  while (std::getline(in, line)) {
    ++record;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
      fn(j, record);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("record " + std::to_string(record) + ": " + e.what(), record);
    } catch (const std::invalid_argument& e) {
      throw FormatError("record " + std::to_string(record) + ": " + e.what(), record);
    }
  }
}

}  // namespace

std::vector<VideoAnnotation> parse_annotations(const std::string& text) {
  std::vector<VideoAnnotation> out;
  for_each_record(text, [&](const nlohmann::json& j, std::size_t) {
    auto v = j.get<VideoAnnotation>();
    v.validate();
    out.push_back(std::move(v));
  });
  return out;
}

std::string format_annotations(const std::vector<VideoAnnotation>& videos) {
  std::string out;
  for (const auto& v : videos) {
    out += nlohmann::json(v).dump();
    out += '\n';
  }
  return out;
}

std::vector<VideoAnnotation> load_annotations(const std::filesystem::path& path) {
  return parse_annotations(read_text(path));
}

void save_annotations(const std::vector<VideoAnnotation>& videos,
                      const std::filesystem::path& path) {
  write_text(path, format_annotations(videos));
}

DetectionSet parse_predictions(const std::string& text) {
  DetectionSet out;
  for_each_record(text, [&](const nlohmann::json& j, std::size_t) {
    const auto id = j.at("video_id").get<std::string>();
    auto d = j.get<Detection>();
    if (!(d.end_s > d.start_s)) throw std::invalid_argument("detection has end_s <= start_s");
    if (!std::isfinite(d.score)) throw std::invalid_argument("detection score is not finite");
    out[id].push_back(d);
  });
  return out;
}

std::string format_predictions(const DetectionSet& detections) {
  std::string out;
  for (const auto& [id, dets] : detections) {
    for (const auto& d : dets) {
      nlohmann::json j = d;
      j["video_id"] = id;
      out += j.dump();
      out += '\n';
    }
  }
  return out;
}

DetectionSet load_predictions(const std::filesystem::path& path) {
  return parse_predictions(read_text(path));
}

void save_predictions(const DetectionSet& detections, const std::filesystem::path& path) {
  write_text(path, format_predictions(detections));
}

// ---------------------------------------------------------------------------
// features

std::vector<unsigned char> encode_features(const Grid& features) {
  if (features.rank() != 2) {
    throw std::invalid_argument("encode_features: expected [C x T], got " +
                                features.shape_string());
  }
  const std::size_t C = features.rows(), T = features.cols();
  std::vector<unsigned char> out(std::begin(kFeatureMagic), std::end(kFeatureMagic));
  out.reserve(kFeatureHeaderBytes + 4 * T * C);
  detail::put_le<std::uint32_t>(out, kFeatureVersion);
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(T));
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(C));
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t c = 0; c < C; ++c) {
      detail::put_le<float>(out, static_cast<float>(features(c, t)));
    }
  }
  return out;
}

FeatureHeader decode_feature_header(const std::vector<unsigned char>& bytes,
                                    const std::string& source) {
  detail::ByteReader in(bytes, source);
  const std::string magic = in.get_string(4, "magic");
  if (magic != std::string(kFeatureMagic, 4)) {
    throw FormatError(source + ": bad magic at byte offset 0 (expected MGFB)", 0);
  }
  const auto version = in.get<std::uint32_t>("version");
  if (version != kFeatureVersion) {
    throw FormatError(source + ": unsupported version " + std::to_string(version) +
                          " at byte offset 4",
                      4);
  }
  FeatureHeader h;
  h.length = in.get<std::uint32_t>("T");
  h.channels = in.get<std::uint32_t>("C");
  if (h.channels == 0) {
    throw FormatError(source + ": channel count C is zero at byte offset 12", 12);
  }
  return h;
}

void check_feature_payload(const FeatureHeader& header, std::uint64_t available,
                           const std::string& source) {
  const std::uint64_t expected = std::uint64_t{header.length} * header.channels * 4;
  const std::uint64_t file_end = kFeatureHeaderBytes + available;
  if (available < expected) {
    throw FormatError(source + ": truncated payload, expected " + std::to_string(expected) +
                          " bytes after the header but found " + std::to_string(available) +
                          " (ends at byte offset " + std::to_string(file_end) + ")",
                      file_end);
  }
  if (available > expected) {
    throw FormatError(source + ": trailing bytes after payload at byte offset " +
                          std::to_string(kFeatureHeaderBytes + expected),
                      kFeatureHeaderBytes + expected);
  }
}

Grid decode_features(const std::vector<unsigned char>& bytes, const std::string& source) {
  const FeatureHeader h = decode_feature_header(bytes, source);
  check_feature_payload(h, bytes.size() - kFeatureHeaderBytes, source);
  const std::size_t T = h.length, C = h.channels;
  detail::ByteReader in(bytes, source);
  in.get_string(kFeatureHeaderBytes, "header");
  Grid g({C, T});
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t c = 0; c < C; ++c) {
      const std::size_t at = in.position();
      const float v = in.get<float>("value");
      if (!std::isfinite(v)) {
        throw FormatError(source + ": non-finite value at byte offset " + std::to_string(at), at);
      }
      g(c, t) = v;
    }
  }
  return g;
}

void save_features(const Grid& features, const std::filesystem::path& path) {
  detail::write_file_bytes(path.string(), encode_features(features));
}

Grid load_features(const std::filesystem::path& path) {
  return decode_features(detail::read_file_bytes(path.string()), path.string());
}

std::vector<std::size_t> class_histogram(const std::vector<VideoAnnotation>& videos,
                                         std::size_t num_classes) {
  std::vector<std::size_t> counts(num_classes, 0);
  for (const auto& v : videos) {
    for (const auto& a : v.instances) {
      if (a.label < 0 || static_cast<std::size_t>(a.label) >= num_classes) {
        throw std::invalid_argument("unknown label " + std::to_string(a.label) + " in video " +
                                    v.video_id);
      }
      ++counts[static_cast<std::size_t>(a.label)];
    }
  }
  return counts;
}

void write_split(const std::vector<SynthVideo>& videos, const std::filesystem::path& dir,
                 const std::string& split) {
  std::filesystem::create_directories(dir / "features");
  std::vector<VideoAnnotation> annotations;
  for (const auto& v : videos) {
    save_features(v.features, dir / "features" / (v.annotation.video_id + ".mgfb"));
    annotations.push_back(v.annotation);
  }
  save_annotations(annotations, dir / (split + ".jsonl"));
}

std::vector<LoadedVideo> load_split(const std::filesystem::path& dir,
                                    const std::string& annotation_file) {
  std::vector<LoadedVideo> out;
  for (auto& a : load_annotations(dir / annotation_file)) {
    Grid f = load_features(dir / "features" / (a.video_id + ".mgfb"));
    out.push_back({std::move(a), std::move(f)});
  }
  return out;
}

}  // namespace mgtad
