#include "mgtad/infer.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <map>
#include <numeric>
#include <stdexcept>

#include "mgtad/data.hpp"
#include "mgtad/eval.hpp"

namespace mgtad {

void InferConfig::validate() const {
  if (!(score_threshold > 0.0 && score_threshold < 1.0)) {
    throw std::invalid_argument("score threshold must be in (0, 1), got " +
                                std::to_string(score_threshold));
  }
  if (!(nms_sigma > 0.0)) throw std::invalid_argument("nms_sigma must be > 0");
  if (!(min_score >= 0.0)) throw std::invalid_argument("min_score must be >= 0");
  if (!(report_threshold >= 0.0 && report_threshold < 1.0)) {
    throw std::invalid_argument("report_threshold must be in [0, 1)");
  }
  if (window < 2) throw std::invalid_argument("window must be >= 2");
}

void to_json(nlohmann::json& j, const InferConfig& c) {
  j = nlohmann::json{{"score_threshold", c.score_threshold},
                     {"nms_sigma", c.nms_sigma},
                     {"min_score", c.min_score},
                     {"report_threshold", c.report_threshold},
                     {"window", c.window}};
}

void from_json(const nlohmann::json& j, InferConfig& c) {
  const InferConfig d;
  c.score_threshold = j.value("score_threshold", d.score_threshold);
  c.nms_sigma = j.value("nms_sigma", d.nms_sigma);
  c.min_score = j.value("min_score", d.min_score);
  c.report_threshold = j.value("report_threshold", d.report_threshold);
  c.window = j.value("window", d.window);
}

std::vector<Detection> decode(const HeadOutputs& outputs, const Timing& timing,
                              double score_threshold, const DecodeSpan& span) {
  if (!(score_threshold > 0.0 && score_threshold < 1.0)) {
    throw std::invalid_argument("decode: score threshold must be in (0, 1)");
  }
  const double step = timing.step_seconds();
  std::vector<Detection> out;
  for (std::size_t n = 0; n < outputs.class_probs.size(); ++n) {
    const Grid& probs = outputs.class_probs[n];
    const Grid& off = outputs.offsets[n];
    const double stride = std::ldexp(1.0, static_cast<int>(n + 1));
    for (std::size_t t = 0; t < probs.cols(); ++t) {
      const double td = static_cast<double>(t);
      const double s = std::max(span.clip_start, span.offset_steps + (td - off(0, t)) * stride);
      const double e = std::min(span.clip_end, span.offset_steps + (td + off(1, t)) * stride);
      if (!(e > s)) continue;
      for (std::size_t c = 0; c < probs.rows(); ++c) {
        const double p = probs(c, t);
        if (p >= score_threshold) {
          out.push_back({s * step, e * step, static_cast<int>(c), p});
        }
      }
    }
  }
  return out;
}

bool detection_before(const Detection& a, const Detection& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.start_s != b.start_s) return a.start_s < b.start_s;
  return a.label < b.label;
}

std::vector<Detection> soft_nms(std::vector<Detection> detections, double sigma,
                                double min_score) {
  std::vector<Detection> out;
  out.reserve(detections.size());
  std::stable_sort(detections.begin(), detections.end(),
                   [](const Detection& a, const Detection& b) { return a.label < b.label; });
  auto begin = detections.begin();
  while (begin != detections.end()) {
    auto end = std::find_if(begin, detections.end(),
                            [&](const Detection& d) { return d.label != begin->label; });
    std::vector<Detection> pool(begin, end);
    while (!pool.empty()) {
      const auto best_it = std::min_element(pool.begin(), pool.end(), detection_before);
      const Detection best = *best_it;
      pool.erase(best_it);
      out.push_back(best);
      std::vector<Detection> kept;
      kept.reserve(pool.size());
      for (auto d : pool) {
        const double iou = tiou(best.interval(), d.interval());
        if (iou > 0.0) d.score *= std::exp(-iou * iou / sigma);
        if (d.score >= min_score) kept.push_back(d);
      }
      pool = std::move(kept);
    }
    begin = end;
  }
  std::stable_sort(out.begin(), out.end(), detection_before);
  return out;
}

namespace {

/// Columns [from, to) of x, zero-padded on the right to `width`.
Grid slice_padded(const Grid& x, std::size_t from, std::size_t to, std::size_t width) {
  Grid out({x.rows(), std::max(width, to - from)});
  for (std::size_t c = 0; c < x.rows(); ++c) {
    for (std::size_t t = from; t < to; ++t) out(c, t - from) = x(c, t);
  }
  return out;
}

std::size_t min_length(const Model& model) {
  return std::size_t{1} << model.config().encoder.num_levels;
}

void check_window(const Model& model, const InferConfig& cfg) {
  cfg.validate();
  if (cfg.window < min_length(model)) {
    throw std::invalid_argument("window " + std::to_string(cfg.window) +
                                " is below the minimum of 2^N = " +
                                std::to_string(min_length(model)) + " steps");
  }
}

std::vector<Detection> run_window(const Model& model, const Grid& input, double offset,
                                  double clip_end, const Timing& timing,
                                  const InferConfig& cfg) {
  return decode(model.forward(input), timing, cfg.score_threshold,
                {offset, offset, clip_end});
}

std::vector<Detection> reportable(std::vector<Detection> dets, const InferConfig& cfg) {
  dets = soft_nms(std::move(dets), cfg.nms_sigma, cfg.min_score);
  std::erase_if(dets, [&](const Detection& d) { return d.score < cfg.report_threshold; });
  return dets;
}

bool overlaps(const Detection& a, const Detection& b) {
  return a.label == b.label && std::min(a.end_s, b.end_s) > std::max(a.start_s, b.start_s);
}

}  // namespace

std::vector<Detection> detect_offline(const Model& model, const Grid& features,
                                      const Timing& timing, const InferConfig& cfg) {
  check_window(model, cfg);
  const std::size_t T = features.cols();
  if (T == 0) return {};
  const std::size_t W = cfg.window, hop = W / 2;
  std::vector<Detection> candidates;
  if (T <= W) {
    candidates = run_window(model, slice_padded(features, 0, T, min_length(model)), 0.0,
                            static_cast<double>(T), timing, cfg);
  } else {
    for (std::size_t s = 0;; s += hop) {
      const std::size_t e = std::min(T, s + W);
      auto dets = run_window(model, slice_padded(features, s, e, W), static_cast<double>(s),
                             static_cast<double>(e), timing, cfg);
      candidates.insert(candidates.end(), dets.begin(), dets.end());
      if (s + W >= T) break;
    }
  }
  return reportable(std::move(candidates), cfg);
}

// ---------------------------------------------------------------------------
// sources

Grid GridSource::read(std::size_t max_steps) {
  const std::size_t n = std::min(max_steps, features_.cols() - cursor_);
  Grid out = slice_padded(features_, cursor_, cursor_ + n, 0);
  cursor_ += n;
  return out;
}

FileSource::FileSource(const std::filesystem::path& path)
    : in_(path, std::ios::binary), name_(path.string()) {
  if (!in_) throw std::runtime_error("cannot open " + name_);
  std::vector<unsigned char> header(kFeatureHeaderBytes);
  in_.read(reinterpret_cast<char*>(header.data()), static_cast<std::streamsize>(header.size()));
  header.resize(static_cast<std::size_t>(in_.gcount()));
  const FeatureHeader h = decode_feature_header(header, name_);
  check_feature_payload(h, std::filesystem::file_size(path) - kFeatureHeaderBytes, name_);
  channels_ = h.channels;
  length_ = h.length;
}

Grid FileSource::read(std::size_t max_steps) {
  const std::size_t n = std::min(max_steps, length_ - cursor_);
  Grid out({channels_, n});
  std::vector<float> row(channels_);
  for (std::size_t t = 0; t < n; ++t) {
    in_.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(4 * channels_));
    if (!in_) {
      throw FormatError(name_ + ": truncated payload at byte offset " +
                            std::to_string(kFeatureHeaderBytes + 4 * channels_ * cursor_),
                        kFeatureHeaderBytes + 4 * channels_ * cursor_);
    }
    for (std::size_t c = 0; c < channels_; ++c) {
      if (!std::isfinite(row[c])) {
        const std::size_t at = kFeatureHeaderBytes + 4 * (channels_ * (cursor_ + t) + c);
        throw FormatError(name_ + ": non-finite value at byte offset " + std::to_string(at), at);
      }
      out(c, t) = row[c];
    }
  }
  cursor_ += n;
  return out;
}

// ---------------------------------------------------------------------------
// streaming

std::vector<Detection> detect_stream(FeatureSource& source, const Model& model,
                                     const Timing& timing, const InferConfig& cfg,
                                     const DetectionSink& sink) {
  check_window(model, cfg);
  const std::size_t W = cfg.window, hop = W / 2, C = source.channels();
  const double step = timing.step_seconds();

  // buffered columns cover base steps [buf_start, buf_start + buf.size())
  std::vector<std::vector<double>> buf;
  std::size_t buf_start = 0;
  bool eof = false;
  auto fill_to = [&](std::size_t until) {
    while (!eof && buf_start + buf.size() < until) {
      const Grid chunk = source.read(until - buf_start - buf.size());
      if (chunk.cols() == 0) {
        eof = true;
        break;
      }
      for (std::size_t t = 0; t < chunk.cols(); ++t) {
        std::vector<double> col(C);
        for (std::size_t c = 0; c < C; ++c) col[c] = chunk(c, t);
        buf.push_back(std::move(col));
      }
    }
  };
  auto window_grid = [&](std::size_t s, std::size_t e, std::size_t width) {
    Grid g({C, std::max(width, e - s)});
    for (std::size_t t = s; t < e; ++t) {
      for (std::size_t c = 0; c < C; ++c) g(c, t - s) = buf[t - buf_start][c];
    }
    return g;
  };

  std::vector<Detection> pending, emitted;
  auto finalize = [&](double frontier_s, bool all) {
    // connected components of the same-label positive-overlap graph
    const std::size_t n = pending.size();
    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    std::function<std::size_t(std::size_t)> root = [&](std::size_t i) {
      return parent[i] == i ? i : parent[i] = root(parent[i]);
    };
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        if (overlaps(pending[i], pending[j])) parent[root(i)] = root(j);
      }
    }
    std::vector<double> max_end(n, -INFINITY);
    for (std::size_t i = 0; i < n; ++i) {
      max_end[root(i)] = std::max(max_end[root(i)], pending[i].end_s);
    }
    std::vector<Detection> ready, keep;
    std::map<std::size_t, std::vector<Detection>> groups;
    for (std::size_t i = 0; i < n; ++i) {
      if (all || max_end[root(i)] <= frontier_s) {
        groups[root(i)].push_back(pending[i]);
      } else {
        keep.push_back(pending[i]);
      }
    }
    for (auto& [r, group] : groups) {
      auto dets = reportable(std::move(group), cfg);
      ready.insert(ready.end(), dets.begin(), dets.end());
    }
    pending = std::move(keep);
    std::stable_sort(ready.begin(), ready.end(), detection_before);
    if (!ready.empty()) {
      if (sink) sink(ready);
      emitted.insert(emitted.end(), ready.begin(), ready.end());
    }
  };

  fill_to(W + 1);
  const std::size_t first_available = buf.size();
  if (first_available == 0) return {};
  if (eof && first_available <= W) {
    const Grid x = window_grid(0, first_available, std::size_t{1} << model.config().encoder.num_levels);
    pending = run_window(model, x, 0.0, static_cast<double>(first_available), timing, cfg);
    finalize(0.0, true);
    return emitted;
  }

  for (std::size_t s = 0;; s += hop) {
    fill_to(s + W + 1);
    const std::size_t e = std::min(buf_start + buf.size(), s + W);
    auto dets = run_window(model, window_grid(s, e, W), static_cast<double>(s),
                           static_cast<double>(e), timing, cfg);
    pending.insert(pending.end(), dets.begin(), dets.end());
    const bool last = eof && s + W >= buf_start + buf.size();
    if (last) {
      finalize(0.0, true);
      break;
    }
    finalize(static_cast<double>(s + hop) * step, false);
    // drop columns no later window needs
    const std::size_t next = s + hop;
    buf.erase(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(next - buf_start));
    buf_start = next;
  }
  return emitted;
}

}  // namespace mgtad
