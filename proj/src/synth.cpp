#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "mgtad/data.hpp"

namespace mgtad {

namespace {

std::size_t duration_steps(double seconds, double step_s) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(seconds / step_s)));
}

double cosine(const Grid& sig, std::size_t a, std::size_t b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t c = 0; c < sig.cols(); ++c) {
    ab += sig(a, c) * sig(b, c);
    aa += sig(a, c) * sig(a, c);
    bb += sig(b, c) * sig(b, c);
  }
  return ab / std::sqrt(aa * bb);
}

Grid make_signatures(const SynthSpec& spec, std::mt19937_64& rng) {
  Grid sig({spec.num_classes, spec.channels});
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t k = 0; k < spec.num_classes; ++k) {
    for (int attempt = 0;; ++attempt) {
      if (attempt == 1000) {
        throw std::invalid_argument("cannot draw " + std::to_string(spec.num_classes) +
                                    " non-collinear signatures in " +
                                    std::to_string(spec.channels) + " channels");
      }
      double norm = 0.0;
      for (std::size_t c = 0; c < spec.channels; ++c) {
        sig(k, c) = normal(rng);
        norm += sig(k, c) * sig(k, c);
      }
      norm = std::sqrt(norm);
      if (norm == 0.0) continue;
      for (std::size_t c = 0; c < spec.channels; ++c) {
        sig(k, c) = static_cast<float>(sig(k, c) / norm * spec.signature_scale);
      }
      bool ok = true;
      for (std::size_t j = 0; j < k && ok; ++j) ok = std::abs(cosine(sig, j, k)) < 0.99;
      if (ok) break;
    }
  }
  return sig;
}

}  // namespace

void SynthSpec::validate() const {
  if (num_classes < 1) throw std::invalid_argument("synth: num_classes must be >= 1");
  if (channels < 1) throw std::invalid_argument("synth: channels must be >= 1");
  if (!(zipf_exponent >= 0.0)) throw std::invalid_argument("synth: zipf_exponent must be >= 0");
  if (!(noise >= 0.0)) throw std::invalid_argument("synth: noise must be >= 0");
  if (!(signature_scale > 0.0)) throw std::invalid_argument("synth: signature_scale must be > 0");
  if (!(fps > 0.0)) throw std::invalid_argument("synth: fps must be > 0");
  if (feature_stride < 1) throw std::invalid_argument("synth: feature_stride must be >= 1");
  if (min_length < 1 || min_length > max_length) {
    throw std::invalid_argument("synth: need 1 <= min_length <= max_length");
  }
  if (min_instances > max_instances) {
    throw std::invalid_argument("synth: min_instances exceeds max_instances");
  }
  if (!durations_s.empty() && durations_s.size() != num_classes) {
    throw std::invalid_argument("synth: durations_s needs one range per class");
  }
  const double step_s = feature_stride / fps;
  std::size_t longest = 0;
  for (std::size_t k = 0; k < num_classes; ++k) {
    const auto [lo, hi] = duration_range(k);
    if (!(lo > 0.0 && lo <= hi)) {
      throw std::invalid_argument("synth: class " + std::to_string(k) +
                                  " needs a positive duration range");
    }
    longest = std::max(longest, duration_steps(hi, step_s));
  }
  if (max_instances > 0) {
    const std::size_t need = max_instances * longest + (max_instances - 1) * min_gap;
    if (need > min_length) {
      throw std::invalid_argument("synth: infeasible packing, " + std::to_string(max_instances) +
                                  " instances of up to " + std::to_string(longest) +
                                  " steps with gap " + std::to_string(min_gap) + " need " +
                                  std::to_string(need) + " steps but min_length is " +
                                  std::to_string(min_length));
    }
  }
}

std::pair<double, double> SynthSpec::duration_range(std::size_t label) const {
  if (!durations_s.empty()) return durations_s.at(label);
  const double k = static_cast<double>(label % 5);
  return {1.0 + 0.5 * k, 2.5 + 0.75 * k};
}

void to_json(nlohmann::json& j, const SynthSpec& s) {
  j = nlohmann::json{{"num_classes", s.num_classes},
                     {"channels", s.channels},
                     {"zipf_exponent", s.zipf_exponent},
                     {"noise", s.noise},
                     {"signature_scale", s.signature_scale},
                     {"num_videos", s.num_videos},
                     {"min_length", s.min_length},
                     {"max_length", s.max_length},
                     {"min_instances", s.min_instances},
                     {"max_instances", s.max_instances},
                     {"min_gap", s.min_gap},
                     {"fps", s.fps},
                     {"feature_stride", s.feature_stride},
                     {"id_prefix", s.id_prefix}};
  if (!s.durations_s.empty()) j["durations_s"] = s.durations_s;
  if (s.signature_seed) j["signature_seed"] = *s.signature_seed;
}

void from_json(const nlohmann::json& j, SynthSpec& s) {
  const SynthSpec d;
  s.num_classes = j.value("num_classes", d.num_classes);
  s.channels = j.value("channels", d.channels);
  s.zipf_exponent = j.value("zipf_exponent", d.zipf_exponent);
  s.durations_s = j.value("durations_s", d.durations_s);
  s.noise = j.value("noise", d.noise);
  s.signature_scale = j.value("signature_scale", d.signature_scale);
  s.num_videos = j.value("num_videos", d.num_videos);
  s.min_length = j.value("min_length", d.min_length);
  s.max_length = j.value("max_length", d.max_length);
  s.min_instances = j.value("min_instances", d.min_instances);
  s.max_instances = j.value("max_instances", d.max_instances);
  s.min_gap = j.value("min_gap", d.min_gap);
  s.fps = j.value("fps", d.fps);
  s.feature_stride = j.value("feature_stride", d.feature_stride);
  s.id_prefix = j.value("id_prefix", d.id_prefix);
  if (j.contains("signature_seed")) {
    s.signature_seed = j.at("signature_seed").get<std::uint64_t>();
  } else {
    s.signature_seed.reset();
  }
}

SynthDataset synth_generate(const SynthSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::mt19937_64 sig_rng(spec.signature_seed.value_or(seed));
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  SynthDataset out;
  out.signatures = make_signatures(spec, sig_rng);

  std::vector<double> weights(spec.num_classes);
  for (std::size_t k = 0; k < spec.num_classes; ++k) {
    weights[k] = std::pow(static_cast<double>(k + 1), -spec.zipf_exponent);
  }
  std::discrete_distribution<int> pick_label(weights.begin(), weights.end());
  std::normal_distribution<double> noise(0.0, 1.0);
  const double step_s = spec.feature_stride / spec.fps;

  for (std::size_t v = 0; v < spec.num_videos; ++v) {
    const std::size_t T =
        std::uniform_int_distribution<std::size_t>(spec.min_length, spec.max_length)(rng);
    const std::size_t n =
        std::uniform_int_distribution<std::size_t>(spec.min_instances, spec.max_instances)(rng);

    std::vector<int> labels(n);
    std::vector<std::size_t> lengths(n);
    std::size_t used = 0;
    for (std::size_t i = 0; i < n; ++i) {
      labels[i] = pick_label(rng);
      const auto [lo, hi] = spec.duration_range(static_cast<std::size_t>(labels[i]));
      lengths[i] = duration_steps(std::uniform_real_distribution<double>(lo, hi)(rng), step_s);
      used += lengths[i];
    }
    if (n > 0) used += (n - 1) * spec.min_gap;
    const std::size_t slack = T - used;

    // n cut points in [0, slack] split the free steps into n + 1 gaps
    std::vector<std::size_t> cuts(n);
    std::uniform_int_distribution<std::size_t> cut(0, slack);
    for (auto& c : cuts) c = cut(rng);
    std::sort(cuts.begin(), cuts.end());

    SynthVideo video;
    auto& ann = video.annotation;
    ann.video_id = spec.id_prefix + "_" + std::to_string(v);
    ann.fps = spec.fps;
    ann.feature_stride = spec.feature_stride;
    ann.duration_s = static_cast<double>(T) * step_s;

    video.features = Grid({spec.channels, T});
    for (double& x : video.features.values()) x = spec.noise * noise(rng);

    std::size_t prefix = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t start = prefix + i * spec.min_gap + cuts[i];
      const std::size_t end = start + lengths[i];
      for (std::size_t t = start; t < end; ++t) {
        for (std::size_t c = 0; c < spec.channels; ++c) {
          video.features(c, t) += out.signatures(static_cast<std::size_t>(labels[i]), c);
        }
      }
      ann.instances.push_back({static_cast<double>(start) * step_s,
                               static_cast<double>(end) * step_s, labels[i]});
      prefix += lengths[i];
    }
    // keep in-memory values identical to what the feature file stores
    for (double& x : video.features.values()) x = static_cast<float>(x);
    ann.validate();
    out.videos.push_back(std::move(video));
  }
  return out;
}

}  // namespace mgtad
