#include "mgtad/train.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <tuple>

namespace mgtad {

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0)) throw std::invalid_argument("train: learning_rate must be >= 0");
  if (batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
  if (!(focal_gamma >= 0.0)) throw std::invalid_argument("train: focal_gamma must be >= 0");
  if (!(focal_alpha > 0.0 && focal_alpha < 1.0)) {
    throw std::invalid_argument("train: focal_alpha must be in (0, 1)");
  }
  for (std::size_t i = 0; i < level_bounds.size(); ++i) {
    if (!(level_bounds[i] > 0.0) || (i > 0 && !(level_bounds[i] > level_bounds[i - 1]))) {
      throw std::invalid_argument("train: level_bounds must be positive and increasing");
    }
  }
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw std::invalid_argument("train: Adam betas must be in [0, 1)");
  }
  if (!(adam_epsilon > 0.0)) throw std::invalid_argument("train: adam_epsilon must be > 0");
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"learning_rate", c.learning_rate},
                     {"epochs", c.epochs},
                     {"batch_size", c.batch_size},
                     {"focal_gamma", c.focal_gamma},
                     {"focal_alpha", c.focal_alpha},
                     {"level_bounds", c.level_bounds},
                     {"seed", c.seed},
                     {"warmup_steps", c.warmup_steps},
                     {"adam_beta1", c.adam_beta1},
                     {"adam_beta2", c.adam_beta2},
                     {"adam_epsilon", c.adam_epsilon}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  const TrainConfig d;
  c.learning_rate = j.value("learning_rate", d.learning_rate);
  c.epochs = j.value("epochs", d.epochs);
  c.batch_size = j.value("batch_size", d.batch_size);
  c.focal_gamma = j.value("focal_gamma", d.focal_gamma);
  c.focal_alpha = j.value("focal_alpha", d.focal_alpha);
  c.level_bounds = j.value("level_bounds", d.level_bounds);
  c.seed = j.value("seed", d.seed);
  c.warmup_steps = j.value("warmup_steps", d.warmup_steps);
  c.adam_beta1 = j.value("adam_beta1", d.adam_beta1);
  c.adam_beta2 = j.value("adam_beta2", d.adam_beta2);
  c.adam_epsilon = j.value("adam_epsilon", d.adam_epsilon);
}

// ---------------------------------------------------------------------------
// assignment

std::size_t assign_level(double duration, const std::vector<double>& bounds,
                         std::size_t num_levels) {
  std::size_t level = 1;
  while (level - 1 < bounds.size() && duration > bounds[level - 1]) ++level;
  return std::min(level, num_levels);
}

double Targets::positive_weight() const {
  double w = 0.0;
  for (const auto& l : levels) {
    for (double x : l.weight) w += x;
  }
  return w;
}

std::size_t Targets::positive_count() const {
  std::size_t n = 0;
  for (const auto& l : levels) {
    for (double x : l.weight) n += x > 0.0;
  }
  return n;
}

namespace {

double snap(double x) {
  const double r = std::round(x);
  return std::abs(x - r) < 1e-9 ? r : x;
}

}  // namespace

std::vector<ActionInstance> instances_in_steps(const VideoAnnotation& annotation) {
  const double step = annotation.step_seconds();
  std::vector<ActionInstance> out;
  out.reserve(annotation.instances.size());
  for (auto a : annotation.instances) {
    a.start_s = snap(a.start_s / step);
    a.end_s = snap(a.end_s / step);
    out.push_back(a);
  }
  return out;
}

Targets assign_targets(const std::vector<ActionInstance>& instances,
                       const std::vector<std::size_t>& level_lengths, std::size_t num_classes,
                       const std::vector<double>& bounds) {
  const std::size_t N = level_lengths.size();
  Targets out;
  out.levels.resize(N);
  for (std::size_t n = 0; n < N; ++n) {
    out.levels[n].classes = Grid({num_classes, level_lengths[n]});
    out.levels[n].offsets = Grid({2, level_lengths[n]});
    out.levels[n].weight.assign(level_lengths[n], 0.0);
  }

  std::map<std::tuple<double, double, int>, double> multiplicity;
  for (const auto& a : instances) {
    if (!(a.end_s > a.start_s)) throw std::invalid_argument("assign_targets: end <= start");
    if (a.label < 0 || static_cast<std::size_t>(a.label) >= num_classes) {
      throw std::invalid_argument("assign_targets: unknown label " + std::to_string(a.label));
    }
    multiplicity[{a.start_s, a.end_s, a.label}] += 1.0;
  }

  std::vector<std::vector<double>> owner_length(N);
  for (std::size_t n = 0; n < N; ++n) owner_length[n].assign(level_lengths[n], INFINITY);

  for (const auto& [key, weight] : multiplicity) {
    const auto [start, end, label] = key;
    const double duration = end - start;
    const std::size_t level = assign_level(duration, bounds, N);
    auto& lt = out.levels[level - 1];
    const double stride = std::ldexp(1.0, static_cast<int>(level));
    const double first = std::max(0.0, std::ceil(start / stride));
    const double last = std::floor(end / stride);
    for (double tt = first; tt <= last && tt < static_cast<double>(level_lengths[level - 1]);
         ++tt) {
      const auto t = static_cast<std::size_t>(tt);
      if (!(duration < owner_length[level - 1][t])) continue;
      owner_length[level - 1][t] = duration;
      for (std::size_t c = 0; c < num_classes; ++c) lt.classes(c, t) = 0.0;
      lt.classes(static_cast<std::size_t>(label), t) = 1.0;
      lt.offsets(0, t) = (tt * stride - start) / stride;
      lt.offsets(1, t) = (end - tt * stride) / stride;
      lt.weight[t] = weight;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// losses

double focal_bce(const Grid& probs, const LevelTargets& targets, double gamma, double alpha,
                 Grid* dprobs) {
  const std::size_t K = probs.rows(), T = probs.cols();
  if (targets.classes.shape() != probs.shape()) {
    throw std::invalid_argument("focal_bce: probs " + probs.shape_string() + " vs targets " +
                                targets.classes.shape_string());
  }
  if (dprobs) *dprobs = Grid(probs.shape());
  constexpr double kFloor = 1e-15;
  double loss = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    const double w = std::max(targets.weight[t], 1.0);
    for (std::size_t c = 0; c < K; ++c) {
      const double p = probs(c, t);
      const bool positive = targets.classes(c, t) > 0.5;
      const double a = positive ? alpha : 1.0 - alpha;
      const double q = std::clamp(positive ? p : 1.0 - p, kFloor, 1.0);
      const double one_minus = 1.0 - q;
      const double mod = std::pow(one_minus, gamma);
      loss += -w * a * mod * std::log(q);
      if (dprobs) {
        // d/dq of -(1-q)^g log q
        const double dmod = gamma == 0.0 ? 0.0 : gamma * std::pow(one_minus, gamma - 1.0);
        const double dq = a * (dmod * std::log(q) - mod / q);
        (*dprobs)(c, t) = w * (positive ? dq : -dq);
      }
    }
  }
  return loss;
}

double diou_1d(double ps, double pe, double ts, double te, double* dps, double* dpe) {
  const double inter = std::min(ps, ts) + std::min(pe, te);
  const double uni = ps + pe + ts + te - inter;
  const double enc = std::max(ps, ts) + std::max(pe, te);
  const double rho = ((pe - ps) - (te - ts)) / 2.0;
  if (!(uni > 0.0) || !(enc > 0.0)) {
    throw std::invalid_argument("diou_1d: degenerate intervals");
  }
  const double iou = inter / uni;
  const double loss = 1.0 - iou + rho * rho / (enc * enc);
  if (dps || dpe) {
    auto grad = [&](double dinter, double dunion, double denc, double drho) {
      const double diou = (dinter * uni - inter * dunion) / (uni * uni);
      return -diou + 2.0 * rho * drho / (enc * enc) - 2.0 * rho * rho * denc / (enc * enc * enc);
    };
    const double di_s = ps < ts ? 1.0 : 0.0;
    const double di_e = pe < te ? 1.0 : 0.0;
    if (dps) *dps = grad(di_s, 1.0 - di_s, ps > ts ? 1.0 : 0.0, -0.5);
    if (dpe) *dpe = grad(di_e, 1.0 - di_e, pe > te ? 1.0 : 0.0, 0.5);
  }
  return loss;
}

double diou_loss(const Grid& offsets, const LevelTargets& targets, Grid* doffsets) {
  if (offsets.shape() != targets.offsets.shape()) {
    throw std::invalid_argument("diou_loss: offsets " + offsets.shape_string() + " vs targets " +
                                targets.offsets.shape_string());
  }
  if (doffsets) *doffsets = Grid(offsets.shape());
  double loss = 0.0;
  for (std::size_t t = 0; t < offsets.cols(); ++t) {
    const double w = targets.weight[t];
    if (w <= 0.0) continue;
    double ds = 0.0, de = 0.0;
    loss += w * diou_1d(offsets(0, t), offsets(1, t), targets.offsets(0, t),
                        targets.offsets(1, t), doffsets ? &ds : nullptr,
                        doffsets ? &de : nullptr);
    if (doffsets) {
      (*doffsets)(0, t) = w * ds;
      (*doffsets)(1, t) = w * de;
    }
  }
  return loss;
}

LossParts sequence_loss(Model& model, const Grid& features, const Targets& targets,
                        const TrainConfig& cfg, double normaliser, bool backward) {
  ModelCache cache;
  const HeadOutputs out = model.forward(features, backward ? &cache : nullptr);
  const std::size_t N = out.class_probs.size();
  if (targets.levels.size() != N) {
    throw std::invalid_argument("sequence_loss: targets have " +
                                std::to_string(targets.levels.size()) + " levels, model has " +
                                std::to_string(N));
  }
  LossParts parts;
  std::vector<Grid> dprobs(N), doffsets(N);
  const double scale = 1.0 / normaliser;
  for (std::size_t n = 0; n < N; ++n) {
    parts.classification += focal_bce(out.class_probs[n], targets.levels[n], cfg.focal_gamma,
                                      cfg.focal_alpha, backward ? &dprobs[n] : nullptr);
    parts.regression +=
        diou_loss(out.offsets[n], targets.levels[n], backward ? &doffsets[n] : nullptr);
    if (backward) {
      dprobs[n] *= scale;
      doffsets[n] *= scale;
    }
  }
  parts.classification *= scale;
  parts.regression *= scale;
  if (backward) model.backward(cache, dprobs, doffsets);
  return parts;
}

// ---------------------------------------------------------------------------
// optimiser

Adam::Adam(const NamedParams& params, const TrainConfig& cfg)
    : params_(params),
      beta1_(cfg.adam_beta1),
      beta2_(cfg.adam_beta2),
      eps_(cfg.adam_epsilon) {
  for (const auto& [name, p] : params_) {
    m_.emplace_back(p->value.shape());
    v_.emplace_back(p->value.shape());
  }
}

void Adam::step(double lr) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Param& p = *params_[i].second;
    Grid& m = m_[i];
    Grid& v = v_[i];
    for (std::size_t k = 0; k < p.value.size(); ++k) {
      const double g = p.grad[k];
      m[k] = beta1_ * m[k] + (1.0 - beta1_) * g;
      v[k] = beta2_ * v[k] + (1.0 - beta2_) * g * g;
      p.value[k] -= lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + eps_);
    }
  }
}

// ---------------------------------------------------------------------------
// loop

std::vector<TrainSample> make_samples(const std::vector<std::pair<VideoAnnotation, Grid>>& data,
                                      const Model& model, const TrainConfig& cfg) {
  const auto& mc = model.config();
  std::vector<TrainSample> out;
  out.reserve(data.size());
  for (const auto& [ann, features] : data) {
    if (features.rank() != 2 || features.rows() != mc.in_channels) {
      throw std::invalid_argument("video " + ann.video_id + ": features " +
                                  features.shape_string() + " do not match " +
                                  std::to_string(mc.in_channels) + " input channels");
    }
    if (!features.all_finite()) {
      throw std::invalid_argument("video " + ann.video_id + ": features contain non-finite values");
    }
    const auto lengths = pyramid_lengths(features.cols(), mc.encoder.num_levels);
    out.push_back({features, assign_targets(instances_in_steps(ann), lengths, mc.num_classes,
                                            cfg.level_bounds)});
  }
  return out;
}

std::vector<EpochStats> fit(Model& model, const std::vector<TrainSample>& samples,
                            const TrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  if (samples.empty()) throw std::invalid_argument("fit: no training samples");
  Adam adam(model.parameters(), cfg);
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<EpochStats> trace;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    EpochStats stats;
    stats.epoch = epoch;
    std::size_t batches = 0;
    for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
      const std::size_t e = std::min(order.size(), b + cfg.batch_size);
      double norm = 0.0;
      for (std::size_t i = b; i < e; ++i) norm += samples[order[i]].targets.positive_weight();
      if (norm <= 0.0) norm = 1.0;
      model.zero_grad();
      LossParts batch;
      for (std::size_t i = b; i < e; ++i) {
        const auto& s = samples[order[i]];
        const auto parts = sequence_loss(model, s.features, s.targets, cfg, norm, true);
        batch.classification += parts.classification;
        batch.regression += parts.regression;
      }
      if (!std::isfinite(batch.total())) {
        throw std::runtime_error("training diverged: non-finite loss at epoch " +
                                 std::to_string(epoch));
      }
      const std::size_t step = adam.steps() + 1;
      const double warm = cfg.warmup_steps == 0
                              ? 1.0
                              : std::min(1.0, static_cast<double>(step) /
                                                  static_cast<double>(cfg.warmup_steps));
      adam.step(cfg.learning_rate * warm);
      stats.loss += batch.total();
      stats.classification += batch.classification;
      stats.regression += batch.regression;
      ++batches;
    }
    stats.loss /= static_cast<double>(batches);
    stats.classification /= static_cast<double>(batches);
    stats.regression /= static_cast<double>(batches);
    trace.push_back(stats);
    if (on_epoch) on_epoch(stats);
  }
  return trace;
}

}  // namespace mgtad
