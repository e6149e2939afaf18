#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "json.hpp"
#include "mgtad/grid.hpp"
#include "mgtad/model.hpp"
#include "mgtad/types.hpp"

namespace mgtad {

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t epochs = 50;
  std::size_t batch_size = 8;
  double focal_gamma = 2.0;
  double focal_alpha = 0.25;
  /// Upper bounds (base steps) of the assignment ranges for levels 1..N-1;
  /// the last level takes everything longer.
  std::vector<double> level_bounds{8, 16, 32, 64};
  std::uint64_t seed = 0;
  std::size_t warmup_steps = 10;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;

  void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

// ---------------------------------------------------------------------------
// Target assignment

/// Pyramid level (1-based) whose duration range contains `duration` base
/// steps, clamped to the deepest available level.
std::size_t assign_level(double duration, const std::vector<double>& bounds,
                         std::size_t num_levels);

struct LevelTargets {
  Grid classes;  // [K x T_n] one-hot at positives
  Grid offsets;  // [2 x T_n] (d_s, d_e) in level units at positives
  std::vector<double> weight;  // per timestep; > 0 marks a positive
};

struct Targets {
  std::vector<LevelTargets> levels;
  double positive_weight() const;
  std::size_t positive_count() const;
};

/// Instances are given in base steps. Identical (interval, label) entries
/// collapse into one target whose weight is their multiplicity; where two
/// instances claim the same timestep the shorter wins.
Targets assign_targets(const std::vector<ActionInstance>& instances_in_steps,
                       const std::vector<std::size_t>& level_lengths, std::size_t num_classes,
                       const std::vector<double>& bounds);

/// Converts an annotation's instances from seconds into base steps.
std::vector<ActionInstance> instances_in_steps(const VideoAnnotation& annotation);

// ---------------------------------------------------------------------------
// Losses. Both return the weighted sum; callers divide by the normaliser.

/// Focal binary cross-entropy summed over all K x T entries, each timestep
/// scaled by max(weight, 1). Writes d loss / d probs when `dprobs` is set.
double focal_bce(const Grid& probs, const LevelTargets& targets, double gamma, double alpha,
                 Grid* dprobs = nullptr);

/// 1 - IoU + rho^2 / enclosing^2 for two intervals given as non-negative
/// (start, end) offsets around the same anchor.
double diou_1d(double ps, double pe, double ts, double te, double* dps = nullptr,
               double* dpe = nullptr);

/// Weighted DIoU over positive timesteps.
double diou_loss(const Grid& offsets, const LevelTargets& targets, Grid* doffsets = nullptr);

struct LossParts {
  double classification = 0.0;
  double regression = 0.0;
  double total() const { return classification + regression; }
};

/// Loss of one sequence divided by `normaliser`; accumulates parameter
/// gradients when `backward` is set.
LossParts sequence_loss(Model& model, const Grid& features, const Targets& targets,
                        const TrainConfig& cfg, double normaliser, bool backward);

// ---------------------------------------------------------------------------
// Optimiser and loop

class Adam {
 public:
  Adam(const NamedParams& params, const TrainConfig& cfg);
  /// One update at learning rate `lr` from the accumulated gradients.
  void step(double lr);
  std::size_t steps() const { return t_; }

 private:
  NamedParams params_;
  std::vector<Grid> m_, v_;
  double beta1_, beta2_, eps_;
  std::size_t t_ = 0;
};

struct TrainSample {
  Grid features;  // [C x T]
  Targets targets;
};

/// Precomputes targets for a loaded dataset.
std::vector<TrainSample> make_samples(const std::vector<std::pair<VideoAnnotation, Grid>>& data,
                                      const Model& model, const TrainConfig& cfg);

struct EpochStats {
  std::size_t epoch = 0;
  double loss = 0.0;  // mean batch loss
  double classification = 0.0;
  double regression = 0.0;
};

using EpochCallback = std::function<void(const EpochStats&)>;

/// Trains in place. Throws std::runtime_error naming the epoch when the loss
/// becomes non-finite.
std::vector<EpochStats> fit(Model& model, const std::vector<TrainSample>& samples,
                            const TrainConfig& cfg, const EpochCallback& on_epoch = {});

}  // namespace mgtad
