#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "mgtad/encoder.hpp"
#include "mgtad/grid.hpp"
#include "mgtad/ops.hpp"

namespace mgtad {

struct HeadConfig {
  std::size_t channels = 16;
  std::size_t num_classes = 5;
  std::size_t mlp_ratio = 4;
  int spatial_kernel = 7;
  bool attention = true;

  void validate() const;
};

/// Sequential channel-then-time gating. The channel gate pools over time and
/// runs both pooled vectors through one shared MLP; the time gate pools over
/// channels and convolves the [avg; max] pair with a length-7 kernel.
class StAttention {
 public:
  struct Cache {
    Grid input;
    Grid avg_pooled;
    Grid max_pooled;
    std::vector<std::size_t> max_index;
    ops::Mlp2Cache mlp_avg;
    ops::Mlp2Cache mlp_max;
    Grid channel_gate;  // [C]
    Grid channel_gated;  // F'
    Grid stacked;        // [2 x T]
    std::vector<std::size_t> channel_max_index;
    Grid time_gate;  // [1 x T]
  };

  StAttention(std::size_t channels, std::size_t mlp_ratio, int kernel);

  /// Per-channel weights a in (0,1)^C.
  Grid temporal_weights(const Grid& f) const;
  /// Per-time weights s in (0,1)^T for an (already channel-gated) input.
  Grid spatial_weights(const Grid& f) const;

  Grid forward(const Grid& f, Cache* cache = nullptr) const;
  Grid backward(const Cache& cache, const Grid& dy);

  void init(std::mt19937_64& rng);
  void collect(const std::string& prefix, NamedParams& out);

  bool enabled = true;
  Param mlp_w1;          // [C/r x C]
  Param mlp_w2;          // [C x C/r]
  Param spatial_weight;  // [1 x 2 x k]
  Param spatial_bias;    // [1]
};

/// Three k=3 convolutions: two ReLU trunk layers then an output layer whose
/// activation is sigmoid (class head) or ReLU (localization head).
class ConvStack {
 public:
  enum class Output { Sigmoid, Relu };

  struct Cache {
    Grid input;
    Grid pre1, hidden1;
    Grid pre2, hidden2;
    Grid pre_out;
    Grid output;
  };

  ConvStack(std::size_t channels, std::size_t out_channels, Output activation);

  Grid forward(const Grid& x, Cache* cache = nullptr) const;
  Grid backward(const Cache& cache, const Grid& dy);

  void init(std::mt19937_64& rng, double out_bias);
  void collect(const std::string& prefix, NamedParams& out);

  Param w1, b1, w2, b2, w_out, b_out;

 private:
  Output activation_;
};

struct HeadOutputs {
  std::vector<Grid> class_probs;  // per level [K x T_n], in (0,1)
  std::vector<Grid> offsets;      // per level [2 x T_n] (start, end), >= 0, level units
};

/// Mean of the available neighbour paths for level index `level` (0-based):
/// DS(A[level-1]), A[level], US(A[level+1]) fitted to T_level.
Grid fuse_three_paths(const std::vector<Grid>& attended, std::size_t level);

/// Level-shared detection head.
class Head {
 public:
  struct Cache {
    std::vector<StAttention::Cache> attention;
    std::vector<std::vector<std::size_t>> down_argmax;  // DS of level n-1 into level n
    std::vector<ConvStack::Cache> cls;
    std::vector<ConvStack::Cache> loc;
  };

  explicit Head(const HeadConfig& cfg);

  HeadOutputs forward(const PyramidFeatures& pyramid, Cache* cache = nullptr) const;
  std::vector<Grid> backward(const Cache& cache, const std::vector<Grid>& dprobs,
                             const std::vector<Grid>& doffsets);

  Grid class_head(const Grid& fused) const { return cls.forward(fused); }
  Grid loc_head(const Grid& fused) const { return loc.forward(fused); }

  void init(std::mt19937_64& rng);
  void collect(const std::string& prefix, NamedParams& out);
  void set_attention(bool on) { attention.enabled = on; }

  const HeadConfig& config() const { return cfg_; }

  StAttention attention;
  ConvStack cls;
  ConvStack loc;

 private:
  HeadConfig cfg_;
};

inline Grid temporal_attention(const Grid& f, const StAttention& attn) {
  return attn.temporal_weights(f);
}
inline Grid spatial_attention(const Grid& f, const StAttention& attn) {
  return attn.spatial_weights(f);
}
inline Grid st_attention(const Grid& f, const StAttention& attn) { return attn.forward(f); }

}  // namespace mgtad
