#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "mgtad/grid.hpp"
#include "mgtad/ops.hpp"

namespace mgtad {

struct DynEConfig {
  std::size_t channels = 16;
  std::vector<int> kernel_set{1, 3, 5};
  int window_expansion = 2;  // dilation of the multi-kernel branch
  std::size_t num_levels = 5;

  void validate() const;
};

/// Level lengths ceil(T / 2^n) for n = 1..num_levels.
std::vector<std::size_t> pyramid_lengths(std::size_t length, std::size_t num_levels);

/// Input-conditioned gated convolution:
///   y = sigmoid(A * avg_t(x) + a) (.) conv1d(x, W, b, dilation)
/// The per-output-channel gate is broadcast over time.
class DfaConv {
 public:
  struct Cache {
    Grid input;
    Grid pooled;
    Grid gate;
    Grid conv;
  };

  DfaConv(std::size_t in_channels, std::size_t out_channels, int kernel, int dilation);

  Grid forward(const Grid& x, Cache* cache = nullptr) const;
  Grid backward(const Cache& cache, const Grid& dy);

  void init(std::mt19937_64& rng);
  void collect(const std::string& prefix, NamedParams& out);

  int kernel() const { return kernel_; }
  int dilation() const { return dilation_; }

  Param weight;       // [out x in x k]
  Param bias;         // [out]
  Param gate_weight;  // [out x in]
  Param gate_bias;    // [out]

 private:
  int kernel_;
  int dilation_;
};

/// Stride-2 encoder block: D = DS(F); output = D + instance(D) + multi_kernel(D).
class DynELayer {
 public:
  struct Cache {
    std::size_t input_length = 0;
    std::vector<std::size_t> ds_argmax;
    ops::LayerNormCache ln;
    Grid normalized;
    DfaConv::Cache instance;
    std::vector<DfaConv::Cache> branches;
  };

  explicit DynELayer(const DynEConfig& cfg);

  Grid forward(const Grid& f, Cache* cache = nullptr) const;
  Grid backward(const Cache& cache, const Grid& dy);

  void init(std::mt19937_64& rng);
  void collect(const std::string& prefix, NamedParams& out);

  Param ln_gain;
  Param ln_shift;
  DfaConv instance;
  std::vector<DfaConv> branches;
};

struct PyramidFeatures {
  std::vector<Grid> levels;  // level n (1-based) is levels[n - 1]
};

/// Input projection (k=3 conv + ReLU) followed by num_levels stacked DynE layers.
class Encoder {
 public:
  struct Cache {
    Grid input;
    Grid projected_pre;
    std::vector<DynELayer::Cache> layers;
  };

  Encoder(std::size_t in_channels, const DynEConfig& cfg);

  PyramidFeatures forward(const Grid& x, Cache* cache = nullptr) const;
  Grid backward(const Cache& cache, const std::vector<Grid>& dlevels);

  void init(std::mt19937_64& rng);
  void collect(const std::string& prefix, NamedParams& out);

  const DynEConfig& config() const { return cfg_; }
  std::size_t in_channels() const { return in_channels_; }

  Param proj_weight;  // [C x C_in x 3]
  Param proj_bias;    // [C]
  std::vector<DynELayer> layers;

 private:
  std::size_t in_channels_;
  DynEConfig cfg_;
};

// Free-function spellings of the encoder operations.
inline Grid dfa_conv(const Grid& x, const DfaConv& layer) { return layer.forward(x); }
inline Grid dyne_layer(const Grid& f, const DynELayer& layer) { return layer.forward(f); }
inline PyramidFeatures build_pyramid(const Grid& f0, const Encoder& encoder) {
  return encoder.forward(f0);
}

}  // namespace mgtad
