#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "mgtad/grid.hpp"

// Layer primitives over C x T grids. Every forward has a matching backward
// that returns the input gradient and accumulates (+=) parameter gradients.
namespace mgtad::ops {

enum class PoolMode { Avg, Max };

inline constexpr double kLayerNormEpsilon = 1e-5;

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline double relu(double z) { return z > 0.0 ? z : 0.0; }

/// Same-padded dilated 1D convolution. x: [C_in x T], kernel: [C_out x C_in x k],
/// bias: [C_out] or empty for no bias.
Grid conv1d(const Grid& x, const Grid& kernel, const Grid& bias, int dilation = 1);
Grid conv1d_backward(const Grid& x, const Grid& kernel, int dilation, const Grid& dy,
                     Grid* dkernel, Grid* dbias);

struct LayerNormCache {
  Grid normalized;
  std::vector<double> inv_std;
};

/// Normalizes each time step over the channel axis; gain/shift are [C].
Grid layer_norm(const Grid& x, const Grid& gain, const Grid& shift,
                LayerNormCache* cache = nullptr);
Grid layer_norm_backward(const LayerNormCache& cache, const Grid& gain, const Grid& dy,
                         Grid* dgain, Grid* dshift);

/// [C x T] -> [C]. `argmax` receives the first maximizing index per channel.
Grid pool_over_time(const Grid& x, PoolMode mode, std::vector<std::size_t>* argmax = nullptr);
Grid pool_over_time_backward(std::size_t length, PoolMode mode,
                             const std::vector<std::size_t>& argmax, const Grid& dy);

/// [C x T] -> [1 x T].
Grid pool_over_channels(const Grid& x, PoolMode mode, std::vector<std::size_t>* argmax = nullptr);
Grid pool_over_channels_backward(std::size_t channels, PoolMode mode,
                                 const std::vector<std::size_t>& argmax, const Grid& dy);

struct Mlp2Cache {
  Grid hidden_pre;  // w1 * v before ReLU
};

/// Bias-free two-layer perceptron with ReLU hidden units.
/// v: [C], w1: [H x C], w2: [C x H].
Grid mlp2(const Grid& v, const Grid& w1, const Grid& w2, Mlp2Cache* cache = nullptr);
Grid mlp2_backward(const Grid& v, const Mlp2Cache& cache, const Grid& w1, const Grid& w2,
                   const Grid& dy, Grid* dw1, Grid* dw2);

/// Nearest-neighbour repeat along time: [C x T] -> [C x 2T].
Grid upsample2(const Grid& x);
Grid upsample2_backward(const Grid& dy);

/// Stride-2, window-2 max pooling along time: [C x T] -> [C x ceil(T/2)].
Grid downsample2(const Grid& x, std::vector<std::size_t>* argmax = nullptr);
Grid downsample2_backward(std::size_t length, const std::vector<std::size_t>& argmax,
                          const Grid& dy);

/// Stacks rank-2 grids with equal T along the channel axis.
Grid concat_channels(const Grid& a, const Grid& b);

/// Truncates or zero-pads the time axis to `length`.
Grid fit_length(const Grid& x, std::size_t length);

}  // namespace mgtad::ops
