#include "mgtad/ops.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace mgtad::ops {

namespace {

void require_rank2(const Grid& x, const char* what) {
  if (x.rank() != 2) {
    throw std::invalid_argument(std::string(what) + ": expected a [C x T] grid, got " +
                                x.shape_string());
  }
}

void require_time(const Grid& x, const char* what) {
  require_rank2(x, what);
  if (x.cols() == 0) throw std::invalid_argument(std::string(what) + ": time axis is empty");
}

void check_conv_shapes(const Grid& x, const Grid& kernel, int dilation) {
  require_rank2(x, "conv1d input");
  if (kernel.rank() != 3) {
    throw std::invalid_argument("conv1d kernel: expected [C_out x C_in x k], got " +
                                kernel.shape_string());
  }
  if (kernel.dim(1) != x.rows()) {
    throw std::invalid_argument("conv1d: input channel axis mismatch (kernel expects " +
                                std::to_string(kernel.dim(1)) + ", input has " +
                                std::to_string(x.rows()) + ")");
  }
  if (kernel.dim(2) % 2 == 0) {
    throw std::invalid_argument("conv1d: kernel size axis must be odd, got " +
                                std::to_string(kernel.dim(2)));
  }
  if (dilation < 1) throw std::invalid_argument("conv1d: dilation must be >= 1");
}

}  // namespace

Grid conv1d(const Grid& x, const Grid& kernel, const Grid& bias, int dilation) {
  check_conv_shapes(x, kernel, dilation);
  const std::size_t c_out = kernel.dim(0), c_in = kernel.dim(1), k = kernel.dim(2);
  const std::size_t T = x.cols();
  if (!bias.empty() && bias.size() != c_out) {
    throw std::invalid_argument("conv1d: bias output channel axis mismatch (" +
                                std::to_string(bias.size()) + " vs " + std::to_string(c_out) +
                                ")");
  }
  const long pad = static_cast<long>(dilation) * static_cast<long>(k - 1) / 2;
  const long len = static_cast<long>(T);
  Grid y({c_out, T});
  for (std::size_t o = 0; o < c_out; ++o) {
    double* yo = y.row(o).data();
    if (!bias.empty()) std::fill(yo, yo + T, bias[o]);
    for (std::size_t i = 0; i < c_in; ++i) {
      const double* xi = x.row(i).data();
      for (std::size_t j = 0; j < k; ++j) {
        const double w = kernel[(o * c_in + i) * k + j];
        if (w == 0.0) continue;
        const long off = static_cast<long>(dilation) * static_cast<long>(j) - pad;
        const long lo = std::max(0L, -off), hi = std::min(len, len - off);
        for (long t = lo; t < hi; ++t) yo[t] += w * xi[t + off];
      }
    }
  }
  return y;
}

Grid conv1d_backward(const Grid& x, const Grid& kernel, int dilation, const Grid& dy,
                     Grid* dkernel, Grid* dbias) {
  check_conv_shapes(x, kernel, dilation);
  const std::size_t c_out = kernel.dim(0), c_in = kernel.dim(1), k = kernel.dim(2);
  const std::size_t T = x.cols();
  const long pad = static_cast<long>(dilation) * static_cast<long>(k - 1) / 2;
  const long len = static_cast<long>(T);
  Grid dx({c_in, T});
  for (std::size_t o = 0; o < c_out; ++o) {
    const double* go = dy.row(o).data();
    if (dbias) {
      double s = 0.0;
      for (std::size_t t = 0; t < T; ++t) s += go[t];
      (*dbias)[o] += s;
    }
    for (std::size_t i = 0; i < c_in; ++i) {
      const double* xi = x.row(i).data();
      double* gi = dx.row(i).data();
      for (std::size_t j = 0; j < k; ++j) {
        const std::size_t widx = (o * c_in + i) * k + j;
        const double w = kernel[widx];
        const long off = static_cast<long>(dilation) * static_cast<long>(j) - pad;
        const long lo = std::max(0L, -off), hi = std::min(len, len - off);
        double acc = 0.0;
        for (long t = lo; t < hi; ++t) {
          acc += go[t] * xi[t + off];
          gi[t + off] += w * go[t];
        }
        if (dkernel) (*dkernel)[widx] += acc;
      }
    }
  }
  return dx;
}

Grid layer_norm(const Grid& x, const Grid& gain, const Grid& shift, LayerNormCache* cache) {
  require_rank2(x, "layer_norm");
  const std::size_t C = x.rows(), T = x.cols();
  if (gain.size() != C || shift.size() != C) {
    throw std::invalid_argument("layer_norm: gain/shift channel axis mismatch (expected " +
                                std::to_string(C) + ")");
  }
  Grid y({C, T});
  Grid xhat({C, T});
  std::vector<double> inv_std(T);
  for (std::size_t t = 0; t < T; ++t) {
    double mean = 0.0;
    for (std::size_t c = 0; c < C; ++c) mean += x(c, t);
    mean /= static_cast<double>(C);
    double var = 0.0;
    for (std::size_t c = 0; c < C; ++c) {
      const double d = x(c, t) - mean;
      var += d * d;
    }
    var /= static_cast<double>(C);
    const double is = 1.0 / std::sqrt(var + kLayerNormEpsilon);
    inv_std[t] = is;
    for (std::size_t c = 0; c < C; ++c) {
      const double n = (x(c, t) - mean) * is;
      xhat(c, t) = n;
      y(c, t) = gain[c] * n + shift[c];
    }
  }
  if (cache) {
    cache->normalized = std::move(xhat);
    cache->inv_std = std::move(inv_std);
  }
  return y;
}

Grid layer_norm_backward(const LayerNormCache& cache, const Grid& gain, const Grid& dy,
                         Grid* dgain, Grid* dshift) {
  const Grid& xhat = cache.normalized;
  const std::size_t C = xhat.rows(), T = xhat.cols();
  Grid dx({C, T});
  const double inv_c = 1.0 / static_cast<double>(C);
  for (std::size_t t = 0; t < T; ++t) {
    double mean_g = 0.0, mean_gx = 0.0;
    for (std::size_t c = 0; c < C; ++c) {
      const double g = dy(c, t) * gain[c];
      mean_g += g;
      mean_gx += g * xhat(c, t);
      if (dgain) (*dgain)[c] += dy(c, t) * xhat(c, t);
      if (dshift) (*dshift)[c] += dy(c, t);
    }
    mean_g *= inv_c;
    mean_gx *= inv_c;
    for (std::size_t c = 0; c < C; ++c) {
      const double g = dy(c, t) * gain[c];
      dx(c, t) = cache.inv_std[t] * (g - mean_g - xhat(c, t) * mean_gx);
    }
  }
  return dx;
}

Grid pool_over_time(const Grid& x, PoolMode mode, std::vector<std::size_t>* argmax) {
  require_time(x, "pool_over_time");
  const std::size_t C = x.rows(), T = x.cols();
  Grid out({C});
  if (argmax) argmax->assign(C, 0);
  for (std::size_t c = 0; c < C; ++c) {
    auto r = x.row(c);
    if (mode == PoolMode::Avg) {
      double s = 0.0;
      for (double v : r) s += v;
      out[c] = s / static_cast<double>(T);
    } else {
      std::size_t best = 0;
      for (std::size_t t = 1; t < T; ++t) {
        if (r[t] > r[best]) best = t;
      }
      out[c] = r[best];
      if (argmax) (*argmax)[c] = best;
    }
  }
  return out;
}

Grid pool_over_time_backward(std::size_t length, PoolMode mode,
                             const std::vector<std::size_t>& argmax, const Grid& dy) {
  const std::size_t C = dy.size();
  Grid dx({C, length});
  for (std::size_t c = 0; c < C; ++c) {
    if (mode == PoolMode::Avg) {
      const double g = dy[c] / static_cast<double>(length);
      for (double& v : dx.row(c)) v = g;
    } else {
      dx(c, argmax[c]) = dy[c];
    }
  }
  return dx;
}

Grid pool_over_channels(const Grid& x, PoolMode mode, std::vector<std::size_t>* argmax) {
  require_rank2(x, "pool_over_channels");
  const std::size_t C = x.rows(), T = x.cols();
  if (C == 0) throw std::invalid_argument("pool_over_channels: channel axis is empty");
  Grid out({1, T});
  if (argmax) argmax->assign(T, 0);
  for (std::size_t t = 0; t < T; ++t) {
    if (mode == PoolMode::Avg) {
      double s = 0.0;
      for (std::size_t c = 0; c < C; ++c) s += x(c, t);
      out[t] = s / static_cast<double>(C);
    } else {
      std::size_t best = 0;
      for (std::size_t c = 1; c < C; ++c) {
        if (x(c, t) > x(best, t)) best = c;
      }
      out[t] = x(best, t);
      if (argmax) (*argmax)[t] = best;
    }
  }
  return out;
}

Grid pool_over_channels_backward(std::size_t channels, PoolMode mode,
                                 const std::vector<std::size_t>& argmax, const Grid& dy) {
  const std::size_t T = dy.size();
  Grid dx({channels, T});
  for (std::size_t t = 0; t < T; ++t) {
    if (mode == PoolMode::Avg) {
      const double g = dy[t] / static_cast<double>(channels);
      for (std::size_t c = 0; c < channels; ++c) dx(c, t) = g;
    } else {
      dx(argmax[t], t) = dy[t];
    }
  }
  return dx;
}

Grid mlp2(const Grid& v, const Grid& w1, const Grid& w2, Mlp2Cache* cache) {
  if (w1.rank() != 2 || w2.rank() != 2) throw std::invalid_argument("mlp2: weights must be rank 2");
  const std::size_t C = v.size(), H = w1.rows();
  if (w1.cols() != C) {
    throw std::invalid_argument("mlp2: w1 input axis mismatch (" + std::to_string(w1.cols()) +
                                " vs " + std::to_string(C) + ")");
  }
  if (w2.cols() != H) {
    throw std::invalid_argument("mlp2: w2 hidden axis mismatch (" + std::to_string(w2.cols()) +
                                " vs " + std::to_string(H) + ")");
  }
  Grid pre({H});
  for (std::size_t h = 0; h < H; ++h) {
    double s = 0.0;
    for (std::size_t c = 0; c < C; ++c) s += w1(h, c) * v[c];
    pre[h] = s;
  }
  Grid out({w2.rows()});
  for (std::size_t o = 0; o < w2.rows(); ++o) {
    double s = 0.0;
    for (std::size_t h = 0; h < H; ++h) s += w2(o, h) * relu(pre[h]);
    out[o] = s;
  }
  if (cache) cache->hidden_pre = std::move(pre);
  return out;
}

Grid mlp2_backward(const Grid& v, const Mlp2Cache& cache, const Grid& w1, const Grid& w2,
                   const Grid& dy, Grid* dw1, Grid* dw2) {
  const std::size_t C = v.size(), H = w1.rows();
  Grid dpre({H});
  for (std::size_t h = 0; h < H; ++h) {
    const double act = relu(cache.hidden_pre[h]);
    double g = 0.0;
    for (std::size_t o = 0; o < w2.rows(); ++o) {
      g += w2(o, h) * dy[o];
      if (dw2) (*dw2)(o, h) += dy[o] * act;
    }
    dpre[h] = cache.hidden_pre[h] > 0.0 ? g : 0.0;
  }
  Grid dv({C});
  for (std::size_t h = 0; h < H; ++h) {
    if (dpre[h] == 0.0) continue;
    for (std::size_t c = 0; c < C; ++c) {
      dv[c] += w1(h, c) * dpre[h];
      if (dw1) (*dw1)(h, c) += dpre[h] * v[c];
    }
  }
  return dv;
}

Grid upsample2(const Grid& x) {
  require_time(x, "upsample2");
  const std::size_t C = x.rows(), T = x.cols();
  Grid y({C, 2 * T});
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t t = 0; t < T; ++t) {
      y(c, 2 * t) = x(c, t);
      y(c, 2 * t + 1) = x(c, t);
    }
  }
  return y;
}

Grid upsample2_backward(const Grid& dy) {
  const std::size_t C = dy.rows(), T = dy.cols() / 2;
  Grid dx({C, T});
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t t = 0; t < T; ++t) dx(c, t) = dy(c, 2 * t) + dy(c, 2 * t + 1);
  }
  return dx;
}

Grid downsample2(const Grid& x, std::vector<std::size_t>* argmax) {
  require_time(x, "downsample2");
  const std::size_t C = x.rows(), T = x.cols(), out_len = (T + 1) / 2;
  Grid y({C, out_len});
  if (argmax) argmax->assign(C * out_len, 0);
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t t = 0; t < out_len; ++t) {
      std::size_t src = 2 * t;
      if (src + 1 < T && x(c, src + 1) > x(c, src)) src += 1;
      y(c, t) = x(c, src);
      if (argmax) (*argmax)[c * out_len + t] = src;
    }
  }
  return y;
}

Grid downsample2_backward(std::size_t length, const std::vector<std::size_t>& argmax,
                          const Grid& dy) {
  const std::size_t C = dy.rows(), out_len = dy.cols();
  Grid dx({C, length});
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t t = 0; t < out_len; ++t) dx(c, argmax[c * out_len + t]) += dy(c, t);
  }
  return dx;
}

Grid concat_channels(const Grid& a, const Grid& b) {
  require_rank2(a, "concat_channels");
  require_rank2(b, "concat_channels");
  if (a.cols() != b.cols()) {
    throw std::invalid_argument("concat_channels: time axis mismatch (" +
                                std::to_string(a.cols()) + " vs " + std::to_string(b.cols()) +
                                ")");
  }
  std::vector<double> data(a.raw());
  data.insert(data.end(), b.raw().begin(), b.raw().end());
  return Grid({a.rows() + b.rows(), a.cols()}, std::move(data));
}

Grid fit_length(const Grid& x, std::size_t length) {
  const std::size_t C = x.rows(), n = std::min(length, x.cols());
  Grid y({C, length});
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t t = 0; t < n; ++t) y(c, t) = x(c, t);
  }
  return y;
}

}  // namespace mgtad::ops
