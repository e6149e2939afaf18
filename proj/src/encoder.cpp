#include "mgtad/encoder.hpp"

#include <cmath>
#include <stdexcept>

namespace mgtad {

void DynEConfig::validate() const {
  if (num_levels < 2) throw std::invalid_argument("DynEConfig: num_levels must be >= 2");
  if (channels < 2) throw std::invalid_argument("DynEConfig: channels must be >= 2");
  if (window_expansion < 1) throw std::invalid_argument("DynEConfig: window_expansion must be >= 1");
  if (kernel_set.empty()) throw std::invalid_argument("DynEConfig: kernel_set is empty");
  for (int k : kernel_set) {
    if (k < 1 || k % 2 == 0) {
      throw std::invalid_argument("DynEConfig: kernel sizes must be odd, got " + std::to_string(k));
    }
  }
}

std::vector<std::size_t> pyramid_lengths(std::size_t length, std::size_t num_levels) {
  std::vector<std::size_t> out;
  out.reserve(num_levels);
  for (std::size_t n = 0; n < num_levels; ++n) {
    length = (length + 1) / 2;
    out.push_back(length);
  }
  return out;
}

// ---------------------------------------------------------------------------
// DfaConv

DfaConv::DfaConv(std::size_t in_channels, std::size_t out_channels, int kernel, int dilation)
    : weight({out_channels, in_channels, static_cast<std::size_t>(kernel > 0 ? kernel : 1)}),
      bias({out_channels}),
      gate_weight({out_channels, in_channels}),
      gate_bias({out_channels}),
      kernel_(kernel),
      dilation_(dilation) {
  if (kernel < 1 || kernel % 2 == 0) {
    throw std::invalid_argument("dfa_conv: kernel size must be odd, got " + std::to_string(kernel));
  }
  if (dilation < 1) throw std::invalid_argument("dfa_conv: dilation must be >= 1");
}

Grid DfaConv::forward(const Grid& x, Cache* cache) const {
  Grid conv = ops::conv1d(x, weight.value, bias.value, dilation_);
  Grid pooled = ops::pool_over_time(x, ops::PoolMode::Avg);
  const std::size_t out_c = gate_bias.value.size(), in_c = pooled.size();
  Grid gate({out_c});
  for (std::size_t o = 0; o < out_c; ++o) {
    double z = gate_bias.value[o];
    for (std::size_t i = 0; i < in_c; ++i) z += gate_weight.value(o, i) * pooled[i];
    gate[o] = ops::sigmoid(z);
  }
  Grid y = conv;
  for (std::size_t o = 0; o < out_c; ++o) {
    for (double& v : y.row(o)) v *= gate[o];
  }
  if (cache) {
    cache->input = x;
    cache->pooled = std::move(pooled);
    cache->gate = std::move(gate);
    cache->conv = std::move(conv);
  }
  return y;
}

Grid DfaConv::backward(const Cache& cache, const Grid& dy) {
  const std::size_t out_c = cache.gate.size(), in_c = cache.pooled.size();
  const std::size_t T = dy.cols();
  Grid dconv({out_c, T});
  Grid dpre({out_c});
  for (std::size_t o = 0; o < out_c; ++o) {
    const double g = cache.gate[o];
    double dg = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
      dconv(o, t) = dy(o, t) * g;
      dg += dy(o, t) * cache.conv(o, t);
    }
    dpre[o] = dg * g * (1.0 - g);
  }
  Grid dx = ops::conv1d_backward(cache.input, weight.value, dilation_, dconv, &weight.grad,
                                 &bias.grad);
  Grid dpooled({in_c});
  for (std::size_t o = 0; o < out_c; ++o) {
    gate_bias.grad[o] += dpre[o];
    for (std::size_t i = 0; i < in_c; ++i) {
      gate_weight.grad(o, i) += dpre[o] * cache.pooled[i];
      dpooled[i] += gate_weight.value(o, i) * dpre[o];
    }
  }
  const std::vector<std::size_t> unused;
  dx += ops::pool_over_time_backward(T, ops::PoolMode::Avg, unused, dpooled);
  return dx;
}

void DfaConv::init(std::mt19937_64& rng) {
  const double fan_in = static_cast<double>(weight.value.dim(1) * weight.value.dim(2));
  fill_uniform(weight.value, 1.0 / std::sqrt(fan_in), rng);
  bias.value.fill(0.0);
  fill_uniform(gate_weight.value, 1.0 / std::sqrt(static_cast<double>(gate_weight.value.dim(1))),
               rng);
  gate_bias.value.fill(0.0);
}

void DfaConv::collect(const std::string& prefix, NamedParams& out) {
  out.emplace_back(prefix + ".weight", &weight);
  out.emplace_back(prefix + ".bias", &bias);
  out.emplace_back(prefix + ".gate_weight", &gate_weight);
  out.emplace_back(prefix + ".gate_bias", &gate_bias);
}

// ---------------------------------------------------------------------------
// DynELayer

DynELayer::DynELayer(const DynEConfig& cfg)
    : ln_gain(std::vector<std::size_t>{cfg.channels}),
      ln_shift(std::vector<std::size_t>{cfg.channels}),
      instance(1, 1, 1, 1) {
  cfg.validate();
  ln_gain.value.fill(1.0);
  for (int k : cfg.kernel_set) {
    branches.emplace_back(cfg.channels, cfg.channels, k, cfg.window_expansion);
  }
}

Grid DynELayer::forward(const Grid& f, Cache* cache) const {
  if (f.rank() != 2 || f.cols() < 2) {
    throw std::invalid_argument("dyne_layer: input needs at least 2 time steps, got " +
                                f.shape_string());
  }
  if (f.rows() != ln_gain.value.size()) {
    throw std::invalid_argument("dyne_layer: channel axis mismatch (expected " +
                                std::to_string(ln_gain.value.size()) + ", got " +
                                std::to_string(f.rows()) + ")");
  }
  Cache local;
  Cache& c = cache ? *cache : local;
  c.input_length = f.cols();
  Grid d = ops::downsample2(f, &c.ds_argmax);
  c.normalized = ops::layer_norm(d, ln_gain.value, ln_shift.value, &c.ln);
  const Grid squeezed = ops::pool_over_channels(c.normalized, ops::PoolMode::Avg);
  const Grid inst = instance.forward(squeezed, &c.instance);
  c.branches.resize(branches.size());

  Grid out = d;
  for (std::size_t b = 0; b < branches.size(); ++b) {
    out += branches[b].forward(c.normalized, &c.branches[b]);
  }
  for (std::size_t ch = 0; ch < out.rows(); ++ch) {
    auto row = out.row(ch);
    for (std::size_t t = 0; t < row.size(); ++t) row[t] += inst[t];
  }
  return out;
}

Grid DynELayer::backward(const Cache& cache, const Grid& dy) {
  const std::size_t C = dy.rows(), T = dy.cols();
  Grid dinst({1, T});
  for (std::size_t ch = 0; ch < C; ++ch) {
    for (std::size_t t = 0; t < T; ++t) dinst[t] += dy(ch, t);
  }
  Grid dnorm({C, T});
  for (std::size_t b = 0; b < branches.size(); ++b) {
    dnorm += branches[b].backward(cache.branches[b], dy);
  }
  const Grid dsqueezed = instance.backward(cache.instance, dinst);
  const std::vector<std::size_t> unused;
  dnorm += ops::pool_over_channels_backward(C, ops::PoolMode::Avg, unused, dsqueezed);
  Grid dd = ops::layer_norm_backward(cache.ln, ln_gain.value, dnorm, &ln_gain.grad,
                                     &ln_shift.grad);
  dd += dy;
  return ops::downsample2_backward(cache.input_length, cache.ds_argmax, dd);
}

void DynELayer::init(std::mt19937_64& rng) {
  ln_gain.value.fill(1.0);
  ln_shift.value.fill(0.0);
  instance.init(rng);
  for (auto& b : branches) b.init(rng);
}

void DynELayer::collect(const std::string& prefix, NamedParams& out) {
  out.emplace_back(prefix + ".ln_gain", &ln_gain);
  out.emplace_back(prefix + ".ln_shift", &ln_shift);
  instance.collect(prefix + ".instance", out);
  for (std::size_t b = 0; b < branches.size(); ++b) {
    branches[b].collect(prefix + ".branch" + std::to_string(branches[b].kernel()), out);
  }
}

// ---------------------------------------------------------------------------
// Encoder

Encoder::Encoder(std::size_t in_channels, const DynEConfig& cfg)
    : proj_weight({cfg.channels, in_channels, 3}),
      proj_bias(std::vector<std::size_t>{cfg.channels}),
      in_channels_(in_channels),
      cfg_(cfg) {
  cfg.validate();
  if (in_channels == 0) throw std::invalid_argument("encoder: in_channels must be > 0");
  for (std::size_t n = 0; n < cfg.num_levels; ++n) layers.emplace_back(cfg);
}

PyramidFeatures Encoder::forward(const Grid& x, Cache* cache) const {
  if (x.rank() != 2 || x.rows() != in_channels_) {
    throw std::invalid_argument("build_pyramid: expected [" + std::to_string(in_channels_) +
                                " x T] input, got " + x.shape_string());
  }
  const std::size_t min_len = std::size_t{1} << cfg_.num_levels;
  if (x.cols() < min_len) {
    throw std::invalid_argument("build_pyramid: input length " + std::to_string(x.cols()) +
                                " is below the minimum of " + std::to_string(min_len) +
                                " time steps for " + std::to_string(cfg_.num_levels) +
                                " levels");
  }
  Grid pre = ops::conv1d(x, proj_weight.value, proj_bias.value, 1);
  Grid cur = pre;
  for (double& v : cur.values()) v = ops::relu(v);

  PyramidFeatures pyramid;
  if (cache) {
    cache->input = x;
    cache->layers.assign(layers.size(), {});
  }
  for (std::size_t n = 0; n < layers.size(); ++n) {
    cur = layers[n].forward(cur, cache ? &cache->layers[n] : nullptr);
    pyramid.levels.push_back(cur);
  }
  if (cache) cache->projected_pre = std::move(pre);
  return pyramid;
}

Grid Encoder::backward(const Cache& cache, const std::vector<Grid>& dlevels) {
  Grid dcur = dlevels.back();
  for (std::size_t n = layers.size(); n-- > 0;) {
    Grid dprev = layers[n].backward(cache.layers[n], dcur);
    if (n > 0) dprev += dlevels[n - 1];
    dcur = std::move(dprev);
  }
  for (std::size_t i = 0; i < dcur.size(); ++i) {
    if (cache.projected_pre[i] <= 0.0) dcur[i] = 0.0;
  }
  return ops::conv1d_backward(cache.input, proj_weight.value, 1, dcur, &proj_weight.grad,
                              &proj_bias.grad);
}

void Encoder::init(std::mt19937_64& rng) {
  fill_uniform(proj_weight.value, 1.0 / std::sqrt(static_cast<double>(in_channels_ * 3)), rng);
  proj_bias.value.fill(0.0);
  for (auto& l : layers) l.init(rng);
}

void Encoder::collect(const std::string& prefix, NamedParams& out) {
  out.emplace_back(prefix + ".proj_weight", &proj_weight);
  out.emplace_back(prefix + ".proj_bias", &proj_bias);
  for (std::size_t n = 0; n < layers.size(); ++n) {
    layers[n].collect(prefix + ".level" + std::to_string(n + 1), out);
  }
}

}  // namespace mgtad
