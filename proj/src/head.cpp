#include "mgtad/head.hpp"

#include <cmath>
#include <stdexcept>

namespace mgtad {

void HeadConfig::validate() const {
  if (channels == 0) throw std::invalid_argument("HeadConfig: channels must be > 0");
  if (num_classes == 0) throw std::invalid_argument("HeadConfig: num_classes must be > 0");
  if (mlp_ratio == 0 || channels % mlp_ratio != 0) {
    throw std::invalid_argument("HeadConfig: mlp reduction ratio " + std::to_string(mlp_ratio) +
                                " does not divide channels " + std::to_string(channels));
  }
  if (spatial_kernel < 1 || spatial_kernel % 2 == 0) {
    throw std::invalid_argument("HeadConfig: spatial kernel must be odd");
  }
}

// ---------------------------------------------------------------------------
// StAttention

StAttention::StAttention(std::size_t channels, std::size_t mlp_ratio, int kernel)
    : mlp_w1({channels / (mlp_ratio ? mlp_ratio : 1), channels}),
      mlp_w2({channels, channels / (mlp_ratio ? mlp_ratio : 1)}),
      spatial_weight({1, 2, static_cast<std::size_t>(kernel)}),
      spatial_bias(std::vector<std::size_t>{1}) {
  if (mlp_ratio == 0 || channels % mlp_ratio != 0) {
    throw std::invalid_argument("st_attention: reduction ratio " + std::to_string(mlp_ratio) +
                                " does not divide channels " + std::to_string(channels));
  }
}

Grid StAttention::temporal_weights(const Grid& f) const {
  const Grid avg = ops::pool_over_time(f, ops::PoolMode::Avg);
  const Grid mx = ops::pool_over_time(f, ops::PoolMode::Max);
  Grid a = ops::mlp2(avg, mlp_w1.value, mlp_w2.value);
  a += ops::mlp2(mx, mlp_w1.value, mlp_w2.value);
  for (double& v : a.values()) v = ops::sigmoid(v);
  return a;
}

Grid StAttention::spatial_weights(const Grid& f) const {
  const Grid stacked = ops::concat_channels(ops::pool_over_channels(f, ops::PoolMode::Avg),
                                            ops::pool_over_channels(f, ops::PoolMode::Max));
  Grid s = ops::conv1d(stacked, spatial_weight.value, spatial_bias.value, 1);
  for (double& v : s.values()) v = ops::sigmoid(v);
  return s;
}

Grid StAttention::forward(const Grid& f, Cache* cache) const {
  if (!enabled) return f;
  Cache local;
  Cache& c = cache ? *cache : local;
  const std::size_t C = f.rows(), T = f.cols();
  c.input = f;
  c.avg_pooled = ops::pool_over_time(f, ops::PoolMode::Avg);
  c.max_pooled = ops::pool_over_time(f, ops::PoolMode::Max, &c.max_index);
  Grid a = ops::mlp2(c.avg_pooled, mlp_w1.value, mlp_w2.value, &c.mlp_avg);
  a += ops::mlp2(c.max_pooled, mlp_w1.value, mlp_w2.value, &c.mlp_max);
  for (double& v : a.values()) v = ops::sigmoid(v);

  Grid gated = f;
  for (std::size_t ch = 0; ch < C; ++ch) {
    for (double& v : gated.row(ch)) v *= a[ch];
  }
  std::vector<std::size_t> unused;
  c.stacked = ops::concat_channels(ops::pool_over_channels(gated, ops::PoolMode::Avg),
                                   ops::pool_over_channels(gated, ops::PoolMode::Max,
                                                           &c.channel_max_index));
  Grid s = ops::conv1d(c.stacked, spatial_weight.value, spatial_bias.value, 1);
  for (double& v : s.values()) v = ops::sigmoid(v);

  Grid out = gated;
  for (std::size_t ch = 0; ch < C; ++ch) {
    for (std::size_t t = 0; t < T; ++t) out(ch, t) *= s[t];
  }
  c.channel_gate = std::move(a);
  c.channel_gated = std::move(gated);
  c.time_gate = std::move(s);
  return out;
}

Grid StAttention::backward(const Cache& c, const Grid& dy) {
  if (!enabled) return dy;
  const std::size_t C = dy.rows(), T = dy.cols();
  // time gate
  Grid dgated({C, T});
  Grid dz_time({1, T});
  for (std::size_t t = 0; t < T; ++t) {
    const double s = c.time_gate[t];
    double ds = 0.0;
    for (std::size_t ch = 0; ch < C; ++ch) {
      ds += dy(ch, t) * c.channel_gated(ch, t);
      dgated(ch, t) = dy(ch, t) * s;
    }
    dz_time[t] = ds * s * (1.0 - s);
  }
  const Grid dstacked = ops::conv1d_backward(c.stacked, spatial_weight.value, 1, dz_time,
                                             &spatial_weight.grad, &spatial_bias.grad);
  const std::vector<std::size_t> unused;
  dgated += ops::pool_over_channels_backward(C, ops::PoolMode::Avg, unused,
                                             Grid({1, T}, {dstacked.row(0).begin(),
                                                           dstacked.row(0).end()}));
  dgated += ops::pool_over_channels_backward(C, ops::PoolMode::Max, c.channel_max_index,
                                             Grid({1, T}, {dstacked.row(1).begin(),
                                                           dstacked.row(1).end()}));
  // channel gate
  Grid dx({C, T});
  Grid dz_chan({C});
  for (std::size_t ch = 0; ch < C; ++ch) {
    const double a = c.channel_gate[ch];
    double da = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
      da += dgated(ch, t) * c.input(ch, t);
      dx(ch, t) = dgated(ch, t) * a;
    }
    dz_chan[ch] = da * a * (1.0 - a);
  }
  const Grid dv_avg = ops::mlp2_backward(c.avg_pooled, c.mlp_avg, mlp_w1.value, mlp_w2.value,
                                         dz_chan, &mlp_w1.grad, &mlp_w2.grad);
  const Grid dv_max = ops::mlp2_backward(c.max_pooled, c.mlp_max, mlp_w1.value, mlp_w2.value,
                                         dz_chan, &mlp_w1.grad, &mlp_w2.grad);
  dx += ops::pool_over_time_backward(T, ops::PoolMode::Avg, unused, dv_avg);
  dx += ops::pool_over_time_backward(T, ops::PoolMode::Max, c.max_index, dv_max);
  return dx;
}

void StAttention::init(std::mt19937_64& rng) {
  fill_uniform(mlp_w1.value, 1.0 / std::sqrt(static_cast<double>(mlp_w1.value.dim(1))), rng);
  fill_uniform(mlp_w2.value, 1.0 / std::sqrt(static_cast<double>(mlp_w2.value.dim(1))), rng);
  fill_uniform(spatial_weight.value,
               1.0 / std::sqrt(static_cast<double>(spatial_weight.value.size())), rng);
  spatial_bias.value.fill(0.0);
}

void StAttention::collect(const std::string& prefix, NamedParams& out) {
  out.emplace_back(prefix + ".mlp_w1", &mlp_w1);
  out.emplace_back(prefix + ".mlp_w2", &mlp_w2);
  out.emplace_back(prefix + ".spatial_weight", &spatial_weight);
  out.emplace_back(prefix + ".spatial_bias", &spatial_bias);
}

// ---------------------------------------------------------------------------
// ConvStack

ConvStack::ConvStack(std::size_t channels, std::size_t out_channels, Output activation)
    : w1({channels, channels, 3}),
      b1(std::vector<std::size_t>{channels}),
      w2({channels, channels, 3}),
      b2(std::vector<std::size_t>{channels}),
      w_out({out_channels, channels, 3}),
      b_out(std::vector<std::size_t>{out_channels}),
      activation_(activation) {}

namespace {

Grid relu_of(const Grid& x) {
  Grid y = x;
  for (double& v : y.values()) v = ops::relu(v);
  return y;
}

void mask_relu(Grid& grad, const Grid& pre) {
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (pre[i] <= 0.0) grad[i] = 0.0;
  }
}

}  // namespace

Grid ConvStack::forward(const Grid& x, Cache* cache) const {
  Grid pre1 = ops::conv1d(x, w1.value, b1.value, 1);
  Grid h1 = relu_of(pre1);
  Grid pre2 = ops::conv1d(h1, w2.value, b2.value, 1);
  Grid h2 = relu_of(pre2);
  Grid pre_out = ops::conv1d(h2, w_out.value, b_out.value, 1);
  Grid out = pre_out;
  for (double& v : out.values()) {
    v = activation_ == Output::Sigmoid ? ops::sigmoid(v) : ops::relu(v);
  }
  if (cache) {
    cache->input = x;
    cache->pre1 = std::move(pre1);
    cache->hidden1 = std::move(h1);
    cache->pre2 = std::move(pre2);
    cache->hidden2 = std::move(h2);
    cache->pre_out = std::move(pre_out);
    cache->output = out;
  }
  return out;
}

Grid ConvStack::backward(const Cache& c, const Grid& dy) {
  Grid dpre = dy;
  if (activation_ == Output::Sigmoid) {
    for (std::size_t i = 0; i < dpre.size(); ++i) {
      const double p = c.output[i];
      dpre[i] *= p * (1.0 - p);
    }
  } else {
    mask_relu(dpre, c.pre_out);
  }
  Grid dh2 = ops::conv1d_backward(c.hidden2, w_out.value, 1, dpre, &w_out.grad, &b_out.grad);
  mask_relu(dh2, c.pre2);
  Grid dh1 = ops::conv1d_backward(c.hidden1, w2.value, 1, dh2, &w2.grad, &b2.grad);
  mask_relu(dh1, c.pre1);
  return ops::conv1d_backward(c.input, w1.value, 1, dh1, &w1.grad, &b1.grad);
}

void ConvStack::init(std::mt19937_64& rng, double out_bias) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(w1.value.dim(1) * 3));
  fill_uniform(w1.value, bound, rng);
  fill_uniform(w2.value, bound, rng);
  fill_uniform(w_out.value, 0.1 * bound, rng);
  b1.value.fill(0.0);
  b2.value.fill(0.0);
  b_out.value.fill(out_bias);
}

void ConvStack::collect(const std::string& prefix, NamedParams& out) {
  out.emplace_back(prefix + ".w1", &w1);
  out.emplace_back(prefix + ".b1", &b1);
  out.emplace_back(prefix + ".w2", &w2);
  out.emplace_back(prefix + ".b2", &b2);
  out.emplace_back(prefix + ".w_out", &w_out);
  out.emplace_back(prefix + ".b_out", &b_out);
}

// ---------------------------------------------------------------------------
// Fusion + head

namespace {

std::size_t path_count(std::size_t levels, std::size_t level) {
  return 1 + (level > 0 ? 1 : 0) + (level + 1 < levels ? 1 : 0);
}

}  // namespace

Grid fuse_three_paths(const std::vector<Grid>& attended, std::size_t level) {
  if (level >= attended.size()) throw std::out_of_range("fuse_three_paths: level out of range");
  const Grid& mid = attended[level];
  Grid fused = mid;
  if (level > 0) fused += ops::downsample2(attended[level - 1]);
  if (level + 1 < attended.size()) {
    fused += ops::fit_length(ops::upsample2(attended[level + 1]), mid.cols());
  }
  fused *= 1.0 / static_cast<double>(path_count(attended.size(), level));
  return fused;
}

Head::Head(const HeadConfig& cfg)
    : attention(cfg.channels, cfg.mlp_ratio, cfg.spatial_kernel),
      cls(cfg.channels, cfg.num_classes, ConvStack::Output::Sigmoid),
      loc(cfg.channels, 2, ConvStack::Output::Relu),
      cfg_(cfg) {
  cfg.validate();
  attention.enabled = cfg.attention;
}

HeadOutputs Head::forward(const PyramidFeatures& pyramid, Cache* cache) const {
  const std::size_t L = pyramid.levels.size();
  if (L == 0) throw std::invalid_argument("head: empty pyramid");
  std::vector<Grid> attended(L);
  if (cache) {
    cache->attention.assign(L, {});
    cache->down_argmax.assign(L, {});
    cache->cls.assign(L, {});
    cache->loc.assign(L, {});
  }
  for (std::size_t n = 0; n < L; ++n) {
    attended[n] = attention.forward(pyramid.levels[n], cache ? &cache->attention[n] : nullptr);
  }
  HeadOutputs out;
  for (std::size_t n = 0; n < L; ++n) {
    const Grid& mid = attended[n];
    Grid fused = mid;
    if (n > 0) {
      fused += ops::downsample2(attended[n - 1], cache ? &cache->down_argmax[n] : nullptr);
    }
    if (n + 1 < L) fused += ops::fit_length(ops::upsample2(attended[n + 1]), mid.cols());
    fused *= 1.0 / static_cast<double>(path_count(L, n));
    out.class_probs.push_back(cls.forward(fused, cache ? &cache->cls[n] : nullptr));
    out.offsets.push_back(loc.forward(fused, cache ? &cache->loc[n] : nullptr));
  }
  return out;
}

std::vector<Grid> Head::backward(const Cache& cache, const std::vector<Grid>& dprobs,
                                 const std::vector<Grid>& doffsets) {
  const std::size_t L = cache.cls.size();
  std::vector<Grid> dattended(L);
  for (std::size_t n = 0; n < L; ++n) {
    dattended[n] = Grid(cache.cls[n].input.shape());
  }
  for (std::size_t n = 0; n < L; ++n) {
    Grid dfused = cls.backward(cache.cls[n], dprobs[n]);
    dfused += loc.backward(cache.loc[n], doffsets[n]);
    dfused *= 1.0 / static_cast<double>(path_count(L, n));
    dattended[n] += dfused;
    if (n > 0) {
      dattended[n - 1] +=
          ops::downsample2_backward(dattended[n - 1].cols(), cache.down_argmax[n], dfused);
    }
    if (n + 1 < L) {
      dattended[n + 1] +=
          ops::upsample2_backward(ops::fit_length(dfused, 2 * dattended[n + 1].cols()));
    }
  }
  std::vector<Grid> dlevels(L);
  for (std::size_t n = 0; n < L; ++n) {
    dlevels[n] = attention.backward(cache.attention[n], dattended[n]);
  }
  return dlevels;
}

void Head::init(std::mt19937_64& rng) {
  attention.init(rng);
  // class prior 0.01 keeps the focal loss stable at the first steps
  cls.init(rng, -std::log((1.0 - 0.01) / 0.01));
  loc.init(rng, 1.0);
}

void Head::collect(const std::string& prefix, NamedParams& out) {
  attention.collect(prefix + ".attention", out);
  cls.collect(prefix + ".cls", out);
  loc.collect(prefix + ".loc", out);
}

}  // namespace mgtad
