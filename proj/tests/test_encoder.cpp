#include <gtest/gtest.h>

#include <random>

#include "mgtad/encoder.hpp"
#include "mgtad/gradcheck.hpp"
#include "test_util.hpp"

using namespace mgtad;
using mgtad::testing::dot;
using mgtad::testing::param_targets;
using mgtad::testing::random_grid;
using mgtad::testing::randomize;
using mgtad::testing::zero_values;

namespace {

DynEConfig small_config(std::size_t channels = 4, std::size_t levels = 2) {
  DynEConfig cfg;
  cfg.channels = channels;
  cfg.num_levels = levels;
  return cfg;
}

}  // namespace

TEST(DfaConv, ZeroGateAffineHalvesConvolution) {
  std::mt19937_64 rng(1);
  DfaConv layer(3, 2, 3, 2);
  layer.init(rng);
  layer.gate_weight.value.fill(0.0);
  layer.gate_bias.value.fill(0.0);
  const Grid x = random_grid({3, 10}, rng);
  const Grid y = layer.forward(x);
  Grid expected = ops::conv1d(x, layer.weight.value, layer.bias.value, 2);
  expected *= 0.5;
  for (std::size_t i = 0; i < y.size(); ++i) EXPECT_DOUBLE_EQ(y[i], expected[i]);
}

TEST(DfaConv, IdentityKernelWithSaturatedGateIsIdentity) {
  std::mt19937_64 rng(2);
  DfaConv layer(2, 2, 1, 1);
  layer.weight.value = Grid({2, 2, 1}, {1, 0, 0, 1});
  layer.bias.value.fill(0.0);
  layer.gate_weight.value.fill(0.0);
  layer.gate_bias.value.fill(40.0);  // sigmoid(40) rounds to 1.0
  const Grid x = random_grid({2, 6}, rng);
  EXPECT_EQ(layer.forward(x), x);
}

TEST(DfaConv, GateStrictlyInsideUnitInterval) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(seed);
    DfaConv layer(4, 4, 3, 2);
    layer.init(rng);
    DfaConv::Cache cache;
    layer.forward(random_grid({4, 12}, rng, 3.0), &cache);
    for (double g : cache.gate.values()) {
      EXPECT_GT(g, 0.0);
      EXPECT_LT(g, 1.0);
    }
  }
}

TEST(DfaConv, RejectsEvenKernel) {
  EXPECT_THROW(DfaConv(2, 2, 2, 1), std::invalid_argument);
  EXPECT_THROW(DfaConv(2, 2, 3, 0), std::invalid_argument);
}

TEST(DfaConv, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(3);
  DfaConv layer(3, 4, 3, 2);
  NamedParams params;
  layer.collect("dfa", params);
  randomize(params, rng);
  Grid x = random_grid({3, 9}, rng);
  const Grid r = random_grid({4, 9}, rng);
  DfaConv::Cache cache;
  layer.forward(x, &cache);
  for (auto& [n, p] : params) p->zero_grad();
  const Grid dx = layer.backward(cache, r);
  auto targets = param_targets(params);
  targets.push_back({"x", &x, &dx});
  const auto report = grad_check([&] { return dot(layer.forward(x), r); }, targets);
  EXPECT_LT(report.max_relative_error, 1e-4) << report.worst;
}

TEST(DynELayer, ZeroBranchesReduceToDownsample) {
  std::mt19937_64 rng(4);
  DynELayer layer(small_config());
  NamedParams params;
  layer.collect("l", params);
  zero_values(params);
  const Grid f = random_grid({4, 13}, rng);
  EXPECT_EQ(layer.forward(f), ops::downsample2(f));
}

TEST(DynELayer, HalvesLength) {
  std::mt19937_64 rng(5);
  DynELayer layer(small_config());
  layer.init(rng);
  Grid cur = random_grid({4, 64}, rng);
  std::vector<std::size_t> lengths;
  for (int i = 0; i < 4; ++i) {
    cur = layer.forward(cur);
    lengths.push_back(cur.cols());
    EXPECT_EQ(cur.rows(), 4u);
  }
  EXPECT_EQ(lengths, (std::vector<std::size_t>{32, 16, 8, 4}));
}

TEST(DynELayer, RejectsSingleStep) {
  DynELayer layer(small_config());
  EXPECT_THROW(layer.forward(Grid({4, 1})), std::invalid_argument);
}

TEST(DynELayer, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(6);
  DynELayer layer(small_config(4));
  NamedParams params;
  layer.collect("l", params);
  randomize(params, rng);
  Grid f = random_grid({4, 16}, rng);
  const Grid r = random_grid({4, 8}, rng);
  DynELayer::Cache cache;
  layer.forward(f, &cache);
  const Grid df = layer.backward(cache, r);
  auto targets = param_targets(params);
  targets.push_back({"f", &f, &df});
  const auto report = grad_check([&] { return dot(layer.forward(f), r); }, targets);
  EXPECT_LT(report.max_relative_error, 1e-4) << report.worst;
}

TEST(Pyramid, LevelLengths) {
  EXPECT_EQ(pyramid_lengths(256, 5), (std::vector<std::size_t>{128, 64, 32, 16, 8}));
  EXPECT_EQ(pyramid_lengths(100, 3), (std::vector<std::size_t>{50, 25, 13}));

  std::mt19937_64 rng(7);
  Encoder enc(3, small_config(4, 3));
  enc.init(rng);
  const auto pyramid = enc.forward(random_grid({3, 100}, rng));
  ASSERT_EQ(pyramid.levels.size(), 3u);
  EXPECT_EQ(pyramid.levels[0].cols(), 50u);
  EXPECT_EQ(pyramid.levels[1].cols(), 25u);
  EXPECT_EQ(pyramid.levels[2].cols(), 13u);
}

TEST(Pyramid, CeilHalvingRecurrenceForRandomConfigs) {
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<std::size_t> levels(2, 5);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t N = levels(rng);
    std::uniform_int_distribution<std::size_t> len(std::size_t{1} << N, 200);
    const std::size_t T = len(rng);
    Encoder enc(2, small_config(4, N));
    enc.init(rng);
    const auto pyramid = enc.forward(random_grid({2, T}, rng));
    std::size_t prev = T;
    for (const auto& level : pyramid.levels) {
      EXPECT_EQ(level.cols(), (prev + 1) / 2);
      EXPECT_EQ(level.rows(), 4u);
      prev = level.cols();
    }
  }
}

TEST(Pyramid, ZeroInputWithZeroBiasesIsZero) {
  std::mt19937_64 rng(9);
  Encoder enc(3, small_config(4, 3));
  enc.init(rng);
  const auto pyramid = enc.forward(Grid({3, 40}));
  for (const auto& level : pyramid.levels) {
    for (double v : level.values()) EXPECT_EQ(v, 0.0);
  }
}

TEST(Pyramid, ZeroLayerParamsDegenerateToIteratedDownsample) {
  std::mt19937_64 rng(10);
  Encoder enc(3, small_config(4, 3));
  enc.init(rng);
  for (auto& layer : enc.layers) {
    NamedParams params;
    layer.collect("l", params);
    zero_values(params);
  }
  const Grid x = random_grid({3, 37}, rng);
  Grid cur = ops::conv1d(x, enc.proj_weight.value, enc.proj_bias.value, 1);
  for (double& v : cur.values()) v = ops::relu(v);
  const auto pyramid = enc.forward(x);
  for (const auto& level : pyramid.levels) {
    cur = ops::downsample2(cur);
    EXPECT_EQ(level, cur);
  }
}

TEST(Pyramid, RejectsShortInputNamingMinimum) {
  Encoder enc(2, small_config(4, 3));
  try {
    enc.forward(Grid({2, 7}));
    FAIL() << "expected rejection";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("minimum of 8"), std::string::npos) << e.what();
  }
}

TEST(DynEConfig, Validation) {
  DynEConfig cfg;
  cfg.num_levels = 1;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = DynEConfig{};
  cfg.kernel_set = {1, 4};
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = DynEConfig{};
  cfg.window_expansion = 0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = DynEConfig{};
  cfg.channels = 1;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(Encoder, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(11);
  Encoder enc(3, small_config(4, 2));
  NamedParams params;
  enc.collect("enc", params);
  Grid x;
  for (;;) {
    randomize(params, rng);
    x = random_grid({3, 16}, rng);
    if (mgtad::testing::min_abs(ops::conv1d(x, enc.proj_weight.value, enc.proj_bias.value, 1)) >
        1e-3)
      break;
  }
  const Grid r1 = random_grid({4, 8}, rng);
  const Grid r2 = random_grid({4, 4}, rng);
  auto loss = [&] {
    const auto p = enc.forward(x);
    return dot(p.levels[0], r1) + dot(p.levels[1], r2);
  };
  Encoder::Cache cache;
  enc.forward(x, &cache);
  for (auto& [n, p] : params) p->zero_grad();
  const Grid dx = enc.backward(cache, {r1, r2});
  auto targets = param_targets(params);
  targets.push_back({"x", &x, &dx});
  const auto report = grad_check(loss, targets);
  EXPECT_LT(report.max_relative_error, 1e-4) << report.worst;
}
