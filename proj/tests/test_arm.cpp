#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "armlab/affinity.hpp"
#include "armlab/arm.hpp"
#include "armlab/erosion.hpp"
#include "armlab/error.hpp"
#include "gradsuite.hpp"
#include "oracles.hpp"

using namespace armlab;

namespace {

GenericFeatureState<double> state_with(Shape rep, double lambda, double buffer_value) {
  GenericFeatureState<double> s(rep, lambda, true);
  s.buffer = Tensor64(rep, buffer_value);
  s.initialized = true;
  return s;
}

}  // namespace

// ---------------------------------------------------------------------------
// sharing affinity

TEST(AffinityBatchMean, SingleSample) {
  std::mt19937_64 rng(1);
  const auto f = oracle::random_tensor<double>(Shape{1, 3, 3}, rng);
  GenericFeatureState<double> s(Shape{3, 3}, 0.3, true);
  const auto m = affinity_batch_mean(s, f);
  EXPECT_EQ(m.values(), f.values());
  EXPECT_TRUE(s.initialized);
  EXPECT_EQ(s.buffer.values(), f.values());
}

TEST(AffinityBatchMean, OppositePairCancels) {
  std::mt19937_64 rng(2);
  const auto a = oracle::random_tensor<double>(Shape{1, 2, 2}, rng);
  Tensor64 f(Shape{2, 2, 2});
  for (std::size_t i = 0; i < 4; ++i) {
    f[i] = a[i];
    f[4 + i] = -a[i];
  }
  GenericFeatureState<double> s(Shape{2, 2}, 0.3, true);
  const auto m = affinity_batch_mean(s, f);
  for (double v : m.values()) EXPECT_EQ(v, 0.0);
}

TEST(AffinityBatchMean, MatchesElementwiseMean) {
  std::mt19937_64 rng(3);
  const auto f = oracle::random_tensor<float>(Shape{4, 5, 5}, rng);
  GenericFeatureState<float> s(Shape{5, 5}, 0.3, true);
  const auto m = affinity_batch_mean(s, f);
  for (std::size_t i = 0; i < 25; ++i) {
    double acc = 0;
    for (std::size_t n = 0; n < 4; ++n) acc += f[n * 25 + i];
    EXPECT_NEAR(m[i], acc / 4, 1e-6);
  }
}

TEST(AffinityBatchMean, EmptyBatchIsDataError) {
  GenericFeatureState<double> s(Shape{2, 2}, 0.3, true);
  EXPECT_THROW(affinity_batch_mean(s, Tensor64(Shape{0, 2, 2})), DataError);
}

TEST(AffinityUpdate, Boundaries) {
  const Tensor64 batch(Shape{2, 2}, 2.0);
  auto full = state_with(Shape{2, 2}, 1.0, 1.0);
  const auto replaced = affinity_update(full, batch);
  for (double v : replaced.values()) EXPECT_EQ(v, 2.0);
  auto frozen = state_with(Shape{2, 2}, 0.0, 1.0);
  const auto kept = affinity_update(frozen, batch);
  for (double v : kept.values()) EXPECT_EQ(v, 1.0);
  for (double v : frozen.buffer.values()) EXPECT_EQ(v, 1.0);
}

TEST(AffinityUpdate, DefaultLambdaBlend) {
  auto s = state_with(Shape{3, 3}, 0.3, 1.0);
  const auto out = affinity_update(s, Tensor64(Shape{3, 3}, 2.0));
  for (double v : out.values()) EXPECT_NEAR(v, 1.3, 1e-15);
  EXPECT_EQ(s.buffer.values(), out.values());
  EXPECT_FALSE(s.buffer.has_grad());
}

TEST(AffinityUpdate, OutOfRangeLambdaIsClamped) {
  auto s = state_with(Shape{1, 1}, 1.7, 0.0);
  EXPECT_EQ(s.lambda[0], 1.0);
  s.lambda[0] = 1.7;
  EXPECT_TRUE(s.clamp_lambda());
  EXPECT_EQ(s.lambda[0], 1.0);
  s.lambda[0] = -0.2;
  EXPECT_EQ(s.effective_lambda(), 0.0);
  EXPECT_FALSE(state_with(Shape{1, 1}, 0.5, 0.0).clamp_lambda());
}

TEST(AffinityUpdate, ConvergesGeometrically) {
  for (double lambda : {0.1, 0.3, 0.75}) {
    auto s = state_with(Shape{2, 2}, lambda, 5.0);
    const Tensor64 c(Shape{2, 2}, -1.0);
    for (int t = 1; t <= 40; ++t) {
      affinity_update(s, c);
      const double expect = std::pow(1 - lambda, t) * 6.0;
      for (double v : s.buffer.values()) EXPECT_NEAR(v - (-1.0), expect, 1e-12);
    }
  }
}

TEST(AffinityForward, EvalOnGenericFaceIsZero) {
  std::mt19937_64 rng(4);
  GenericFeatureState<double> s(Shape{3, 3}, 0.3, true);
  s.buffer = oracle::random_tensor<double>(Shape{3, 3}, rng);
  s.initialized = true;
  Tensor64 f(Shape{2, 3, 3});
  for (std::size_t i = 0; i < 18; ++i) f[i] = s.buffer[i % 9];
  const auto before = s.buffer.values();
  const auto out = affinity_forward(s, f, Mode::Eval);
  for (double v : out.values()) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(s.buffer.values(), before);
}

TEST(AffinityForward, TrainSingleSampleFullLambdaIsZero) {
  std::mt19937_64 rng(5);
  auto s = state_with(Shape{2, 3}, 1.0, 0.7);
  const auto f = oracle::random_tensor<double>(Shape{1, 2, 3}, rng);
  const auto out = affinity_forward(s, f, Mode::Train);
  for (double v : out.values()) EXPECT_EQ(v, 0.0);
}

TEST(AffinityForward, TrainHandComputed) {
  auto s = state_with(Shape{2, 2}, 0.3, 0.0);
  Tensor64 f(Shape{2, 2, 2});
  for (std::size_t i = 0; i < 4; ++i) {
    f[i] = 1.0;
    f[4 + i] = 3.0;
  }
  const auto out = affinity_forward(s, f, Mode::Train);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_NEAR(out[i], 0.4, 1e-12);
    EXPECT_NEAR(out[4 + i], 2.4, 1e-12);
    EXPECT_NEAR(s.buffer[i], 0.6, 1e-12);
  }
}

TEST(AffinityForward, FirstBatchInitializesBuffer) {
  GenericFeatureState<double> s(Shape{1, 2}, 0.3, true);
  Tensor64 f(Shape{2, 1, 2}, std::vector<double>{1, 2, 3, 6});
  const auto out = affinity_forward(s, f, Mode::Train);
  EXPECT_TRUE(s.initialized);
  EXPECT_EQ(s.buffer.values(), (std::vector<double>{2, 4}));
  EXPECT_EQ(out.values(), (std::vector<double>{-1, -2, 1, 2}));
}

TEST(AffinityForward, EvalBeforeTrainingFails) {
  GenericFeatureState<double> s(Shape{2, 2}, 0.3, true);
  EXPECT_THROW(affinity_forward(s, Tensor64(Shape{1, 2, 2}), Mode::Eval), Error);
  auto ok = state_with(Shape{2, 2}, 0.3, 0.0);
  EXPECT_THROW(affinity_forward(ok, Tensor64(Shape{1, 3, 2}), Mode::Eval), GeometryError);
}

TEST(AffinityForward, GradientsMatchFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 10; ++seed)
    EXPECT_LE(gradsuite::affinity_case(seed), 1e-3) << seed;
}

// ---------------------------------------------------------------------------
// ARM head

TEST(ArmConfig, ReferenceGeometry) {
  const ArmConfig cfg = ArmConfig::reference();
  EXPECT_EQ(cfg.ratio(), 16u);
  EXPECT_EQ(cfg.da_geometry().padding, 0u);
  EXPECT_TRUE(cfg.da_geometry().shared_single_channel);
  EXPECT_EQ(cfg.rep_height(), 11u);
  EXPECT_EQ(cfg.feature_count(), 121u);
}

TEST(ArmConfig, Validation) {
  ArmConfig cfg = ArmConfig::reference();
  cfg.da_kernel = 200;
  EXPECT_THROW(cfg.validate(), GeometryError);
  cfg = ArmConfig::reference();
  cfg.lambda_init = 1.5;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = ArmConfig::reference();
  cfg.shuffle_ratio = 3;
  EXPECT_THROW(cfg.validate(), GeometryError);
}

TEST(ArmParamCount, Reference) {
  const auto counts = arm_param_count(ArmConfig::reference());
  EXPECT_EQ(counts, (ArmParamCount{0, 1024, 4, 0, 1, 854}));
  EXPECT_EQ(counts.total(), 1883u);
}

TEST(ArmParamCount, FixedLambda) {
  ArmConfig cfg = ArmConfig::reference();
  cfg.lambda_learnable = false;
  EXPECT_EQ(arm_param_count(cfg).affinity, 0u);
}

TEST(ArmParamCount, ToyConfig) {
  const auto counts = arm_param_count(gradsuite::toy_arm_config());
  EXPECT_EQ(counts.de_albino, 16u);
  EXPECT_EQ(counts.batchnorm, 4u);
  EXPECT_EQ(counts.fc, 30u);
  EXPECT_EQ(counts.arrangement + counts.mean, 0u);
}

TEST(ArmForward, ReferenceShapeTrace) {
  const ArmConfig cfg = ArmConfig::reference();
  std::mt19937_64 rng(1);
  auto params = init_arm_params<float>(cfg, rng);
  auto state = init_arm_state<float>(cfg);
  const auto x = oracle::random_tensor<float>(Shape{2, 512, 7, 7}, rng);
  ArmTrace trace;
  const auto logits = arm_forward<float>(cfg, params, state, x, Mode::Train, nullptr, &trace);
  const ArmTrace expect = {{"Arrangement", {2, 112, 112}}, {"De-albino", {2, 11, 11}},
                           {"BN", {2, 11, 11}},            {"Mean", {11, 11}},
                           {"Affinity", {11, 11}},         {"Flatten", {121}},
                           {"FC", {7}}};
  ASSERT_EQ(trace.size(), expect.size());
  for (std::size_t i = 0; i < trace.size(); ++i) {
    EXPECT_EQ(trace[i].name, expect[i].name);
    EXPECT_EQ(trace[i].shape, expect[i].shape) << trace[i].name;
  }
  EXPECT_EQ(logits.shape(), (Shape{2, 7}));
  EXPECT_TRUE(all_finite(logits));
}

TEST(ArmForward, KaimingInitBounds) {
  const ArmConfig cfg = ArmConfig::reference();
  std::mt19937_64 rng(9);
  const auto p = init_arm_params<float>(cfg, rng);
  const double da_bound = std::sqrt(6.0 / 1024);
  for (float v : p.da_kernel.values()) EXPECT_LE(std::abs(v), da_bound);
  for (float v : p.bn_scale.values()) EXPECT_EQ(v, 1.f);
  for (float v : p.bn_shift.values()) EXPECT_EQ(v, 0.f);
  const double fc_bound = std::sqrt(6.0 / 121);
  for (float v : p.fc_weight.values()) EXPECT_LE(std::abs(v), fc_bound);
}

TEST(ArmForward, WrongInputShape) {
  const ArmConfig cfg = gradsuite::toy_arm_config();
  std::mt19937_64 rng(1);
  auto params = init_arm_params<float>(cfg, rng);
  auto state = init_arm_state<float>(cfg);
  EXPECT_THROW(arm_forward(cfg, params, state, Tensor(Shape{1, 8, 5, 4}), Mode::Train),
               GeometryError);
}

TEST(ArmForward, EvalIsTranslationInvariantWithShiftedBuffer) {
  // A constant added to every eval representation and to the buffer cancels
  // in the affinity residual. The shift is injected after the channel mean by
  // running the head with and without a shifted BN offset.
  const ArmConfig cfg = gradsuite::toy_arm_config();
  std::mt19937_64 rng(3);
  auto params = init_arm_params<double>(cfg, rng);
  auto state = init_arm_state<double>(cfg);
  const auto x = oracle::random_tensor<double>(Shape{4, 8, 4, 4}, rng);
  arm_forward(cfg, params, state, x, Mode::Train);
  const auto base = arm_forward(cfg, params, state, x, Mode::Eval);
  for (double delta : {0.5, -2.0, 7.25}) {
    auto shifted_params = params;
    auto shifted_state = state;
    for (std::size_t c = 0; c < 2; ++c) shifted_params.bn_shift[c] += delta;
    for (std::size_t i = 0; i < shifted_state.buffer.size(); ++i) shifted_state.buffer[i] += delta;
    const auto out = arm_forward(cfg, shifted_params, shifted_state, x, Mode::Eval);
    for (std::size_t i = 0; i < out.size(); ++i) EXPECT_NEAR(out[i], base[i], 1e-10);
  }
}

TEST(ArmForward, EvalLeavesStateUntouched) {
  const ArmConfig cfg = gradsuite::toy_arm_config();
  std::mt19937_64 rng(2);
  auto params = init_arm_params<float>(cfg, rng);
  auto state = init_arm_state<float>(cfg);
  const auto x = oracle::random_tensor<float>(Shape{3, 8, 4, 4}, rng);
  arm_forward(cfg, params, state, x, Mode::Train);
  const auto buffer = state.buffer.values();
  const auto running = params.bn_running.mean.values();
  arm_forward(cfg, params, state, x, Mode::Eval);
  EXPECT_EQ(state.buffer.values(), buffer);
  EXPECT_EQ(params.bn_running.mean.values(), running);
}

TEST(ArmBackward, WholeHeadGradientPerParameterGroup) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto r = gradsuite::arm_head_case(seed);
    EXPECT_LE(r.input, 1e-3) << seed;
    EXPECT_LE(r.da_kernel, 1e-3) << seed;
    EXPECT_LE(r.bn_scale, 1e-3) << seed;
    EXPECT_LE(r.bn_shift, 1e-3) << seed;
    EXPECT_LE(r.lambda, 1e-3) << seed;
    EXPECT_LE(r.fc_weight, 1e-3) << seed;
    EXPECT_LE(r.fc_bias, 1e-3) << seed;
  }
}

TEST(ArmDeAlbino, PeripheralClustersWeighLess) {
  const ArmConfig cfg = ArmConfig::reference();
  const auto prof = cluster_weight_profile(cfg.shuffle(), cfg.da_geometry());
  ASSERT_EQ(prof.rows, 7u);
  for (std::size_t i = 0; i < 7; ++i)
    for (std::size_t j = 0; j < 7; ++j) {
      const bool ring = i == 0 || j == 0 || i == 6 || j == 6;
      if (!ring) continue;
      for (std::size_t a = 1; a < 6; ++a)
        for (std::size_t b = 1; b < 6; ++b) EXPECT_LT(prof.at(i, j), prof.at(a, b));
    }
}
