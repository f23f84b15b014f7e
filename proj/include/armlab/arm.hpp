#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "armlab/affinity.hpp"
#include "armlab/arrangement.hpp"
#include "armlab/conv.hpp"
#include "armlab/layers.hpp"

namespace armlab {

/// Configuration of the amended-representation head that replaces global
/// average pooling: arrangement -> de-albino conv -> BN -> channel mean ->
/// sharing affinity -> FC. The de-albino convolution never pads.
struct ArmConfig {
  std::size_t channels = 512;
  std::size_t height = 7;
  std::size_t width = 7;
  std::size_t shuffle_ratio = 0;  // 0 selects max_shuffle_ratio(channels)
  std::size_t da_kernel = 32;
  std::size_t da_stride = 8;
  double lambda_init = 0.3;
  bool lambda_learnable = true;
  std::size_t num_classes = 7;

  /// 512x7x7 backbone output, 7 classes.
  static ArmConfig reference();

  std::size_t ratio() const;
  ShuffleSpec shuffle() const;
  ConvGeometry da_geometry() const;
  std::size_t rep_height() const;
  std::size_t rep_width() const;
  std::size_t feature_count() const { return rep_height() * rep_width(); }
  void validate() const;
};

struct ArmParamCount {
  std::size_t arrangement = 0;
  std::size_t de_albino = 0;
  std::size_t batchnorm = 0;
  std::size_t mean = 0;
  std::size_t affinity = 0;
  std::size_t fc = 0;

  std::size_t total() const { return arrangement + de_albino + batchnorm + mean + affinity + fc; }
  bool operator==(const ArmParamCount&) const = default;
};

ArmParamCount arm_param_count(const ArmConfig& cfg);

template <typename T>
struct ArmParams {
  BasicTensor<T> da_kernel;  // (1, 1, k, k)
  BasicTensor<T> bn_scale;   // (C')
  BasicTensor<T> bn_shift;
  BatchNormRunning<T> bn_running;
  BasicTensor<T> fc_weight;  // (K, features)
  BasicTensor<T> fc_bias;    // (K)
};

/// Kaiming-uniform (fan-in) conv/FC weights, BN scale 1 shift 0.
template <typename T>
ArmParams<T> init_arm_params(const ArmConfig& cfg, std::mt19937_64& rng);

template <typename T>
GenericFeatureState<T> init_arm_state(const ArmConfig& cfg);

struct ArmStage {
  std::string name;
  Shape shape;  // per sample, batch axis dropped
};
using ArmTrace = std::vector<ArmStage>;

template <typename T>
struct ArmCache {
  BasicTensor<T> arranged;
  BasicTensor<T> bn_out;
  BasicTensor<T> flat;
  BatchNormCache<T> bn;
  AffinityCache<T> affinity;
};

template <typename T>
struct ArmGrads {
  BasicTensor<T> input;
  BasicTensor<T> da_kernel;
  BasicTensor<T> bn_scale;
  BasicTensor<T> bn_shift;
  double lambda = 0.0;
  BasicTensor<T> fc_weight;
  BasicTensor<T> fc_bias;
};

template <typename T>
BasicTensor<T> arm_forward(const ArmConfig& cfg, ArmParams<T>& params,
                           GenericFeatureState<T>& state, const BasicTensor<T>& features,
                           Mode mode, ArmCache<T>* cache = nullptr, ArmTrace* trace = nullptr);

template <typename T>
ArmGrads<T> arm_backward(const ArmConfig& cfg, const ArmParams<T>& params,
                         const ArmCache<T>& cache, const BasicTensor<T>& grad_logits);

/// Uniform(-sqrt(6 / fan_in), +sqrt(6 / fan_in)).
template <typename T>
BasicTensor<T> kaiming_uniform(Shape shape, std::size_t fan_in, std::mt19937_64& rng);

}  // namespace armlab
