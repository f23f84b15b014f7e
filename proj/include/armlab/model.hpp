#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "armlab/arm.hpp"

namespace armlab {

/// Three conv3x3(pad 1)-BN-ReLU blocks; a small stand-in for the part of a
/// large CNN that precedes global pooling.
struct BackboneConfig {
  std::size_t in_channels = 1;
  std::size_t input_extent = 28;
  std::array<std::size_t, 3> channels{8, 16, 32};
  std::array<std::size_t, 3> strides{2, 2, 1};

  ConvGeometry layer(std::size_t i) const;
  std::size_t output_extent() const;
  std::size_t output_channels() const { return channels[2]; }
};

enum class HeadKind {
  Arm,             // arrangement, de-albino, BN, mean, affinity, FC
  Gap,             // global average pooling + FC
  DeAlbinoPool,    // shared k x k stride-1 conv without padding, spatial mean, FC
};

std::string to_string(HeadKind kind);
HeadKind head_kind_from_string(const std::string& name);

struct ModelConfig {
  BackboneConfig backbone;
  HeadKind head = HeadKind::Arm;
  std::size_t num_classes = 7;
  std::size_t shuffle_ratio = 0;
  std::size_t da_kernel = 8;
  std::size_t da_stride = 2;
  double lambda_init = 0.3;
  bool lambda_learnable = true;
  std::size_t sweep_kernel = 1;  // DeAlbinoPool only

  ArmConfig arm() const;
  void validate() const;
  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
};

struct NamedTensor {
  std::string name;
  Tensor* tensor;
};

struct Backbone {
  BackboneConfig cfg;
  std::array<Tensor, 3> kernels;
  std::array<Tensor, 3> bn_scale;
  std::array<Tensor, 3> bn_shift;
  std::array<BatchNormRunning<float>, 3> bn_running;

  struct Cache {
    std::array<Tensor, 3> inputs;
    std::array<Tensor, 3> pre_relu;
    std::array<BatchNormCache<float>, 3> bn;
  };
  Cache cache;

  Backbone() = default;
  Backbone(const BackboneConfig& config, std::mt19937_64& rng);
  Tensor forward(const Tensor& images, Mode mode);
  void backward(const Tensor& grad_out);
};

struct ArmHead {
  ArmConfig cfg;
  ArmParams<float> params;
  GenericFeatureState<float> state;
  ArmCache<float> cache;

  Tensor forward(const Tensor& features, Mode mode);
  Tensor backward(const Tensor& grad_logits);
};

struct GapHead {
  Tensor fc_weight;
  Tensor fc_bias;
  Shape input_shape;
  Tensor pooled;

  Tensor forward(const Tensor& features, Mode mode);
  Tensor backward(const Tensor& grad_logits);
};

struct DeAlbinoPoolHead {
  ConvGeometry geom;
  Tensor kernel;
  Tensor fc_weight;
  Tensor fc_bias;
  Tensor input;
  Shape conv_shape;
  Tensor pooled;

  Tensor forward(const Tensor& features, Mode mode);
  Tensor backward(const Tensor& grad_logits);
};

/// Backbone plus one head. Copyable; forward() in train mode mutates BN
/// running statistics and the affinity buffer.
class Model {
 public:
  Model() = default;
  Model(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }

  Tensor forward(const Tensor& images, Mode mode);
  /// Fills the gradient slot of every parameter from the last forward.
  void backward(const Tensor& grad_logits);
  /// Post-optimizer hook (keeps lambda in [0, 1]).
  void after_update();

  std::vector<NamedTensor> parameters();
  /// Non-learned state saved with checkpoints.
  std::vector<NamedTensor> buffers();

  std::size_t parameter_count();

  /// Affinity state of an ARM head, nullptr for other heads.
  GenericFeatureState<float>* affinity_state();

 private:
  ModelConfig cfg_;
  Backbone backbone_;
  std::variant<ArmHead, GapHead, DeAlbinoPoolHead> head_;
};

}  // namespace armlab
