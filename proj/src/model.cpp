#include "armlab/model.hpp"

#include <cmath>

namespace armlab {

ConvGeometry BackboneConfig::layer(std::size_t i) const {
  const std::size_t in = i == 0 ? in_channels : channels[i - 1];
  return ConvGeometry{3, strides[i], 1, in, channels[i], false};
}

std::size_t BackboneConfig::output_extent() const {
  std::size_t e = input_extent;
  for (std::size_t i = 0; i < 3; ++i) e = layer(i).output_extent(e);
  return e;
}

std::string to_string(HeadKind kind) {
  switch (kind) {
    case HeadKind::Arm: return "arm";
    case HeadKind::Gap: return "gap";
    case HeadKind::DeAlbinoPool: return "dealbino-pool";
  }
  return "?";
}

HeadKind head_kind_from_string(const std::string& name) {
  if (name == "arm") return HeadKind::Arm;
  if (name == "gap") return HeadKind::Gap;
  if (name == "dealbino-pool") return HeadKind::DeAlbinoPool;
  throw ConfigError("unknown head '" + name + "' (expected arm, gap or dealbino-pool)");
}

ArmConfig ModelConfig::arm() const {
  ArmConfig a;
  a.channels = backbone.output_channels();
  a.height = a.width = backbone.output_extent();
  a.shuffle_ratio = shuffle_ratio;
  a.da_kernel = da_kernel;
  a.da_stride = da_stride;
  a.lambda_init = lambda_init;
  a.lambda_learnable = lambda_learnable;
  a.num_classes = num_classes;
  return a;
}

void ModelConfig::validate() const {
  if (num_classes < 2) throw ConfigError("model needs at least 2 classes");
  const std::size_t e = backbone.output_extent();
  switch (head) {
    case HeadKind::Arm: arm().validate(); break;
    case HeadKind::Gap: break;
    case HeadKind::DeAlbinoPool:
      if (sweep_kernel < 1 || sweep_kernel > e) {
        throw ConfigError("de-albino pool kernel " + std::to_string(sweep_kernel) +
                          " outside [1, " + std::to_string(e) + "]");
      }
      break;
  }
}

nlohmann::json ModelConfig::to_json() const {
  return {{"backbone",
           {{"in_channels", backbone.in_channels},
            {"input_extent", backbone.input_extent},
            {"channels", backbone.channels},
            {"strides", backbone.strides}}},
          {"head", to_string(head)},
          {"num_classes", num_classes},
          {"shuffle_ratio", shuffle_ratio},
          {"da_kernel", da_kernel},
          {"da_stride", da_stride},
          {"lambda_init", lambda_init},
          {"lambda_learnable", lambda_learnable},
          {"sweep_kernel", sweep_kernel}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  try {
    ModelConfig c;
    const auto& b = j.at("backbone");
    c.backbone.in_channels = b.at("in_channels");
    c.backbone.input_extent = b.at("input_extent");
    c.backbone.channels = b.at("channels");
    c.backbone.strides = b.at("strides");
    c.head = head_kind_from_string(j.at("head"));
    c.num_classes = j.at("num_classes");
    c.shuffle_ratio = j.at("shuffle_ratio");
    c.da_kernel = j.at("da_kernel");
    c.da_stride = j.at("da_stride");
    c.lambda_init = j.at("lambda_init");
    c.lambda_learnable = j.at("lambda_learnable");
    c.sweep_kernel = j.at("sweep_kernel");
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
}

// ---------------------------------------------------------------------------

Backbone::Backbone(const BackboneConfig& config, std::mt19937_64& rng) : cfg(config) {
  for (std::size_t i = 0; i < 3; ++i) {
    const ConvGeometry g = cfg.layer(i);
    kernels[i] = kaiming_uniform<float>(g.kernel_shape(), g.in_channels * g.kernel * g.kernel, rng);
    bn_scale[i] = Tensor(Shape{g.out_channels}, 1.0f);
    bn_shift[i] = Tensor(Shape{g.out_channels}, 0.0f);
    bn_running[i] = BatchNormRunning<float>(g.out_channels);
  }
}

Tensor Backbone::forward(const Tensor& images, Mode mode) {
  Tensor x = images;
  for (std::size_t i = 0; i < 3; ++i) {
    cache.inputs[i] = x;
    Tensor y = conv2d_forward(x, kernels[i], cfg.layer(i));
    cache.pre_relu[i] =
        batchnorm_forward(y, bn_scale[i], bn_shift[i], mode, &bn_running[i], &cache.bn[i]);
    x = relu_forward(cache.pre_relu[i]);
  }
  return x;
}

void Backbone::backward(const Tensor& grad_out) {
  Tensor g = grad_out;
  for (std::size_t i = 3; i-- > 0;) {
    g = relu_backward(g, cache.pre_relu[i]);
    BatchNormGrads<float> bn = batchnorm_backward(g, bn_scale[i], cache.bn[i]);
    bn_scale[i].ensure_grad();
    bn_shift[i].ensure_grad();
    std::copy(bn.scale.data().begin(), bn.scale.data().end(), bn_scale[i].grad().begin());
    std::copy(bn.shift.data().begin(), bn.shift.data().end(), bn_shift[i].grad().begin());
    ConvGrads<float> conv = conv2d_backward(bn.input, cache.inputs[i], kernels[i], cfg.layer(i));
    kernels[i].ensure_grad();
    std::copy(conv.kernel.data().begin(), conv.kernel.data().end(), kernels[i].grad().begin());
    if (i > 0) g = std::move(conv.input);
  }
}

namespace {

void set_grad(Tensor& param, const Tensor& grad) {
  param.ensure_grad();
  std::copy(grad.data().begin(), grad.data().end(), param.grad().begin());
}

}  // namespace

Tensor ArmHead::forward(const Tensor& features, Mode mode) {
  return arm_forward(cfg, params, state, features, mode, &cache);
}

Tensor ArmHead::backward(const Tensor& grad_logits) {
  ArmGrads<float> g = arm_backward(cfg, params, cache, grad_logits);
  set_grad(params.da_kernel, g.da_kernel);
  set_grad(params.bn_scale, g.bn_scale);
  set_grad(params.bn_shift, g.bn_shift);
  set_grad(params.fc_weight, g.fc_weight);
  set_grad(params.fc_bias, g.fc_bias);
  state.lambda.ensure_grad();
  state.lambda.grad()[0] = static_cast<float>(g.lambda);
  return std::move(g.input);
}

Tensor GapHead::forward(const Tensor& features, Mode) {
  input_shape = features.shape();
  pooled = global_avg_pool_forward(features);
  return linear_forward(pooled, fc_weight, fc_bias);
}

Tensor GapHead::backward(const Tensor& grad_logits) {
  LinearGrads<float> fc = linear_backward(grad_logits, pooled, fc_weight);
  set_grad(fc_weight, fc.weight);
  set_grad(fc_bias, fc.bias);
  return global_avg_pool_backward(fc.input, input_shape);
}

Tensor DeAlbinoPoolHead::forward(const Tensor& features, Mode) {
  input = features;
  Tensor weighted = conv2d_forward(features, kernel, geom);
  conv_shape = weighted.shape();
  pooled = global_avg_pool_forward(weighted);
  return linear_forward(pooled, fc_weight, fc_bias);
}

Tensor DeAlbinoPoolHead::backward(const Tensor& grad_logits) {
  LinearGrads<float> fc = linear_backward(grad_logits, pooled, fc_weight);
  set_grad(fc_weight, fc.weight);
  set_grad(fc_bias, fc.bias);
  Tensor g = global_avg_pool_backward(fc.input, conv_shape);
  ConvGrads<float> conv = conv2d_backward(g, input, kernel, geom);
  set_grad(kernel, conv.kernel);
  return std::move(conv.input);
}

// ---------------------------------------------------------------------------

Model::Model(const ModelConfig& config, std::uint64_t seed) : cfg_(config) {
  cfg_.validate();
  std::mt19937_64 rng(seed);
  backbone_ = Backbone(cfg_.backbone, rng);
  const std::size_t C = cfg_.backbone.output_channels(), K = cfg_.num_classes;
  auto make_fc = [&](std::size_t features, Tensor& w, Tensor& b) {
    w = kaiming_uniform<float>(Shape{K, features}, features, rng);
    const double bound = 1.0 / std::sqrt(double(features));
    b = Tensor::uniform(Shape{K}, -bound, bound, rng);
  };
  switch (cfg_.head) {
    case HeadKind::Arm: {
      ArmHead h;
      h.cfg = cfg_.arm();
      h.params = init_arm_params<float>(h.cfg, rng);
      h.state = init_arm_state<float>(h.cfg);
      head_ = std::move(h);
      break;
    }
    case HeadKind::Gap: {
      GapHead h;
      make_fc(C, h.fc_weight, h.fc_bias);
      head_ = std::move(h);
      break;
    }
    case HeadKind::DeAlbinoPool: {
      DeAlbinoPoolHead h;
      h.geom = ConvGeometry::shared(C, cfg_.sweep_kernel, 1, 0);
      h.kernel = kaiming_uniform<float>(h.geom.kernel_shape(), h.geom.kernel * h.geom.kernel, rng);
      make_fc(C, h.fc_weight, h.fc_bias);
      head_ = std::move(h);
      break;
    }
  }
}

Tensor Model::forward(const Tensor& images, Mode mode) {
  Tensor features = backbone_.forward(images, mode);
  return std::visit([&](auto& h) { return h.forward(features, mode); }, head_);
}

void Model::backward(const Tensor& grad_logits) {
  Tensor g = std::visit([&](auto& h) { return h.backward(grad_logits); }, head_);
  backbone_.backward(g);
}

void Model::after_update() {
  if (auto* s = affinity_state()) s->clamp_lambda();
}

std::vector<NamedTensor> Model::parameters() {
  std::vector<NamedTensor> out;
  for (std::size_t i = 0; i < 3; ++i) {
    const std::string p = "backbone." + std::to_string(i) + ".";
    out.push_back({p + "conv", &backbone_.kernels[i]});
    out.push_back({p + "bn_scale", &backbone_.bn_scale[i]});
    out.push_back({p + "bn_shift", &backbone_.bn_shift[i]});
  }
  if (auto* h = std::get_if<ArmHead>(&head_)) {
    out.push_back({"arm.da_kernel", &h->params.da_kernel});
    out.push_back({"arm.bn_scale", &h->params.bn_scale});
    out.push_back({"arm.bn_shift", &h->params.bn_shift});
    if (h->state.learnable) out.push_back({"arm.lambda", &h->state.lambda});
    out.push_back({"arm.fc_weight", &h->params.fc_weight});
    out.push_back({"arm.fc_bias", &h->params.fc_bias});
  } else if (auto* g = std::get_if<GapHead>(&head_)) {
    out.push_back({"gap.fc_weight", &g->fc_weight});
    out.push_back({"gap.fc_bias", &g->fc_bias});
  } else if (auto* d = std::get_if<DeAlbinoPoolHead>(&head_)) {
    out.push_back({"pool.kernel", &d->kernel});
    out.push_back({"pool.fc_weight", &d->fc_weight});
    out.push_back({"pool.fc_bias", &d->fc_bias});
  }
  return out;
}

std::vector<NamedTensor> Model::buffers() {
  std::vector<NamedTensor> out;
  for (std::size_t i = 0; i < 3; ++i) {
    const std::string p = "backbone." + std::to_string(i) + ".";
    out.push_back({p + "bn_running_mean", &backbone_.bn_running[i].mean});
    out.push_back({p + "bn_running_var", &backbone_.bn_running[i].var});
  }
  if (auto* h = std::get_if<ArmHead>(&head_)) {
    out.push_back({"arm.bn_running_mean", &h->params.bn_running.mean});
    out.push_back({"arm.bn_running_var", &h->params.bn_running.var});
    out.push_back({"arm.generic_feature", &h->state.buffer});
    if (!h->state.learnable) out.push_back({"arm.lambda", &h->state.lambda});
  }
  return out;
}

std::size_t Model::parameter_count() {
  std::size_t n = 0;
  for (const auto& p : parameters()) n += p.tensor->size();
  return n;
}

GenericFeatureState<float>* Model::affinity_state() {
  if (auto* h = std::get_if<ArmHead>(&head_)) return &h->state;
  return nullptr;
}

}  // namespace armlab
