#include "armlab/arm.hpp"

#include <cmath>

namespace armlab {

ArmConfig ArmConfig::reference() { return ArmConfig{}; }

std::size_t ArmConfig::ratio() const {
  return shuffle_ratio == 0 ? max_shuffle_ratio(channels) : shuffle_ratio;
}

ShuffleSpec ArmConfig::shuffle() const { return ShuffleSpec{ratio(), channels, height, width}; }

ConvGeometry ArmConfig::da_geometry() const {
  return ConvGeometry::shared(shuffle().out_channels(), da_kernel, da_stride, 0);
}

std::size_t ArmConfig::rep_height() const {
  return da_geometry().output_extent(shuffle().out_height());
}

std::size_t ArmConfig::rep_width() const {
  return da_geometry().output_extent(shuffle().out_width());
}

void ArmConfig::validate() const {
  shuffle().validate();
  if (num_classes < 1) throw ConfigError("ARM head needs at least one class");
  if (lambda_init < 0.0 || lambda_init > 1.0) {
    throw ConfigError("lambda_init " + std::to_string(lambda_init) + " outside [0, 1]");
  }
  (void)rep_height();
  (void)rep_width();
}

ArmParamCount arm_param_count(const ArmConfig& cfg) {
  cfg.validate();
  ArmParamCount c;
  c.arrangement = ShuffleSpec::parameter_count();
  c.de_albino = cfg.da_geometry().parameter_count();
  c.batchnorm = batchnorm_parameter_count(cfg.shuffle().out_channels());
  c.mean = 0;
  c.affinity = cfg.lambda_learnable ? 1 : 0;
  c.fc = linear_parameter_count(cfg.feature_count(), cfg.num_classes);
  return c;
}

template <typename T>
BasicTensor<T> kaiming_uniform(Shape shape, std::size_t fan_in, std::mt19937_64& rng) {
  const double bound = std::sqrt(6.0 / double(fan_in));
  return BasicTensor<T>::uniform(std::move(shape), -bound, bound, rng);
}

template <typename T>
ArmParams<T> init_arm_params(const ArmConfig& cfg, std::mt19937_64& rng) {
  cfg.validate();
  const ConvGeometry da = cfg.da_geometry();
  const std::size_t C = da.out_channels, F = cfg.feature_count(), K = cfg.num_classes;
  ArmParams<T> p;
  p.da_kernel = kaiming_uniform<T>(da.kernel_shape(), da.kernel * da.kernel, rng);
  p.bn_scale = BasicTensor<T>(Shape{C}, T{1});
  p.bn_shift = BasicTensor<T>(Shape{C}, T{0});
  p.bn_running = BatchNormRunning<T>(C);
  p.fc_weight = kaiming_uniform<T>(Shape{K, F}, F, rng);
  const double b = 1.0 / std::sqrt(double(F));
  p.fc_bias = BasicTensor<T>::uniform(Shape{K}, -b, b, rng);
  return p;
}

template <typename T>
GenericFeatureState<T> init_arm_state(const ArmConfig& cfg) {
  return GenericFeatureState<T>(Shape{cfg.rep_height(), cfg.rep_width()}, cfg.lambda_init,
                                cfg.lambda_learnable);
}

namespace {
Shape drop_batch(const Shape& s) { return Shape(s.begin() + 1, s.end()); }
}  // namespace

template <typename T>
BasicTensor<T> arm_forward(const ArmConfig& cfg, ArmParams<T>& params,
                           GenericFeatureState<T>& state, const BasicTensor<T>& features,
                           Mode mode, ArmCache<T>* cache, ArmTrace* trace) {
  require_rank(features, 4, "ARM input");
  const Shape expected{features.dim(0), cfg.channels, cfg.height, cfg.width};
  if (features.shape() != expected) {
    throw GeometryError("ARM input " + shape_to_string(features.shape()) +
                        " does not match configured backbone output " +
                        shape_to_string(expected));
  }
  ArmCache<T> local;
  ArmCache<T>& c = cache ? *cache : local;
  auto record = [&](const char* name, const Shape& s) {
    if (trace) trace->push_back({name, drop_batch(s)});
  };

  c.arranged = pixel_shuffle(features, cfg.ratio());
  record("Arrangement", c.arranged.shape());
  BasicTensor<T> weighted = conv2d_forward(c.arranged, params.da_kernel, cfg.da_geometry());
  record("De-albino", weighted.shape());
  c.bn_out = batchnorm_forward(weighted, params.bn_scale, params.bn_shift, mode,
                               &params.bn_running, &c.bn);
  record("BN", c.bn_out.shape());
  BasicTensor<T> rep = channel_mean_forward(c.bn_out);
  record("Mean", rep.shape());
  BasicTensor<T> unique = affinity_forward(state, rep, mode, &c.affinity);
  record("Affinity", unique.shape());
  const std::size_t N = features.dim(0);
  c.flat = unique.reshaped(Shape{N, cfg.feature_count()});
  record("Flatten", c.flat.shape());
  BasicTensor<T> logits = linear_forward(c.flat, params.fc_weight, params.fc_bias);
  record("FC", logits.shape());
  return logits;
}

template <typename T>
ArmGrads<T> arm_backward(const ArmConfig& cfg, const ArmParams<T>& params,
                         const ArmCache<T>& cache, const BasicTensor<T>& grad_logits) {
  ArmGrads<T> g;
  LinearGrads<T> fc = linear_backward(grad_logits, cache.flat, params.fc_weight);
  g.fc_weight = std::move(fc.weight);
  g.fc_bias = std::move(fc.bias);
  const std::size_t N = cache.flat.dim(0);
  const BasicTensor<T> g_unique = fc.input.reshaped(Shape{N, cfg.rep_height(), cfg.rep_width()});
  AffinityGrads<T> aff = affinity_backward(g_unique, cache.affinity);
  g.lambda = cfg.lambda_learnable ? aff.lambda : 0.0;
  const ConvGeometry da = cfg.da_geometry();
  BasicTensor<T> g_bn_out = channel_mean_backward(aff.features, da.out_channels);
  BatchNormGrads<T> bn = batchnorm_backward(g_bn_out, params.bn_scale, cache.bn);
  g.bn_scale = std::move(bn.scale);
  g.bn_shift = std::move(bn.shift);
  ConvGrads<T> conv = conv2d_backward(bn.input, cache.arranged, params.da_kernel, da);
  g.da_kernel = std::move(conv.kernel);
  g.input = pixel_unshuffle(conv.input, cfg.ratio());
  return g;
}

#define ARMLAB_INSTANTIATE(T)                                                                   \
  template BasicTensor<T> kaiming_uniform<T>(Shape, std::size_t, std::mt19937_64&);             \
  template ArmParams<T> init_arm_params<T>(const ArmConfig&, std::mt19937_64&);                 \
  template GenericFeatureState<T> init_arm_state<T>(const ArmConfig&);                          \
  template BasicTensor<T> arm_forward(const ArmConfig&, ArmParams<T>&, GenericFeatureState<T>&, \
                                      const BasicTensor<T>&, Mode, ArmCache<T>*, ArmTrace*);    \
  template ArmGrads<T> arm_backward(const ArmConfig&, const ArmParams<T>&, const ArmCache<T>&,  \
                                    const BasicTensor<T>&);

ARMLAB_INSTANTIATE(float)
ARMLAB_INSTANTIATE(double)
#undef ARMLAB_INSTANTIATE

}  // namespace armlab
