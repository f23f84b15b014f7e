#include "armlab/affinity.hpp"

#include <algorithm>
#include <string>

#include "armlab/log.hpp"

namespace armlab {

template <typename T>
GenericFeatureState<T>::GenericFeatureState(Shape representation, double lambda_init,
                                            bool learnable_lambda)
    : buffer(std::move(representation)),
      lambda(Shape{1}, static_cast<T>(lambda_init)),
      learnable(learnable_lambda) {
  clamp_lambda();
}

template <typename T>
double GenericFeatureState<T>::effective_lambda() const {
  return std::clamp(double(lambda[0]), 0.0, 1.0);
}

template <typename T>
bool GenericFeatureState<T>::clamp_lambda() {
  const double v = lambda[0];
  if (v >= 0.0 && v <= 1.0) return false;
  lambda[0] = static_cast<T>(std::clamp(v, 0.0, 1.0));
  log_warning("affinity lambda " + std::to_string(v) + " outside [0, 1], clamped to " +
              std::to_string(double(lambda[0])));
  return true;
}

namespace {

template <typename T>
void check_features(const GenericFeatureState<T>& state, const BasicTensor<T>& features) {
  require_rank(features, 3, "affinity features");
  if (features.dim(0) == 0) throw DataError("affinity: empty batch");
  const Shape rep{features.dim(1), features.dim(2)};
  if (state.buffer.shape() != rep) {
    throw GeometryError("affinity: representation " + shape_to_string(rep) +
                        " does not match generic buffer " + shape_to_string(state.buffer.shape()));
  }
}

}  // namespace

template <typename T>
BasicTensor<T> affinity_batch_mean(GenericFeatureState<T>& state, const BasicTensor<T>& features) {
  check_features(state, features);
  const std::size_t N = features.dim(0), M = state.buffer.size();
  BasicTensor<T> mean(state.buffer.shape());
  for (std::size_t i = 0; i < M; ++i) {
    double acc = 0.0;
    for (std::size_t n = 0; n < N; ++n) acc += features[n * M + i];
    mean[i] = static_cast<T>(acc / double(N));
  }
  if (!state.initialized) {
    state.buffer = mean;
    state.initialized = true;
  }
  return mean;
}

template <typename T>
BasicTensor<T> affinity_update(GenericFeatureState<T>& state, const BasicTensor<T>& batch_mean) {
  if (!state.initialized) throw ConfigError("affinity_update: generic feature not initialized");
  if (batch_mean.shape() != state.buffer.shape()) {
    throw GeometryError("affinity_update: batch mean " + shape_to_string(batch_mean.shape()) +
                        " does not match buffer " + shape_to_string(state.buffer.shape()));
  }
  state.clamp_lambda();
  const double lam = state.lambda[0];
  for (std::size_t i = 0; i < state.buffer.size(); ++i) {
    state.buffer[i] = static_cast<T>(lam * batch_mean[i] + (1.0 - lam) * state.buffer[i]);
  }
  return state.buffer;
}

template <typename T>
BasicTensor<T> affinity_forward(GenericFeatureState<T>& state, const BasicTensor<T>& features,
                                Mode mode, AffinityCache<T>* cache) {
  check_features(state, features);
  const std::size_t N = features.dim(0), M = state.buffer.size();
  BasicTensor<T> out(features.shape());
  if (mode == Mode::Eval) {
    if (!state.initialized) {
      throw ConfigError("affinity: eval-mode forward before any training batch initialized the "
                        "generic feature");
    }
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t i = 0; i < M; ++i)
        out[n * M + i] = static_cast<T>(double(features[n * M + i]) - state.buffer[i]);
    if (cache) *cache = AffinityCache<T>{Mode::Eval, {}, {}, state.effective_lambda(), N};
    return out;
  }

  BasicTensor<T> batch_mean = affinity_batch_mean(state, features);
  const double lam = state.effective_lambda();
  std::vector<double> sub(M);
  for (std::size_t i = 0; i < M; ++i) {
    sub[i] = lam * batch_mean[i] + (1.0 - lam) * state.buffer[i];
  }
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t i = 0; i < M; ++i)
      out[n * M + i] = static_cast<T>(double(features[n * M + i]) - sub[i]);
  if (cache) *cache = AffinityCache<T>{Mode::Train, batch_mean, state.buffer, lam, N};
  affinity_update(state, batch_mean);
  return out;
}

template <typename T>
AffinityGrads<T> affinity_backward(const BasicTensor<T>& grad_out, const AffinityCache<T>& cache) {
  require_rank(grad_out, 3, "affinity_backward");
  AffinityGrads<T> g{grad_out, 0.0};
  if (cache.mode == Mode::Eval) return g;
  const std::size_t N = grad_out.dim(0), M = grad_out.dim(1) * grad_out.dim(2);
  if (N != cache.batch || cache.batch_mean.size() != M) {
    throw GeometryError("affinity_backward: gradient shape " + shape_to_string(grad_out.shape()) +
                        " does not match cached forward");
  }
  const double scale = cache.lambda / double(N);
  double dlambda = 0.0;
  for (std::size_t i = 0; i < M; ++i) {
    double sum = 0.0;
    for (std::size_t n = 0; n < N; ++n) sum += grad_out[n * M + i];
    dlambda -= sum * (double(cache.batch_mean[i]) - cache.buffer_before[i]);
    for (std::size_t n = 0; n < N; ++n) {
      g.features[n * M + i] = static_cast<T>(double(grad_out[n * M + i]) - scale * sum);
    }
  }
  g.lambda = dlambda;
  return g;
}

template struct GenericFeatureState<float>;
template struct GenericFeatureState<double>;

#define ARMLAB_INSTANTIATE(T)                                                                    \
  template BasicTensor<T> affinity_batch_mean(GenericFeatureState<T>&, const BasicTensor<T>&);   \
  template BasicTensor<T> affinity_update(GenericFeatureState<T>&, const BasicTensor<T>&);       \
  template BasicTensor<T> affinity_forward(GenericFeatureState<T>&, const BasicTensor<T>&, Mode, \
                                           AffinityCache<T>*);                                   \
  template AffinityGrads<T> affinity_backward(const BasicTensor<T>&, const AffinityCache<T>&);

ARMLAB_INSTANTIATE(float)
ARMLAB_INSTANTIATE(double)
#undef ARMLAB_INSTANTIATE

}  // namespace armlab
