#pragma once

#include <cstddef>

#include "armlab/layers.hpp"
#include "armlab/tensor.hpp"

namespace armlab {

/// EMA of batch-mean representations (the generic feature) plus the
/// smoothing factor lambda in [0, 1]. `buffer` never carries gradient.
template <typename T>
struct GenericFeatureState {
  BasicTensor<T> buffer;
  BasicTensor<T> lambda{Shape{1}, T(0.3)};
  bool learnable = true;
  bool initialized = false;

  GenericFeatureState() = default;
  GenericFeatureState(Shape representation, double lambda_init, bool learnable_lambda);

  double effective_lambda() const;
  /// Clamps lambda into [0, 1]; returns true (and warns) if it was outside.
  bool clamp_lambda();
};

/// Elementwise mean over the batch axis of (N, H, W) features. Initializes
/// the generic buffer with it on the first call.
template <typename T>
BasicTensor<T> affinity_batch_mean(GenericFeatureState<T>& state, const BasicTensor<T>& features);

/// buffer <- lambda * batch_mean + (1 - lambda) * buffer; returns the new buffer.
template <typename T>
BasicTensor<T> affinity_update(GenericFeatureState<T>& state, const BasicTensor<T>& batch_mean);

template <typename T>
struct AffinityCache {
  Mode mode = Mode::Train;
  BasicTensor<T> batch_mean;
  BasicTensor<T> buffer_before;
  double lambda = 0.0;
  std::size_t batch = 0;
};

template <typename T>
struct AffinityGrads {
  BasicTensor<T> features;
  double lambda = 0.0;
};

/// Unique residual of every representation.
///   train: f_i - (lambda * F_batch + (1 - lambda) * buffer), then the
///          buffer takes that blend (detached).
///   eval:  f_i - buffer; buffer untouched.
template <typename T>
BasicTensor<T> affinity_forward(GenericFeatureState<T>& state, const BasicTensor<T>& features,
                                Mode mode, AffinityCache<T>* cache = nullptr);

template <typename T>
AffinityGrads<T> affinity_backward(const BasicTensor<T>& grad_out, const AffinityCache<T>& cache);

}  // namespace armlab
