#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "armlab/tensor.hpp"

namespace armlab {

enum class Mode { Train, Eval };

// ---------------------------------------------------------------------------
// Batch normalization over (N, H, W) per channel of an NCHW tensor.

struct BatchNormOptions {
  double epsilon = 1e-5;
  double momentum = 0.1;
};

template <typename T>
struct BatchNormRunning {
  BasicTensor<T> mean;  // (C)
  BasicTensor<T> var;   // (C)

  explicit BatchNormRunning(std::size_t channels = 0)
      : mean(Shape{channels}, T{0}), var(Shape{channels}, T{1}) {}
};

template <typename T>
struct BatchNormCache {
  BasicTensor<T> normalized;  // pre-affine x_hat
  std::vector<double> inv_std;
  Mode mode = Mode::Train;
};

template <typename T>
struct BatchNormGrads {
  BasicTensor<T> input;
  BasicTensor<T> scale;
  BasicTensor<T> shift;
};

inline std::size_t batchnorm_parameter_count(std::size_t channels) { return 2 * channels; }

/// Train mode normalizes with batch statistics and, when `running` is given,
/// folds them into the running estimates (unbiased variance). Eval mode
/// requires `running`.
template <typename T>
BasicTensor<T> batchnorm_forward(const BasicTensor<T>& input, const BasicTensor<T>& scale,
                                 const BasicTensor<T>& shift, Mode mode,
                                 BatchNormRunning<T>* running, BatchNormCache<T>* cache = nullptr,
                                 const BatchNormOptions& opt = {});

template <typename T>
BatchNormGrads<T> batchnorm_backward(const BasicTensor<T>& grad_out, const BasicTensor<T>& scale,
                                     const BatchNormCache<T>& cache);

// ---------------------------------------------------------------------------
// Fully connected: (N, F) x (K, F)^T + (K).

template <typename T>
struct LinearGrads {
  BasicTensor<T> input;
  BasicTensor<T> weight;
  BasicTensor<T> bias;
};

inline std::size_t linear_parameter_count(std::size_t in, std::size_t out) {
  return in * out + out;
}

template <typename T>
BasicTensor<T> linear_forward(const BasicTensor<T>& input, const BasicTensor<T>& weight,
                              const BasicTensor<T>& bias);

template <typename T>
LinearGrads<T> linear_backward(const BasicTensor<T>& grad_out, const BasicTensor<T>& input,
                               const BasicTensor<T>& weight);

// ---------------------------------------------------------------------------
// Reductions and pointwise ops.

/// (N, C, H, W) -> (N, H, W), arithmetic mean across channels.
template <typename T>
BasicTensor<T> channel_mean_forward(const BasicTensor<T>& input);
template <typename T>
BasicTensor<T> channel_mean_backward(const BasicTensor<T>& grad_out, std::size_t channels);

/// (N, C, H, W) -> (N, C), mean over the spatial extent.
template <typename T>
BasicTensor<T> global_avg_pool_forward(const BasicTensor<T>& input);
template <typename T>
BasicTensor<T> global_avg_pool_backward(const BasicTensor<T>& grad_out, const Shape& input_shape);

template <typename T>
BasicTensor<T> relu_forward(const BasicTensor<T>& input);
template <typename T>
BasicTensor<T> relu_backward(const BasicTensor<T>& grad_out, const BasicTensor<T>& input);

template <typename T>
struct LossResult {
  double loss = 0.0;
  BasicTensor<T> grad_logits;
};

/// Mean over the batch of -log softmax(logits)[label].
template <typename T>
LossResult<T> softmax_cross_entropy(const BasicTensor<T>& logits, std::span<const int> labels);

/// Row-wise argmax of (N, K) logits.
template <typename T>
std::vector<int> argmax_rows(const BasicTensor<T>& logits);

}  // namespace armlab
