#include "armlab/layers.hpp"

#include <algorithm>
#include <cmath>

namespace armlab {

template <typename T>
BasicTensor<T> batchnorm_forward(const BasicTensor<T>& input, const BasicTensor<T>& scale,
                                 const BasicTensor<T>& shift, Mode mode,
                                 BatchNormRunning<T>* running, BatchNormCache<T>* cache,
                                 const BatchNormOptions& opt) {
  require_rank(input, 4, "batchnorm");
  const std::size_t N = input.dim(0), C = input.dim(1), HW = input.dim(2) * input.dim(3);
  if (scale.size() != C || shift.size() != C) {
    throw GeometryError("batchnorm: scale/shift length " + std::to_string(scale.size()) + "/" +
                        std::to_string(shift.size()) + " does not match C=" + std::to_string(C));
  }
  if (running && (running->mean.size() != C || running->var.size() != C)) {
    throw GeometryError("batchnorm: running statistics sized for " +
                        std::to_string(running->mean.size()) + " channels, input has C=" +
                        std::to_string(C));
  }
  if (mode == Mode::Eval && !running) {
    throw GeometryError("batchnorm: eval mode requires running statistics");
  }
  const std::size_t count = N * HW;
  if (mode == Mode::Train && count == 0) throw GeometryError("batchnorm: empty batch");

  BasicTensor<T> out(input.shape());
  BatchNormCache<T> local;
  BatchNormCache<T>& c = cache ? *cache : local;
  c.mode = mode;
  c.normalized = BasicTensor<T>(input.shape());
  c.inv_std.assign(C, 0.0);

  for (std::size_t ch = 0; ch < C; ++ch) {
    double mean = 0.0, var = 0.0;
    if (mode == Mode::Train) {
      for (std::size_t n = 0; n < N; ++n) {
        const T* p = input.data().data() + (n * C + ch) * HW;
        for (std::size_t i = 0; i < HW; ++i) mean += p[i];
      }
      mean /= double(count);
      for (std::size_t n = 0; n < N; ++n) {
        const T* p = input.data().data() + (n * C + ch) * HW;
        for (std::size_t i = 0; i < HW; ++i) var += (p[i] - mean) * (p[i] - mean);
      }
      var /= double(count);
      if (running) {
        const double unbiased = count > 1 ? var * double(count) / double(count - 1) : var;
        running->mean[ch] = static_cast<T>((1.0 - opt.momentum) * running->mean[ch] +
                                           opt.momentum * mean);
        running->var[ch] = static_cast<T>((1.0 - opt.momentum) * running->var[ch] +
                                          opt.momentum * unbiased);
      }
    } else {
      mean = running->mean[ch];
      var = running->var[ch];
    }
    const double inv_std = 1.0 / std::sqrt(var + opt.epsilon);
    c.inv_std[ch] = inv_std;
    const double g = scale[ch], b = shift[ch];
    for (std::size_t n = 0; n < N; ++n) {
      const std::size_t off = (n * C + ch) * HW;
      for (std::size_t i = 0; i < HW; ++i) {
        const double xh = (input[off + i] - mean) * inv_std;
        c.normalized[off + i] = static_cast<T>(xh);
        out[off + i] = static_cast<T>(g * xh + b);
      }
    }
  }
  return out;
}

template <typename T>
BatchNormGrads<T> batchnorm_backward(const BasicTensor<T>& grad_out, const BasicTensor<T>& scale,
                                     const BatchNormCache<T>& cache) {
  if (grad_out.shape() != cache.normalized.shape()) {
    throw GeometryError("batchnorm_backward: grad shape " + shape_to_string(grad_out.shape()) +
                        " does not match cached " + shape_to_string(cache.normalized.shape()));
  }
  const std::size_t N = grad_out.dim(0), C = grad_out.dim(1), HW = grad_out.dim(2) * grad_out.dim(3);
  const double count = double(N * HW);
  BatchNormGrads<T> g{BasicTensor<T>(grad_out.shape()), BasicTensor<T>(Shape{C}),
                      BasicTensor<T>(Shape{C})};
  for (std::size_t ch = 0; ch < C; ++ch) {
    double sum_g = 0.0, sum_gx = 0.0;
    for (std::size_t n = 0; n < N; ++n) {
      const std::size_t off = (n * C + ch) * HW;
      for (std::size_t i = 0; i < HW; ++i) {
        sum_g += grad_out[off + i];
        sum_gx += double(grad_out[off + i]) * cache.normalized[off + i];
      }
    }
    g.shift[ch] = static_cast<T>(sum_g);
    g.scale[ch] = static_cast<T>(sum_gx);
    const double k = double(scale[ch]) * cache.inv_std[ch];
    for (std::size_t n = 0; n < N; ++n) {
      const std::size_t off = (n * C + ch) * HW;
      for (std::size_t i = 0; i < HW; ++i) {
        double v = grad_out[off + i];
        if (cache.mode == Mode::Train) {
          v -= (sum_g + cache.normalized[off + i] * sum_gx) / count;
        }
        g.input[off + i] = static_cast<T>(k * v);
      }
    }
  }
  return g;
}

template <typename T>
BasicTensor<T> linear_forward(const BasicTensor<T>& input, const BasicTensor<T>& weight,
                              const BasicTensor<T>& bias) {
  require_rank(input, 2, "linear input");
  require_rank(weight, 2, "linear weight");
  const std::size_t N = input.dim(0), F = input.dim(1), K = weight.dim(0);
  if (weight.dim(1) != F) {
    throw GeometryError("linear: input has " + std::to_string(F) + " features, weight expects " +
                        std::to_string(weight.dim(1)));
  }
  if (bias.size() != K) {
    throw GeometryError("linear: bias length " + std::to_string(bias.size()) +
                        " does not match out_features " + std::to_string(K));
  }
  BasicTensor<T> out(Shape{N, K});
  for (std::size_t n = 0; n < N; ++n) {
    const T* x = input.data().data() + n * F;
    for (std::size_t k = 0; k < K; ++k) {
      const T* w = weight.data().data() + k * F;
      double acc = bias[k];
      for (std::size_t f = 0; f < F; ++f) acc += double(w[f]) * x[f];
      out[n * K + k] = static_cast<T>(acc);
    }
  }
  return out;
}

template <typename T>
LinearGrads<T> linear_backward(const BasicTensor<T>& grad_out, const BasicTensor<T>& input,
                               const BasicTensor<T>& weight) {
  const std::size_t N = input.dim(0), F = input.dim(1), K = weight.dim(0);
  if (grad_out.shape() != Shape{N, K}) {
    throw GeometryError("linear_backward: grad shape " + shape_to_string(grad_out.shape()) +
                        " expected " + shape_to_string({N, K}));
  }
  LinearGrads<T> g{BasicTensor<T>(input.shape()), BasicTensor<T>(weight.shape()),
                   BasicTensor<T>(Shape{K})};
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t f = 0; f < F; ++f) {
      double acc = 0.0;
      for (std::size_t k = 0; k < K; ++k) acc += double(grad_out[n * K + k]) * weight[k * F + f];
      g.input[n * F + f] = static_cast<T>(acc);
    }
  }
  for (std::size_t k = 0; k < K; ++k) {
    double db = 0.0;
    for (std::size_t n = 0; n < N; ++n) db += grad_out[n * K + k];
    g.bias[k] = static_cast<T>(db);
    for (std::size_t f = 0; f < F; ++f) {
      double acc = 0.0;
      for (std::size_t n = 0; n < N; ++n) acc += double(grad_out[n * K + k]) * input[n * F + f];
      g.weight[k * F + f] = static_cast<T>(acc);
    }
  }
  return g;
}

template <typename T>
BasicTensor<T> channel_mean_forward(const BasicTensor<T>& input) {
  require_rank(input, 4, "channel_mean");
  const std::size_t N = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
  if (C < 1) throw GeometryError("channel_mean: C must be >= 1");
  BasicTensor<T> out(Shape{N, H, W});
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t i = 0; i < H * W; ++i) {
      double acc = 0.0;
      for (std::size_t c = 0; c < C; ++c) acc += input[(n * C + c) * H * W + i];
      out[n * H * W + i] = static_cast<T>(acc / double(C));
    }
  }
  return out;
}

template <typename T>
BasicTensor<T> channel_mean_backward(const BasicTensor<T>& grad_out, std::size_t channels) {
  require_rank(grad_out, 3, "channel_mean_backward");
  const std::size_t N = grad_out.dim(0), HW = grad_out.dim(1) * grad_out.dim(2);
  BasicTensor<T> g(Shape{N, channels, grad_out.dim(1), grad_out.dim(2)});
  const double inv = 1.0 / double(channels);
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t c = 0; c < channels; ++c) {
      for (std::size_t i = 0; i < HW; ++i) {
        g[(n * channels + c) * HW + i] = static_cast<T>(grad_out[n * HW + i] * inv);
      }
    }
  }
  return g;
}

template <typename T>
BasicTensor<T> global_avg_pool_forward(const BasicTensor<T>& input) {
  require_rank(input, 4, "global_avg_pool");
  const std::size_t N = input.dim(0), C = input.dim(1), HW = input.dim(2) * input.dim(3);
  BasicTensor<T> out(Shape{N, C});
  for (std::size_t i = 0; i < N * C; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < HW; ++j) acc += input[i * HW + j];
    out[i] = static_cast<T>(acc / double(HW));
  }
  return out;
}

template <typename T>
BasicTensor<T> global_avg_pool_backward(const BasicTensor<T>& grad_out, const Shape& input_shape) {
  if (input_shape.size() != 4 || grad_out.shape() != Shape{input_shape[0], input_shape[1]}) {
    throw GeometryError("global_avg_pool_backward: grad shape " +
                        shape_to_string(grad_out.shape()) + " inconsistent with input " +
                        shape_to_string(input_shape));
  }
  const std::size_t HW = input_shape[2] * input_shape[3];
  BasicTensor<T> g(input_shape);
  for (std::size_t i = 0; i < grad_out.size(); ++i) {
    const T v = static_cast<T>(double(grad_out[i]) / double(HW));
    std::fill_n(g.data().begin() + i * HW, HW, v);
  }
  return g;
}

template <typename T>
BasicTensor<T> relu_forward(const BasicTensor<T>& input) {
  BasicTensor<T> out(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) out[i] = input[i] > T{0} ? input[i] : T{0};
  return out;
}

template <typename T>
BasicTensor<T> relu_backward(const BasicTensor<T>& grad_out, const BasicTensor<T>& input) {
  if (grad_out.shape() != input.shape()) throw GeometryError("relu_backward: shape mismatch");
  BasicTensor<T> g(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) g[i] = input[i] > T{0} ? grad_out[i] : T{0};
  return g;
}

template <typename T>
LossResult<T> softmax_cross_entropy(const BasicTensor<T>& logits, std::span<const int> labels) {
  require_rank(logits, 2, "softmax_cross_entropy");
  const std::size_t N = logits.dim(0), K = logits.dim(1);
  if (labels.size() != N) {
    throw GeometryError("softmax_cross_entropy: " + std::to_string(labels.size()) +
                        " labels for batch of " + std::to_string(N));
  }
  LossResult<T> r{0.0, BasicTensor<T>(logits.shape())};
  std::vector<double> p(K);
  for (std::size_t n = 0; n < N; ++n) {
    const int y = labels[n];
    if (y < 0 || std::size_t(y) >= K) {
      throw DataError("label " + std::to_string(y) + " at sample " + std::to_string(n) +
                      " outside [0, " + std::to_string(K) + ")");
    }
    const T* z = logits.data().data() + n * K;
    const double zmax = *std::max_element(z, z + K);
    double sum = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      p[k] = std::exp(double(z[k]) - zmax);
      sum += p[k];
    }
    r.loss += -(double(z[y]) - zmax - std::log(sum));
    for (std::size_t k = 0; k < K; ++k) {
      const double pk = p[k] / sum - (std::size_t(y) == k ? 1.0 : 0.0);
      r.grad_logits[n * K + k] = static_cast<T>(pk / double(N));
    }
  }
  r.loss /= double(N);
  return r;
}

template <typename T>
std::vector<int> argmax_rows(const BasicTensor<T>& logits) {
  require_rank(logits, 2, "argmax_rows");
  const std::size_t N = logits.dim(0), K = logits.dim(1);
  std::vector<int> out(N);
  for (std::size_t n = 0; n < N; ++n) {
    const T* z = logits.data().data() + n * K;
    out[n] = int(std::max_element(z, z + K) - z);
  }
  return out;
}

#define ARMLAB_INSTANTIATE(T)                                                                    \
  template BasicTensor<T> batchnorm_forward(const BasicTensor<T>&, const BasicTensor<T>&,        \
                                            const BasicTensor<T>&, Mode, BatchNormRunning<T>*,   \
                                            BatchNormCache<T>*, const BatchNormOptions&);        \
  template BatchNormGrads<T> batchnorm_backward(const BasicTensor<T>&, const BasicTensor<T>&,    \
                                                const BatchNormCache<T>&);                       \
  template BasicTensor<T> linear_forward(const BasicTensor<T>&, const BasicTensor<T>&,           \
                                         const BasicTensor<T>&);                                 \
  template LinearGrads<T> linear_backward(const BasicTensor<T>&, const BasicTensor<T>&,          \
                                          const BasicTensor<T>&);                                \
  template BasicTensor<T> channel_mean_forward(const BasicTensor<T>&);                           \
  template BasicTensor<T> channel_mean_backward(const BasicTensor<T>&, std::size_t);             \
  template BasicTensor<T> global_avg_pool_forward(const BasicTensor<T>&);                        \
  template BasicTensor<T> global_avg_pool_backward(const BasicTensor<T>&, const Shape&);         \
  template BasicTensor<T> relu_forward(const BasicTensor<T>&);                                   \
  template BasicTensor<T> relu_backward(const BasicTensor<T>&, const BasicTensor<T>&);           \
  template LossResult<T> softmax_cross_entropy(const BasicTensor<T>&, std::span<const int>);     \
  template std::vector<int> argmax_rows(const BasicTensor<T>&);

ARMLAB_INSTANTIATE(float)
ARMLAB_INSTANTIATE(double)
#undef ARMLAB_INSTANTIATE

}  // namespace armlab
