#pragma once

#include <cstddef>

#include "armlab/tensor.hpp"

namespace armlab {

/// Square-kernel 2D convolution geometry. With `shared_single_channel` a
/// single k x k kernel (no bias) is applied independently to every channel,
/// so in_channels == out_channels and the parameter count is k*k.
struct ConvGeometry {
  std::size_t kernel = 1;
  std::size_t stride = 1;
  std::size_t padding = 0;
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  bool shared_single_channel = false;

  void validate() const;
  /// floor((in + 2p - k) / s) + 1; throws if no window fits.
  std::size_t output_extent(std::size_t in) const;
  Shape kernel_shape() const;
  Shape output_shape(const Shape& input) const;
  std::size_t parameter_count() const;

  static ConvGeometry shared(std::size_t channels, std::size_t kernel, std::size_t stride,
                             std::size_t padding = 0);
};

template <typename T>
struct ConvGrads {
  BasicTensor<T> input;
  BasicTensor<T> kernel;
};

template <typename T>
BasicTensor<T> conv2d_forward(const BasicTensor<T>& input, const BasicTensor<T>& kernel,
                              const ConvGeometry& geom);

/// Same result as conv2d_forward through an explicit im2col matrix product.
template <typename T>
BasicTensor<T> conv2d_forward_im2col(const BasicTensor<T>& input, const BasicTensor<T>& kernel,
                                     const ConvGeometry& geom);

template <typename T>
ConvGrads<T> conv2d_backward(const BasicTensor<T>& grad_out, const BasicTensor<T>& input,
                             const BasicTensor<T>& kernel, const ConvGeometry& geom);

}  // namespace armlab
