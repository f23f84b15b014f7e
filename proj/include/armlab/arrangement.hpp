#pragma once

#include <cstddef>

#include "armlab/tensor.hpp"

namespace armlab {

/// Feature-arrangement geometry: C channels of H x W collapse by r^2 into
/// C / r^2 channels of (H r) x (W r). Each r x r block of the output is one
/// feature cluster holding the channel values of a single input site.
struct ShuffleSpec {
  std::size_t ratio = 1;
  std::size_t in_channels = 1;
  std::size_t in_height = 1;
  std::size_t in_width = 1;

  void validate() const;
  std::size_t out_channels() const { return in_channels / (ratio * ratio); }
  std::size_t out_height() const { return in_height * ratio; }
  std::size_t out_width() const { return in_width * ratio; }
  std::size_t cluster_size() const { return ratio; }
  static constexpr std::size_t parameter_count() { return 0; }
};

/// Largest r with r^2 dividing `channels` (1 when C has no square divisor).
std::size_t max_shuffle_ratio(std::size_t channels);

/// (n, c*r^2 + dy*r + dx, i, j) -> (n, c, i*r + dy, j*r + dx).
template <typename T>
BasicTensor<T> pixel_shuffle(const BasicTensor<T>& x, std::size_t ratio);

/// Exact inverse of pixel_shuffle (and its adjoint).
template <typename T>
BasicTensor<T> pixel_unshuffle(const BasicTensor<T>& y, std::size_t ratio);

}  // namespace armlab
