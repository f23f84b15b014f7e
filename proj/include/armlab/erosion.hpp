#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "armlab/arrangement.hpp"
#include "armlab/conv.hpp"

namespace armlab {

/// Number of kernel windows covering each pixel of an H x W map.
struct PerceptionMap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::int64_t> counts;

  std::int64_t at(std::size_t y, std::size_t x) const { return counts[y * width + x]; }
  std::int64_t max() const;
};

/// Fraction of every pixel's receptive mass that originates from zero
/// padding. With all-ones normalized kernels a window averages the clean
/// mass of the real pixels it covers; padding contributes nothing.
struct AlbinoMap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> contamination;

  double at(std::size_t y, std::size_t x) const { return contamination[y * width + x]; }
};

/// Window counts for geometry (k, s, p) on an H x W map; padding positions
/// are not part of the result.
PerceptionMap perception_map(std::size_t height, std::size_t width, std::size_t kernel,
                             std::size_t stride, std::size_t padding);

/// Contamination after every layer of the stack: element i is depth i + 1.
std::vector<AlbinoMap> albino_maps(std::size_t height, std::size_t width,
                                   const std::vector<ConvGeometry>& layers);

/// Contamination after the whole stack.
AlbinoMap albino_map(std::size_t height, std::size_t width, const std::vector<ConvGeometry>& layers);

/// Total perception weight per feature cluster (r x r block) of the
/// arranged map under the de-albino geometry.
struct ClusterProfile {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::int64_t> totals;

  std::int64_t at(std::size_t i, std::size_t j) const { return totals[i * cols + j]; }
  /// Largest total among clusters on the outermost ring.
  std::int64_t outer_ring_max() const;
  /// Smallest total among clusters not touching the outermost ring.
  std::int64_t interior_min() const;
};

ClusterProfile cluster_weight_profile(const ShuffleSpec& shuffle, const ConvGeometry& da);

/// Parses "k,s,p;k,s,p;..." into single-channel layer geometries. Errors name
/// the character offset of the offending field.
std::vector<ConvGeometry> parse_layer_spec(const std::string& spec);

}  // namespace armlab
