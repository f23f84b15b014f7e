#include "armlab/erosion.hpp"

#include <algorithm>
#include <cctype>
#include <limits>

namespace armlab {

std::int64_t PerceptionMap::max() const {
  return counts.empty() ? 0 : *std::max_element(counts.begin(), counts.end());
}

namespace {

// Window count per coordinate along one axis; separable in 2D.
std::vector<std::int64_t> axis_coverage(std::size_t extent, std::size_t out, std::size_t k,
                                        std::size_t s, std::size_t p) {
  std::vector<std::int64_t> cov(extent, 0);
  for (std::size_t o = 0; o < out; ++o) {
    for (std::size_t t = 0; t < k; ++t) {
      const std::size_t padded = o * s + t;
      if (padded < p || padded - p >= extent) continue;
      ++cov[padded - p];
    }
  }
  return cov;
}

}  // namespace

PerceptionMap perception_map(std::size_t height, std::size_t width, std::size_t kernel,
                             std::size_t stride, std::size_t padding) {
  const ConvGeometry g{kernel, stride, padding, 1, 1, false};
  const std::size_t oh = g.output_extent(height), ow = g.output_extent(width);
  const auto cy = axis_coverage(height, oh, kernel, stride, padding);
  const auto cx = axis_coverage(width, ow, kernel, stride, padding);
  PerceptionMap m{height, width, std::vector<std::int64_t>(height * width)};
  for (std::size_t y = 0; y < height; ++y)
    for (std::size_t x = 0; x < width; ++x) m.counts[y * width + x] = cy[y] * cx[x];
  return m;
}

std::vector<AlbinoMap> albino_maps(std::size_t height, std::size_t width,
                                   const std::vector<ConvGeometry>& layers) {
  std::vector<AlbinoMap> out;
  std::vector<double> mass(height * width, 1.0);
  std::size_t H = height, W = width;
  for (const auto& g : layers) {
    const std::size_t k = g.kernel, s = g.stride, p = g.padding;
    const std::size_t OH = g.output_extent(H), OW = g.output_extent(W);
    const double area = double(k * k);
    std::vector<double> next(OH * OW);
    AlbinoMap m{OH, OW, std::vector<double>(OH * OW)};
    for (std::size_t oy = 0; oy < OH; ++oy) {
      for (std::size_t ox = 0; ox < OW; ++ox) {
        double clean = 0.0;
        for (std::size_t ky = 0; ky < k; ++ky) {
          const std::size_t py = oy * s + ky;
          if (py < p || py - p >= H) continue;
          for (std::size_t kx = 0; kx < k; ++kx) {
            const std::size_t px = ox * s + kx;
            if (px < p || px - p >= W) continue;
            clean += mass[(py - p) * W + (px - p)];
          }
        }
        next[oy * OW + ox] = clean / area;
        m.contamination[oy * OW + ox] = (area - clean) / area;
      }
    }
    out.push_back(std::move(m));
    mass = std::move(next);
    H = OH;
    W = OW;
  }
  return out;
}

AlbinoMap albino_map(std::size_t height, std::size_t width, const std::vector<ConvGeometry>& layers) {
  if (layers.empty()) return AlbinoMap{height, width, std::vector<double>(height * width, 0.0)};
  return albino_maps(height, width, layers).back();
}

std::int64_t ClusterProfile::outer_ring_max() const {
  std::int64_t best = std::numeric_limits<std::int64_t>::min();
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j)
      if (i == 0 || j == 0 || i + 1 == rows || j + 1 == cols) best = std::max(best, at(i, j));
  return best;
}

std::int64_t ClusterProfile::interior_min() const {
  std::int64_t best = std::numeric_limits<std::int64_t>::max();
  for (std::size_t i = 1; i + 1 < rows; ++i)
    for (std::size_t j = 1; j + 1 < cols; ++j) best = std::min(best, at(i, j));
  return best;
}

ClusterProfile cluster_weight_profile(const ShuffleSpec& shuffle, const ConvGeometry& da) {
  shuffle.validate();
  const std::size_t r = shuffle.ratio;
  const PerceptionMap pm = perception_map(shuffle.out_height(), shuffle.out_width(), da.kernel,
                                          da.stride, da.padding);
  ClusterProfile prof{shuffle.in_height, shuffle.in_width,
                      std::vector<std::int64_t>(shuffle.in_height * shuffle.in_width, 0)};
  for (std::size_t y = 0; y < pm.height; ++y)
    for (std::size_t x = 0; x < pm.width; ++x)
      prof.totals[(y / r) * prof.cols + (x / r)] += pm.at(y, x);
  return prof;
}

std::vector<ConvGeometry> parse_layer_spec(const std::string& spec) {
  std::vector<ConvGeometry> layers;
  std::size_t pos = 0;
  while (pos <= spec.size()) {
    std::size_t end = spec.find(';', pos);
    if (end == std::string::npos) end = spec.size();
    std::size_t fields[3];
    std::size_t at = pos;
    for (int f = 0; f < 3; ++f) {
      while (at < end && spec[at] == ' ') ++at;
      const std::size_t start = at;
      std::size_t v = 0;
      while (at < end && std::isdigit(static_cast<unsigned char>(spec[at]))) {
        v = v * 10 + std::size_t(spec[at] - '0');
        ++at;
      }
      if (at == start) {
        throw ConfigError("layer spec: expected a non-negative integer at position " +
                          std::to_string(start) + " in '" + spec + "'");
      }
      while (at < end && spec[at] == ' ') ++at;
      fields[f] = v;
      if (f < 2) {
        if (at >= end || spec[at] != ',') {
          throw ConfigError("layer spec: expected ',' at position " + std::to_string(at) +
                            " in '" + spec + "'");
        }
        ++at;
      }
    }
    if (at != end) {
      throw ConfigError("layer spec: unexpected character at position " + std::to_string(at) +
                        " in '" + spec + "'");
    }
    if (fields[0] < 1 || fields[1] < 1) {
      throw ConfigError("layer spec: kernel and stride must be >= 1 (layer at position " +
                        std::to_string(pos) + ")");
    }
    layers.push_back(ConvGeometry{fields[0], fields[1], fields[2], 1, 1, false});
    if (end == spec.size()) break;
    pos = end + 1;
  }
  return layers;
}

}  // namespace armlab
