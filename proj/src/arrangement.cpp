#include "armlab/arrangement.hpp"

namespace armlab {

void ShuffleSpec::validate() const {
  if (ratio < 1) throw GeometryError("shuffle ratio must be >= 1");
  if (in_channels % (ratio * ratio) != 0) {
    throw GeometryError("shuffle ratio " + std::to_string(ratio) + ": r^2=" +
                        std::to_string(ratio * ratio) + " does not divide C=" +
                        std::to_string(in_channels));
  }
}

std::size_t max_shuffle_ratio(std::size_t channels) {
  std::size_t best = 1;
  for (std::size_t r = 1; r * r <= channels; ++r) {
    if (channels % (r * r) == 0) best = r;
  }
  return best;
}

template <typename T>
BasicTensor<T> pixel_shuffle(const BasicTensor<T>& x, std::size_t r) {
  require_rank(x, 4, "pixel_shuffle");
  const std::size_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  ShuffleSpec{r, C, H, W}.validate();
  const std::size_t Co = C / (r * r), Ho = H * r, Wo = W * r;
  BasicTensor<T> y(Shape{N, Co, Ho, Wo});
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t c = 0; c < Co; ++c)
      for (std::size_t dy = 0; dy < r; ++dy)
        for (std::size_t dx = 0; dx < r; ++dx) {
          const std::size_t ci = c * r * r + dy * r + dx;
          for (std::size_t i = 0; i < H; ++i)
            for (std::size_t j = 0; j < W; ++j)
              y.at(n, c, i * r + dy, j * r + dx) = x.at(n, ci, i, j);
        }
  return y;
}

template <typename T>
BasicTensor<T> pixel_unshuffle(const BasicTensor<T>& y, std::size_t r) {
  require_rank(y, 4, "pixel_unshuffle");
  if (r < 1) throw GeometryError("shuffle ratio must be >= 1");
  const std::size_t N = y.dim(0), Co = y.dim(1), Ho = y.dim(2), Wo = y.dim(3);
  if (Ho % r != 0 || Wo % r != 0) {
    throw GeometryError("pixel_unshuffle: extents " + std::to_string(Ho) + "x" +
                        std::to_string(Wo) + " not divisible by r=" + std::to_string(r));
  }
  const std::size_t H = Ho / r, W = Wo / r, C = Co * r * r;
  BasicTensor<T> x(Shape{N, C, H, W});
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t c = 0; c < Co; ++c)
      for (std::size_t dy = 0; dy < r; ++dy)
        for (std::size_t dx = 0; dx < r; ++dx) {
          const std::size_t ci = c * r * r + dy * r + dx;
          for (std::size_t i = 0; i < H; ++i)
            for (std::size_t j = 0; j < W; ++j)
              x.at(n, ci, i, j) = y.at(n, c, i * r + dy, j * r + dx);
        }
  return x;
}

template BasicTensor<float> pixel_shuffle(const BasicTensor<float>&, std::size_t);
template BasicTensor<double> pixel_shuffle(const BasicTensor<double>&, std::size_t);
template BasicTensor<float> pixel_unshuffle(const BasicTensor<float>&, std::size_t);
template BasicTensor<double> pixel_unshuffle(const BasicTensor<double>&, std::size_t);

}  // namespace armlab
