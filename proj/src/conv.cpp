#include "armlab/conv.hpp"

#include <algorithm>
#include <vector>

#include "armlab/parallel.hpp"

namespace armlab {

void ConvGeometry::validate() const {
  if (kernel < 1) throw GeometryError("kernel size must be >= 1");
  if (stride < 1) throw GeometryError("stride must be >= 1");
  if (in_channels < 1 || out_channels < 1) throw GeometryError("channel counts must be >= 1");
  if (shared_single_channel && in_channels != out_channels) {
    throw GeometryError("shared single-channel kernel needs in_channels == out_channels (" +
                        std::to_string(in_channels) + " vs " + std::to_string(out_channels) + ")");
  }
}

std::size_t ConvGeometry::output_extent(std::size_t in) const {
  validate();
  const std::size_t padded = in + 2 * padding;
  if (padded < kernel) {
    throw GeometryError("kernel too large: k=" + std::to_string(kernel) + " exceeds padded extent " +
                        std::to_string(padded) + " (input " + std::to_string(in) + ", padding " +
                        std::to_string(padding) + ")");
  }
  return (padded - kernel) / stride + 1;
}

Shape ConvGeometry::kernel_shape() const {
  if (shared_single_channel) return {1, 1, kernel, kernel};
  return {out_channels, in_channels, kernel, kernel};
}

Shape ConvGeometry::output_shape(const Shape& input) const {
  if (input.size() != 4) {
    throw GeometryError("conv2d: expected NCHW input, got " + shape_to_string(input));
  }
  if (input[1] != in_channels) {
    throw GeometryError("conv2d: channel dimension mismatch, input C=" + std::to_string(input[1]) +
                        " but geometry expects " + std::to_string(in_channels));
  }
  return {input[0], out_channels, output_extent(input[2]), output_extent(input[3])};
}

std::size_t ConvGeometry::parameter_count() const { return shape_product(kernel_shape()); }

ConvGeometry ConvGeometry::shared(std::size_t channels, std::size_t kernel, std::size_t stride,
                                  std::size_t padding) {
  return ConvGeometry{kernel, stride, padding, channels, channels, true};
}

namespace {

void check_kernel(const Shape& kernel, const ConvGeometry& geom) {
  const Shape expected = geom.kernel_shape();
  if (kernel != expected) {
    throw GeometryError("conv2d: kernel shape " + shape_to_string(kernel) + " does not match " +
                        shape_to_string(expected));
  }
}

// Range of output positions o with 0 <= o*s + offset - p < extent.
struct Span1D {
  std::size_t lo;
  std::size_t hi;  // exclusive
};

Span1D valid_outputs(std::size_t out, std::size_t extent, std::size_t offset, std::size_t stride,
                     std::size_t pad) {
  std::size_t lo = 0;
  if (offset < pad) lo = (pad - offset + stride - 1) / stride;
  // o*s + offset - pad <= extent - 1  =>  o <= (extent - 1 + pad - offset) / s
  std::size_t hi = 0;
  if (extent - 1 + pad >= offset) hi = std::min(out, (extent - 1 + pad - offset) / stride + 1);
  if (lo > hi) lo = hi;
  return {lo, hi};
}

// Kernel slice used for output channel co reading input channel ci, or
// nullptr when the pair is not connected.
template <typename T>
const T* kernel_slice(const BasicTensor<T>& kernel, const ConvGeometry& g, std::size_t co,
                      std::size_t ci) {
  const std::size_t kk = g.kernel * g.kernel;
  if (g.shared_single_channel) return co == ci ? kernel.data().data() : nullptr;
  return kernel.data().data() + (co * g.in_channels + ci) * kk;
}

}  // namespace

template <typename T>
BasicTensor<T> conv2d_forward(const BasicTensor<T>& input, const BasicTensor<T>& kernel,
                              const ConvGeometry& geom) {
  const Shape out_shape = geom.output_shape(input.shape());
  check_kernel(kernel.shape(), geom);
  BasicTensor<T> out(out_shape);
  const std::size_t N = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
  const std::size_t Co = out_shape[1], OH = out_shape[2], OW = out_shape[3];
  const std::size_t k = geom.kernel, s = geom.stride, p = geom.padding;

  parallel_for(N, [&](std::size_t n) {
    std::vector<double> acc(OH * OW);
    for (std::size_t co = 0; co < Co; ++co) {
      std::fill(acc.begin(), acc.end(), 0.0);
      for (std::size_t ci = 0; ci < C; ++ci) {
        const T* w = kernel_slice(kernel, geom, co, ci);
        if (!w) continue;
        const T* plane = input.data().data() + (n * C + ci) * H * W;
        for (std::size_t ky = 0; ky < k; ++ky) {
          const Span1D ys = valid_outputs(OH, H, ky, s, p);
          for (std::size_t kx = 0; kx < k; ++kx) {
            const double wv = w[ky * k + kx];
            const Span1D xs = valid_outputs(OW, W, kx, s, p);
            for (std::size_t oy = ys.lo; oy < ys.hi; ++oy) {
              const T* row = plane + (oy * s + ky - p) * W;
              double* arow = acc.data() + oy * OW;
              for (std::size_t ox = xs.lo; ox < xs.hi; ++ox) {
                arow[ox] += wv * double(row[ox * s + kx - p]);
              }
            }
          }
        }
      }
      T* dst = out.data().data() + (n * Co + co) * OH * OW;
      for (std::size_t i = 0; i < OH * OW; ++i) dst[i] = static_cast<T>(acc[i]);
    }
  });
  return out;
}

template <typename T>
BasicTensor<T> conv2d_forward_im2col(const BasicTensor<T>& input, const BasicTensor<T>& kernel,
                                     const ConvGeometry& geom) {
  const Shape out_shape = geom.output_shape(input.shape());
  check_kernel(kernel.shape(), geom);
  BasicTensor<T> out(out_shape);
  const std::size_t N = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
  const std::size_t Co = out_shape[1], OH = out_shape[2], OW = out_shape[3];
  const std::size_t k = geom.kernel, s = geom.stride, p = geom.padding;
  const std::size_t cols = OH * OW, kk = k * k;

  // One column block per input channel: rows (ky, kx), columns (oy, ox).
  std::vector<double> col(C * kk * cols);
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t ci = 0; ci < C; ++ci) {
      for (std::size_t ky = 0; ky < k; ++ky) {
        for (std::size_t kx = 0; kx < k; ++kx) {
          double* dst = col.data() + ((ci * k + ky) * k + kx) * cols;
          for (std::size_t oy = 0; oy < OH; ++oy) {
            for (std::size_t ox = 0; ox < OW; ++ox) {
              const long iy = long(oy * s + ky) - long(p);
              const long ix = long(ox * s + kx) - long(p);
              double v = 0.0;
              if (iy >= 0 && ix >= 0 && iy < long(H) && ix < long(W)) {
                v = input.at(n, ci, std::size_t(iy), std::size_t(ix));
              }
              dst[oy * OW + ox] = v;
            }
          }
        }
      }
    }
    for (std::size_t co = 0; co < Co; ++co) {
      const std::size_t ci_lo = geom.shared_single_channel ? co : 0;
      const std::size_t ci_hi = geom.shared_single_channel ? co + 1 : C;
      for (std::size_t j = 0; j < cols; ++j) {
        double acc = 0.0;
        for (std::size_t ci = ci_lo; ci < ci_hi; ++ci) {
          const T* w = kernel_slice(kernel, geom, co, ci);
          for (std::size_t r = 0; r < kk; ++r) acc += double(w[r]) * col[(ci * kk + r) * cols + j];
        }
        out.data()[(n * Co + co) * cols + j] = static_cast<T>(acc);
      }
    }
  }
  return out;
}

template <typename T>
ConvGrads<T> conv2d_backward(const BasicTensor<T>& grad_out, const BasicTensor<T>& input,
                             const BasicTensor<T>& kernel, const ConvGeometry& geom) {
  const Shape out_shape = geom.output_shape(input.shape());
  check_kernel(kernel.shape(), geom);
  if (grad_out.shape() != out_shape) {
    throw GeometryError("conv2d_backward: grad_out shape " + shape_to_string(grad_out.shape()) +
                        " does not match forward output " + shape_to_string(out_shape));
  }
  const std::size_t N = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
  const std::size_t Co = out_shape[1], OH = out_shape[2], OW = out_shape[3];
  const std::size_t k = geom.kernel, s = geom.stride, p = geom.padding;
  const std::size_t kk = k * k;
  const std::size_t ksize = kernel.size();

  ConvGrads<T> grads{BasicTensor<T>(input.shape()), BasicTensor<T>(kernel.shape())};
  // Per-sample kernel partials, reduced in sample order afterwards.
  std::vector<double> kpart(N * ksize, 0.0);

  parallel_for(N, [&](std::size_t n) {
    std::vector<double> gin(C * H * W, 0.0);
    double* kacc = kpart.data() + n * ksize;
    for (std::size_t co = 0; co < Co; ++co) {
      const T* g = grad_out.data().data() + (n * Co + co) * OH * OW;
      for (std::size_t ci = 0; ci < C; ++ci) {
        const T* w = kernel_slice(kernel, geom, co, ci);
        if (!w) continue;
        const std::size_t koff = geom.shared_single_channel ? 0 : (co * C + ci) * kk;
        const T* plane = input.data().data() + (n * C + ci) * H * W;
        double* gplane = gin.data() + ci * H * W;
        for (std::size_t ky = 0; ky < k; ++ky) {
          const Span1D ys = valid_outputs(OH, H, ky, s, p);
          for (std::size_t kx = 0; kx < k; ++kx) {
            const double wv = w[ky * k + kx];
            const Span1D xs = valid_outputs(OW, W, kx, s, p);
            double kg = 0.0;
            for (std::size_t oy = ys.lo; oy < ys.hi; ++oy) {
              const std::size_t iy = oy * s + ky - p;
              const T* row = plane + iy * W;
              double* grow = gplane + iy * W;
              const T* grow_out = g + oy * OW;
              for (std::size_t ox = xs.lo; ox < xs.hi; ++ox) {
                const std::size_t ix = ox * s + kx - p;
                const double gv = grow_out[ox];
                grow[ix] += gv * wv;
                kg += gv * double(row[ix]);
              }
            }
            kacc[koff + ky * k + kx] += kg;
          }
        }
      }
    }
    T* dst = grads.input.data().data() + n * C * H * W;
    for (std::size_t i = 0; i < C * H * W; ++i) dst[i] = static_cast<T>(gin[i]);
  });

  for (std::size_t j = 0; j < ksize; ++j) {
    double acc = 0.0;
    for (std::size_t n = 0; n < N; ++n) acc += kpart[n * ksize + j];
    grads.kernel[j] = static_cast<T>(acc);
  }
  return grads;
}

template BasicTensor<float> conv2d_forward(const BasicTensor<float>&, const BasicTensor<float>&,
                                           const ConvGeometry&);
template BasicTensor<double> conv2d_forward(const BasicTensor<double>&, const BasicTensor<double>&,
                                            const ConvGeometry&);
template BasicTensor<float> conv2d_forward_im2col(const BasicTensor<float>&,
                                                  const BasicTensor<float>&, const ConvGeometry&);
template BasicTensor<double> conv2d_forward_im2col(const BasicTensor<double>&,
                                                   const BasicTensor<double>&, const ConvGeometry&);
template ConvGrads<float> conv2d_backward(const BasicTensor<float>&, const BasicTensor<float>&,
                                          const BasicTensor<float>&, const ConvGeometry&);
template ConvGrads<double> conv2d_backward(const BasicTensor<double>&, const BasicTensor<double>&,
                                           const BasicTensor<double>&, const ConvGeometry&);

}  // namespace armlab
