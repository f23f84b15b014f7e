#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include "armlab/tensor.hpp"

namespace armlab {

/// Central-difference gradient (f(x + h e_i) - f(x - h e_i)) / 2h of a
/// scalar function, one coordinate at a time, accumulated in double.
template <typename T>
BasicTensor<T> finite_diff_grad(const std::function<double(const BasicTensor<T>&)>& f,
                                const BasicTensor<T>& x, double step) {
  if (!(step > 0.0)) throw OracleError("finite_diff_grad: step must be positive");
  BasicTensor<T> probe = x;
  BasicTensor<T> grad(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const T orig = probe[i];
    probe[i] = static_cast<T>(double(orig) + step);
    const double up = f(probe);
    probe[i] = static_cast<T>(double(orig) - step);
    const double down = f(probe);
    probe[i] = orig;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw OracleError("finite_diff_grad: non-finite evaluation at coordinate " +
                        std::to_string(i));
    }
    grad[i] = static_cast<T>((up - down) / (2.0 * step));
  }
  return grad;
}

/// Norm-wise relative error ||a - b|| / max(||a||, ||b||). Returns 0 when both
/// norms are below `floor`.
template <typename T>
double relative_error(const BasicTensor<T>& a, const BasicTensor<T>& b, double floor = 1e-9) {
  if (a.size() != b.size()) {
    throw GeometryError("relative_error: size mismatch " + shape_to_string(a.shape()) + " vs " +
                        shape_to_string(b.shape()));
  }
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = double(a[i]) - double(b[i]);
    diff += d * d;
    na += double(a[i]) * a[i];
    nb += double(b[i]) * b[i];
  }
  const double denom = std::max(std::sqrt(na), std::sqrt(nb));
  if (denom < floor) return std::sqrt(diff) < floor ? 0.0 : std::sqrt(diff) / floor;
  return std::sqrt(diff) / denom;
}

}  // namespace armlab
