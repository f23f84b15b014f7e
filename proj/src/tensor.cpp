#include "armlab/tensor.hpp"

#include <cmath>
#include <sstream>

namespace armlab {

std::size_t shape_product(const Shape& shape) {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ')';
  return os.str();
}

namespace {
void check_shape(const Shape& shape) {
  if (shape.size() > kMaxRank) {
    throw GeometryError("tensor rank " + std::to_string(shape.size()) + " exceeds 4");
  }
}
}  // namespace

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, T fill) : shape_(std::move(shape)) {
  check_shape(shape_);
  data_.assign(shape_product(shape_), fill);
}

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, std::vector<T> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  check_shape(shape_);
  if (shape_product(shape_) != data_.size()) {
    throw GeometryError("tensor shape " + shape_to_string(shape_) + " needs " +
                        std::to_string(shape_product(shape_)) + " values, got " +
                        std::to_string(data_.size()));
  }
}

template <typename T>
std::size_t BasicTensor<T>::dim(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw GeometryError("axis " + std::to_string(axis) + " out of range for shape " +
                        shape_to_string(shape_));
  }
  return shape_[axis];
}

template <typename T>
std::span<T> BasicTensor<T>::grad() {
  if (!grad_) throw Error("tensor has no gradient buffer");
  return *grad_;
}

template <typename T>
std::span<const T> BasicTensor<T>::grad() const {
  if (!grad_) throw Error("tensor has no gradient buffer");
  return *grad_;
}

template <typename T>
void BasicTensor<T>::ensure_grad() {
  if (!grad_ || grad_->size() != data_.size()) grad_.emplace(data_.size(), T{0});
}

template <typename T>
void BasicTensor<T>::zero_grad() {
  ensure_grad();
  std::fill(grad_->begin(), grad_->end(), T{0});
}

template <typename T>
BasicTensor<T> BasicTensor<T>::reshaped(Shape shape) const {
  return BasicTensor(std::move(shape), data_);
}

template <typename T>
void BasicTensor<T>::fill(T value) {
  std::fill(data_.begin(), data_.end(), value);
}

template <typename T>
BasicTensor<T> BasicTensor<T>::uniform(Shape shape, double lo, double hi, std::mt19937_64& rng) {
  BasicTensor t(std::move(shape));
  std::uniform_real_distribution<double> dist(lo, hi);
  for (auto& v : t.data_) v = static_cast<T>(dist(rng));
  return t;
}

template <typename T>
void require_rank(const BasicTensor<T>& t, std::size_t expected, const char* what) {
  if (t.rank() != expected) {
    throw GeometryError(std::string(what) + ": expected rank " + std::to_string(expected) +
                        ", got shape " + shape_to_string(t.shape()));
  }
}

template <typename T>
bool all_finite(const BasicTensor<T>& t) {
  for (auto v : t.data()) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

template <typename T>
double dot(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  if (a.size() != b.size()) {
    throw GeometryError("dot: size mismatch " + shape_to_string(a.shape()) + " vs " +
                        shape_to_string(b.shape()));
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += double(a[i]) * double(b[i]);
  return acc;
}

template class BasicTensor<float>;
template class BasicTensor<double>;
template void require_rank(const BasicTensor<float>&, std::size_t, const char*);
template void require_rank(const BasicTensor<double>&, std::size_t, const char*);
template bool all_finite(const BasicTensor<float>&);
template bool all_finite(const BasicTensor<double>&);
template double dot(const BasicTensor<float>&, const BasicTensor<float>&);
template double dot(const BasicTensor<double>&, const BasicTensor<double>&);

}  // namespace armlab
