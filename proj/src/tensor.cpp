#include "tsf/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "tsf/errors.hpp"

namespace tsf {

std::string format_dims(const Dims& dims) {
  std::string out;
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(dims[i]);
  }
  return out.empty() ? "[]" : out;
}

std::size_t dims_product(const Dims& dims) {
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

namespace {

void check_dims(const Dims& dims) {
  if (dims.empty() || dims.size() > 4) {
    throw ShapeError("tensor rank must be 1-4, got " + std::to_string(dims.size()));
  }
  for (auto d : dims) {
    if (d == 0) throw ShapeError("tensor dims must be positive: " + format_dims(dims));
  }
}

}  // namespace

template <typename T>
Tensor<T>::Tensor(Dims dims, T fill) : dims_(std::move(dims)) {
  check_dims(dims_);
  data_.assign(dims_product(dims_), fill);
}

template <typename T>
Tensor<T>::Tensor(Dims dims, std::vector<T> data) : dims_(std::move(dims)), data_(std::move(data)) {
  check_dims(dims_);
  if (data_.size() != dims_product(dims_)) {
    throw ShapeError("tensor data length " + std::to_string(data_.size()) + " does not match dims " +
                     format_dims(dims_));
  }
}

template <typename T>
void Tensor<T>::fill(T v) {
  std::fill(data_.begin(), data_.end(), v);
}

template <typename T>
Tensor<T> Tensor<T>::reshaped(Dims dims) const {
  if (dims_product(dims) != data_.size()) {
    throw ShapeError("cannot reshape " + format_dims(dims_) + " to " + format_dims(dims));
  }
  return Tensor(std::move(dims), data_);
}

template <typename T>
bool Tensor<T>::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
}

template class Tensor<float>;
template class Tensor<double>;

}  // namespace tsf
