#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace tsf {

using Dims = std::vector<std::size_t>;

std::string format_dims(const Dims& dims);
std::size_t dims_product(const Dims& dims);

// Dense row-major array of rank 1-4. Rank-3 tensors are height x width x
// channels with channels fastest, which is the layout every layer assumes.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Dims dims, T fill = T{});
  Tensor(Dims dims, std::vector<T> data);

  const Dims& dims() const noexcept { return dims_; }
  std::size_t rank() const noexcept { return dims_.size(); }
  std::size_t dim(std::size_t i) const { return dims_.at(i); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  T* raw() noexcept { return data_.data(); }
  const T* raw() const noexcept { return data_.data(); }
  const std::vector<T>& values() const noexcept { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  // Rank-3 element access (row, column, channel).
  T& at(std::size_t i, std::size_t j, std::size_t c) {
    return data_[(i * dims_[1] + j) * dims_[2] + c];
  }
  const T& at(std::size_t i, std::size_t j, std::size_t c) const {
    return data_[(i * dims_[1] + j) * dims_[2] + c];
  }

  void fill(T v);
  // Same data viewed with new dims of equal element count.
  Tensor reshaped(Dims dims) const;
  bool all_finite() const;

  template <typename U>
  Tensor<U> cast() const {
    if (dims_.empty()) return {};
    return Tensor<U>(dims_, std::vector<U>(data_.begin(), data_.end()));
  }

  bool operator==(const Tensor&) const = default;

 private:
  Dims dims_;
  std::vector<T> data_;
};

extern template class Tensor<float>;
extern template class Tensor<double>;

}  // namespace tsf
