#pragma once

#include <cstddef>
#include <iterator>
#include <vector>

namespace tsf {

// Per-class probabilities. Produced by softmax, averaged per video and
// combined by late fusion.
struct ScoreVector {
  std::vector<double> values;

  ScoreVector() = default;
  explicit ScoreVector(std::vector<double> v) : values(std::move(v)) {}

  std::size_t size() const noexcept { return values.size(); }
  double operator[](std::size_t i) const { return values[i]; }
  double sum() const;
  // Lowest index among the maxima.
  std::size_t argmax() const;

  static ScoreVector uniform(std::size_t n);
};

// Index of the first maximum of a range.
template <typename Range>
std::size_t argmax_lowest(const Range& r) {
  std::size_t best = 0;
  std::size_t i = 0;
  for (auto it = std::begin(r); it != std::end(r); ++it, ++i) {
    if (*it > *(std::begin(r) + static_cast<std::ptrdiff_t>(best))) best = i;
  }
  return best;
}

}  // namespace tsf
