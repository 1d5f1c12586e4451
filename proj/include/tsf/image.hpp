#pragma once

#include <cstddef>
#include <vector>

#include "tsf/tensor.hpp"

namespace tsf {

// Single-channel real image, row-major.
class Image {
 public:
  Image() = default;
  Image(std::size_t height, std::size_t width, double fill = 0.0);
  Image(std::size_t height, std::size_t width, std::vector<double> pixels);

  std::size_t height() const noexcept { return h_; }
  std::size_t width() const noexcept { return w_; }
  std::size_t size() const noexcept { return px_.size(); }
  bool same_dims(const Image& o) const noexcept { return h_ == o.h_ && w_ == o.w_; }

  double& operator()(std::size_t i, std::size_t j) { return px_[i * w_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return px_[i * w_ + j]; }
  double& operator[](std::size_t k) { return px_[k]; }
  double operator[](std::size_t k) const { return px_[k]; }

  std::vector<double>& pixels() noexcept { return px_; }
  const std::vector<double>& pixels() const noexcept { return px_; }

  // Clamp-to-edge bilinear sample at fractional (row y, column x).
  double sample(double y, double x) const;

  bool operator==(const Image&) const = default;

 private:
  std::size_t h_ = 0, w_ = 0;
  std::vector<double> px_;
};

// Luminance 0.299 R + 0.587 G + 0.114 B of an H x W x 3 tensor.
Image to_grayscale(const Tensor<float>& rgb);

// Separable Gaussian blur, clamp-to-edge. sigma <= 0 returns the input.
Image gaussian_blur(const Image& img, double sigma);

// Bilinear resampling to the given dims (pixel-center aligned).
Image resize_bilinear(const Image& img, std::size_t height, std::size_t width);

// Central-difference derivatives (5-point stencil, clamp-to-edge).
Image derivative_x(const Image& img);
Image derivative_y(const Image& img);

}  // namespace tsf
