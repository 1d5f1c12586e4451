#include "tsf/image.hpp"

#include <algorithm>
#include <cmath>

#include "tsf/errors.hpp"

namespace tsf {

Image::Image(std::size_t height, std::size_t width, double fill) : h_(height), w_(width), px_(height * width, fill) {}

Image::Image(std::size_t height, std::size_t width, std::vector<double> pixels)
    : h_(height), w_(width), px_(std::move(pixels)) {
  if (px_.size() != h_ * w_) {
    throw ShapeError("image data length " + std::to_string(px_.size()) + " does not match " +
                     std::to_string(h_) + "x" + std::to_string(w_));
  }
}

double Image::sample(double y, double x) const {
  const double maxy = static_cast<double>(h_ - 1), maxx = static_cast<double>(w_ - 1);
  y = std::clamp(y, 0.0, maxy);
  x = std::clamp(x, 0.0, maxx);
  const auto y0 = static_cast<std::size_t>(y);
  const auto x0 = static_cast<std::size_t>(x);
  const std::size_t y1 = std::min(y0 + 1, h_ - 1), x1 = std::min(x0 + 1, w_ - 1);
  const double fy = y - static_cast<double>(y0), fx = x - static_cast<double>(x0);
  const double top = (*this)(y0, x0) + fx * ((*this)(y0, x1) - (*this)(y0, x0));
  const double bottom = (*this)(y1, x0) + fx * ((*this)(y1, x1) - (*this)(y1, x0));
  return top + fy * (bottom - top);
}

Image to_grayscale(const Tensor<float>& rgb) {
  if (rgb.rank() != 3 || rgb.dim(2) != 3) {
    throw ShapeError("to_grayscale expects H x W x 3, got " + format_dims(rgb.dims()));
  }
  Image out(rgb.dim(0), rgb.dim(1));
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k] = 0.299 * rgb[3 * k] + 0.587 * rgb[3 * k + 1] + 0.114 * rgb[3 * k + 2];
  }
  return out;
}

namespace {

std::vector<double> gaussian_kernel(double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> k(2 * radius + 1);
  double total = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
    total += k[i + radius];
  }
  for (auto& v : k) v /= total;
  return k;
}

}  // namespace

Image gaussian_blur(const Image& img, double sigma) {
  if (sigma <= 0.0) return img;
  const auto k = gaussian_kernel(sigma);
  const int r = static_cast<int>(k.size() / 2);
  const int H = static_cast<int>(img.height()), W = static_cast<int>(img.width());
  Image tmp(img.height(), img.width()), out(img.height(), img.width());
  for (int i = 0; i < H; ++i)
    for (int j = 0; j < W; ++j) {
      double s = 0.0;
      for (int t = -r; t <= r; ++t) s += k[t + r] * img(i, std::clamp(j + t, 0, W - 1));
      tmp(i, j) = s;
    }
  for (int i = 0; i < H; ++i)
    for (int j = 0; j < W; ++j) {
      double s = 0.0;
      for (int t = -r; t <= r; ++t) s += k[t + r] * tmp(std::clamp(i + t, 0, H - 1), j);
      out(i, j) = s;
    }
  return out;
}

Image resize_bilinear(const Image& img, std::size_t height, std::size_t width) {
  Image out(height, width);
  const double sy = static_cast<double>(img.height()) / static_cast<double>(height);
  const double sx = static_cast<double>(img.width()) / static_cast<double>(width);
  for (std::size_t i = 0; i < height; ++i)
    for (std::size_t j = 0; j < width; ++j) {
      out(i, j) = img.sample((static_cast<double>(i) + 0.5) * sy - 0.5, (static_cast<double>(j) + 0.5) * sx - 0.5);
    }
  return out;
}

Image derivative_x(const Image& img) {
  const int H = static_cast<int>(img.height()), W = static_cast<int>(img.width());
  Image out(img.height(), img.width());
  for (int i = 0; i < H; ++i)
    for (int j = 0; j < W; ++j) {
      auto at = [&](int jj) { return img(i, std::clamp(jj, 0, W - 1)); };
      out(i, j) = (at(j - 2) - 8.0 * at(j - 1) + 8.0 * at(j + 1) - at(j + 2)) / 12.0;
    }
  return out;
}

Image derivative_y(const Image& img) {
  const int H = static_cast<int>(img.height()), W = static_cast<int>(img.width());
  Image out(img.height(), img.width());
  for (int i = 0; i < H; ++i)
    for (int j = 0; j < W; ++j) {
      auto at = [&](int ii) { return img(std::clamp(ii, 0, H - 1), j); };
      out(i, j) = (at(i - 2) - 8.0 * at(i - 1) + 8.0 * at(i + 1) - at(i + 2)) / 12.0;
    }
  return out;
}

}  // namespace tsf
