#pragma once

#include <cmath>
#include <limits>
#include <random>

#include "tsf/flow.hpp"
#include "tsf/image.hpp"

namespace tsf::testing {

// Smooth random texture in [0, 1]: blurred uniform noise, contrast-stretched.
inline Image smooth_texture(std::size_t h, std::size_t w, std::uint64_t seed, double sigma = 1.5) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Image img(h, w);
  for (auto& p : img.pixels()) p = u(rng);
  img = gaussian_blur(img, sigma);
  double lo = 1e9, hi = -1e9;
  for (double p : img.pixels()) lo = std::min(lo, p), hi = std::max(hi, p);
  for (auto& p : img.pixels()) p = 0.1 + 0.8 * (p - lo) / (hi - lo);
  return img;
}

// Crop of src at (top, left) with dims h x w.
inline Image crop(const Image& src, std::size_t top, std::size_t left, std::size_t h, std::size_t w) {
  Image out(h, w);
  for (std::size_t i = 0; i < h; ++i)
    for (std::size_t j = 0; j < w; ++j) out(i, j) = src(top + i, left + j);
  return out;
}

// Pair of h x w frames cut from one larger texture so the second frame's
// content is the first's moved by (dx, dy) pixels: a(i, j) = b(i + dy, j + dx).
struct ShiftedPair {
  Image a, b;
};

inline ShiftedPair shifted_pair(const Image& big, std::size_t h, std::size_t w, int dx, int dy, int margin = 8) {
  const auto m = static_cast<std::size_t>(margin);
  return {crop(big, m, m, h, w),
          crop(big, static_cast<std::size_t>(margin - dy), static_cast<std::size_t>(margin - dx), h, w)};
}

// Exhaustive integer block matching: for each pixel, the displacement in
// [-radius, radius]^2 minimising the patch SSD between a around (i, j) and b
// around (i + dy, j + dx). Pixels whose patch or search window leaves the
// frame are left at NaN.
inline FlowField block_match(const Image& a, const Image& b, int radius = 4, int half_patch = 3) {
  const int H = static_cast<int>(a.height()), W = static_cast<int>(a.width());
  const double nan = std::numeric_limits<double>::quiet_NaN();
  FlowField f(a.height(), a.width());
  for (auto& x : f.u.pixels()) x = nan;
  for (auto& x : f.v.pixels()) x = nan;
  const int reach = radius + half_patch;
  for (int i = reach; i < H - reach; ++i)
    for (int j = reach; j < W - reach; ++j) {
      double best = std::numeric_limits<double>::infinity();
      int bu = 0, bv = 0;
      for (int dy = -radius; dy <= radius; ++dy)
        for (int dx = -radius; dx <= radius; ++dx) {
          double ssd = 0.0;
          for (int pi = -half_patch; pi <= half_patch; ++pi)
            for (int pj = -half_patch; pj <= half_patch; ++pj) {
              const double d = a(i + pi, j + pj) - b(i + pi + dy, j + pj + dx);
              ssd += d * d;
            }
          if (ssd < best) best = ssd, bu = dx, bv = dy;
        }
      f.u(i, j) = bu;
      f.v(i, j) = bv;
    }
  return f;
}

// Average endpoint error against a constant (u, v) over pixels at least
// `border` from the frame edge.
inline double interior_aee(const FlowField& f, double u, double v, std::size_t border = 4) {
  double total = 0.0;
  std::size_t n = 0;
  for (std::size_t i = border; i + border < f.height(); ++i)
    for (std::size_t j = border; j + border < f.width(); ++j) {
      total += std::hypot(f.u(i, j) - u, f.v(i, j) - v);
      ++n;
    }
  return total / static_cast<double>(n);
}

// Average endpoint error between two flows over pixels where `reference` is
// defined (not NaN).
inline double aee_against(const FlowField& f, const FlowField& reference) {
  double total = 0.0;
  std::size_t n = 0;
  for (std::size_t k = 0; k < f.u.size(); ++k) {
    if (std::isnan(reference.u[k])) continue;
    total += std::hypot(f.u[k] - reference.u[k], f.v[k] - reference.v[k]);
    ++n;
  }
  return n ? total / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace tsf::testing
