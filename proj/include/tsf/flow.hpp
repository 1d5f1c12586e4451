#pragma once

#include <cstddef>
#include <vector>

#include "tsf/image.hpp"

namespace tsf {

// Per-pixel displacement from frame a to frame b, in pixels per frame:
// a(i, j) corresponds to b(i + v, j + u).
struct FlowField {
  Image u;
  Image v;

  FlowField() = default;
  FlowField(std::size_t height, std::size_t width) : u(height, width), v(height, width) {}
  FlowField(Image du, Image dv);

  std::size_t height() const noexcept { return u.height(); }
  std::size_t width() const noexcept { return u.width(); }
};

// Coarse-to-fine variational flow parameters. alpha, gamma and the robust
// penalty epsilon are defined on a 0-255 intensity scale; input frames in
// [0, 1] are rescaled internally.
struct FlowParams {
  double alpha = 30.0;      // smoothness weight
  double gamma = 10.0;      // gradient-constancy weight
  double eta = 0.8;         // pyramid scale factor, in (0.5, 0.95)
  int levels = 0;           // 0 = automatic (down to min_dim)
  std::size_t min_dim = 8;
  int outer_iterations = 5;
  int inner_iterations = 3;
  double sor_omega = 1.9;   // in (1, 2)
  int sor_sweeps = 30;
  double penalty_epsilon = 1e-3;
  double energy_tolerance = 1e-6;  // relative
  // Step halvings tried when an outer update raises the energy. If none
  // descends the level stops early; with 0, any increase is a
  // ConvergenceError.
  int max_backtracks = 8;

  void validate() const;
};

// Energy trace of one solve: energies[l][k] is the energy after k accepted
// outer iterations at pyramid level l (k = 0 is the warm start). Level l is the
// image scaled by eta^l, so level 0 is full resolution.
struct FlowDiagnostics {
  std::vector<std::vector<double>> energies;
};

// Pyramid of Gaussian-smoothed downsamples, coarsest first. Level l has dims
// round(dim * eta^l); levels stop before either dim drops below min_dim.
// levels == 0 builds as many as fit.
std::vector<Image> build_pyramid(const Image& image, double eta, int levels, std::size_t min_dim = 8);

// out(i, j) = image sampled at (i + v(i, j), j + u(i, j)), clamp-to-edge.
Image warp_bilinear(const Image& image, const FlowField& flow);

// Variational energy of a flow on one image pair (0-255 intensity scale):
// sum Psi(|I2(x+w) - I1|^2 + gamma |grad I2(x+w) - grad I1|^2)
//   + alpha sum Psi(|grad u|^2 + |grad v|^2),  Psi(s2) = sqrt(s2 + eps^2).
double flow_energy(const Image& first, const Image& second, const FlowField& flow, const FlowParams& params);

// Dense flow between two grayscale frames with values in [0, 1]. Frames must
// share dims with H, W >= 16. Throws InputError on bad input and
// ConvergenceError (with the pyramid level) if the energy becomes non-finite,
// or if an outer iteration raises it beyond the relative tolerance when step
// halving is disabled.
FlowField estimate_flow(const Image& frame_a, const Image& frame_b, const FlowParams& params = {},
                        FlowDiagnostics* diagnostics = nullptr);

}  // namespace tsf
