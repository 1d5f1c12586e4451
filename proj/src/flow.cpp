#include "tsf/flow.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tsf/errors.hpp"

namespace tsf {

FlowField::FlowField(Image du, Image dv) : u(std::move(du)), v(std::move(dv)) {
  if (!u.same_dims(v)) throw ShapeError("flow u and v fields differ in dims");
}

void FlowParams::validate() const {
  auto bad = [](const std::string& what) { throw InputError("invalid flow parameter: " + what); };
  if (!(alpha > 0.0)) bad("alpha must be > 0");
  if (!(gamma >= 0.0)) bad("gamma must be >= 0");
  if (!(eta > 0.5 && eta < 0.95)) bad("eta must be in (0.5, 0.95)");
  if (levels < 0) bad("levels must be >= 1 or 0 for automatic");
  if (min_dim < 2) bad("min_dim must be >= 2");
  if (outer_iterations < 1 || inner_iterations < 1 || sor_sweeps < 1) bad("iteration counts must be >= 1");
  if (!(sor_omega > 1.0 && sor_omega < 2.0)) bad("sor_omega must be in (1, 2)");
  if (!(penalty_epsilon > 0.0)) bad("penalty_epsilon must be > 0");
  if (!(energy_tolerance >= 0.0)) bad("energy_tolerance must be >= 0");
  if (max_backtracks < 0) bad("max_backtracks must be >= 0");
}

std::vector<Image> build_pyramid(const Image& image, double eta, int levels, std::size_t min_dim) {
  if (!(eta > 0.0 && eta < 1.0)) throw InputError("pyramid scale must be in (0, 1)");
  if (levels < 0) throw InputError("pyramid levels must be >= 0");
  std::vector<Image> fine_first{image};
  const double sigma = 0.6 * std::sqrt(1.0 / (eta * eta) - 1.0);
  for (int l = 1; levels == 0 || l < levels; ++l) {
    const double s = std::pow(eta, l);
    const auto h = static_cast<std::size_t>(std::lround(static_cast<double>(image.height()) * s));
    const auto w = static_cast<std::size_t>(std::lround(static_cast<double>(image.width()) * s));
    if (h < min_dim || w < min_dim) break;
    fine_first.push_back(resize_bilinear(gaussian_blur(fine_first.back(), sigma), h, w));
  }
  return {fine_first.rbegin(), fine_first.rend()};
}

Image warp_bilinear(const Image& image, const FlowField& flow) {
  if (!image.same_dims(flow.u) || !flow.u.same_dims(flow.v)) {
    throw ShapeError("warp_bilinear: image and flow dims differ");
  }
  Image out(image.height(), image.width());
  for (std::size_t i = 0; i < image.height(); ++i)
    for (std::size_t j = 0; j < image.width(); ++j) {
      out(i, j) = image.sample(static_cast<double>(i) + flow.v(i, j), static_cast<double>(j) + flow.u(i, j));
    }
  return out;
}

namespace {

// Squared flow-gradient magnitude per pixel from forward differences
// (zero across the far border, matching Neumann boundaries).
std::vector<double> flow_gradient_sq(const Image& u, const Image& v) {
  const std::size_t H = u.height(), W = u.width();
  std::vector<double> out(H * W);
  for (std::size_t i = 0; i < H; ++i)
    for (std::size_t j = 0; j < W; ++j) {
      const std::size_t k = i * W + j;
      double g = 0.0;
      if (j + 1 < W) {
        const double ux = u[k + 1] - u[k], vx = v[k + 1] - v[k];
        g += ux * ux + vx * vx;
      }
      if (i + 1 < H) {
        const double uy = u[k + W] - u[k], vy = v[k + W] - v[k];
        g += uy * uy + vy * vy;
      }
      out[k] = g;
    }
  return out;
}

// Image pair at one pyramid level plus derivative images of both frames.
struct LevelImages {
  Image i1, i2;
  Image i1x, i1y;
  Image i2x, i2y, i2xx, i2xy, i2yy;

  LevelImages(Image a, Image b) : i1(std::move(a)), i2(std::move(b)) {
    i1x = derivative_x(i1);
    i1y = derivative_y(i1);
    i2x = derivative_x(i2);
    i2y = derivative_y(i2);
    i2xx = derivative_x(i2x);
    i2xy = derivative_y(i2x);
    i2yy = derivative_y(i2y);
  }
};

// Warped second-frame quantities for the current flow estimate.
struct Warped {
  Image iz, ix, iy, ixx, ixy, iyy, ixz, iyz;
};

Warped warp_level(const LevelImages& L, const FlowField& w) {
  Warped r;
  r.iz = warp_bilinear(L.i2, w);
  r.ix = warp_bilinear(L.i2x, w);
  r.iy = warp_bilinear(L.i2y, w);
  r.ixx = warp_bilinear(L.i2xx, w);
  r.ixy = warp_bilinear(L.i2xy, w);
  r.iyy = warp_bilinear(L.i2yy, w);
  r.ixz = r.ix;
  r.iyz = r.iy;
  for (std::size_t k = 0; k < r.iz.size(); ++k) {
    r.iz[k] -= L.i1[k];
    r.ixz[k] -= L.i1x[k];
    r.iyz[k] -= L.i1y[k];
  }
  return r;
}

double energy_from_warp(const Warped& W, const FlowField& w, const FlowParams& p) {
  const double e2 = p.penalty_epsilon * p.penalty_epsilon;
  double data = 0.0;
  for (std::size_t k = 0; k < W.iz.size(); ++k) {
    const double s = W.iz[k] * W.iz[k] + p.gamma * (W.ixz[k] * W.ixz[k] + W.iyz[k] * W.iyz[k]);
    data += std::sqrt(s + e2);
  }
  double smooth = 0.0;
  for (double g : flow_gradient_sq(w.u, w.v)) smooth += std::sqrt(g + e2);
  return data + p.alpha * smooth;
}

// One outer fixed-point step: solves the linearised system for increments
// (du, dv) with lagged robust weights, using SOR sweeps.
void solve_increment(const Warped& W, const FlowField& w, const FlowParams& p, Image& du, Image& dv) {
  const std::size_t H = w.height(), Wd = w.width(), N = H * Wd;
  const double e2 = p.penalty_epsilon * p.penalty_epsilon;
  const double gamma = p.gamma, alpha = p.alpha, omega = p.sor_omega;
  std::vector<double> a11(N), a12(N), a22(N), b1(N), b2(N), wr(N), wd(N);
  Image uu(H, Wd), vv(H, Wd);

  for (int inner = 0; inner < p.inner_iterations; ++inner) {
    for (std::size_t k = 0; k < N; ++k) {
      const double rz = W.iz[k] + W.ix[k] * du[k] + W.iy[k] * dv[k];
      const double rx = W.ixz[k] + W.ixx[k] * du[k] + W.ixy[k] * dv[k];
      const double ry = W.iyz[k] + W.ixy[k] * du[k] + W.iyy[k] * dv[k];
      const double psi = 0.5 / std::sqrt(rz * rz + gamma * (rx * rx + ry * ry) + e2);
      a11[k] = psi * (W.ix[k] * W.ix[k] + gamma * (W.ixx[k] * W.ixx[k] + W.ixy[k] * W.ixy[k]));
      a12[k] = psi * (W.ix[k] * W.iy[k] + gamma * (W.ixx[k] * W.ixy[k] + W.ixy[k] * W.iyy[k]));
      a22[k] = psi * (W.iy[k] * W.iy[k] + gamma * (W.ixy[k] * W.ixy[k] + W.iyy[k] * W.iyy[k]));
      b1[k] = -psi * (W.ix[k] * W.iz[k] + gamma * (W.ixx[k] * W.ixz[k] + W.ixy[k] * W.iyz[k]));
      b2[k] = -psi * (W.iy[k] * W.iz[k] + gamma * (W.ixy[k] * W.ixz[k] + W.iyy[k] * W.iyz[k]));
      uu[k] = w.u[k] + du[k];
      vv[k] = w.v[k] + dv[k];
    }
    const auto g2 = flow_gradient_sq(uu, vv);
    std::vector<double> psi_s(N);
    for (std::size_t k = 0; k < N; ++k) psi_s[k] = 0.5 / std::sqrt(g2[k] + e2);
    for (std::size_t i = 0; i < H; ++i)
      for (std::size_t j = 0; j < Wd; ++j) {
        const std::size_t k = i * Wd + j;
        wr[k] = j + 1 < Wd ? psi_s[k] : 0.0;
        wd[k] = i + 1 < H ? psi_s[k] : 0.0;
      }

    for (int sweep = 0; sweep < p.sor_sweeps; ++sweep) {
      for (std::size_t i = 0; i < H; ++i)
        for (std::size_t j = 0; j < Wd; ++j) {
          const std::size_t k = i * Wd + j;
          double sw = 0.0, su = 0.0, sv = 0.0;
          auto neighbour = [&](std::size_t q, double weight) {
            sw += weight;
            su += weight * (w.u[q] + du[q] - w.u[k]);
            sv += weight * (w.v[q] + dv[q] - w.v[k]);
          };
          if (j > 0) neighbour(k - 1, wr[k - 1]);
          if (j + 1 < Wd) neighbour(k + 1, wr[k]);
          if (i > 0) neighbour(k - Wd, wd[k - Wd]);
          if (i + 1 < H) neighbour(k + Wd, wd[k]);
          const double du_new = (b1[k] - a12[k] * dv[k] + alpha * su) / (a11[k] + alpha * sw);
          du[k] = (1.0 - omega) * du[k] + omega * du_new;
          const double dv_new = (b2[k] - a12[k] * du[k] + alpha * sv) / (a22[k] + alpha * sw);
          dv[k] = (1.0 - omega) * dv[k] + omega * dv_new;
        }
    }
  }
}

FlowField upsample_flow(const FlowField& f, std::size_t height, std::size_t width) {
  FlowField out(resize_bilinear(f.u, height, width), resize_bilinear(f.v, height, width));
  const double sx = static_cast<double>(width) / static_cast<double>(f.width());
  const double sy = static_cast<double>(height) / static_cast<double>(f.height());
  for (auto& x : out.u.pixels()) x *= sx;
  for (auto& y : out.v.pixels()) y *= sy;
  return out;
}

Image to_intensity_scale(const Image& img) {
  Image out = img;
  for (auto& x : out.pixels()) x *= 255.0;
  return out;
}

}  // namespace

double flow_energy(const Image& first, const Image& second, const FlowField& flow, const FlowParams& params) {
  if (!first.same_dims(second) || !first.same_dims(flow.u)) throw ShapeError("flow_energy: dims differ");
  const LevelImages L(first, second);
  return energy_from_warp(warp_level(L, flow), flow, params);
}

FlowField estimate_flow(const Image& frame_a, const Image& frame_b, const FlowParams& params,
                        FlowDiagnostics* diagnostics) {
  params.validate();
  if (!frame_a.same_dims(frame_b)) {
    throw InputError("estimate_flow: frame dims differ (" + std::to_string(frame_a.height()) + "x" +
                     std::to_string(frame_a.width()) + " vs " + std::to_string(frame_b.height()) + "x" +
                     std::to_string(frame_b.width()) + ")");
  }
  if (frame_a.height() < 16 || frame_a.width() < 16) {
    throw InputError("estimate_flow: frames must be at least 16x16");
  }
  for (const Image* f : {&frame_a, &frame_b})
    for (double x : f->pixels())
      if (!std::isfinite(x)) throw InputError("estimate_flow: non-finite pixel");

  const auto pyr_a = build_pyramid(to_intensity_scale(frame_a), params.eta, params.levels, params.min_dim);
  const auto pyr_b = build_pyramid(to_intensity_scale(frame_b), params.eta, params.levels, params.min_dim);
  const int n_levels = static_cast<int>(pyr_a.size());
  if (diagnostics) diagnostics->energies.assign(static_cast<std::size_t>(n_levels), {});

  FlowField w;
  for (int idx = 0; idx < n_levels; ++idx) {
    const int level = n_levels - 1 - idx;
    const LevelImages L(pyr_a[static_cast<std::size_t>(idx)], pyr_b[static_cast<std::size_t>(idx)]);
    const std::size_t H = L.i1.height(), Wd = L.i1.width();
    w = idx == 0 ? FlowField(H, Wd) : upsample_flow(w, H, Wd);

    Warped warped = warp_level(L, w);
    double energy = energy_from_warp(warped, w, params);
    std::vector<double> trace{energy};

    for (int outer = 0; outer < params.outer_iterations; ++outer) {
      Image du(H, Wd), dv(H, Wd);
      solve_increment(warped, w, params, du, dv);
      // Damped step: halve the increment while it raises the energy. If no
      // fraction of it descends, the linearisation has stalled and the level
      // ends at the current estimate.
      FlowField next;
      Warped next_warped;
      double next_energy = 0.0;
      double step = 1.0;
      bool accepted = false;
      for (int attempt = 0; attempt <= params.max_backtracks; ++attempt, step *= 0.5) {
        next = w;
        for (std::size_t k = 0; k < du.size(); ++k) {
          next.u[k] += step * du[k];
          next.v[k] += step * dv[k];
        }
        next_warped = warp_level(L, next);
        next_energy = energy_from_warp(next_warped, next, params);
        if (std::isfinite(next_energy) && next_energy <= energy * (1.0 + params.energy_tolerance)) {
          accepted = true;
          break;
        }
      }
      if (!accepted && (params.max_backtracks == 0 || !std::isfinite(next_energy))) {
        throw ConvergenceError("flow energy increased from " + std::to_string(energy) + " to " +
                                   std::to_string(next_energy) + " at outer iteration " + std::to_string(outer),
                               level);
      }
      if (!accepted) break;
      w = std::move(next);
      warped = std::move(next_warped);
      energy = next_energy;
      trace.push_back(energy);
    }
    if (diagnostics) diagnostics->energies[static_cast<std::size_t>(level)] = std::move(trace);
  }
  return w;
}

}  // namespace tsf
