#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "cinesplat/common.hpp"
#include "cinesplat/grid.hpp"
#include "cinesplat/parallel.hpp"
#include "cinesplat/primitive.hpp"

namespace cinesplat {

struct RasterConfig {
  Real n_sigma = 3.0;  // culling radius in Mahalanobis units
  int tile = 32;
  int threads = 1;
  bool force_carrier = false;  // run the modulated path even at xi=0 (path-equality checks)
};

struct PixelRect {
  int x0 = 0, x1 = -1, y0 = 0, y1 = -1;
  bool empty() const { return x0 > x1 || y0 > y1; }
};

// Pixels whose centers fall inside the support box, clipped to the grid.
inline PixelRect pixel_rect(const Box2& box, int height, int width) {
  // Clamp before the int cast: a huge support box (large n_sigma) would
  // otherwise overflow the conversion and collapse to an empty rect.
  const auto lo_px = [](Real v, int dim) {
    const Real p = std::ceil((v + Real(0.5)) * dim - Real(0.5));
    return static_cast<int>(std::clamp(p, Real(0), Real(dim)));
  };
  const auto hi_px = [](Real v, int dim) {
    const Real p = std::floor((v + Real(0.5)) * dim - Real(0.5));
    return static_cast<int>(std::clamp(p, Real(-1), Real(dim - 1)));
  };
  PixelRect r;
  r.x0 = lo_px(box.lo.x(), width);
  r.x1 = hi_px(box.hi.x(), width);
  r.y0 = lo_px(box.lo.y(), height);
  r.y1 = hi_px(box.hi.y(), height);
  return r;
}

namespace detail {

// Quantities reused across rows of one primitive's raster loop.
struct PrimCoefs {
  Real a00, a01, a11;          // Sigma^{-1}
  Real mu_x, mu_y;
  Real xi_x, xi_y;
  Cx weight;
  Cx carrier_step;             // exp(i 2 pi xi_x * hx)
  Real env_curv;               // exp(-a00 * hx^2)
  bool modulated;              // false when xi == 0 exactly

  PrimCoefs(const FrameGeometry& g, Real hx) {
    const Mat2 a = g.cov.sigma_inv();
    a00 = a(0, 0);
    a01 = a(0, 1);
    a11 = a(1, 1);
    mu_x = g.mu.x();
    mu_y = g.mu.y();
    xi_x = g.xi.x();
    xi_y = g.xi.y();
    weight = g.weight;
    modulated = !(xi_x == Real(0) && xi_y == Real(0));
    carrier_step = std::polar(Real(1), kTwoPi * xi_x * hx);
    env_curv = std::exp(-a00 * hx * hx);
  }
};

}  // namespace detail

// Accumulates w_n * P_n over the given pixel span for one primitive. The
// envelope and carrier advance by per-pixel multiplies; transcendentals are
// evaluated once per row.
inline void splat_primitive(const FrameGeometry& g, const PixelRect& rect,
                            int height, int width, std::span<Cx> out,
                            bool force_carrier = false) {
  if (rect.empty()) return;
  const Real hx = Real(1) / width;
  const detail::PrimCoefs pc(g, hx);
  for (int y = rect.y0; y <= rect.y1; ++y) {
    const Real dy = pixel_coord(y, height) - pc.mu_y;
    const Real dx0 = pixel_coord(rect.x0, width) - pc.mu_x;
    Real env = std::exp(Real(-0.5) * (pc.a00 * dx0 * dx0 + 2 * pc.a01 * dx0 * dy + pc.a11 * dy * dy));
    Real step = std::exp(Real(-0.5) * (pc.a00 * (2 * dx0 * hx + hx * hx) + 2 * pc.a01 * hx * dy));
    Cx* row = out.data() + static_cast<std::size_t>(y) * width;
    if (pc.modulated || force_carrier) {
      Cx wc = pc.weight * std::polar(Real(1), kTwoPi * (pc.xi_x * dx0 + pc.xi_y * dy));
      for (int x = rect.x0; x <= rect.x1; ++x) {
        row[x] += wc * env;
        env *= step;
        step *= pc.env_curv;
        wc *= pc.carrier_step;
      }
    } else {
      const Cx w = pc.weight;
      for (int x = rect.x0; x <= rect.x1; ++x) {
        row[x] += w * env;
        env *= step;
        step *= pc.env_curv;
      }
    }
  }
}

inline void rasterize_into(std::span<const FrameGeometry> prims, int height, int width,
                           std::span<Cx> out, const RasterConfig& cfg = {}) {
  if (height < 4 || width < 4) throw std::invalid_argument("grid dims must be >= 4");
  if (out.size() != static_cast<std::size_t>(height) * width)
    throw std::invalid_argument("output size mismatch");
  std::fill(out.begin(), out.end(), Cx(0, 0));

  const int n = static_cast<int>(prims.size());
  std::vector<PixelRect> rects(prims.size());
  for (int i = 0; i < n; ++i) rects[i] = pixel_rect(support_box(prims[i], cfg.n_sigma), height, width);

  const int tiles_x = (width + cfg.tile - 1) / cfg.tile;
  const int tiles_y = (height + cfg.tile - 1) / cfg.tile;
  const int n_tiles = tiles_x * tiles_y;

  // Primitive indices per tile, in ascending order, so accumulation order is
  // fixed regardless of the thread count.
  std::vector<std::vector<int>> bins(static_cast<std::size_t>(n_tiles));
  for (int i = 0; i < n; ++i) {
    const PixelRect& r = rects[i];
    if (r.empty()) continue;
    for (int ty = r.y0 / cfg.tile; ty <= r.y1 / cfg.tile; ++ty)
      for (int tx = r.x0 / cfg.tile; tx <= r.x1 / cfg.tile; ++tx)
        bins[static_cast<std::size_t>(ty) * tiles_x + tx].push_back(i);
  }

  parallel_for(0, n_tiles, cfg.threads, [&](std::int64_t tile) {
    const int ty = static_cast<int>(tile) / tiles_x;
    const int tx = static_cast<int>(tile) % tiles_x;
    PixelRect bounds;
    bounds.x0 = tx * cfg.tile;
    bounds.x1 = std::min(width - 1, bounds.x0 + cfg.tile - 1);
    bounds.y0 = ty * cfg.tile;
    bounds.y1 = std::min(height - 1, bounds.y0 + cfg.tile - 1);
    for (int i : bins[static_cast<std::size_t>(tile)]) {
      PixelRect r = rects[i];
      r.x0 = std::max(r.x0, bounds.x0);
      r.x1 = std::min(r.x1, bounds.x1);
      r.y0 = std::max(r.y0, bounds.y0);
      r.y1 = std::min(r.y1, bounds.y1);
      splat_primitive(prims[i], r, height, width, out, cfg.force_carrier);
    }
  });
}

inline ComplexGrid rasterize(std::span<const FrameGeometry> prims, int height, int width,
                             const RasterConfig& cfg = {}) {
  ComplexGrid grid(height, width);
  rasterize_into(prims, height, width, grid.data, cfg);
  return grid;
}

// Unculled direct evaluation; the oracle path for Fourier-pair and culling
// bound checks.
inline ComplexGrid rasterize_reference(std::span<const FrameGeometry> prims, int height, int width) {
  ComplexGrid grid(height, width);
  for (const FrameGeometry& g : prims) {
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        const Vec2 r(pixel_coord(x, width), pixel_coord(y, height));
        grid.at(y, x) += g.weight * eval_primitive(g, r);
      }
    }
  }
  return grid;
}

// Derivatives of a real objective with per-pixel sensitivity a_p (adjoint
// image, Wirtinger layout: gradient accumulates Re[a_p conj(dx_p/dparam)]).
// d_weight packs d/dRe(w) + i d/dIm(w).
struct FrameGradientEntry {
  Vec2 d_mu = Vec2::Zero();
  Real d_theta = 0;
  Vec2 d_log_s = Vec2::Zero();
  Vec2 d_xi = Vec2::Zero();
  Cx d_weight = Cx(0, 0);
};

using FrameGradients = std::vector<FrameGradientEntry>;

// Closed-form parameter derivatives of the atom, accumulated over the same
// 3-sigma support used by rasterize. Per pixel, with d = r - mu, A = Sigma^{-1},
// t_k = (R^T d)_k / s_k:
//   dP/dmu    = P (A d - i 2 pi xi)
//   dP/dxi    = P i 2 pi d
//   dP/dtheta = P t1 t2 (s1/s2 - s2/s1)
//   dP/dlog s_k = P t_k^2
inline FrameGradients backward(std::span<const FrameGeometry> prims, std::span<const Cx> adjoint,
                               int height, int width, const RasterConfig& cfg = {}) {
  if (height < 4 || width < 4) throw std::invalid_argument("grid dims must be >= 4");
  if (adjoint.size() != static_cast<std::size_t>(height) * width)
    throw std::invalid_argument("adjoint size mismatch");

  FrameGradients grads(prims.size());
  const Real hx = Real(1) / width;

  parallel_for(0, static_cast<std::int64_t>(prims.size()), cfg.threads, [&](std::int64_t i) {
    const FrameGeometry& g = prims[i];
    const PixelRect rect = pixel_rect(support_box(g, cfg.n_sigma), height, width);
    if (rect.empty()) return;

    const detail::PrimCoefs pc(g, hx);
    const Real ct = std::cos(g.cov.theta), st = std::sin(g.cov.theta);
    const Vec2 s = g.cov.scales();
    const Real inv_s1 = Real(1) / s.x(), inv_s2 = Real(1) / s.y();
    const Real k_theta = s.x() * inv_s2 - s.y() * inv_s1;
    const Real b_x = kTwoPi * pc.xi_x, b_y = kTwoPi * pc.xi_y;
    const Cx wbar = std::conj(g.weight);

    FrameGradientEntry acc;
    for (int y = rect.y0; y <= rect.y1; ++y) {
      const Real dy = pixel_coord(y, height) - pc.mu_y;
      Real dx = pixel_coord(rect.x0, width) - pc.mu_x;
      Real env = std::exp(Real(-0.5) * (pc.a00 * dx * dx + 2 * pc.a01 * dx * dy + pc.a11 * dy * dy));
      Real step = std::exp(Real(-0.5) * (pc.a00 * (2 * dx * hx + hx * hx) + 2 * pc.a01 * hx * dy));
      Cx carrier = std::polar(Real(1), kTwoPi * (pc.xi_x * dx + pc.xi_y * dy));
      Real ad_x = pc.a00 * dx + pc.a01 * dy;
      Real ad_y = pc.a01 * dx + pc.a11 * dy;
      Real t1 = (ct * dx + st * dy) * inv_s1;
      Real t2 = (-st * dx + ct * dy) * inv_s2;
      const Cx* arow = adjoint.data() + static_cast<std::size_t>(y) * width;

      for (int x = rect.x0; x <= rect.x1; ++x) {
        const Cx p = carrier * env;
        const Cx zp = arow[x] * std::conj(p);  // feeds d_weight
        const Cx z = zp * wbar;
        const Real zr = z.real(), zi = z.imag();
        acc.d_weight += zp;
        acc.d_mu.x() += zr * ad_x - zi * b_x;
        acc.d_mu.y() += zr * ad_y - zi * b_y;
        acc.d_xi.x() += kTwoPi * dx * zi;
        acc.d_xi.y() += kTwoPi * dy * zi;
        acc.d_theta += zr * t1 * t2 * k_theta;
        acc.d_log_s.x() += zr * t1 * t1;
        acc.d_log_s.y() += zr * t2 * t2;

        env *= step;
        step *= pc.env_curv;
        carrier *= pc.carrier_step;
        dx += hx;
        ad_x += pc.a00 * hx;
        ad_y += pc.a01 * hx;
        t1 += ct * hx * inv_s1;
        t2 += -st * hx * inv_s2;
      }
    }
    grads[i] = acc;
  });
  return grads;
}

inline FrameGradients backward(std::span<const FrameGeometry> prims, const ComplexGrid& adjoint,
                               const RasterConfig& cfg = {}) {
  return backward(prims, adjoint.data, adjoint.height, adjoint.width, cfg);
}

}  // namespace cinesplat
