#pragma once

#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "cinesplat/common.hpp"
#include "cinesplat/primitive.hpp"

namespace cinesplat {

// Per-primitive parameters live in one flat block of doubles so the optimizer
// and the serializer can treat them uniformly. Layout (G = rank_geom,
// C = rank_contrast, complex values interleaved re,im):
//   [0,2)                       mu
//   [2]                         theta
//   [3,5)                       log_s
//   [5,7)                       xi
//   [7, 7+2G)                   coeff_mu      (row-major [dim][k])
//   [7+2G, 7+3G)                coeff_theta
//   [7+3G, 7+5G)                coeff_log_s   (row-major [dim][k])
//   [7+5G, 7+7G)                coeff_xi      (row-major [dim][k])
//   [7+7G, 7+7G+2C)             u             (complex, C entries)
//   [7+7G+2C, 7+9G+2C)          coeff_w       (complex, G entries)
struct ParamLayout {
  int rank_geom = 0;
  int rank_contrast = 0;

  int stride() const { return 7 + 9 * rank_geom + 2 * rank_contrast; }
  int coeff_mu_off() const { return 7; }
  int coeff_theta_off() const { return 7 + 2 * rank_geom; }
  int coeff_log_s_off() const { return 7 + 3 * rank_geom; }
  int coeff_xi_off() const { return 7 + 5 * rank_geom; }
  int u_off() const { return 7 + 7 * rank_geom; }
  int coeff_w_off() const { return 7 + 7 * rank_geom + 2 * rank_contrast; }
};

template <typename T>
struct BasicGaborView {
  T* p = nullptr;
  ParamLayout lay;

  auto mu() const { return Eigen::Map<std::conditional_t<std::is_const_v<T>, const Vec2, Vec2>>(p + 0); }
  T& theta() const { return p[2]; }
  auto log_s() const { return Eigen::Map<std::conditional_t<std::is_const_v<T>, const Vec2, Vec2>>(p + 3); }
  auto xi() const { return Eigen::Map<std::conditional_t<std::is_const_v<T>, const Vec2, Vec2>>(p + 5); }

  T& coeff_mu(int dim, int k) const { return p[lay.coeff_mu_off() + dim * lay.rank_geom + k]; }
  T& coeff_theta(int k) const { return p[lay.coeff_theta_off() + k]; }
  T& coeff_log_s(int dim, int k) const { return p[lay.coeff_log_s_off() + dim * lay.rank_geom + k]; }
  T& coeff_xi(int dim, int k) const { return p[lay.coeff_xi_off() + dim * lay.rank_geom + k]; }

  Cx u(int k) const { return {p[lay.u_off() + 2 * k], p[lay.u_off() + 2 * k + 1]}; }
  Cx coeff_w(int k) const { return {p[lay.coeff_w_off() + 2 * k], p[lay.coeff_w_off() + 2 * k + 1]}; }
  void set_u(int k, Cx v) const
    requires(!std::is_const_v<T>)
  {
    p[lay.u_off() + 2 * k] = v.real();
    p[lay.u_off() + 2 * k + 1] = v.imag();
  }
  void set_coeff_w(int k, Cx v) const
    requires(!std::is_const_v<T>)
  {
    p[lay.coeff_w_off() + 2 * k] = v.real();
    p[lay.coeff_w_off() + 2 * k + 1] = v.imag();
  }
};

using GaborView = BasicGaborView<Real>;
using ConstGaborView = BasicGaborView<const Real>;

// Shared temporal bases: real geometry basis (T x R_g) and complex intensity
// basis (T x R_c), both row-major with one row per frame.
struct TemporalBases {
  int frames = 0;
  int rank_geom = 0;
  int rank_contrast = 0;
  std::vector<Real> v_geom;
  std::vector<Cx> v_contrast;

  const Real* geom_row(int t) const { return v_geom.data() + static_cast<std::size_t>(t) * rank_geom; }
  Real* geom_row(int t) { return v_geom.data() + static_cast<std::size_t>(t) * rank_geom; }
  const Cx* contrast_row(int t) const { return v_contrast.data() + static_cast<std::size_t>(t) * rank_contrast; }
  Cx* contrast_row(int t) { return v_contrast.data() + static_cast<std::size_t>(t) * rank_contrast; }
};

// First R_g non-constant DCT-II vectors over T frames, unit-normalized, with
// a sine fallback for columns that alias to zero when R_g >= T.
inline std::vector<Real> dct_geometry_basis(int frames, int rank) {
  std::vector<Real> v(static_cast<std::size_t>(frames) * rank, Real(0));
  for (int k = 0; k < rank; ++k) {
    Real norm2 = 0;
    for (int t = 0; t < frames; ++t) {
      const Real val = std::cos(kPi * (k + 1) * (t + Real(0.5)) / frames);
      v[static_cast<std::size_t>(t) * rank + k] = val;
      norm2 += val * val;
    }
    if (norm2 < Real(1e-12)) {
      norm2 = 0;
      for (int t = 0; t < frames; ++t) {
        const Real val = std::sin(kPi * (k + 1) * (t + Real(0.5)) / frames);
        v[static_cast<std::size_t>(t) * rank + k] = val;
        norm2 += val * val;
      }
    }
    const Real inv = norm2 > 0 ? Real(1) / std::sqrt(norm2) : Real(0);
    for (int t = 0; t < frames; ++t) v[static_cast<std::size_t>(t) * rank + k] *= inv;
  }
  return v;
}

// Intensity basis: constant first column (static intensity reachable at
// init), remaining columns small seeded complex noise.
inline std::vector<Cx> default_contrast_basis(int frames, int rank, std::uint64_t seed) {
  std::vector<Cx> v(static_cast<std::size_t>(frames) * rank, Cx(0, 0));
  Rng64 rng(seed);
  for (int t = 0; t < frames; ++t) {
    for (int k = 0; k < rank; ++k) {
      v[static_cast<std::size_t>(t) * rank + k] =
          (k == 0) ? Cx(1, 0) : Cx(Real(1e-2) * rng.normal(), Real(1e-2) * rng.normal());
    }
  }
  return v;
}

inline TemporalBases make_default_bases(int frames, int rank_geom, int rank_contrast, std::uint64_t seed) {
  TemporalBases b;
  b.frames = frames;
  b.rank_geom = rank_geom;
  b.rank_contrast = rank_contrast;
  b.v_geom = dct_geometry_basis(frames, rank_geom);
  b.v_contrast = default_contrast_basis(frames, rank_contrast, seed);
  return b;
}

// Which per-frame components were clamped; a clamped component passes no
// gradient back through the composition.
struct ClampFlags {
  bool log_s[2] = {false, false};
  bool xi[2] = {false, false};
};

struct PrimitiveSet {
  int count = 0;
  int grid_height = 0;
  int grid_width = 0;
  bool gaussian_mode = false;
  ParamLayout layout;
  std::vector<Real> params;
  TemporalBases bases;

  int frames() const { return bases.frames; }
  int stride() const { return layout.stride(); }

  GaborView prim(int n) {
    return {params.data() + static_cast<std::size_t>(n) * stride(), layout};
  }
  ConstGaborView prim(int n) const {
    return {params.data() + static_cast<std::size_t>(n) * stride(), layout};
  }

  // One pixel of the finest grid dimension; scales never collapse below.
  // Narrower atoms alias at the native grid: band-limited k-space data
  // cannot evidence them, and they break cross-resolution render agreement.
  Real log_s_floor() const {
    return std::log(Real(1) / std::max(grid_height, grid_width));
  }
  Real nyquist_x() const { return nyquist(grid_width); }
  Real nyquist_y() const { return nyquist(grid_height); }
};

namespace detail {
inline void check_frame(const TemporalBases& b, int t) {
  if (t < 0 || t >= b.frames) throw std::out_of_range("frame index out of range");
}
}  // namespace detail

// Static geometry plus the low-rank perturbation driven by the geometry
// basis row at frame t; log-scale floor and Nyquist clamps applied per frame.
inline FrameGeometry geometry_at(ConstGaborView g, const TemporalBases& bases, int t,
                                 Real log_s_floor, Real nyq_x, Real nyq_y,
                                 ClampFlags* flags = nullptr) {
  detail::check_frame(bases, t);
  const Real* v = bases.geom_row(t);
  const int rg = bases.rank_geom;

  FrameGeometry out;
  out.mu = g.mu();
  out.cov.theta = g.theta();
  out.cov.log_s = g.log_s();
  out.xi = g.xi();
  for (int k = 0; k < rg; ++k) {
    const Real vk = v[k];
    out.mu.x() += g.coeff_mu(0, k) * vk;
    out.mu.y() += g.coeff_mu(1, k) * vk;
    out.cov.theta += g.coeff_theta(k) * vk;
    out.cov.log_s.x() += g.coeff_log_s(0, k) * vk;
    out.cov.log_s.y() += g.coeff_log_s(1, k) * vk;
    out.xi.x() += g.coeff_xi(0, k) * vk;
    out.xi.y() += g.coeff_xi(1, k) * vk;
  }

  ClampFlags f;
  for (int d = 0; d < 2; ++d) {
    if (out.cov.log_s[d] < log_s_floor) {
      out.cov.log_s[d] = log_s_floor;
      f.log_s[d] = true;
    }
  }
  const Real nyq[2] = {nyq_x, nyq_y};
  for (int d = 0; d < 2; ++d) {
    if (out.xi[d] > nyq[d]) {
      out.xi[d] = nyq[d];
      f.xi[d] = true;
    } else if (out.xi[d] < -nyq[d]) {
      out.xi[d] = -nyq[d];
      f.xi[d] = true;
    }
  }
  if (flags) *flags = f;
  return out;
}

inline FrameGeometry geometry_at(const PrimitiveSet& ps, int n, int t, ClampFlags* flags = nullptr) {
  return geometry_at(ps.prim(n), ps.bases, t, ps.log_s_floor(), ps.nyquist_x(), ps.nyquist_y(), flags);
}

// w_{n,t} = u_n . v_{c,t} + coeff_w_n . v_{g,t}
inline Cx weight_at(ConstGaborView g, const TemporalBases& bases, int t) {
  detail::check_frame(bases, t);
  Cx w(0, 0);
  const Cx* vc = bases.contrast_row(t);
  for (int k = 0; k < bases.rank_contrast; ++k) w += g.u(k) * vc[k];
  const Real* vg = bases.geom_row(t);
  for (int k = 0; k < bases.rank_geom; ++k) w += g.coeff_w(k) * vg[k];
  return w;
}

inline Cx weight_at(const PrimitiveSet& ps, int n, int t) {
  return weight_at(ps.prim(n), ps.bases, t);
}

inline void assemble_frame_into(const PrimitiveSet& ps, int t,
                                std::span<FrameGeometry> out,
                                std::span<ClampFlags> flags = {}) {
  detail::check_frame(ps.bases, t);
  const Real floor = ps.log_s_floor();
  const Real nx = ps.nyquist_x(), ny = ps.nyquist_y();
  for (int n = 0; n < ps.count; ++n) {
    ClampFlags f;
    out[n] = geometry_at(ps.prim(n), ps.bases, t, floor, nx, ny, &f);
    out[n].weight = weight_at(ps.prim(n), ps.bases, t);
    if (!flags.empty()) flags[n] = f;
  }
}

inline std::vector<FrameGeometry> assemble_frame(const PrimitiveSet& ps, int t) {
  std::vector<FrameGeometry> out(static_cast<std::size_t>(ps.count));
  assemble_frame_into(ps, t, out);
  return out;
}

// Weight matrix W in C^{N x T}; rank is bounded by R_c + R_g.
inline Eigen::MatrixXcd weight_matrix(const PrimitiveSet& ps) {
  Eigen::MatrixXcd w(ps.count, ps.frames());
  for (int n = 0; n < ps.count; ++n)
    for (int t = 0; t < ps.frames(); ++t) w(n, t) = weight_at(ps, n, t);
  return w;
}

inline int numerical_rank(const Eigen::MatrixXcd& m, Real rel_tol = 1e-10) {
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(m);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0) return 0;
  const Real cutoff = rel_tol * sv(0);
  int rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) > cutoff) ++rank;
  return rank;
}

// Gradient of a scalar objective with respect to every learnable block;
// complex entries follow the params layout (d/dRe, d/dIm interleaved).
struct ParamGradients {
  std::vector<Real> prims;
  std::vector<Real> v_geom;
  std::vector<Cx> v_contrast;

  void resize_like(const PrimitiveSet& ps) {
    prims.assign(ps.params.size(), Real(0));
    v_geom.assign(ps.bases.v_geom.size(), Real(0));
    v_contrast.assign(ps.bases.v_contrast.size(), Cx(0, 0));
  }

  GaborView prim(const PrimitiveSet& ps, int n) {
    return {prims.data() + static_cast<std::size_t>(n) * ps.stride(), ps.layout};
  }
};

// Number of free scalars actually optimized. Gaussian mode freezes xi and
// coeff_xi, so those slots do not count.
inline std::int64_t learnable_count(const PrimitiveSet& ps) {
  const int g = ps.layout.rank_geom;
  const int per_prim = ps.stride() - (ps.gaussian_mode ? 2 + 2 * g : 0);
  return static_cast<std::int64_t>(ps.count) * per_prim +
         static_cast<std::int64_t>(ps.bases.v_geom.size()) +
         2 * static_cast<std::int64_t>(ps.bases.v_contrast.size());
}

}  // namespace cinesplat
