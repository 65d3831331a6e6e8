#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "cinesplat/forward_model.hpp"
#include "cinesplat/metrics.hpp"
#include "cinesplat/rasterize.hpp"
#include "cinesplat/temporal.hpp"

namespace cinesplat {

struct LearningRates {
  Real mu = 6e-4;
  Real theta = 3e-3;
  Real log_s = 6e-3;
  Real xi = 6e-2;        // cycles/FOV move fast relative to unit-box positions
  Real coeffs = 1.5e-2;  // temporal coefficients, u, coeff_w
  Real bases = 3e-3;
};

struct FitConfig {
  int n_init = 500;
  int n_max = 800;
  int rank_geom = 6;
  int rank_contrast = 4;
  int iters = 2000;
  Real lambda_s = 1e-5;
  Real lambda_t = 1e-2;
  LearningRates lr;
  Real lr_final_frac = 0.01;  // cosine anneal floor as a fraction of initial
  Real beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
  int density_interval = 300;
  Real density_start = 0.10;  // active window as fractions of total iters
  Real density_end = 0.60;
  Real prune_frac = 0.05;        // of the median mean-|w|
  Real split_percentile = 0.40;  // sets the split threshold at the first event
  Real eps_abs = 1e-8;           // l1 smoothing scale
  bool gaussian_mode = false;
  std::uint64_t seed = 0;
  int threads = 1;
  Real n_sigma = 3.0;
  int tile = 32;

  void validate() const {
    if (n_init < 1 || n_init > n_max) throw std::invalid_argument("need 1 <= n_init <= n_max");
    if (rank_geom < 1 || rank_contrast < 1) throw std::invalid_argument("temporal ranks must be >= 1");
    if (iters < 0) throw std::invalid_argument("iters must be >= 0");
    if (lambda_s < 0 || lambda_t < 0) throw std::invalid_argument("lambdas must be >= 0");
    if (!(density_start > 0 && density_start < density_end && density_end < 1))
      throw std::invalid_argument("density window must satisfy 0 < start < end < 1");
    if (threads < 1) throw std::invalid_argument("threads must be >= 1");
  }
};

struct LossParts {
  Real data = 0, sparsity = 0, tv = 0;
  Real total() const { return data + sparsity + tv; }
};

struct LossEval {
  LossParts parts;
  ParamGradients grads;
};

struct FitReport {
  std::vector<Real> trace_data, trace_sparsity, trace_tv;
  std::vector<int> trace_count;
  Real wall_seconds = 0;
  bool has_metrics = false;
  Real final_psnr = 0, final_ssim = 0;
  Real final_data_loss = 0;
};

// Uniform lattice start: mu on a ceil(sqrt(n))^2 grid, isotropic scales equal
// to the lattice spacing, theta = 0, xi ~ N(0, 0.5^2) per component (zero in
// gaussian mode), temporal coefficients zero, u = e_1 so every weight starts
// at 1 and the model starts static.
inline PrimitiveSet init_primitives(const FitConfig& cfg, int height, int width, int frames) {
  cfg.validate();
  PrimitiveSet ps;
  ps.count = cfg.n_init;
  ps.grid_height = height;
  ps.grid_width = width;
  ps.gaussian_mode = cfg.gaussian_mode;
  ps.layout = {cfg.rank_geom, cfg.rank_contrast};
  ps.params.assign(static_cast<std::size_t>(ps.count) * ps.stride(), Real(0));
  ps.bases = make_default_bases(frames, cfg.rank_geom, cfg.rank_contrast,
                                Rng64::derive(cfg.seed, 0));

  const int lattice = static_cast<int>(std::ceil(std::sqrt(Real(cfg.n_init))));
  const Real spacing = Real(1) / Real(lattice);
  Rng64 xi_rng(Rng64::derive(cfg.seed, 1));
  for (int n = 0; n < ps.count; ++n) {
    auto g = ps.prim(n);
    const int row = n / lattice, col = n % lattice;
    g.mu() = Vec2((col + Real(0.5)) * spacing - Real(0.5), (row + Real(0.5)) * spacing - Real(0.5));
    g.log_s() = Vec2::Constant(std::log(spacing));
    if (!cfg.gaussian_mode) g.xi() = Vec2(Real(0.5) * xi_rng.normal(), Real(0.5) * xi_rng.normal());
    g.set_u(0, Cx(1, 0));
  }
  return ps;
}

// Composite objective: data fidelity through the coil/sampling operator,
// smoothed l1 sparsity on per-frame weights, smoothed temporal total
// variation; returns analytic gradients for every learnable block.
inline LossEval total_loss(const PrimitiveSet& ps, const KSpaceDataset& ds, const FitConfig& cfg) {
  if (ps.grid_height != ds.height || ps.grid_width != ds.width || ps.frames() != ds.frames)
    throw std::invalid_argument("model/dataset dims mismatch");
  const int frames = ps.frames();
  const int height = ds.height, width = ds.width;
  const std::size_t px = static_cast<std::size_t>(height) * width;
  const RasterConfig rc{cfg.n_sigma, cfg.tile, 1};

  CineImage x(height, width, frames);
  std::vector<std::vector<FrameGeometry>> geoms(static_cast<std::size_t>(frames));
  std::vector<std::vector<ClampFlags>> flags(static_cast<std::size_t>(frames));
  parallel_blocks(0, frames, cfg.threads, [&](std::int64_t t0, std::int64_t t1) {
    for (std::int64_t t = t0; t < t1; ++t) {
      auto& fg = geoms[static_cast<std::size_t>(t)];
      auto& ff = flags[static_cast<std::size_t>(t)];
      fg.resize(static_cast<std::size_t>(ps.count));
      ff.resize(static_cast<std::size_t>(ps.count));
      assemble_frame_into(ps, static_cast<int>(t), fg, ff);
      rasterize_into(fg, height, width, x.frame(static_cast<int>(t)), rc);
    }
  });

  LossParts parts;
  auto [data_loss, a] = data_loss_and_adjoint(x, ds, cfg.threads);
  parts.data = data_loss;

  // Temporal TV on pixels; gradient lands in the same sensitivity stack.
  for (int t = 0; t + 1 < frames; ++t) {
    auto x0 = x.frame(t);
    auto x1 = x.frame(t + 1);
    auto a0 = a.frame(t);
    auto a1 = a.frame(t + 1);
    for (std::size_t i = 0; i < px; ++i) {
      const Cx delta = x1[i] - x0[i];
      const Real f = smooth_abs(delta, cfg.eps_abs);
      parts.tv += cfg.lambda_t * f;
      const Cx g = cfg.lambda_t * delta / f;
      a1[i] += g;
      a0[i] -= g;
    }
  }

  // Per-frame parameter gradients, then the sparsity term on weights.
  std::vector<FrameGradients> fgrads(static_cast<std::size_t>(frames));
  std::vector<Real> frame_sparsity(static_cast<std::size_t>(frames), Real(0));
  parallel_blocks(0, frames, cfg.threads, [&](std::int64_t t0, std::int64_t t1) {
    for (std::int64_t ti = t0; ti < t1; ++ti) {
      const int t = static_cast<int>(ti);
      auto& fg = fgrads[static_cast<std::size_t>(ti)];
      fg = backward(geoms[static_cast<std::size_t>(ti)], a.frame(t), height, width, rc);
      Real sp = 0;
      for (int n = 0; n < ps.count; ++n) {
        const Cx w = geoms[static_cast<std::size_t>(ti)][static_cast<std::size_t>(n)].weight;
        const Real f = smooth_abs(w, cfg.eps_abs);
        sp += cfg.lambda_s * f;
        fg[static_cast<std::size_t>(n)].d_weight += cfg.lambda_s * w / f;
        // Clamped per-frame components are constants; cut their gradient here
        // so nothing flows to the static/coefficient/basis blocks.
        const ClampFlags& cf = flags[static_cast<std::size_t>(ti)][static_cast<std::size_t>(n)];
        for (int d = 0; d < 2; ++d) {
          if (cf.log_s[d]) fg[static_cast<std::size_t>(n)].d_log_s[d] = 0;
          if (cf.xi[d]) fg[static_cast<std::size_t>(n)].d_xi[d] = 0;
        }
      }
      frame_sparsity[static_cast<std::size_t>(ti)] = sp;
    }
  });
  for (Real v : frame_sparsity) parts.sparsity += v;

  LossEval out;
  out.parts = parts;
  out.grads.resize_like(ps);

  // Chain rule, primitive-major: static blocks, temporal coefficients, u and
  // coeff_w. Frames accumulate in index order for any thread count.
  const int rg = ps.layout.rank_geom, rc_rank = ps.layout.rank_contrast;
  parallel_for(0, ps.count, cfg.threads, [&](std::int64_t n) {
    auto g = out.grads.prim(ps, static_cast<int>(n));
    for (int t = 0; t < frames; ++t) {
      const FrameGradientEntry& e = fgrads[static_cast<std::size_t>(t)][static_cast<std::size_t>(n)];
      g.mu() += e.d_mu;
      g.theta() += e.d_theta;
      g.log_s() += e.d_log_s;
      g.xi() += e.d_xi;
      const Real* vg = ps.bases.geom_row(t);
      for (int k = 0; k < rg; ++k) {
        g.coeff_mu(0, k) += e.d_mu.x() * vg[k];
        g.coeff_mu(1, k) += e.d_mu.y() * vg[k];
        g.coeff_theta(k) += e.d_theta * vg[k];
        g.coeff_log_s(0, k) += e.d_log_s.x() * vg[k];
        g.coeff_log_s(1, k) += e.d_log_s.y() * vg[k];
        g.coeff_xi(0, k) += e.d_xi.x() * vg[k];
        g.coeff_xi(1, k) += e.d_xi.y() * vg[k];
        g.set_coeff_w(k, g.coeff_w(k) + e.d_weight * vg[k]);
      }
      const Cx* vc = ps.bases.contrast_row(t);
      for (int k = 0; k < rc_rank; ++k)
        g.set_u(k, g.u(k) + std::conj(vc[k]) * e.d_weight);
    }
  });

  // Basis gradients, frame-major: primitives accumulate in index order.
  parallel_for(0, frames, cfg.threads, [&](std::int64_t ti) {
    const int t = static_cast<int>(ti);
    Real* gv = out.grads.v_geom.data() + static_cast<std::size_t>(t) * rg;
    Cx* gc = out.grads.v_contrast.data() + static_cast<std::size_t>(t) * rc_rank;
    for (int n = 0; n < ps.count; ++n) {
      const FrameGradientEntry& e = fgrads[static_cast<std::size_t>(ti)][static_cast<std::size_t>(n)];
      const auto view = ps.prim(n);
      for (int k = 0; k < rg; ++k) {
        gv[k] += e.d_mu.x() * view.coeff_mu(0, k) + e.d_mu.y() * view.coeff_mu(1, k) +
                 e.d_theta * view.coeff_theta(k) +
                 e.d_log_s.x() * view.coeff_log_s(0, k) + e.d_log_s.y() * view.coeff_log_s(1, k) +
                 e.d_xi.x() * view.coeff_xi(0, k) + e.d_xi.y() * view.coeff_xi(1, k) +
                 (e.d_weight * std::conj(view.coeff_w(k))).real();
      }
      for (int k = 0; k < rc_rank; ++k) gc[k] += std::conj(view.u(k)) * e.d_weight;
    }
  });

  return out;
}

struct AdamState {
  std::vector<Real> m_prims, v_prims;
  std::vector<Real> m_geom, v_geom;
  std::vector<Real> m_con, v_con;  // re/im pairs for the contrast basis
  std::int64_t step = 0;

  void resize_like(const PrimitiveSet& ps) {
    m_prims.assign(ps.params.size(), 0);
    v_prims.assign(ps.params.size(), 0);
    m_geom.assign(ps.bases.v_geom.size(), 0);
    v_geom.assign(ps.bases.v_geom.size(), 0);
    m_con.assign(2 * ps.bases.v_contrast.size(), 0);
    v_con.assign(2 * ps.bases.v_contrast.size(), 0);
  }
};

namespace detail {

enum : std::uint8_t { kGroupMu = 0, kGroupTheta, kGroupLogS, kGroupXi, kGroupCoeffs };

inline std::vector<std::uint8_t> offset_groups(const ParamLayout& lay) {
  std::vector<std::uint8_t> g(static_cast<std::size_t>(lay.stride()), kGroupCoeffs);
  g[0] = g[1] = kGroupMu;
  g[2] = kGroupTheta;
  g[3] = g[4] = kGroupLogS;
  g[5] = g[6] = kGroupXi;
  return g;
}

// Offsets that never update in gaussian mode: static xi and its coefficients.
inline std::vector<std::uint8_t> frozen_offsets(const ParamLayout& lay, bool gaussian_mode) {
  std::vector<std::uint8_t> f(static_cast<std::size_t>(lay.stride()), 0);
  if (!gaussian_mode) return f;
  f[5] = f[6] = 1;
  for (int i = lay.coeff_xi_off(); i < lay.coeff_xi_off() + 2 * lay.rank_geom; ++i) f[i] = 1;
  return f;
}

inline void adam_update(Real& p, Real& m, Real& v, Real g, Real lr, Real beta1, Real beta2,
                        Real eps, Real bc1, Real bc2) {
  m = beta1 * m + (1 - beta1) * g;
  v = beta2 * v + (1 - beta2) * g * g;
  p -= lr * (m / bc1) / (std::sqrt(v / bc2) + eps);
}

}  // namespace detail

// Cosine-annealed factor for step `iter` of `iters`, decaying to
// lr_final_frac of the initial rate by the final step.
inline Real anneal_factor(int iter, int iters, Real final_frac) {
  const int denom = std::max(1, iters - 1);
  const Real cosine = Real(0.5) * (Real(1) + std::cos(kPi * Real(iter) / Real(denom)));
  return final_frac + (Real(1) - final_frac) * cosine;
}

inline void adam_step(PrimitiveSet& ps, const ParamGradients& grads, AdamState& adam,
                      const FitConfig& cfg, int iter) {
  const Real scale = anneal_factor(iter, cfg.iters, cfg.lr_final_frac);
  const Real group_lr[5] = {cfg.lr.mu * scale, cfg.lr.theta * scale, cfg.lr.log_s * scale,
                            cfg.lr.xi * scale, cfg.lr.coeffs * scale};
  const auto groups = detail::offset_groups(ps.layout);
  const auto frozen = detail::frozen_offsets(ps.layout, ps.gaussian_mode);

  adam.step += 1;
  const Real bc1 = Real(1) - std::pow(cfg.beta1, Real(adam.step));
  const Real bc2 = Real(1) - std::pow(cfg.beta2, Real(adam.step));

  const int stride = ps.stride();
  for (std::size_t i = 0; i < ps.params.size(); ++i) {
    const int off = static_cast<int>(i % static_cast<std::size_t>(stride));
    if (frozen[off]) continue;
    detail::adam_update(ps.params[i], adam.m_prims[i], adam.v_prims[i], grads.prims[i],
                        group_lr[groups[off]], cfg.beta1, cfg.beta2, cfg.adam_eps, bc1, bc2);
  }
  const Real lr_bases = cfg.lr.bases * scale;
  for (std::size_t i = 0; i < ps.bases.v_geom.size(); ++i)
    detail::adam_update(ps.bases.v_geom[i], adam.m_geom[i], adam.v_geom[i], grads.v_geom[i],
                        lr_bases, cfg.beta1, cfg.beta2, cfg.adam_eps, bc1, bc2);
  for (std::size_t i = 0; i < ps.bases.v_contrast.size(); ++i) {
    Cx& z = ps.bases.v_contrast[i];
    Real re = z.real(), im = z.imag();
    detail::adam_update(re, adam.m_con[2 * i], adam.v_con[2 * i], grads.v_contrast[i].real(),
                        lr_bases, cfg.beta1, cfg.beta2, cfg.adam_eps, bc1, bc2);
    detail::adam_update(im, adam.m_con[2 * i + 1], adam.v_con[2 * i + 1],
                        grads.v_contrast[i].imag(), lr_bases, cfg.beta1, cfg.beta2, cfg.adam_eps,
                        bc1, bc2);
    z = Cx(re, im);
  }

  // Post-step box constraints on the static blocks; the per-frame effective
  // values are clamped again at assembly.
  const Real mu_hi = std::nextafter(Real(0.5), Real(0));
  const Real floor = ps.log_s_floor();
  const Real nyq[2] = {ps.nyquist_x(), ps.nyquist_y()};
  for (int n = 0; n < ps.count; ++n) {
    auto g = ps.prim(n);
    for (int d = 0; d < 2; ++d) {
      g.mu()[d] = std::clamp(g.mu()[d], Real(-0.5), mu_hi);
      g.log_s()[d] = std::max(g.log_s()[d], floor);
      g.xi()[d] = std::clamp(g.xi()[d], -nyq[d], nyq[d]);
    }
  }
}

struct DensityStats {
  std::vector<Real> accum_mu_grad;  // running sum of ||d l / d mu|| per primitive
  Real split_threshold = -1;        // fixed at the first control event
};

// Prune low mean-|w| primitives (never below n_init), then split the heaviest
// accumulated-gradient survivors into two offset children (never above n_max).
// Adam moment blocks follow their primitives; children start with fresh moments.
inline void density_control(PrimitiveSet& ps, AdamState& adam, DensityStats& stats,
                            const std::vector<Real>& mean_w, const FitConfig& cfg) {
  const int n = ps.count;
  const int stride = ps.stride();

  std::vector<Real> sorted_w(mean_w);
  std::nth_element(sorted_w.begin(), sorted_w.begin() + n / 2, sorted_w.end());
  const Real prune_thr = cfg.prune_frac * sorted_w[static_cast<std::size_t>(n / 2)];

  std::vector<int> prune_order;
  for (int i = 0; i < n; ++i)
    if (mean_w[static_cast<std::size_t>(i)] < prune_thr) prune_order.push_back(i);
  std::stable_sort(prune_order.begin(), prune_order.end(), [&](int a, int b) {
    return mean_w[static_cast<std::size_t>(a)] < mean_w[static_cast<std::size_t>(b)];
  });
  const int max_prunable = n - cfg.n_init;
  if (static_cast<int>(prune_order.size()) > max_prunable)
    prune_order.resize(static_cast<std::size_t>(std::max(0, max_prunable)));
  std::vector<std::uint8_t> pruned(static_cast<std::size_t>(n), 0);
  for (int i : prune_order) pruned[static_cast<std::size_t>(i)] = 1;
  const int survivors = n - static_cast<int>(prune_order.size());

  if (stats.split_threshold < 0) {
    std::vector<Real> acc;
    for (int i = 0; i < n; ++i)
      if (!pruned[static_cast<std::size_t>(i)]) acc.push_back(stats.accum_mu_grad[static_cast<std::size_t>(i)]);
    std::sort(acc.begin(), acc.end());
    const std::size_t idx = static_cast<std::size_t>(
        std::floor(cfg.split_percentile * Real(acc.size() - 1)));
    stats.split_threshold = acc[idx];
  }

  std::vector<int> split_order;
  for (int i = 0; i < n; ++i)
    if (!pruned[static_cast<std::size_t>(i)] &&
        stats.accum_mu_grad[static_cast<std::size_t>(i)] > stats.split_threshold)
      split_order.push_back(i);
  std::stable_sort(split_order.begin(), split_order.end(), [&](int a, int b) {
    return stats.accum_mu_grad[static_cast<std::size_t>(a)] > stats.accum_mu_grad[static_cast<std::size_t>(b)];
  });
  const int budget = cfg.n_max - survivors;
  if (static_cast<int>(split_order.size()) > budget)
    split_order.resize(static_cast<std::size_t>(std::max(0, budget)));
  std::vector<std::uint8_t> split(static_cast<std::size_t>(n), 0);
  for (int i : split_order) split[static_cast<std::size_t>(i)] = 1;

  std::vector<Real> new_params, new_m, new_v;
  new_params.reserve(static_cast<std::size_t>(survivors + static_cast<int>(split_order.size())) * stride);
  const Real mu_hi = std::nextafter(Real(0.5), Real(0));

  auto copy_block = [&](int i, bool fresh_moments) {
    const std::size_t base = static_cast<std::size_t>(i) * stride;
    new_params.insert(new_params.end(), ps.params.begin() + base, ps.params.begin() + base + stride);
    if (fresh_moments) {
      new_m.insert(new_m.end(), static_cast<std::size_t>(stride), Real(0));
      new_v.insert(new_v.end(), static_cast<std::size_t>(stride), Real(0));
    } else {
      new_m.insert(new_m.end(), adam.m_prims.begin() + base, adam.m_prims.begin() + base + stride);
      new_v.insert(new_v.end(), adam.v_prims.begin() + base, adam.v_prims.begin() + base + stride);
    }
  };

  for (int i = 0; i < n; ++i) {
    if (pruned[static_cast<std::size_t>(i)]) continue;
    if (!split[static_cast<std::size_t>(i)]) {
      copy_block(i, false);
      continue;
    }
    const auto parent = ps.prim(i);
    const Vec2 s = Vec2(parent.log_s()).array().exp().matrix();
    const Real theta = parent.theta();
    const Vec2 axis = s.x() >= s.y() ? Vec2(std::cos(theta), std::sin(theta))
                                     : Vec2(-std::sin(theta), std::cos(theta));
    const Vec2 offset = Real(0.5) * s.maxCoeff() * axis;

    for (int child = 0; child < 2; ++child) {
      const std::size_t at = new_params.size();
      copy_block(i, true);
      GaborView cv{new_params.data() + at, ps.layout};
      const Vec2 mu = Vec2(parent.mu()) + (child == 0 ? offset : Vec2(-offset));
      cv.mu() = mu.cwiseMax(Real(-0.5)).cwiseMin(mu_hi);
      cv.log_s() = Vec2(parent.log_s()) - Vec2::Constant(std::log(Real(1.6)));
      for (int k = 0; k < ps.layout.rank_contrast; ++k) cv.set_u(k, parent.u(k) * Real(0.5));
      for (int k = 0; k < ps.layout.rank_geom; ++k) cv.set_coeff_w(k, parent.coeff_w(k) * Real(0.5));
    }
  }

  ps.count = static_cast<int>(new_params.size() / static_cast<std::size_t>(stride));
  ps.params = std::move(new_params);
  adam.m_prims = std::move(new_m);
  adam.v_prims = std::move(new_v);
  stats.accum_mu_grad.assign(static_cast<std::size_t>(ps.count), 0);
}

inline std::pair<PrimitiveSet, FitReport> fit(const KSpaceDataset& ds, const FitConfig& cfg) {
  cfg.validate();
  ds.check_consistent();
  const auto t_start = std::chrono::steady_clock::now();

  PrimitiveSet ps = init_primitives(cfg, ds.height, ds.width, ds.frames);
  AdamState adam;
  adam.resize_like(ps);
  DensityStats stats;
  stats.accum_mu_grad.assign(static_cast<std::size_t>(ps.count), 0);

  FitReport report;
  report.trace_data.reserve(static_cast<std::size_t>(cfg.iters));

  const int window_lo = static_cast<int>(std::ceil(cfg.density_start * cfg.iters));
  const int window_hi = static_cast<int>(std::floor(cfg.density_end * cfg.iters));

  for (int iter = 0; iter < cfg.iters; ++iter) {
    LossEval eval = total_loss(ps, ds, cfg);
    const Real total = eval.parts.total();
    if (!std::isfinite(total))
      throw NumericalError("non-finite loss at iteration " + std::to_string(iter) +
                           " (data=" + std::to_string(eval.parts.data) + ")");
    report.trace_data.push_back(eval.parts.data);
    report.trace_sparsity.push_back(eval.parts.sparsity);
    report.trace_tv.push_back(eval.parts.tv);
    report.final_data_loss = eval.parts.data;

    for (int n = 0; n < ps.count; ++n)
      stats.accum_mu_grad[static_cast<std::size_t>(n)] +=
          Vec2(eval.grads.prim(ps, n).mu()).norm();

    adam_step(ps, eval.grads, adam, cfg, iter);

    const int done = iter + 1;
    if (done % cfg.density_interval == 0 && done >= window_lo && done <= window_hi &&
        done < cfg.iters) {
      std::vector<Real> mean_w(static_cast<std::size_t>(ps.count), 0);
      for (int n = 0; n < ps.count; ++n) {
        Real acc = 0;
        for (int t = 0; t < ps.frames(); ++t) acc += std::abs(weight_at(ps, n, t));
        mean_w[static_cast<std::size_t>(n)] = acc / Real(ps.frames());
      }
      density_control(ps, adam, stats, mean_w, cfg);
    }
    report.trace_count.push_back(ps.count);
  }

  report.wall_seconds =
      std::chrono::duration<Real>(std::chrono::steady_clock::now() - t_start).count();

  if (ds.has_reference()) {
    CineImage recon(ds.height, ds.width, ds.frames);
    const RasterConfig rc{cfg.n_sigma, cfg.tile, 1};
    parallel_blocks(0, ds.frames, cfg.threads, [&](std::int64_t t0, std::int64_t t1) {
      for (std::int64_t t = t0; t < t1; ++t) {
        const auto frame = assemble_frame(ps, static_cast<int>(t));
        rasterize_into(frame, ds.height, ds.width, recon.frame(static_cast<int>(t)), rc);
      }
    });
    report.has_metrics = true;
    report.final_psnr = psnr(recon, ds.reference).mean;
    report.final_ssim = ssim(recon, ds.reference).mean;
  }
  return {std::move(ps), std::move(report)};
}

}  // namespace cinesplat
