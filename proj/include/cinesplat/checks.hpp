#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cinesplat/forward_model.hpp"
#include "cinesplat/optimizer.hpp"
#include "cinesplat/phantom.hpp"

namespace cinesplat {

struct GradcheckConfig {
  int height = 8, width = 8, frames = 3;
  int n_coils = 2;
  int n_prims = 10;
  int rank_geom = 3, rank_contrast = 2;
  Real lambda_s = 0, lambda_t = 0;
  Real step = 1e-6;
  int samples_per_block = 3;
  std::uint64_t seed = 0;
  bool mutate = false;  // negative control: flip one analytic component's sign
};

struct GradcheckResult {
  Real max_rel_err = 0;
  std::vector<std::pair<std::string, Real>> per_block;  // block name -> max rel err
};

namespace detail {

// Small undersampled instance with random measurements; enough structure to
// exercise every gradient path.
inline KSpaceDataset make_check_dataset(int height, int width, int frames, int n_coils,
                                        std::uint64_t seed) {
  KSpaceDataset ds;
  ds.height = height;
  ds.width = width;
  ds.frames = frames;
  ds.n_coils = n_coils;
  ds.coils = make_coils(n_coils, height, width, Rng64::derive(seed, 7));
  ds.pattern = make_mask(MaskKind::variable_density, Real(2), frames, height, width, 2,
                         Rng64::derive(seed, 11));
  ds.samples.resize(static_cast<std::size_t>(n_coils) * ds.pattern.total_samples());
  Rng64 rng(Rng64::derive(seed, 13));
  for (Cx& s : ds.samples) s = Cx(Real(0.5) * rng.normal(), Real(0.5) * rng.normal());
  ds.check_consistent();
  return ds;
}

// Spread the lattice initialization into a generic interior point of parameter
// space (away from clamps and l1 kinks) so derivatives are informative.
inline void randomize_for_check(PrimitiveSet& ps, std::uint64_t seed) {
  Rng64 rng(Rng64::derive(seed, 17));
  for (int n = 0; n < ps.count; ++n) {
    auto g = ps.prim(n);
    g.mu() += Vec2(Real(0.08) * rng.normal(), Real(0.08) * rng.normal());
    g.theta() += Real(0.4) * rng.normal();
    g.log_s() += Vec2(Real(0.2) * rng.normal(), Real(0.2) * rng.normal());
    if (!ps.gaussian_mode) g.xi() += Vec2(Real(0.5) * rng.normal(), Real(0.5) * rng.normal());
    for (int k = 0; k < ps.layout.rank_geom; ++k) {
      g.coeff_mu(0, k) = Real(0.02) * rng.normal();
      g.coeff_mu(1, k) = Real(0.02) * rng.normal();
      g.coeff_theta(k) = Real(0.1) * rng.normal();
      g.coeff_log_s(0, k) = Real(0.05) * rng.normal();
      g.coeff_log_s(1, k) = Real(0.05) * rng.normal();
      if (!ps.gaussian_mode) {
        g.coeff_xi(0, k) = Real(0.3) * rng.normal();
        g.coeff_xi(1, k) = Real(0.3) * rng.normal();
      }
      g.set_coeff_w(k, Cx(Real(0.2) * rng.normal(), Real(0.2) * rng.normal()));
    }
    for (int k = 0; k < ps.layout.rank_contrast; ++k)
      g.set_u(k, g.u(k) + Cx(Real(0.3) * rng.normal(), Real(0.3) * rng.normal()));
  }
}

struct ParamRef {
  std::string block;
  int kind;          // 0: prim scalar, 1: v_geom scalar, 2: v_contrast re, 3: v_contrast im
  std::size_t index;
};

inline Real read_param(const PrimitiveSet& ps, const ParamRef& r) {
  switch (r.kind) {
    case 0: return ps.params[r.index];
    case 1: return ps.bases.v_geom[r.index];
    case 2: return ps.bases.v_contrast[r.index].real();
    default: return ps.bases.v_contrast[r.index].imag();
  }
}

inline void write_param(PrimitiveSet& ps, const ParamRef& r, Real v) {
  switch (r.kind) {
    case 0: ps.params[r.index] = v; break;
    case 1: ps.bases.v_geom[r.index] = v; break;
    case 2: ps.bases.v_contrast[r.index].real(v); break;
    default: ps.bases.v_contrast[r.index].imag(v); break;
  }
}

inline Real read_grad(ParamGradients& g, const ParamRef& r) {
  switch (r.kind) {
    case 0: return g.prims[r.index];
    case 1: return g.v_geom[r.index];
    case 2: return g.v_contrast[r.index].real();
    default: return g.v_contrast[r.index].imag();
  }
}

}  // namespace detail

// Central finite differences against the analytic gradient, sampling a few
// entries from every parameter block; reports the worst relative error with a
// scale-aware denominator so near-zero derivative pairs do not dominate.
inline GradcheckResult run_gradcheck(const GradcheckConfig& gc) {
  FitConfig cfg;
  cfg.n_init = cfg.n_max = gc.n_prims;
  cfg.rank_geom = gc.rank_geom;
  cfg.rank_contrast = gc.rank_contrast;
  cfg.lambda_s = gc.lambda_s;
  cfg.lambda_t = gc.lambda_t;
  cfg.seed = gc.seed;
  cfg.threads = 1;
  cfg.iters = 1;

  KSpaceDataset ds =
      detail::make_check_dataset(gc.height, gc.width, gc.frames, gc.n_coils, gc.seed);
  PrimitiveSet ps = init_primitives(cfg, gc.height, gc.width, gc.frames);
  detail::randomize_for_check(ps, gc.seed);

  LossEval base = total_loss(ps, ds, cfg);

  const auto& lay = ps.layout;
  const int stride = lay.stride();
  struct BlockSpec {
    std::string name;
    int lo, hi;  // offset range within a primitive block (kind 0)
  };
  const std::vector<BlockSpec> prim_blocks = {
      {"mu", 0, 2},
      {"theta", 2, 3},
      {"log_s", 3, 5},
      {"xi", 5, 7},
      {"coeff_mu", lay.coeff_mu_off(), lay.coeff_mu_off() + 2 * lay.rank_geom},
      {"coeff_theta", lay.coeff_theta_off(), lay.coeff_theta_off() + lay.rank_geom},
      {"coeff_log_s", lay.coeff_log_s_off(), lay.coeff_log_s_off() + 2 * lay.rank_geom},
      {"coeff_xi", lay.coeff_xi_off(), lay.coeff_xi_off() + 2 * lay.rank_geom},
      {"u", lay.u_off(), lay.u_off() + 2 * lay.rank_contrast},
      {"coeff_w", lay.coeff_w_off(), lay.coeff_w_off() + 2 * lay.rank_geom},
  };

  Rng64 pick(Rng64::derive(gc.seed, 23));
  std::vector<detail::ParamRef> refs;
  for (const auto& b : prim_blocks) {
    for (int s = 0; s < gc.samples_per_block; ++s) {
      const int n = static_cast<int>(pick.bits() % static_cast<std::uint64_t>(ps.count));
      const int off = b.lo + static_cast<int>(pick.bits() % static_cast<std::uint64_t>(b.hi - b.lo));
      refs.push_back({b.name, 0, static_cast<std::size_t>(n) * stride + off});
    }
  }
  for (int s = 0; s < gc.samples_per_block; ++s)
    refs.push_back({"basis_geom", 1, pick.bits() % ps.bases.v_geom.size()});
  for (int s = 0; s < gc.samples_per_block; ++s)
    refs.push_back({"basis_contrast", 2 + static_cast<int>(pick.bits() % 2),
                    pick.bits() % ps.bases.v_contrast.size()});

  struct Sample {
    std::string block;
    Real fd, an;
  };
  std::vector<Sample> samples;
  Real grad_scale = 0;
  std::size_t mutate_target = 0;
  Real mutate_best = -1;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    const auto& r = refs[i];
    const Real p0 = detail::read_param(ps, r);
    detail::write_param(ps, r, p0 + gc.step);
    const Real lp = total_loss(ps, ds, cfg).parts.total();
    detail::write_param(ps, r, p0 - gc.step);
    const Real lm = total_loss(ps, ds, cfg).parts.total();
    detail::write_param(ps, r, p0);
    const Real fd = (lp - lm) / (2 * gc.step);
    const Real an = detail::read_grad(base.grads, r);
    samples.push_back({r.block, fd, an});
    grad_scale = std::max(grad_scale, std::abs(an));
    if (std::abs(an) > mutate_best) {
      mutate_best = std::abs(an);
      mutate_target = i;
    }
  }
  if (gc.mutate && !samples.empty()) samples[mutate_target].an = -samples[mutate_target].an;

  GradcheckResult out;
  const Real floor = Real(1e-6) * grad_scale + Real(1e-12);
  std::vector<std::pair<std::string, Real>> blocks;
  for (const auto& s : samples) {
    const Real rel = std::abs(s.fd - s.an) / std::max({std::abs(s.fd), std::abs(s.an), floor});
    out.max_rel_err = std::max(out.max_rel_err, rel);
    bool found = false;
    for (auto& b : blocks)
      if (b.first == s.block) {
        b.second = std::max(b.second, rel);
        found = true;
      }
    if (!found) blocks.emplace_back(s.block, rel);
  }
  out.per_block = std::move(blocks);
  return out;
}

struct AdjointCheckConfig {
  int height = 16, width = 16, frames = 3;
  int n_coils = 3;
  int trials = 20;
  PatternKind kind = PatternKind::cartesian;
  std::uint64_t seed = 0;
};

// <F x, y> vs <x, F^H y> over seeded random instances; returns the worst
// relative discrepancy.
inline Real run_adjoint_check(const AdjointCheckConfig& ac) {
  Real worst = 0;
  for (int trial = 0; trial < ac.trials; ++trial) {
    const std::uint64_t s = Rng64::derive(ac.seed, static_cast<std::uint64_t>(trial));
    CoilMaps coils = make_coils(ac.n_coils, ac.height, ac.width, Rng64::derive(s, 1));
    SamplingPattern pat;
    if (ac.kind == PatternKind::cartesian) {
      pat = make_mask(MaskKind::variable_density, Real(2), ac.frames, ac.height, ac.width, 2,
                      Rng64::derive(s, 2));
    } else {
      pat.kind = PatternKind::points;
      pat.frames = ac.frames;
      pat.height = ac.height;
      pat.width = ac.width;
      Rng64 rng(Rng64::derive(s, 3));
      pat.offsets.assign(static_cast<std::size_t>(ac.frames) + 1, 0);
      const int per_frame = 2 * std::min(ac.height, ac.width);
      for (int t = 0; t < ac.frames; ++t) {
        for (int i = 0; i < per_frame; ++i)
          pat.points.push_back({(2 * rng.uniform() - 1) * nyquist(ac.width),
                                (2 * rng.uniform() - 1) * nyquist(ac.height)});
        pat.offsets[t + 1] = pat.points.size();
      }
      pat.validate();
    }

    Rng64 rng(Rng64::derive(s, 4));
    CineImage x(ac.height, ac.width, ac.frames);
    for (Cx& v : x.data) v = Cx(rng.normal(), rng.normal());
    std::vector<Cx> y(static_cast<std::size_t>(ac.n_coils) * pat.total_samples());
    for (Cx& v : y) v = Cx(rng.normal(), rng.normal());

    const std::vector<Cx> fx = forward(x, coils, pat, 1);
    const CineImage aty = adjoint(y, coils, pat, 1);
    const Cx lhs = inner_product(fx, y);
    const Cx rhs = inner_product(x.data, aty.data);
    const Real rel = std::abs(lhs - rhs) / std::max(std::abs(lhs), std::abs(rhs));
    worst = std::max(worst, rel);
  }
  return worst;
}

}  // namespace cinesplat
