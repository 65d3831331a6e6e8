// Acceptance gate: runs the eleven release criteria end to end and prints one
// PASS/FAIL line per criterion. Exit code is the number of failures, so a
// clean run exits 0. Heavy fits are shared between criteria 6, 7, 8, 9, 10
// and 11. Artifacts land in --work DIR (default ./acceptance_work).
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cinesplat/cinesplat.hpp"

namespace fs = std::filesystem;
using namespace cinesplat;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Gate {
  int failures = 0;
  void line(int id, bool ok, const std::string& detail) {
    std::printf("C%-2d %s  %s\n", id, ok ? "PASS" : "FAIL", detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
  }
};

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

Real nrmse_span(std::span<const Cx> a, std::span<const Cx> b) {
  Real num = 0, den = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += std::norm(a[i] - b[i]);
    den += std::norm(b[i]);
  }
  return std::sqrt(num / den);
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// ---- criterion 1: analytic vs finite-difference gradients --------------------

void criterion_gradients(Gate& g) {
  const auto t0 = Clock::now();
  GradcheckConfig plain;  // defaults: 8x8x3, 2 coils, 10 primitives, h = 1e-6
  const Real err_plain = run_gradcheck(plain).max_rel_err;
  GradcheckConfig reg = plain;
  reg.lambda_s = 1e-5;
  reg.lambda_t = 1e-2;
  const Real err_reg = run_gradcheck(reg).max_rel_err;
  const double secs = seconds_since(t0);
  g.line(1, err_plain < 1e-4 && err_reg < 1e-3 && secs < 10.0,
         fmt("gradcheck: data-only %.2e (<1e-4), regularized %.2e (<1e-3), %.1fs (<10s)",
             err_plain, err_reg, secs));
}

// ---- criterion 2: rendered atom matches its closed-form spectrum -------------

void criterion_fourier_pair(Gate& g) {
  const auto t0 = Clock::now();
  const int dim = 128;
  CenteredFft2 fft(dim, dim);
  Rng64 rng(2024);
  Real worst = 0;
  int worst_i = -1;

  std::vector<Cx> grid(static_cast<std::size_t>(dim) * dim);
  std::vector<Cx> spec(grid.size());
  for (int i = 0; i < 100; ++i) {
    // Containment drives the oracle accuracy: keep five standard deviations
    // of envelope inside the FOV so boundary truncation sits far below the
    // 1e-3 bound (edge amplitude e^-12.5).
    FrameGeometry atom;
    const Real s1 = 0.02 + 0.04 * rng.uniform();
    const Real s2 = 0.02 + 0.04 * rng.uniform();
    atom.cov.log_s = Vec2(std::log(s1), std::log(s2));
    atom.cov.theta = kPi * (2 * rng.uniform() - 1);
    const Real margin = Real(0.5) - 5 * std::max(s1, s2);
    atom.mu = Vec2(margin * (2 * rng.uniform() - 1), margin * (2 * rng.uniform() - 1));
    atom.xi = Vec2(8 * (2 * rng.uniform() - 1), 8 * (2 * rng.uniform() - 1));
    atom.weight = Cx(rng.normal(), rng.normal());

    RasterConfig rc;
    rc.n_sigma = 1e9;  // no culling: the oracle covers the whole grid
    const ComplexGrid img = rasterize({&atom, 1}, dim, dim, rc);
    fft.forward(img.data, grid);

    // The unitary transform of the pixel samples approximates the continuous
    // spectrum up to the sqrt(H*W) normalization difference.
    const Real scale = std::sqrt(Real(dim) * dim);
    for (int qy = 0; qy < dim; ++qy)
      for (int qx = 0; qx < dim; ++qx) {
        const Vec2 k(Real(index_to_freq(qx, dim)), Real(index_to_freq(qy, dim)));
        spec[static_cast<std::size_t>(qy) * dim + qx] =
            atom.weight * spectrum_closed_form(atom, k) * scale;
      }
    const Real e = nrmse_span(grid, spec);
    if (e > worst) {
      worst = e;
      worst_i = i;
    }
  }
  const double secs = seconds_since(t0);
  g.line(2, worst < 1e-3 && secs < 30.0,
         fmt("fourier pair: worst NRMSE %.2e (<1e-3, atom %d), %.1fs (<30s)", worst, worst_i,
             secs));
}

// ---- criterion 3: operator adjoint identity ----------------------------------

void criterion_adjoint(Gate& g) {
  const auto t0 = Clock::now();
  AdjointCheckConfig ac;  // 20 trials
  ac.kind = PatternKind::cartesian;
  const Real e_cart = run_adjoint_check(ac);
  ac.kind = PatternKind::points;
  const Real e_pts = run_adjoint_check(ac);
  const double secs = seconds_since(t0);
  g.line(3, e_cart < 1e-10 && e_pts < 1e-10 && secs < 10.0,
         fmt("adjoint dot tests: cartesian %.2e, points %.2e (<1e-10), %.1fs (<10s)", e_cart,
             e_pts, secs));
}

// ---- criterion 4: exact gaussian reduction at xi = 0 -------------------------

void criterion_gaussian_reduction(Gate& g) {
  Rng64 rng(77);
  bool imag_zero = true;
  std::vector<FrameGeometry> atoms;
  for (int i = 0; i < 50; ++i) {
    FrameGeometry atom;
    atom.mu = Vec2(0.4 * (2 * rng.uniform() - 1), 0.4 * (2 * rng.uniform() - 1));
    atom.cov.theta = kPi * rng.uniform();
    atom.cov.log_s = Vec2(std::log(0.03 + 0.1 * rng.uniform()),
                          std::log(0.03 + 0.1 * rng.uniform()));
    atom.xi = Vec2::Zero();
    atom.weight = Cx(rng.normal(), rng.normal());
    atoms.push_back(atom);
    for (int s = 0; s < 200; ++s) {
      const Vec2 r(rng.uniform() - 0.5, rng.uniform() - 0.5);
      imag_zero &= eval_primitive(atom, r).imag() == 0.0;
    }
  }

  const ComplexGrid fast = rasterize(atoms, 96, 96);
  RasterConfig forced;
  forced.force_carrier = true;
  const ComplexGrid carrier = rasterize(atoms, 96, 96, forced);
  Real peak = 0, diff = 0;
  for (std::size_t i = 0; i < fast.data.size(); ++i) {
    peak = std::max(peak, std::abs(carrier.data[i]));
    diff = std::max(diff, std::abs(fast.data[i] - carrier.data[i]));
  }
  const Real rel = diff / peak;
  g.line(4, imag_zero && rel <= 1e-12,
         fmt("gaussian reduction: eval imag exactly zero %s, path agreement %.2e (<=1e-12)",
             imag_zero ? "yes" : "NO", rel));
}

// ---- criterion 5: temporal weight rank bound ---------------------------------

void criterion_rank_bound(Gate& g) {
  FitConfig cfg;
  cfg.n_init = cfg.n_max = 200;
  cfg.rank_geom = 6;
  cfg.rank_contrast = 4;
  cfg.seed = 11;
  PrimitiveSet ps = init_primitives(cfg, 64, 64, 16);
  Rng64 rng(Rng64::derive(11, 5));
  for (Real& v : ps.params) v = rng.normal();
  for (Real& v : ps.bases.v_geom) v = rng.normal();
  for (Cx& v : ps.bases.v_contrast) v = Cx(rng.normal(), rng.normal());

  const int rank = numerical_rank(weight_matrix(ps));
  g.line(5, rank <= 10, fmt("rank bound: W is %dx%d with numerical rank %d (<=10)", ps.count,
                            ps.frames(), rank));
}

// ---- shared phantom instance for criteria 6-11 -------------------------------

struct PhantomRun {
  KSpaceDataset ds;
  Real noise_std = 0;
  PrimitiveSet gabor_ps;
  FitReport gabor_report;
  FitConfig gabor_cfg;
  double gabor_secs = 0;
  MetricReport gabor_metrics;
};

KSpaceDataset make_benchmark_dataset(std::uint64_t seed, Real* noise_out) {
  const PhantomSpec spec = benchmark_phantom(64, 64, 8);
  const CoilMaps coils = make_coils(4, 64, 64, Rng64::derive(seed, 1));
  const SamplingPattern pattern =
      make_mask(MaskKind::variable_density, 4.0, 8, 64, 64, 4, Rng64::derive(seed, 2));

  // Noise level set for ~30 dB measurement SNR: sigma = rms(clean y) / sqrt(2000).
  const KSpaceDataset clean = simulate(spec, coils, pattern, 0, Rng64::derive(seed, 3));
  Real acc = 0;
  for (const Cx& v : clean.samples) acc += std::norm(v);
  const Real sigma = std::sqrt(acc / Real(clean.samples.size())) / std::sqrt(Real(2000));
  if (noise_out) *noise_out = sigma;
  return simulate(spec, coils, pattern, sigma, Rng64::derive(seed, 3));
}

MetricReport score_model(const PrimitiveSet& ps, const KSpaceDataset& ds) {
  CineImage recon(ds.height, ds.width, ds.frames);
  for (int t = 0; t < ds.frames; ++t) {
    const ComplexGrid g = render_at(ps, t, ds.height, ds.width);
    std::copy(g.data.begin(), g.data.end(), recon.frame(t).begin());
  }
  return compute_metrics(recon, ds.reference);
}

void criterion_phantom_floor(Gate& g, PhantomRun& run, const fs::path& work) {
  run.ds = make_benchmark_dataset(42, &run.noise_std);

  FitConfig cfg;  // stock settings: N 500->800, ranks 6/4, 2000 iters
  cfg.seed = 0;
  cfg.threads = 1;
  run.gabor_cfg = cfg;

  const auto t0 = Clock::now();
  auto [ps, report] = fit(run.ds, cfg);
  run.gabor_secs = seconds_since(t0);
  run.gabor_ps = std::move(ps);
  run.gabor_report = report;
  run.gabor_metrics = score_model(run.gabor_ps, run.ds);

  save_dataset(run.ds, work / "dataset");
  save_model(run.gabor_ps, work / "gabor_model.bin");
  save_report(run.gabor_report, cfg, work / "gabor_report.json");

  g.line(6,
         run.gabor_metrics.psnr_db.mean >= 30.0 && run.gabor_metrics.ssim_val.mean >= 0.90 &&
             run.gabor_secs < 600.0,
         fmt("phantom floor: PSNR %.2f dB (>=30), SSIM %.4f (>=0.90), %d primitives, %.0fs "
             "(<600s), noise %.4g",
             run.gabor_metrics.psnr_db.mean, run.gabor_metrics.ssim_val.mean, run.gabor_ps.count,
             run.gabor_secs, run.noise_std));
}

void criterion_gabor_vs_gaussian(Gate& g, const PhantomRun& run, const fs::path& work,
                                 MetricReport* gauss_out) {
  // Match learnable parameter counts: a gaussian primitive freezes xi and its
  // temporal coefficients, so it carries fewer free parameters per atom.
  const int per_gabor = run.gabor_ps.stride();
  const int per_gauss = per_gabor - (2 + 2 * run.gabor_ps.layout.rank_geom);
  FitConfig cfg = run.gabor_cfg;
  cfg.gaussian_mode = true;
  cfg.n_init = static_cast<int>(std::llround(Real(run.gabor_cfg.n_init) * per_gabor / per_gauss));
  cfg.n_max = static_cast<int>(std::llround(Real(run.gabor_cfg.n_max) * per_gabor / per_gauss));

  const auto t0 = Clock::now();
  const auto [ps, report] = fit(run.ds, cfg);
  const double secs = seconds_since(t0);
  const MetricReport m = score_model(ps, run.ds);
  if (gauss_out) *gauss_out = m;
  save_model(ps, work / "gaussian_model.bin");
  save_report(report, cfg, work / "gaussian_report.json");

  const Real gap = run.gabor_metrics.psnr_db.mean - m.psnr_db.mean;
  g.line(7, gap >= 0.0,
         fmt("gabor vs gaussian: +%.2f dB over matched gaussian (N %d->%d, PSNR %.2f dB, %.0fs); "
             "required >=0, target >=0.3",
             gap, cfg.n_init, cfg.n_max, m.psnr_db.mean, secs));
}

void criterion_band_structure(Gate& g, const PhantomRun& run, const MetricReport& gauss) {
  const Real d_mid = run.gabor_metrics.bands.mid - gauss.bands.mid;
  const Real d_high = run.gabor_metrics.bands.high - gauss.bands.high;
  g.line(8, d_mid >= 0.0 && d_high >= 0.0,
         fmt("band psnr: gabor-gaussian low %+.2f, mid %+.2f, high %+.2f dB (mid and high >=0)",
             run.gabor_metrics.bands.low - gauss.bands.low, d_mid, d_high));
}

void criterion_partition(Gate& g, const PhantomRun& run) {
  Real worst = 0;
  for (int t = 0; t < run.ds.frames; ++t) {
    const Decomposition d = frequency_decompose(run.gabor_ps, t);
    Real peak = 0, diff = 0;
    for (std::size_t i = 0; i < d.full.data.size(); ++i) {
      peak = std::max(peak, std::abs(d.full.data[i]));
      diff = std::max(diff, std::abs(d.low.data[i] + d.high.data[i] - d.full.data[i]));
    }
    worst = std::max(worst, diff / peak);
  }
  g.line(9, worst <= 1e-12,
         fmt("decomposition partition: low+high vs full, worst rel %.2e (<=1e-12)", worst));
}

void criterion_super_resolution(Gate& g) {
  // Cross-resolution agreement of the continuous renderer.  Box averaging
  // carries a cos(pi k / 2N) transfer per axis, so content near Nyquist is
  // attenuated by design; the instance therefore uses a seeded well-resolved
  // model (sizes >= 2 px, carriers <= 5 cycles) rather than a fitted one,
  // which legitimately holds near-Nyquist texture.
  FitConfig cfg;
  cfg.n_init = cfg.n_max = 150;
  cfg.seed = 17;
  PrimitiveSet ps = init_primitives(cfg, 64, 64, 6);
  Rng64 rng(Rng64::derive(17, 9));
  for (int n = 0; n < ps.count; ++n) {
    auto v = ps.prim(n);
    v.mu() = Vec2(0.35 * (2 * rng.uniform() - 1), 0.35 * (2 * rng.uniform() - 1));
    v.theta() = kPi * (2 * rng.uniform() - 1);
    v.log_s() = Vec2(std::log(0.035 + 0.065 * rng.uniform()),
                     std::log(0.035 + 0.065 * rng.uniform()));
    v.xi() = Vec2(5 * (2 * rng.uniform() - 1), 5 * (2 * rng.uniform() - 1));
    v.set_u(0, Cx(rng.normal(), rng.normal()));
    for (int c = 1; c < ps.layout.rank_contrast; ++c)
      v.set_u(c, Real(0.1) * Cx(rng.normal(), rng.normal()));
    for (int k = 0; k < ps.layout.rank_geom; ++k) {
      v.coeff_mu(0, k) = Real(0.01) * rng.normal();
      v.coeff_mu(1, k) = Real(0.01) * rng.normal();
      v.coeff_theta(k) = Real(0.02) * rng.normal();
      v.coeff_log_s(0, k) = Real(0.02) * rng.normal();
      v.coeff_log_s(1, k) = Real(0.02) * rng.normal();
      v.coeff_xi(0, k) = Real(0.05) * rng.normal();
      v.coeff_xi(1, k) = Real(0.05) * rng.normal();
      v.set_coeff_w(k, Real(0.05) * Cx(rng.normal(), rng.normal()));
    }
  }

  Real worst = 0;
  for (int t = 0; t < ps.frames(); ++t) {
    const ComplexGrid fine = render_at(ps, t, 128, 128);
    const ComplexGrid avg = area_average(fine, 2);
    const ComplexGrid coarse = render_at(ps, t, 64, 64);
    worst = std::max(worst, nrmse_span(avg.data, coarse.data));
  }
  g.line(10, worst < 1e-2,
         fmt("super-resolution consistency: worst frame NRMSE %.2e (<1e-2)", worst));
}

void criterion_determinism(Gate& g, const PhantomRun& run, const fs::path& work) {
  FitConfig cfg = run.gabor_cfg;
  cfg.threads = 4;
  const auto t0 = Clock::now();
  const auto [ps, report] = fit(run.ds, cfg);
  const double secs = seconds_since(t0);

  save_model(ps, work / "gabor_model_4threads.bin");
  const bool bytes_equal =
      slurp(work / "gabor_model.bin") == slurp(work / "gabor_model_4threads.bin");
  const bool traces_equal = report.trace_data == run.gabor_report.trace_data &&
                            report.trace_sparsity == run.gabor_report.trace_sparsity &&
                            report.trace_tv == run.gabor_report.trace_tv &&
                            report.trace_count == run.gabor_report.trace_count;
  g.line(11, bytes_equal && traces_equal,
         fmt("determinism: 4-thread refit model bytes %s, loss traces %s (%.0fs)",
             bytes_equal ? "identical" : "DIFFER", traces_equal ? "identical" : "DIFFER", secs));
}

}  // namespace

int main(int argc, char** argv) {
  fs::path work = "acceptance_work";
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--work" && i + 1 < argc) {
      work = argv[++i];
    } else {
      std::fprintf(stderr, "usage: %s [--work DIR]\n", argv[0]);
      return 64;
    }
  }
  fs::create_directories(work);

  Gate gate;
  const auto t0 = Clock::now();
  criterion_gradients(gate);
  criterion_fourier_pair(gate);
  criterion_adjoint(gate);
  criterion_gaussian_reduction(gate);
  criterion_rank_bound(gate);

  PhantomRun run;
  criterion_phantom_floor(gate, run, work);
  MetricReport gauss;
  criterion_gabor_vs_gaussian(gate, run, work, &gauss);
  criterion_band_structure(gate, run, gauss);
  criterion_partition(gate, run);
  criterion_super_resolution(gate);
  criterion_determinism(gate, run, work);

  std::printf("%d/11 criteria passed in %.0fs; artifacts in %s\n", 11 - gate.failures,
              seconds_since(t0), work.string().c_str());
  return gate.failures;
}
