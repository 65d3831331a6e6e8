#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "cinesplat/common.hpp"
#include "cinesplat/fft.hpp"
#include "cinesplat/grid.hpp"
#include "cinesplat/rasterize.hpp"
#include "cinesplat/temporal.hpp"

namespace cinesplat {

inline constexpr Real kPsnrCapDb = 99.0;  // sentinel for (near-)identical inputs

inline Real nrmse(std::span<const Cx> a, std::span<const Cx> b) {
  if (a.size() != b.size()) throw std::invalid_argument("nrmse size mismatch");
  Real num = 0, den = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += std::norm(a[i] - b[i]);
    den += std::norm(b[i]);
  }
  if (den == 0) throw std::invalid_argument("nrmse reference is zero");
  return std::sqrt(num / den);
}

struct FramewiseMetric {
  std::vector<Real> per_frame;
  Real mean = 0;
};

namespace detail {

inline void check_same_dims(const CineImage& a, const CineImage& b) {
  if (a.height != b.height || a.width != b.width || a.frames != b.frames)
    throw std::invalid_argument("image stacks differ in shape");
}

inline Real stack_peak_magnitude(const CineImage& ref) {
  Real peak = 0;
  for (const Cx& v : ref.data) peak = std::max(peak, std::abs(v));
  return peak;
}

}  // namespace detail

// PSNR on magnitude images: 20 log10(peak / RMSE) per frame, peak taken over
// the whole reference stack; values capped at the 99 dB sentinel.
inline FramewiseMetric psnr(const CineImage& recon, const CineImage& ref) {
  detail::check_same_dims(recon, ref);
  const Real peak = detail::stack_peak_magnitude(ref);
  if (peak == 0) throw std::invalid_argument("psnr: reference is identically zero");
  FramewiseMetric m;
  const std::size_t px = static_cast<std::size_t>(ref.height) * ref.width;
  for (int t = 0; t < ref.frames; ++t) {
    auto r = recon.frame(t);
    auto g = ref.frame(t);
    Real se = 0;
    for (std::size_t i = 0; i < px; ++i) {
      const Real d = std::abs(r[i]) - std::abs(g[i]);
      se += d * d;
    }
    const Real rmse = std::sqrt(se / Real(px));
    const Real db = rmse == 0 ? kPsnrCapDb
                              : std::min(kPsnrCapDb, Real(20) * std::log10(peak / rmse));
    m.per_frame.push_back(db);
    m.mean += db;
  }
  m.mean /= Real(ref.frames);
  return m;
}

namespace detail {

inline std::vector<Real> gaussian_window_1d(int radius, Real sigma) {
  std::vector<Real> w(static_cast<std::size_t>(2 * radius + 1));
  Real sum = 0;
  for (int i = -radius; i <= radius; ++i) {
    w[static_cast<std::size_t>(i + radius)] = std::exp(-Real(i * i) / (2 * sigma * sigma));
    sum += w[static_cast<std::size_t>(i + radius)];
  }
  for (Real& v : w) v /= sum;
  return w;
}

// Separable valid-mode convolution of an H x W field with a symmetric 1D kernel.
inline std::vector<Real> conv_valid(const std::vector<Real>& img, int height, int width,
                                    const std::vector<Real>& k) {
  const int radius = static_cast<int>(k.size() / 2);
  const int vw = width - 2 * radius;
  const int vh = height - 2 * radius;
  std::vector<Real> rows(static_cast<std::size_t>(height) * vw, 0);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < vw; ++x) {
      Real acc = 0;
      for (int i = 0; i < static_cast<int>(k.size()); ++i)
        acc += k[static_cast<std::size_t>(i)] * img[static_cast<std::size_t>(y) * width + x + i];
      rows[static_cast<std::size_t>(y) * vw + x] = acc;
    }
  std::vector<Real> out(static_cast<std::size_t>(vh) * vw, 0);
  for (int y = 0; y < vh; ++y)
    for (int x = 0; x < vw; ++x) {
      Real acc = 0;
      for (int i = 0; i < static_cast<int>(k.size()); ++i)
        acc += k[static_cast<std::size_t>(i)] * rows[static_cast<std::size_t>(y + i) * vw + x];
      out[static_cast<std::size_t>(y) * vw + x] = acc;
    }
  return out;
}

}  // namespace detail

// Single-scale SSIM on magnitudes, 11x11 Gaussian window (sigma 1.5),
// K1=0.01, K2=0.03, data range = max |ref| over the stack; averaged over the
// valid (un-padded) region.
inline FramewiseMetric ssim(const CineImage& recon, const CineImage& ref) {
  detail::check_same_dims(recon, ref);
  constexpr int kRadius = 5;
  if (ref.height < 2 * kRadius + 1 || ref.width < 2 * kRadius + 1)
    throw std::invalid_argument("ssim: grid smaller than the 11x11 window");
  const Real data_range = detail::stack_peak_magnitude(ref);
  if (data_range == 0) throw std::invalid_argument("ssim: reference is identically zero");
  const Real c1 = Real(0.01 * 0.01) * data_range * data_range;
  const Real c2 = Real(0.03 * 0.03) * data_range * data_range;
  const auto win = detail::gaussian_window_1d(kRadius, Real(1.5));

  FramewiseMetric m;
  const std::size_t px = static_cast<std::size_t>(ref.height) * ref.width;
  std::vector<Real> xm(px), ym(px), xx(px), yy(px), xy(px);
  for (int t = 0; t < ref.frames; ++t) {
    auto r = recon.frame(t);
    auto g = ref.frame(t);
    for (std::size_t i = 0; i < px; ++i) {
      const Real a = std::abs(r[i]), b = std::abs(g[i]);
      xm[i] = a;
      ym[i] = b;
      xx[i] = a * a;
      yy[i] = b * b;
      xy[i] = a * b;
    }
    const auto mu_x = detail::conv_valid(xm, ref.height, ref.width, win);
    const auto mu_y = detail::conv_valid(ym, ref.height, ref.width, win);
    const auto s_xx = detail::conv_valid(xx, ref.height, ref.width, win);
    const auto s_yy = detail::conv_valid(yy, ref.height, ref.width, win);
    const auto s_xy = detail::conv_valid(xy, ref.height, ref.width, win);
    Real acc = 0;
    for (std::size_t i = 0; i < mu_x.size(); ++i) {
      const Real vx = s_xx[i] - mu_x[i] * mu_x[i];
      const Real vy = s_yy[i] - mu_y[i] * mu_y[i];
      const Real cov = s_xy[i] - mu_x[i] * mu_y[i];
      acc += ((2 * mu_x[i] * mu_y[i] + c1) * (2 * cov + c2)) /
             ((mu_x[i] * mu_x[i] + mu_y[i] * mu_y[i] + c1) * (vx + vy + c2));
    }
    const Real v = acc / Real(mu_x.size());
    m.per_frame.push_back(v);
    m.mean += v;
  }
  m.mean /= Real(ref.frames);
  return m;
}

struct BandPsnr {
  Real low = 0, mid = 0, high = 0;
};

namespace detail {

// Band index per k-grid cell from the per-axis-normalized radial frequency;
// the high band keeps everything from c2 out through the grid corners so the
// three masks tile the grid exactly.
inline int band_of(int y, int x, int height, int width, Real c1, Real c2) {
  const Real fy = Real(index_to_freq(y, height)) / nyquist(height);
  const Real fx = Real(index_to_freq(x, width)) / nyquist(width);
  const Real r = std::hypot(fx, fy);
  if (r < c1) return 0;
  if (r < c2) return 1;
  return 2;
}

}  // namespace detail

// PSNR between band-filtered magnitudes: ideal annular masks at radial
// cutoffs c1 < c2 (fractions of Nyquist) applied to both inputs in k-space.
inline BandPsnr band_psnr(const CineImage& recon, const CineImage& ref,
                          Real c1 = Real(1) / 6, Real c2 = Real(1) / 2) {
  detail::check_same_dims(recon, ref);
  if (!(c1 > 0 && c1 < c2 && c2 < 1)) throw std::invalid_argument("band cutoffs need 0 < c1 < c2 < 1");
  const int h = ref.height, w = ref.width;
  const std::size_t px = static_cast<std::size_t>(h) * w;

  CenteredFft2 fft(h, w);
  std::array<CineImage, 3> recon_band{CineImage(h, w, ref.frames), CineImage(h, w, ref.frames),
                                      CineImage(h, w, ref.frames)};
  std::array<CineImage, 3> ref_band{CineImage(h, w, ref.frames), CineImage(h, w, ref.frames),
                                    CineImage(h, w, ref.frames)};
  std::vector<int> band(px);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      band[static_cast<std::size_t>(y) * w + x] = detail::band_of(y, x, h, w, c1, c2);

  std::vector<Cx> spec(px), masked(px);
  for (int t = 0; t < ref.frames; ++t) {
    for (int which = 0; which < 2; ++which) {
      const CineImage& src = which == 0 ? recon : ref;
      auto& dst = which == 0 ? recon_band : ref_band;
      fft.forward(src.frame(t), spec);
      for (int b = 0; b < 3; ++b) {
        for (std::size_t i = 0; i < px; ++i) masked[i] = band[i] == b ? spec[i] : Cx(0, 0);
        fft.inverse(masked, dst[static_cast<std::size_t>(b)].frame(t));
      }
    }
  }

  BandPsnr out;
  out.low = psnr(recon_band[0], ref_band[0]).mean;
  out.mid = psnr(recon_band[1], ref_band[1]).mean;
  out.high = psnr(recon_band[2], ref_band[2]).mean;
  return out;
}

// Renders one frame on an arbitrary grid; the model is continuous so only the
// sampling density changes.
inline ComplexGrid render_at(const PrimitiveSet& ps, int t, int height, int width,
                             const RasterConfig& cfg = {}) {
  if (height < 4 || width < 4) throw std::invalid_argument("render dims must be >= 4");
  const auto frame = assemble_frame(ps, t);
  return rasterize(frame, height, width, cfg);
}

// Integer-factor area-average downsampling (super-resolution consistency checks).
inline ComplexGrid area_average(const ComplexGrid& fine, int factor) {
  if (factor < 1 || fine.height % factor != 0 || fine.width % factor != 0)
    throw std::invalid_argument("area_average: dims not divisible by factor");
  ComplexGrid coarse(fine.height / factor, fine.width / factor);
  const Real inv = Real(1) / Real(factor * factor);
  for (int y = 0; y < coarse.height; ++y)
    for (int x = 0; x < coarse.width; ++x) {
      Cx acc(0, 0);
      for (int dy = 0; dy < factor; ++dy)
        for (int dx = 0; dx < factor; ++dx) acc += fine.at(y * factor + dy, x * factor + dx);
      coarse.at(y, x) = acc * inv;
    }
  return coarse;
}

struct Decomposition {
  ComplexGrid low, high, full;
};

// Splits the frame-t render by effective modulation magnitude |xi_{n,t}|
// against threshold * Nyquist (Nyquist of the shorter axis).
inline Decomposition frequency_decompose(const PrimitiveSet& ps, int t, Real threshold = 0.25,
                                         const RasterConfig& cfg = {}) {
  const auto frame = assemble_frame(ps, t);
  const Real cutoff = threshold * nyquist(std::min(ps.grid_height, ps.grid_width));
  std::vector<FrameGeometry> low_set, high_set;
  for (const auto& g : frame) {
    if (g.xi.norm() < cutoff)
      low_set.push_back(g);
    else
      high_set.push_back(g);
  }
  Decomposition d{rasterize(low_set, ps.grid_height, ps.grid_width, cfg),
                  rasterize(high_set, ps.grid_height, ps.grid_width, cfg),
                  rasterize(frame, ps.grid_height, ps.grid_width, cfg)};
  return d;
}

// One row per primitive of the frame-t spectral footprint: center frequency,
// 3 sigma_k ellipse axes (sigma_k = 1/(2 pi s) per principal axis, same
// orientation as image space), and |w|.
struct SpectralFootprint {
  Vec2 xi;
  Real axis1, axis2;  // 3 sigma_k along the two principal axes
  Real theta;
  Real weight_abs;
};

inline std::vector<SpectralFootprint> kspace_scatter(const PrimitiveSet& ps, int t) {
  const auto frame = assemble_frame(ps, t);
  std::vector<SpectralFootprint> out;
  out.reserve(frame.size());
  for (const auto& g : frame) {
    const Vec2 s = g.cov.scales();
    out.push_back({g.xi, Real(3) / (kTwoPi * s.x()), Real(3) / (kTwoPi * s.y()),
                   g.cov.theta, std::abs(g.weight)});
  }
  return out;
}

struct MetricReport {
  FramewiseMetric psnr_db;
  FramewiseMetric ssim_val;
  BandPsnr bands;
  int weight_rank = -1;  // -1 when not computed
  int rank_bound = -1;
};

inline MetricReport compute_metrics(const CineImage& recon, const CineImage& ref,
                                    Real c1 = Real(1) / 6, Real c2 = Real(1) / 2) {
  MetricReport r;
  r.psnr_db = psnr(recon, ref);
  r.ssim_val = ssim(recon, ref);
  r.bands = band_psnr(recon, ref, c1, c2);
  return r;
}

}  // namespace cinesplat
