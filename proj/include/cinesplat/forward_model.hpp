#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "cinesplat/common.hpp"
#include "cinesplat/fft.hpp"
#include "cinesplat/grid.hpp"
#include "cinesplat/parallel.hpp"

namespace cinesplat {

struct CoilMaps {
  int n_coils = 0;
  int height = 0;
  int width = 0;
  std::vector<Cx> data;  // coil-major

  CoilMaps() = default;
  CoilMaps(int n_coils_, int height_, int width_)
      : n_coils(n_coils_), height(height_), width(width_),
        data(static_cast<std::size_t>(n_coils_) * height_ * width_) {}

  std::size_t pixels() const { return static_cast<std::size_t>(height) * width; }
  std::span<Cx> map(int c) { return {data.data() + c * pixels(), pixels()}; }
  std::span<const Cx> map(int c) const { return {data.data() + c * pixels(), pixels()}; }
};

enum class PatternKind { cartesian, points };

// Sampling locations per frame. Cartesian frames enumerate mask-true pixels in
// row-major order; point-set frames list explicit k-coordinates in cycles/FOV.
struct SamplingPattern {
  PatternKind kind = PatternKind::cartesian;
  int frames = 0;
  int height = 0;  // k-grid dims (also used as the Nyquist box for points)
  int width = 0;
  std::vector<std::uint8_t> mask;           // frames*height*width, cartesian only
  std::vector<std::array<Real, 2>> points;  // (kx, ky), point-set only
  std::vector<std::size_t> offsets;         // frames+1 prefix sums over samples

  std::span<const std::uint8_t> mask_frame(int t) const {
    const std::size_t px = static_cast<std::size_t>(height) * width;
    return {mask.data() + t * px, px};
  }
  std::size_t samples_in_frame(int t) const { return offsets[t + 1] - offsets[t]; }
  std::size_t total_samples() const { return offsets.empty() ? 0 : offsets.back(); }

  // Rebuilds prefix sums (and for cartesian, counts mask lines); call after
  // filling mask/points.
  void finalize() {
    if (kind == PatternKind::cartesian) {
      offsets.assign(static_cast<std::size_t>(frames) + 1, 0);
      const std::size_t px = static_cast<std::size_t>(height) * width;
      if (mask.size() != px * frames) throw std::invalid_argument("mask size mismatch");
      for (int t = 0; t < frames; ++t) {
        std::size_t n = 0;
        for (std::uint8_t v : mask_frame(t)) n += (v != 0);
        offsets[t + 1] = offsets[t] + n;
      }
    } else {
      if (offsets.size() != static_cast<std::size_t>(frames) + 1)
        throw std::invalid_argument("offsets size mismatch");
      // Point-set offsets are provided by the builder; verify coverage below.
    }
    validate();
  }

  void validate() const {
    if (frames < 1 || height < 4 || width < 4) throw std::invalid_argument("bad pattern dims");
    if (offsets.size() != static_cast<std::size_t>(frames) + 1)
      throw std::invalid_argument("offsets size mismatch");
    for (int t = 0; t < frames; ++t)
      if (samples_in_frame(t) == 0) throw std::invalid_argument("pattern frame has no samples");
    if (kind == PatternKind::points) {
      if (points.size() != total_samples()) throw std::invalid_argument("points size mismatch");
      const Real nx = Real(nyquist(width)), ny = Real(nyquist(height));
      for (const auto& p : points)
        if (std::abs(p[0]) > nx || std::abs(p[1]) > ny)
          throw std::invalid_argument("point outside Nyquist box");
    }
  }
};

struct KSpaceDataset {
  int height = 0, width = 0, frames = 0, n_coils = 0;
  SamplingPattern pattern;
  CoilMaps coils;
  std::vector<Cx> samples;  // coil-major, then frame, then sample
  Real noise_std = 0;
  CineImage reference;  // empty when absent

  bool has_reference() const { return !reference.data.empty(); }
  std::size_t samples_per_coil() const { return pattern.total_samples(); }
  std::span<Cx> sample_block(int c, int t) {
    return {samples.data() + c * samples_per_coil() + pattern.offsets[t],
            pattern.samples_in_frame(t)};
  }
  std::span<const Cx> sample_block(int c, int t) const {
    return {samples.data() + c * samples_per_coil() + pattern.offsets[t],
            pattern.samples_in_frame(t)};
  }

  void check_consistent() const {
    pattern.validate();
    if (coils.n_coils != n_coils || coils.height != height || coils.width != width)
      throw std::invalid_argument("coil map dims mismatch");
    if (pattern.height != height || pattern.width != width || pattern.frames != frames)
      throw std::invalid_argument("pattern dims mismatch");
    if (samples.size() != static_cast<std::size_t>(n_coils) * samples_per_coil())
      throw std::invalid_argument("sample count mismatch");
  }
};

// Per-thread scratch for frame transforms; holds the FFT plan pair.
struct ForwardWorkspace {
  CenteredFft2 fft;
  std::vector<Cx> weighted;
  std::vector<Cx> kgrid;

  ForwardWorkspace(int height, int width)
      : fft(height, width),
        weighted(static_cast<std::size_t>(height) * width),
        kgrid(static_cast<std::size_t>(height) * width) {}
};

namespace detail {

// Direct unitary DFT at one real-valued k point: sum_p v_p exp(-i2pi k.r_p) / sqrt(HW).
// Row/column phases advance by constant multiplies (1/W and 1/H steps).
inline Cx direct_dft_point(std::span<const Cx> v, int height, int width, Real kx, Real ky) {
  const Real hx = Real(1) / width, hy = Real(1) / height;
  const Cx step_x = std::polar(Real(1), -kTwoPi * kx * hx);
  const Cx step_y = std::polar(Real(1), -kTwoPi * ky * hy);
  Cx row_phase = std::polar(Real(1), -kTwoPi * ky * pixel_coord(0, height));
  const Cx col0 = std::polar(Real(1), -kTwoPi * kx * pixel_coord(0, width));
  Cx acc(0, 0);
  for (int y = 0; y < height; ++y) {
    const Cx* row = v.data() + static_cast<std::size_t>(y) * width;
    Cx col_phase = col0;
    Cx row_acc(0, 0);
    for (int x = 0; x < width; ++x) {
      row_acc += row[x] * col_phase;
      col_phase *= step_x;
    }
    acc += row_acc * row_phase;
    row_phase *= step_y;
  }
  return acc / std::sqrt(Real(height) * Real(width));
}

// Adjoint of direct_dft_point: scatter val back to the image grid.
inline void direct_dft_scatter(Cx val, int height, int width, Real kx, Real ky,
                               std::span<Cx> accum) {
  const Real hx = Real(1) / width, hy = Real(1) / height;
  const Cx step_x = std::polar(Real(1), kTwoPi * kx * hx);
  const Cx step_y = std::polar(Real(1), kTwoPi * ky * hy);
  Cx row_phase = std::polar(Real(1), kTwoPi * ky * pixel_coord(0, height));
  const Cx col0 = std::polar(Real(1), kTwoPi * kx * pixel_coord(0, width));
  const Cx scaled = val / std::sqrt(Real(height) * Real(width));
  for (int y = 0; y < height; ++y) {
    Cx* row = accum.data() + static_cast<std::size_t>(y) * width;
    const Cx base = scaled * row_phase;
    Cx col_phase = col0;
    for (int x = 0; x < width; ++x) {
      row[x] += base * col_phase;
      col_phase *= step_x;
    }
    row_phase *= step_y;
  }
}

}  // namespace detail

// y_{c,t} = F_Omega { S_c . x_t } for one (coil, frame) pair.
inline void predict_coil_frame(ForwardWorkspace& ws, std::span<const Cx> x_t,
                               std::span<const Cx> coil, const SamplingPattern& pattern,
                               int t, std::span<Cx> out) {
  const int h = pattern.height, w = pattern.width;
  const std::size_t px = static_cast<std::size_t>(h) * w;
  if (x_t.size() != px || coil.size() != px) throw std::invalid_argument("frame size mismatch");
  if (out.size() != pattern.samples_in_frame(t)) throw std::invalid_argument("sample span mismatch");
  for (std::size_t i = 0; i < px; ++i) ws.weighted[i] = coil[i] * x_t[i];

  if (pattern.kind == PatternKind::cartesian) {
    ws.fft.forward(ws.weighted, ws.kgrid);
    const auto m = pattern.mask_frame(t);
    std::size_t s = 0;
    for (std::size_t i = 0; i < px; ++i)
      if (m[i]) out[s++] = ws.kgrid[i];
  } else {
    const std::size_t base = pattern.offsets[t];
    for (std::size_t s = 0; s < out.size(); ++s) {
      const auto& k = pattern.points[base + s];
      out[s] = detail::direct_dft_point(ws.weighted, h, w, k[0], k[1]);
    }
  }
}

// accum_t += conj(S_c) . F_Omega^H { samples } for one (coil, frame) pair.
inline void adjoint_coil_frame(ForwardWorkspace& ws, std::span<const Cx> samples,
                               std::span<const Cx> coil, const SamplingPattern& pattern,
                               int t, std::span<Cx> accum) {
  const int h = pattern.height, w = pattern.width;
  const std::size_t px = static_cast<std::size_t>(h) * w;
  if (accum.size() != px || coil.size() != px) throw std::invalid_argument("frame size mismatch");
  if (samples.size() != pattern.samples_in_frame(t))
    throw std::invalid_argument("sample span mismatch");

  if (pattern.kind == PatternKind::cartesian) {
    std::fill(ws.kgrid.begin(), ws.kgrid.end(), Cx(0, 0));
    const auto m = pattern.mask_frame(t);
    std::size_t s = 0;
    for (std::size_t i = 0; i < px; ++i)
      if (m[i]) ws.kgrid[i] = samples[s++];
    ws.fft.inverse(ws.kgrid, ws.weighted);
  } else {
    std::fill(ws.weighted.begin(), ws.weighted.end(), Cx(0, 0));
    const std::size_t base = pattern.offsets[t];
    for (std::size_t s = 0; s < samples.size(); ++s) {
      const auto& k = pattern.points[base + s];
      detail::direct_dft_scatter(samples[s], h, w, k[0], k[1], ws.weighted);
    }
  }
  for (std::size_t i = 0; i < px; ++i) accum[i] += std::conj(coil[i]) * ws.weighted[i];
}

// Full-stack forward: returns predictions in dataset sample layout
// (coil-major, then frame, then sample).
inline std::vector<Cx> forward(const CineImage& x, const CoilMaps& coils,
                               const SamplingPattern& pattern, int n_threads = 1) {
  if (x.height != pattern.height || x.width != pattern.width || x.frames != pattern.frames)
    throw std::invalid_argument("image/pattern dims mismatch");
  if (coils.height != x.height || coils.width != x.width)
    throw std::invalid_argument("image/coil dims mismatch");
  pattern.validate();
  const std::size_t per_coil = pattern.total_samples();
  std::vector<Cx> out(static_cast<std::size_t>(coils.n_coils) * per_coil);
  parallel_blocks(0, pattern.frames, n_threads, [&](std::int64_t t0, std::int64_t t1) {
    ForwardWorkspace ws(x.height, x.width);
    for (std::int64_t t = t0; t < t1; ++t)
      for (int c = 0; c < coils.n_coils; ++c) {
        std::span<Cx> block(out.data() + c * per_coil + pattern.offsets[t],
                            pattern.samples_in_frame(static_cast<int>(t)));
        predict_coil_frame(ws, x.frame(static_cast<int>(t)), coils.map(c), pattern,
                           static_cast<int>(t), block);
      }
  });
  return out;
}

// Full-stack adjoint of `forward` applied to a sample vector in the same layout.
inline CineImage adjoint(std::span<const Cx> samples, const CoilMaps& coils,
                         const SamplingPattern& pattern, int n_threads = 1) {
  pattern.validate();
  const std::size_t per_coil = pattern.total_samples();
  if (samples.size() != static_cast<std::size_t>(coils.n_coils) * per_coil)
    throw std::invalid_argument("sample vector size mismatch");
  if (coils.height != pattern.height || coils.width != pattern.width)
    throw std::invalid_argument("coil/pattern dims mismatch");
  CineImage img(pattern.height, pattern.width, pattern.frames);
  parallel_blocks(0, pattern.frames, n_threads, [&](std::int64_t t0, std::int64_t t1) {
    ForwardWorkspace ws(pattern.height, pattern.width);
    for (std::int64_t t = t0; t < t1; ++t)
      for (int c = 0; c < coils.n_coils; ++c) {
        std::span<const Cx> block(samples.data() + c * per_coil + pattern.offsets[t],
                                  pattern.samples_in_frame(static_cast<int>(t)));
        adjoint_coil_frame(ws, block, coils.map(c), pattern, static_cast<int>(t),
                           img.frame(static_cast<int>(t)));
      }
  });
  return img;
}

// Data term sum_{c,t} ||y - yhat||^2 together with the per-pixel sensitivity
// stack a_t = -2 sum_c conj(S_c) . F^H-scatter(y - yhat)  (Wirtinger layout
// shared with the rasterizer's backward pass).
inline std::pair<Real, CineImage> data_loss_and_adjoint(const CineImage& x,
                                                        const KSpaceDataset& ds,
                                                        int n_threads = 1) {
  ds.check_consistent();
  if (x.height != ds.height || x.width != ds.width || x.frames != ds.frames)
    throw std::invalid_argument("image/dataset dims mismatch");
  CineImage a(ds.height, ds.width, ds.frames);
  std::vector<Real> frame_loss(static_cast<std::size_t>(ds.frames), Real(0));

  parallel_blocks(0, ds.frames, n_threads, [&](std::int64_t t0, std::int64_t t1) {
    ForwardWorkspace ws(ds.height, ds.width);
    std::vector<Cx> resid;
    for (std::int64_t ti = t0; ti < t1; ++ti) {
      const int t = static_cast<int>(ti);
      const std::size_t count = ds.pattern.samples_in_frame(t);
      resid.resize(count);
      Real loss = 0;
      for (int c = 0; c < ds.n_coils; ++c) {
        predict_coil_frame(ws, x.frame(t), ds.coils.map(c), ds.pattern, t, resid);
        const auto y = ds.sample_block(c, t);
        for (std::size_t s = 0; s < count; ++s) {
          resid[s] = y[s] - resid[s];
          loss += std::norm(resid[s]);
        }
        for (auto& r : resid) r *= Real(-2);
        adjoint_coil_frame(ws, resid, ds.coils.map(c), ds.pattern, t, a.frame(t));
      }
      frame_loss[static_cast<std::size_t>(t)] = loss;
    }
  });

  Real total = 0;
  for (Real v : frame_loss) total += v;
  return {total, std::move(a)};
}

}  // namespace cinesplat
