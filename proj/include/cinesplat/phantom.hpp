#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include <nlohmann/json.hpp>

#include "cinesplat/common.hpp"
#include "cinesplat/forward_model.hpp"
#include "cinesplat/grid.hpp"

namespace cinesplat {

// Per-structure multiplicative intensity schedule 1 + depth*sin(2 pi t/T + phase),
// standing in for through-plane signal change.
struct IntensityMod {
  Real depth = 0;
  Real phase = 0;
  Real factor(int t, int frames) const {
    return Real(1) + depth * std::sin(kTwoPi * Real(t) / Real(frames) + phase);
  }
};

struct RingSpec {
  Vec2 center = Vec2::Zero();
  Real radius = 0.28;       // mean radius at t=0, normalized FOV units
  Real thickness = 0.10;    // wall thickness
  Real contraction = 0.3;   // fractional radius reduction at mid-cycle
  Cx amplitude = Cx(1, 0);
  IntensityMod mod;

  // r(t) = r0 (1 - a (1 - cos 2 pi t/T)/2): maximal at t=0, minimal mid-cycle.
  Real radius_at(int t, int frames) const {
    return radius * (Real(1) - contraction * (Real(1) - std::cos(kTwoPi * Real(t) / Real(frames))) / Real(2));
  }
};

struct EllipseSpec {
  Vec2 center = Vec2::Zero();
  Vec2 axes = Vec2(0.1, 0.1);  // semi-axes
  Real angle = 0;
  Cx amplitude = Cx(0, 0);
  IntensityMod mod;
};

struct PhantomSpec {
  int height = 64, width = 64, frames = 8;
  RingSpec ring;
  std::vector<EllipseSpec> ellipses;
  std::vector<Real> phase_poly = {0, 0, 0, 0, 0, 0};  // 1, x, y, x^2, xy, y^2
  std::uint64_t seed = 0;

  // Soft-edge transition width: two pixels at the declared native resolution.
  // Tied to these dimensions (not the render grid) so the phantom is one
  // fixed continuous function regardless of sampling density.
  Real edge_width() const { return Real(2) / Real(std::min(height, width)); }
};

namespace detail {

inline Real smooth01(Real u) {
  u = std::clamp(u, Real(0), Real(1));
  return u * u * (Real(3) - Real(2) * u);
}

// Coverage of a soft edge given signed inside-distance e and transition width w.
inline Real soft_step(Real e, Real w) { return smooth01(e / w + Real(0.5)); }

}  // namespace detail

// The phantom as a continuous function of normalized coordinates; pixel grids
// of any resolution sample it.
inline Cx phantom_value(const PhantomSpec& spec, int t, Vec2 r) {
  const Real w = spec.edge_width();
  Cx v(0, 0);

  const Real rad = spec.ring.radius_at(t, spec.frames);
  const Real rho = (r - spec.ring.center).norm();
  const Real inside_ring = std::min(rho - (rad - spec.ring.thickness / 2),
                                    (rad + spec.ring.thickness / 2) - rho);
  v += spec.ring.amplitude * spec.ring.mod.factor(t, spec.frames) *
       detail::soft_step(inside_ring, w);

  for (const EllipseSpec& e : spec.ellipses) {
    const Real c = std::cos(e.angle), s = std::sin(e.angle);
    const Vec2 d = r - e.center;
    const Real u = (c * d.x() + s * d.y()) / e.axes.x();
    const Real q = (-s * d.x() + c * d.y()) / e.axes.y();
    // Signed inside-distance, scaled back to FOV units by the minor axis.
    const Real inside = (Real(1) - std::sqrt(u * u + q * q)) * e.axes.minCoeff();
    v += e.amplitude * e.mod.factor(t, spec.frames) * detail::soft_step(inside, w);
  }

  const Real x = r.x(), y = r.y();
  const auto& p = spec.phase_poly;
  const Real phase = p[0] + p[1] * x + p[2] * y + p[3] * x * x + p[4] * x * y + p[5] * y * y;
  return v * std::polar(Real(1), phase);
}

inline CineImage render_phantom_at(const PhantomSpec& spec, int height, int width) {
  if (spec.frames < 1 || height < 4 || width < 4) throw std::invalid_argument("bad phantom dims");
  if (spec.ring.radius <= 0 || spec.ring.thickness <= 0 || spec.ring.radius + spec.ring.thickness / 2 >= Real(0.5))
    throw std::invalid_argument("degenerate ring geometry");
  for (const auto& e : spec.ellipses)
    if (e.axes.minCoeff() <= 0) throw std::invalid_argument("degenerate ellipse");
  CineImage img(height, width, spec.frames);
  for (int t = 0; t < spec.frames; ++t) {
    auto frame = img.frame(t);
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x)
        frame[static_cast<std::size_t>(y) * width + x] =
            phantom_value(spec, t, Vec2(pixel_coord(x, width), pixel_coord(y, height)));
  }
  return img;
}

inline CineImage render_phantom(const PhantomSpec& spec) {
  return render_phantom_at(spec, spec.height, spec.width);
}

// Smooth synthetic sensitivities: one Gaussian lobe per coil centered outside
// the FOV at equispaced angles plus a linear phase ramp, then normalized to
// unit root-sum-of-squares at every pixel.
inline CoilMaps make_coils(int n_coils, int height, int width, std::uint64_t seed) {
  if (n_coils < 1) throw std::invalid_argument("need at least one coil");
  CoilMaps cm(n_coils, height, width);
  Rng64 rng(seed);
  const Real angle0 = rng.uniform() * kTwoPi;
  const Real lobe_sigma = 0.6;
  const Real center_radius = 0.75;

  std::vector<Real> ramp_x(n_coils), ramp_y(n_coils), ramp_0(n_coils);
  for (int c = 0; c < n_coils; ++c) {
    ramp_x[c] = Real(2) * rng.normal();  // cycles/FOV-scale phase ramps
    ramp_y[c] = Real(2) * rng.normal();
    ramp_0[c] = rng.uniform() * kTwoPi;
  }

  for (int c = 0; c < n_coils; ++c) {
    const Real ang = angle0 + kTwoPi * Real(c) / Real(n_coils);
    const Vec2 center(center_radius * std::cos(ang), center_radius * std::sin(ang));
    auto map = cm.map(c);
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) {
        const Vec2 r(pixel_coord(x, width), pixel_coord(y, height));
        const Real mag = std::exp(-(r - center).squaredNorm() / (2 * lobe_sigma * lobe_sigma));
        const Real phase = ramp_0[c] + kTwoPi * (ramp_x[c] * r.x() + ramp_y[c] * r.y());
        map[static_cast<std::size_t>(y) * width + x] = std::polar(mag, phase);
      }
  }

  const std::size_t px = cm.pixels();
  for (std::size_t i = 0; i < px; ++i) {
    Real rss = 0;
    for (int c = 0; c < n_coils; ++c) rss += std::norm(cm.data[c * px + i]);
    const Real inv = Real(1) / std::sqrt(rss);
    for (int c = 0; c < n_coils; ++c) cm.data[c * px + i] *= inv;
  }
  return cm;
}

enum class MaskKind { uniform_random, variable_density, radial_points };

// Cartesian kinds sample full readout lines (rows of constant ky), always
// keeping `acs_lines` center lines; line patterns are re-drawn per frame from
// seed+t. The radial kind emits golden-angle spoke point sets.
inline SamplingPattern make_mask(MaskKind kind, Real accel, int frames, int height, int width,
                                 int acs_lines, std::uint64_t seed, int spokes = 0) {
  if (accel < 1) throw std::invalid_argument("acceleration must be >= 1");
  if (frames < 1) throw std::invalid_argument("need at least one frame");
  SamplingPattern p;
  p.frames = frames;
  p.height = height;
  p.width = width;

  if (kind == MaskKind::radial_points) {
    p.kind = PatternKind::points;
    const int k_max = std::min(height, width) / 2;
    if (spokes <= 0) spokes = std::max(1, static_cast<int>(std::lround(std::min(height, width) / accel)));
    p.offsets.assign(static_cast<std::size_t>(frames) + 1, 0);
    for (int t = 0; t < frames; ++t) {
      for (int i = 0; i < spokes; ++i) {
        const Real ang = Real(t * spokes + i) * kGoldenAngle;
        const Real cx = std::cos(ang), sy = std::sin(ang);
        for (int rad = -k_max; rad < k_max; ++rad)
          p.points.push_back({Real(rad) * cx, Real(rad) * sy});
      }
      p.offsets[t + 1] = p.points.size();
    }
    p.validate();
    return p;
  }

  p.kind = PatternKind::cartesian;
  const int target = static_cast<int>(std::floor(height / accel));
  if (target < acs_lines || target < 1)
    throw std::invalid_argument("acceleration incompatible with acs line count");
  p.mask.assign(static_cast<std::size_t>(frames) * height * width, 0);

  const int acs_start = height / 2 - acs_lines / 2;
  for (int t = 0; t < frames; ++t) {
    Rng64 rng(Rng64::derive(seed, static_cast<std::uint64_t>(t)));
    std::vector<std::uint8_t> line(static_cast<std::size_t>(height), 0);
    for (int y = acs_start; y < acs_start + acs_lines; ++y) line[y] = 1;

    std::vector<Real> weight(static_cast<std::size_t>(height));
    for (int y = 0; y < height; ++y) {
      if (line[y]) {
        weight[y] = 0;
        continue;
      }
      if (kind == MaskKind::variable_density) {
        const Real f = Real(index_to_freq(y, height));
        const Real s = Real(height) / Real(5);
        weight[y] = std::exp(-f * f / (2 * s * s));
      } else {
        weight[y] = 1;
      }
    }

    for (int drawn = acs_lines; drawn < target; ++drawn) {
      Real total = 0;
      for (Real v : weight) total += v;
      if (total <= 0) break;
      Real u = rng.uniform() * total;
      int pick = -1;
      for (int y = 0; y < height; ++y) {
        if (weight[y] <= 0) continue;
        pick = y;  // last positive-weight row doubles as the rounding fallback
        u -= weight[y];
        if (u < 0) break;
      }
      line[pick] = 1;
      weight[pick] = 0;
    }

    std::uint8_t* frame = p.mask.data() + static_cast<std::size_t>(t) * height * width;
    for (int y = 0; y < height; ++y)
      if (line[y])
        std::fill(frame + static_cast<std::size_t>(y) * width,
                  frame + static_cast<std::size_t>(y + 1) * width, std::uint8_t(1));
  }
  p.finalize();
  return p;
}

// Measures the ground-truth phantom through the coil/sampling operator and
// adds complex white Gaussian noise (std per real component).
inline KSpaceDataset simulate(const PhantomSpec& spec, const CoilMaps& coils,
                              const SamplingPattern& pattern, Real noise_std,
                              std::uint64_t seed, int n_threads = 1) {
  KSpaceDataset ds;
  ds.height = spec.height;
  ds.width = spec.width;
  ds.frames = spec.frames;
  ds.n_coils = coils.n_coils;
  ds.pattern = pattern;
  ds.coils = coils;
  ds.reference = render_phantom(spec);
  ds.noise_std = noise_std;
  ds.samples = forward(ds.reference, coils, pattern, n_threads);
  if (noise_std > 0) {
    Rng64 rng(seed);
    for (Cx& s : ds.samples) s += Cx(noise_std * rng.normal(), noise_std * rng.normal());
  }
  ds.check_consistent();
  return ds;
}

// A default scene: beating ring over a broad body ellipse with two smaller
// off-center structures, mild intensity modulation, and a smooth phase map.
inline PhantomSpec default_phantom(int height, int width, int frames) {
  PhantomSpec spec;
  spec.height = height;
  spec.width = width;
  spec.frames = frames;
  spec.ring.center = Vec2(0.02, -0.03);
  spec.ring.radius = 0.26;
  spec.ring.thickness = 0.10;
  spec.ring.contraction = 0.30;
  spec.ring.amplitude = Cx(1.0, 0.0);
  spec.ring.mod = {0.15, 0.7};

  EllipseSpec body;
  body.center = Vec2(0.0, 0.0);
  body.axes = Vec2(0.42, 0.38);
  body.angle = 0.2;
  body.amplitude = Cx(0.45, 0.0);
  spec.ellipses.push_back(body);

  EllipseSpec bright;
  bright.center = Vec2(-0.27, 0.22);
  bright.axes = Vec2(0.07, 0.05);
  bright.angle = -0.5;
  bright.amplitude = Cx(0.72, 0.25);
  bright.mod = {0.10, 2.1};
  spec.ellipses.push_back(bright);

  EllipseSpec dark;
  dark.center = Vec2(0.25, -0.26);
  dark.axes = Vec2(0.10, 0.08);
  dark.angle = 0.9;
  dark.amplitude = Cx(-0.30, 0.10);
  dark.mod = {0.08, 4.0};
  spec.ellipses.push_back(dark);

  spec.phase_poly = {0.3, 1.1, -0.8, 0.9, 0.5, -0.7};
  return spec;
}

// Benchmark variant: the default geometry plus a strong polynomial phase roll
// and seeded oriented stripe clusters scattered over the body.  Clinical cine
// frames carry exactly this kind of off-resonance phase and trabecular
// texture; the default phantom alone is too smooth to exercise carrier
// frequencies.  Deliberately not band-limited at its native grid, so
// resolution-consistency oracles should use default_phantom instead.
inline PhantomSpec benchmark_phantom(int height, int width, int frames) {
  PhantomSpec spec = default_phantom(height, width, frames);
  spec.phase_poly = {0.3, 44.0, -0.8, 30.0, 18.0, -0.7};

  Rng64 rng(Rng64::derive(spec.seed, 7));
  for (int placed = 0; placed < 8;) {
    const Real cx = (rng.uniform() - Real(0.5)) * Real(0.80);
    const Real cy = (rng.uniform() - Real(0.5)) * Real(0.72);
    if (cx * cx / Real(0.36 * 0.36) + cy * cy / Real(0.32 * 0.32) > 1) continue;
    const Real ang = (rng.uniform() - Real(0.5)) * kPi;
    const Real spacing = Real(0.034) + Real(0.016) * rng.uniform();
    const Real mag = Real(0.30) + Real(0.14) * rng.uniform();
    const Real patch_phase = Real(0.6) * (rng.uniform() - Real(0.5));
    const Real mod_depth = Real(0.06) + Real(0.08) * rng.uniform();
    const Real mod_phase = kTwoPi * rng.uniform();
    const Vec2 normal(std::cos(ang), std::sin(ang));
    for (int k = -2; k <= 2; ++k) {
      EllipseSpec s;
      s.center = Vec2(cx + Real(k) * spacing * normal.x(), cy + Real(k) * spacing * normal.y());
      s.axes = Vec2(0.015, 0.045);
      s.angle = ang;  // minor axis along the stripe normal: alternating bands
      const Real sign = (k % 2 == 0) ? 1 : -1;
      s.amplitude = sign * mag * std::polar(Real(1), patch_phase + Real(0.1) * k);
      s.mod = {mod_depth, mod_phase};
      spec.ellipses.push_back(s);
    }
    ++placed;
  }
  return spec;
}

inline nlohmann::json phantom_to_json(const PhantomSpec& spec) {
  nlohmann::json j;
  j["height"] = spec.height;
  j["width"] = spec.width;
  j["frames"] = spec.frames;
  j["seed"] = spec.seed;
  j["phase_poly"] = spec.phase_poly;
  j["ring"] = {{"center", {spec.ring.center.x(), spec.ring.center.y()}},
               {"radius", spec.ring.radius},
               {"thickness", spec.ring.thickness},
               {"contraction", spec.ring.contraction},
               {"amplitude", {spec.ring.amplitude.real(), spec.ring.amplitude.imag()}},
               {"mod", {spec.ring.mod.depth, spec.ring.mod.phase}}};
  j["ellipses"] = nlohmann::json::array();
  for (const auto& e : spec.ellipses) {
    j["ellipses"].push_back({{"center", {e.center.x(), e.center.y()}},
                             {"axes", {e.axes.x(), e.axes.y()}},
                             {"angle", e.angle},
                             {"amplitude", {e.amplitude.real(), e.amplitude.imag()}},
                             {"mod", {e.mod.depth, e.mod.phase}}});
  }
  return j;
}

inline PhantomSpec phantom_from_json(const nlohmann::json& j) {
  PhantomSpec spec;
  spec.height = j.at("height").get<int>();
  spec.width = j.at("width").get<int>();
  spec.frames = j.at("frames").get<int>();
  spec.seed = j.at("seed").get<std::uint64_t>();
  spec.phase_poly = j.at("phase_poly").get<std::vector<Real>>();
  if (spec.phase_poly.size() != 6) throw IoError("phase_poly must have 6 coefficients");
  const auto& r = j.at("ring");
  spec.ring.center = Vec2(r.at("center")[0].get<Real>(), r.at("center")[1].get<Real>());
  spec.ring.radius = r.at("radius").get<Real>();
  spec.ring.thickness = r.at("thickness").get<Real>();
  spec.ring.contraction = r.at("contraction").get<Real>();
  spec.ring.amplitude = Cx(r.at("amplitude")[0].get<Real>(), r.at("amplitude")[1].get<Real>());
  spec.ring.mod = {r.at("mod")[0].get<Real>(), r.at("mod")[1].get<Real>()};
  spec.ellipses.clear();
  for (const auto& ej : j.at("ellipses")) {
    EllipseSpec e;
    e.center = Vec2(ej.at("center")[0].get<Real>(), ej.at("center")[1].get<Real>());
    e.axes = Vec2(ej.at("axes")[0].get<Real>(), ej.at("axes")[1].get<Real>());
    e.angle = ej.at("angle").get<Real>();
    e.amplitude = Cx(ej.at("amplitude")[0].get<Real>(), ej.at("amplitude")[1].get<Real>());
    e.mod = {ej.at("mod")[0].get<Real>(), ej.at("mod")[1].get<Real>()};
    spec.ellipses.push_back(e);
  }
  return spec;
}

}  // namespace cinesplat
