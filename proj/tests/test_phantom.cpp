#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>
#include <vector>

#include "cinesplat/common.hpp"
#include "cinesplat/metrics.hpp"
#include "cinesplat/phantom.hpp"

using namespace cinesplat;

TEST_CASE("phantom rendering is deterministic") {
  const PhantomSpec spec = default_phantom(32, 32, 4);
  const CineImage a = render_phantom(spec);
  const CineImage b = render_phantom(spec);
  REQUIRE(a.data.size() == b.data.size());
  for (std::size_t i = 0; i < a.data.size(); ++i) REQUIRE(a.data[i] == b.data[i]);
}

TEST_CASE("phantom is resolution-independent up to sampling error") {
  PhantomSpec spec = default_phantom(64, 64, 3);
  const CineImage coarse = render_phantom(spec);
  const CineImage fine = render_phantom_at(spec, 128, 128);

  // Area-averaging the 2x render should land close to the 1x point samples;
  // they differ only inside the fixed-width soft edges.
  for (int t = 0; t < spec.frames; ++t) {
    ComplexGrid fine_grid(128, 128);
    std::copy(fine.frame(t).begin(), fine.frame(t).end(), fine_grid.data.begin());
    const ComplexGrid avg = area_average(fine_grid, 2);
    CHECK(nrmse(avg.data, coarse.frame(t)) < 0.02);
  }
}

TEST_CASE("ring radius contracts mid-cycle and recovers") {
  const PhantomSpec spec = default_phantom(64, 64, 8);
  const Real r0 = spec.ring.radius_at(0, spec.frames);
  const Real rmid = spec.ring.radius_at(4, spec.frames);
  CHECK(r0 == Catch::Approx(spec.ring.radius));
  CHECK(rmid == Catch::Approx(spec.ring.radius * (1 - spec.ring.contraction)));
  CHECK(rmid < r0);
  // One full period: frame T maps back to frame 0.
  CHECK(spec.ring.radius_at(8, 8) == Catch::Approx(r0).epsilon(1e-12));
}

TEST_CASE("coil maps have unit root-sum-of-squares everywhere") {
  const CoilMaps cm = make_coils(5, 24, 20, 123);
  const std::size_t px = cm.pixels();
  for (std::size_t i = 0; i < px; ++i) {
    Real rss = 0;
    for (int c = 0; c < 5; ++c) rss += std::norm(cm.data[c * px + i]);
    CHECK(std::abs(rss - 1) < 1e-12);
  }
  const CoilMaps again = make_coils(5, 24, 20, 123);
  for (std::size_t i = 0; i < cm.data.size(); ++i) REQUIRE(again.data[i] == cm.data[i]);
}

TEST_CASE("cartesian masks keep the line budget and the center block") {
  const int h = 64, w = 64, frames = 6, acs = 4;
  for (MaskKind kind : {MaskKind::uniform_random, MaskKind::variable_density}) {
    const SamplingPattern p = make_mask(kind, 4.0, frames, h, w, acs, 5);
    for (int t = 0; t < frames; ++t) {
      auto m = p.mask_frame(t);
      int lines = 0;
      for (int y = 0; y < h; ++y) {
        // Full readout rows only: a row is all-on or all-off.
        bool any = false, all = true;
        for (int x = 0; x < w; ++x) {
          const bool on = m[static_cast<std::size_t>(y) * w + x] != 0;
          any |= on;
          all &= on;
        }
        REQUIRE(any == all);
        lines += any;
      }
      CHECK(lines == 16);  // floor(64/4), acs included
      for (int y = h / 2 - acs / 2; y < h / 2 - acs / 2 + acs; ++y)
        CHECK(m[static_cast<std::size_t>(y) * w] == 1);
    }
  }
}

TEST_CASE("variable density concentrates lines near the center") {
  const int h = 64, w = 64, frames = 40;
  const SamplingPattern vd = make_mask(MaskKind::variable_density, 4.0, frames, h, w, 4, 6);
  const SamplingPattern un = make_mask(MaskKind::uniform_random, 4.0, frames, h, w, 4, 6);
  const auto center_fraction = [&](const SamplingPattern& p) {
    int center = 0, total = 0;
    for (int t = 0; t < frames; ++t) {
      auto m = p.mask_frame(t);
      for (int y = 0; y < h; ++y) {
        if (!m[static_cast<std::size_t>(y) * w]) continue;
        ++total;
        if (std::abs(index_to_freq(y, h)) <= h / 8) ++center;
      }
    }
    return Real(center) / Real(total);
  };
  CHECK(center_fraction(vd) > center_fraction(un) + 0.1);
}

TEST_CASE("masks differ between frames but are reproducible per seed") {
  const SamplingPattern a = make_mask(MaskKind::variable_density, 4.0, 4, 64, 64, 4, 7);
  const SamplingPattern b = make_mask(MaskKind::variable_density, 4.0, 4, 64, 64, 4, 7);
  REQUIRE(a.mask == b.mask);
  bool any_difference = false;
  for (int t = 1; t < 4; ++t)
    if (!std::equal(a.mask_frame(t).begin(), a.mask_frame(t).end(), a.mask_frame(0).begin()))
      any_difference = true;
  CHECK(any_difference);

  const SamplingPattern c = make_mask(MaskKind::variable_density, 4.0, 4, 64, 64, 4, 8);
  CHECK(a.mask != c.mask);
}

TEST_CASE("radial spokes advance by the golden angle and stay in band") {
  const int h = 32, w = 32, frames = 3;
  const SamplingPattern p = make_mask(MaskKind::radial_points, 4.0, frames, h, w, 0, 9);
  const int k_max = 16;
  const int spokes = 8;  // round(32 / 4)
  REQUIRE(p.samples_in_frame(0) == static_cast<std::size_t>(spokes) * 2 * k_max);

  std::set<long long> angle_keys;
  for (int t = 0; t < frames; ++t) {
    const std::size_t base = p.offsets[t];
    for (int i = 0; i < spokes; ++i) {
      const auto& far = p.points[base + static_cast<std::size_t>(i) * 2 * k_max];  // radius -k_max
      CHECK(std::hypot(far[0], far[1]) == Catch::Approx(Real(k_max)).epsilon(1e-12));
      const Real expect = Real(t * spokes + i) * kGoldenAngle;
      const Real got = std::atan2(-far[1], -far[0]);  // flip: stored point is at negative radius
      const Real wrapped = std::remainder(expect - got, kTwoPi);
      CHECK(std::abs(wrapped) < 1e-9);
      angle_keys.insert(std::llround(std::remainder(expect, kTwoPi) * 1e6));
    }
  }
  CHECK(angle_keys.size() == static_cast<std::size_t>(frames * spokes));  // no repeated spokes
  for (const auto& pt : p.points) {
    CHECK(std::abs(pt[0]) <= nyquist(w));
    CHECK(std::abs(pt[1]) <= nyquist(h));
  }
}

TEST_CASE("simulation without noise reproduces the measured reference exactly") {
  const PhantomSpec spec = default_phantom(24, 24, 3);
  const CoilMaps coils = make_coils(3, 24, 24, 11);
  const SamplingPattern pat = make_mask(MaskKind::variable_density, 2.0, 3, 24, 24, 4, 12);
  const KSpaceDataset ds = simulate(spec, coils, pat, 0.0, 13);

  REQUIRE(ds.has_reference());
  const auto expect = forward(ds.reference, coils, pat);
  REQUIRE(ds.samples.size() == expect.size());
  for (std::size_t i = 0; i < expect.size(); ++i) REQUIRE(ds.samples[i] == expect[i]);

  const KSpaceDataset noisy = simulate(spec, coils, pat, 0.05, 13);
  const KSpaceDataset noisy2 = simulate(spec, coils, pat, 0.05, 13);
  REQUIRE(noisy.samples == noisy2.samples);
  CHECK(noisy.samples != ds.samples);
}

TEST_CASE("benchmark phantom enriches the default with texture and phase") {
  const PhantomSpec base = default_phantom(64, 64, 8);
  const PhantomSpec bench = benchmark_phantom(64, 64, 8);
  CHECK(bench.ellipses.size() > base.ellipses.size());
  CHECK(bench.ring.radius == base.ring.radius);  // same beating ring underneath
  CHECK(std::abs(bench.phase_poly[1]) > std::abs(base.phase_poly[1]));

  const CineImage a = render_phantom(bench);
  const CineImage b = render_phantom(bench);
  REQUIRE(a.data.size() == b.data.size());
  for (std::size_t i = 0; i < a.data.size(); ++i) REQUIRE(a.data[i] == b.data[i]);
  for (const Cx& v : a.data) REQUIRE(std::isfinite(std::abs(v)));
}

TEST_CASE("phantom spec round-trips through json") {
  PhantomSpec spec = default_phantom(48, 40, 6);
  spec.seed = 99;
  const PhantomSpec back = phantom_from_json(phantom_to_json(spec));
  CHECK(back.height == spec.height);
  CHECK(back.width == spec.width);
  CHECK(back.frames == spec.frames);
  CHECK(back.seed == spec.seed);
  CHECK(back.phase_poly == spec.phase_poly);
  CHECK(back.ring.center == spec.ring.center);
  CHECK(back.ring.radius == spec.ring.radius);
  CHECK(back.ring.amplitude == spec.ring.amplitude);
  REQUIRE(back.ellipses.size() == spec.ellipses.size());
  for (std::size_t i = 0; i < spec.ellipses.size(); ++i) {
    CHECK(back.ellipses[i].center == spec.ellipses[i].center);
    CHECK(back.ellipses[i].axes == spec.ellipses[i].axes);
    CHECK(back.ellipses[i].angle == spec.ellipses[i].angle);
    CHECK(back.ellipses[i].amplitude == spec.ellipses[i].amplitude);
  }
  const CineImage a = render_phantom(spec);
  const CineImage b = render_phantom(back);
  for (std::size_t i = 0; i < a.data.size(); ++i) REQUIRE(a.data[i] == b.data[i]);
}
