#include <catch2/catch_amalgamated.hpp>

#include <Eigen/LU>

#include <cmath>

#include "cinesplat/common.hpp"
#include "cinesplat/primitive.hpp"

using namespace cinesplat;

namespace {

FrameGeometry sample_geometry() {
  FrameGeometry g;
  g.mu = Vec2(0.07, -0.04);
  g.cov.theta = 0.6;
  g.cov.log_s = Vec2(std::log(0.05), std::log(0.11));
  g.xi = Vec2(3.5, -2.0);
  g.weight = Cx(0.8, -0.3);
  return g;
}

}  // namespace

TEST_CASE("covariance factorization identities") {
  Covariance2 c;
  c.theta = 1.1;
  c.log_s = Vec2(std::log(0.03), std::log(0.2));

  const Mat2 prod = c.sigma() * c.sigma_inv();
  CHECK(std::abs(prod(0, 0) - 1) < 1e-12);
  CHECK(std::abs(prod(1, 1) - 1) < 1e-12);
  CHECK(std::abs(prod(0, 1)) < 1e-12);
  CHECK(std::abs(prod(1, 0)) < 1e-12);
  CHECK(c.sigma().determinant() == Catch::Approx(c.det_sigma()).epsilon(1e-12));

  // Rotating by theta maps the x axis onto the first principal axis.
  const Vec2 axis = c.rotation().col(0);
  const Real s1 = c.scales().x();
  CHECK(axis.dot(c.sigma() * axis) == Catch::Approx(s1 * s1).epsilon(1e-12));
}

TEST_CASE("atom value matches an explicitly assembled quadratic form") {
  const FrameGeometry g = sample_geometry();
  const Vec2 r(0.11, 0.02);

  // Independent reconstruction from scalars only.
  const Real c = std::cos(g.cov.theta), s = std::sin(g.cov.theta);
  const Real s1 = std::exp(g.cov.log_s.x()), s2 = std::exp(g.cov.log_s.y());
  const Real dx = r.x() - g.mu.x(), dy = r.y() - g.mu.y();
  const Real e1 = (c * dx + s * dy) / s1;   // coordinates in the rotated frame
  const Real e2 = (-s * dx + c * dy) / s2;
  const Real env = std::exp(-0.5 * (e1 * e1 + e2 * e2));
  const Real phase = kTwoPi * (g.xi.x() * dx + g.xi.y() * dy);
  const Cx expect(env * std::cos(phase), env * std::sin(phase));

  const Cx got = eval_primitive(g, r);
  CHECK(std::abs(got - expect) < 1e-14);
}

TEST_CASE("zero modulation gives an exactly real value") {
  FrameGeometry g = sample_geometry();
  g.xi = Vec2::Zero();
  for (Real y : {-0.31, 0.0, 0.27}) {
    for (Real x : {-0.4, 0.05, 0.33}) {
      const Cx v = eval_primitive(g, Vec2(x, y));
      CHECK(v.imag() == 0.0);
      CHECK(v.real() > 0.0);
    }
  }
}

TEST_CASE("closed-form spectrum matches numerical integration") {
  // Atom small enough that essentially all mass lies inside the FOV, so a
  // Riemann sum over [-0.5, 0.5)^2 approximates the integral over the plane.
  FrameGeometry g;
  g.mu = Vec2(0.05, -0.08);
  g.cov.theta = -0.8;
  g.cov.log_s = Vec2(std::log(0.04), std::log(0.07));
  g.xi = Vec2(4.0, -6.0);

  const int n = 512;
  const Real cell = Real(1) / n;
  for (const Vec2 k : {Vec2(0, 0), Vec2(3, -5), Vec2(-7, 2), Vec2(4.5, -6.5)}) {
    Cx acc(0, 0);
    for (int iy = 0; iy < n; ++iy) {
      for (int ix = 0; ix < n; ++ix) {
        const Vec2 r(pixel_coord(ix, n), pixel_coord(iy, n));
        acc += eval_primitive(g, r) * std::polar(Real(1), -kTwoPi * k.dot(r));
      }
    }
    acc *= cell * cell;
    const Cx closed = spectrum_closed_form(g, k);
    CHECK(std::abs(acc - closed) < 1e-6 * (std::abs(closed) + 1));
  }
}

TEST_CASE("spectrum peaks at the modulation frequency") {
  const FrameGeometry g = sample_geometry();
  const Real at_xi = std::abs(spectrum_closed_form(g, g.xi));
  CHECK(at_xi == Catch::Approx(kTwoPi * g.cov.scales().prod()).epsilon(1e-12));
  CHECK(std::abs(spectrum_closed_form(g, g.xi + Vec2(1, 0))) < at_xi);
  CHECK(std::abs(spectrum_closed_form(g, g.xi + Vec2(0, -2))) < at_xi);
}

TEST_CASE("support box tightly bounds the mahalanobis ellipse") {
  const FrameGeometry g = sample_geometry();
  const Real n_sigma = 3.0;
  const Box2 box = support_box(g, n_sigma);

  // Ellipse boundary: mu + R diag(s) * n_sigma (cos phi, sin phi).
  const Mat2 rot = g.cov.rotation();
  const Vec2 s = g.cov.scales();
  Real max_x = -1e30, max_y = -1e30;
  for (int i = 0; i < 4096; ++i) {
    const Real phi = kTwoPi * i / 4096;
    const Vec2 p = g.mu + rot * Vec2(n_sigma * s.x() * std::cos(phi),
                                     n_sigma * s.y() * std::sin(phi));
    CHECK(p.x() >= box.lo.x() - 1e-12);
    CHECK(p.x() <= box.hi.x() + 1e-12);
    CHECK(p.y() >= box.lo.y() - 1e-12);
    CHECK(p.y() <= box.hi.y() + 1e-12);
    max_x = std::max(max_x, p.x());
    max_y = std::max(max_y, p.y());
  }
  CHECK(box.hi.x() - max_x < 1e-4);  // tight, not just containing
  CHECK(box.hi.y() - max_y < 1e-4);
}
