#pragma once

#include <cmath>

#include "cinesplat/common.hpp"

namespace cinesplat {

// Anisotropic 2x2 covariance Sigma = R(theta) diag(s1^2, s2^2) R(theta)^T,
// with the per-axis scales stored as logarithms.
struct Covariance2 {
  Real theta = 0;
  Vec2 log_s = Vec2::Zero();

  Vec2 scales() const { return log_s.array().exp().matrix(); }

  Mat2 rotation() const {
    const Real c = std::cos(theta), s = std::sin(theta);
    Mat2 r;
    r << c, -s, s, c;
    return r;
  }

  Mat2 sigma() const {
    const Mat2 r = rotation();
    const Vec2 s2 = (Real(2) * log_s).array().exp().matrix();
    return r * s2.asDiagonal() * r.transpose();
  }

  Mat2 sigma_inv() const {
    const Mat2 r = rotation();
    const Vec2 inv_s2 = (Real(-2) * log_s).array().exp().matrix();
    return r * inv_s2.asDiagonal() * r.transpose();
  }

  Real det_sigma() const { return std::exp(Real(2) * log_s.sum()); }
};

// One primitive's geometry and weight at a single frame.
struct FrameGeometry {
  Vec2 mu = Vec2::Zero();
  Covariance2 cov;
  Vec2 xi = Vec2::Zero();
  Cx weight = Cx(1, 0);
};

// Complex Gabor atom: carrier exp(i 2 pi xi.(r - mu)) times a Gaussian
// envelope. Exactly real (imaginary part 0) when xi == 0.
inline Cx eval_primitive(const FrameGeometry& g, const Vec2& r) {
  const Vec2 d = r - g.mu;
  const Real q = d.dot(g.cov.sigma_inv() * d);
  const Real env = std::exp(Real(-0.5) * q);
  if (g.xi.x() == Real(0) && g.xi.y() == Real(0)) return Cx(env, 0);
  return std::polar(env, kTwoPi * g.xi.dot(d));
}

// Continuous Fourier transform of the atom at frequency k (cycles/FOV):
// a Gaussian blob of covariance (4 pi^2 Sigma)^{-1} centered at xi, carrying
// the translation phase exp(-i 2 pi k.mu).
inline Cx spectrum_closed_form(const FrameGeometry& g, const Vec2& k) {
  const Vec2 dk = k - g.xi;
  const Real q = dk.dot(g.cov.sigma() * dk);
  const Vec2 s = g.cov.scales();
  const Real mag = kTwoPi * s.x() * s.y() * std::exp(Real(-2) * kPi * kPi * q);
  return std::polar(mag, -kTwoPi * k.dot(g.mu));
}

struct Box2 {
  Vec2 lo = Vec2::Zero();
  Vec2 hi = Vec2::Zero();
};

// Tightest axis-aligned box containing the n_sigma Mahalanobis ellipse:
// half-width along dimension d is n_sigma * sqrt(Sigma_dd).
inline Box2 support_box(const FrameGeometry& g, Real n_sigma) {
  const Mat2 sig = g.cov.sigma();
  const Vec2 half(n_sigma * std::sqrt(sig(0, 0)), n_sigma * std::sqrt(sig(1, 1)));
  return {g.mu - half, g.mu + half};
}

}  // namespace cinesplat
