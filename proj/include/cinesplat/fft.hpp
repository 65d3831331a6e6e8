#pragma once

#include <mutex>
#include <span>
#include <vector>

#include <fftw3.h>

#include "cinesplat/common.hpp"
#include "cinesplat/grid.hpp"

namespace cinesplat {

namespace detail {
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace detail

// Unitary centered 2D DFT on the half-pixel-offset grid:
//   Y(k) = (1/sqrt(HW)) sum_p x(p) exp(-i 2 pi k . r_p),
// with r_p = (p + 0.5)/D - 0.5 per dimension and k the integer frequency of
// grid index q, k = q - D/2. Implemented as pre/post phase ramps around an
// FFTW transform, so inverse() is the exact adjoint. Instances are not
// thread-safe (shared scratch buffer); use one per thread.
class CenteredFft2 {
 public:
  CenteredFft2(int height, int width)
      : h_(height), w_(width), buf_(static_cast<std::size_t>(height) * width) {
    pre_y_ = make_pre(h_);
    pre_x_ = make_pre(w_);
    post_y_ = make_post(h_);
    post_x_ = make_post(w_);
    auto* raw = reinterpret_cast<fftw_complex*>(buf_.data());
    std::lock_guard<std::mutex> lock(detail::fftw_planner_mutex());
    fwd_ = fftw_plan_dft_2d(h_, w_, raw, raw, FFTW_FORWARD, FFTW_ESTIMATE);
    bwd_ = fftw_plan_dft_2d(h_, w_, raw, raw, FFTW_BACKWARD, FFTW_ESTIMATE);
  }

  ~CenteredFft2() {
    std::lock_guard<std::mutex> lock(detail::fftw_planner_mutex());
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(bwd_);
  }

  CenteredFft2(const CenteredFft2&) = delete;
  CenteredFft2& operator=(const CenteredFft2&) = delete;

  int height() const { return h_; }
  int width() const { return w_; }

  void forward(std::span<const Cx> in, std::span<Cx> out) {
    apply(in, out, /*inverse=*/false);
  }

  void inverse(std::span<const Cx> in, std::span<Cx> out) {
    apply(in, out, /*inverse=*/true);
  }

 private:
  // pre[p] = exp(+i 2 pi (D/2) (p + 0.5)/D), post[q] = exp(i pi (q - D/2))
  // * exp(-i pi q / D); together they move the FFT onto the centered grid.
  static std::vector<Cx> make_pre(int d) {
    std::vector<Cx> v(static_cast<std::size_t>(d));
    const int c = d / 2;
    for (int p = 0; p < d; ++p)
      v[p] = std::polar(Real(1), kTwoPi * c * (p + Real(0.5)) / d);
    return v;
  }

  static std::vector<Cx> make_post(int d) {
    std::vector<Cx> v(static_cast<std::size_t>(d));
    const int c = d / 2;
    for (int q = 0; q < d; ++q)
      v[q] = std::polar(Real(1), kPi * (q - c) - kPi * q / d);
    return v;
  }

  void apply(std::span<const Cx> in, std::span<Cx> out, bool inverse) {
    const Real scale = Real(1) / std::sqrt(Real(h_) * Real(w_));
    if (!inverse) {
      for (int y = 0; y < h_; ++y)
        for (int x = 0; x < w_; ++x)
          buf_[idx(y, x)] = in[idx(y, x)] * pre_y_[y] * pre_x_[x];
      auto* raw = reinterpret_cast<fftw_complex*>(buf_.data());
      fftw_execute_dft(fwd_, raw, raw);
      for (int y = 0; y < h_; ++y)
        for (int x = 0; x < w_; ++x)
          out[idx(y, x)] = buf_[idx(y, x)] * post_y_[y] * post_x_[x] * scale;
    } else {
      for (int y = 0; y < h_; ++y)
        for (int x = 0; x < w_; ++x)
          buf_[idx(y, x)] =
              in[idx(y, x)] * std::conj(post_y_[y] * post_x_[x]);
      auto* raw = reinterpret_cast<fftw_complex*>(buf_.data());
      fftw_execute_dft(bwd_, raw, raw);
      for (int y = 0; y < h_; ++y)
        for (int x = 0; x < w_; ++x)
          out[idx(y, x)] =
              buf_[idx(y, x)] * std::conj(pre_y_[y] * pre_x_[x]) * scale;
    }
  }

  std::size_t idx(int y, int x) const {
    return static_cast<std::size_t>(y) * w_ + x;
  }

  int h_, w_;
  std::vector<Cx> pre_y_, pre_x_, post_y_, post_x_;
  std::vector<Cx> buf_;
  fftw_plan fwd_, bwd_;
};

}  // namespace cinesplat
