#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "cinesplat/common.hpp"

namespace cinesplat {

// Single complex-valued frame, row-major (data[y * width + x]).
struct ComplexGrid {
  int height = 0;
  int width = 0;
  std::vector<Cx> data;

  ComplexGrid() = default;
  ComplexGrid(int h, int w)
      : height(h), width(w), data(static_cast<std::size_t>(h) * w, Cx(0, 0)) {}

  Cx& at(int y, int x) { return data[static_cast<std::size_t>(y) * width + x]; }
  const Cx& at(int y, int x) const {
    return data[static_cast<std::size_t>(y) * width + x];
  }
  std::size_t size() const { return data.size(); }
};

// Complex cine stack, frame-major then row-major.
struct CineImage {
  int height = 0;
  int width = 0;
  int frames = 0;
  std::vector<Cx> data;

  CineImage() = default;
  CineImage(int h, int w, int t)
      : height(h),
        width(w),
        frames(t),
        data(static_cast<std::size_t>(h) * w * t, Cx(0, 0)) {}

  std::size_t frame_size() const {
    return static_cast<std::size_t>(height) * width;
  }
  std::span<Cx> frame(int t) {
    return {data.data() + frame_size() * t, frame_size()};
  }
  std::span<const Cx> frame(int t) const {
    return {data.data() + frame_size() * t, frame_size()};
  }
};

inline Real l2_norm(std::span<const Cx> v) {
  Real acc = 0;
  for (const Cx& z : v) acc += std::norm(z);
  return std::sqrt(acc);
}

inline Cx inner_product(std::span<const Cx> a, std::span<const Cx> b) {
  Cx acc(0, 0);
  for (std::size_t i = 0; i < a.size(); ++i) acc += std::conj(a[i]) * b[i];
  return acc;
}

}  // namespace cinesplat
