#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace cinesplat {

using Real = double;
using Cx = std::complex<Real>;
using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

inline constexpr Real kPi = std::numbers::pi_v<Real>;
inline constexpr Real kTwoPi = Real(2) * kPi;

// Golden-angle increment for radial spokes, pi / golden ratio (~111.246 deg).
inline const Real kGoldenAngle = kPi / ((Real(1) + std::sqrt(Real(5))) / Real(2));

inline constexpr int kDatasetFormatVersion = 1;
inline constexpr int kModelFormatVersion = 1;
inline constexpr int kReportFormatVersion = 1;

// Coordinate tag written into every file header. Image coordinates live in
// [-0.5, 0.5)^2 with pixel p mapping to (p + 0.5)/D - 0.5 per dimension;
// frequencies are integer cycles/FOV with DC at index D/2.
inline constexpr const char* kCoordConvention = "centered-unit-fov-v1";

inline Real pixel_coord(int p, int dim) {
  return (Real(p) + Real(0.5)) / Real(dim) - Real(0.5);
}

// Frequency (cycles/FOV) carried by grid index q, and back.
inline int index_to_freq(int q, int dim) { return q - dim / 2; }
inline int freq_to_index(int k, int dim) { return k + dim / 2; }

inline Real nyquist(int dim) { return Real(dim) / Real(2); }

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// |z| smoothed near zero so l1 terms stay differentiable.
inline Real smooth_abs(Cx z, Real eps) {
  return std::sqrt(std::norm(z) + eps * eps);
}

// Seeded RNG with explicit bit-to-double conversion and Box-Muller normals.
// std:: distributions are implementation-defined, which would break the
// bitwise-reproducibility contracts, so all draws go through this.
class Rng64 {
 public:
  explicit Rng64(std::uint64_t seed) : gen_(seed) {}

  // Mixes a stream index into a seed (per-frame masks etc.).
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + (stream + 1) * 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  std::uint64_t bits() { return gen_(); }

  Real uniform() {  // [0, 1)
    return Real(bits() >> 11) * 0x1.0p-53;
  }

  Real normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const Real u1 = Real((bits() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
    const Real u2 = uniform();
    const Real r = std::sqrt(Real(-2) * std::log(u1));
    spare_ = r * std::sin(kTwoPi * u2);
    have_spare_ = true;
    return r * std::cos(kTwoPi * u2);
  }

 private:
  std::mt19937_64 gen_;
  Real spare_ = 0;
  bool have_spare_ = false;
};

}  // namespace cinesplat
