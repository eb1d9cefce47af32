#pragma once

#include <cstddef>
#include <vector>

namespace qns {

inline constexpr double kPi = 3.14159265358979323846;

// Default number of points for overlap-integral (χ) quadrature grids.
inline constexpr std::size_t kDefaultChiGrid = 4096;
// Default number of points for autocovariance (inverse-DFT) grids.
inline constexpr std::size_t kDefaultAutocovGrid = 8192;

// n uniformly spaced frequencies covering [0, pi], endpoints included.
inline std::vector<double> frequency_grid(std::size_t n) {
  std::vector<double> freqs(n);
  const double dx = kPi / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) freqs[i] = static_cast<double>(i) * dx;
  freqs.back() = kPi;
  return freqs;
}

// Trapezoid-rule weights for frequency_grid(n): plain dx, halved at the two
// endpoints. Because every spectrum here is even in ω, the trapezoid rule on
// [0, π] coincides with the full-circle rectangle rule and integrates smooth
// rational spectra to near machine precision.
inline std::vector<double> trapezoid_weights(std::size_t n) {
  const double dx = kPi / static_cast<double>(n - 1);
  std::vector<double> w(n, dx);
  w.front() *= 0.5;
  w.back() *= 0.5;
  return w;
}

}  // namespace qns
