#pragma once

// Shared test utilities: deterministic fixture builders and small numeric
// helpers used across the unit-test files.

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "qns/arma_core.hpp"
#include "qns/grid.hpp"
#include "qns/probe.hpp"
#include "qns/rng.hpp"

namespace qns_test {

inline double rel_err(double got, double want) {
  return std::abs(got - want) / std::max(std::abs(want), 1e-300);
}

// Relative L2 distance between two spectra sampled on the same grid.
inline double rel_l2(const std::vector<double>& est,
                     const std::vector<double>& truth) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    num += (est[i] - truth[i]) * (est[i] - truth[i]);
    den += truth[i] * truth[i];
  }
  return std::sqrt(num / den);
}

// Random stationary ARMA model built from conjugate pole pairs with radius
// in [0.15, 0.85] (plus one real pole when p is odd), so spectra stay smooth
// enough for the default quadrature grids. Deterministic in the rng state.
inline qns::ArmaModel random_stationary_model(qns::CounterRng& rng,
                                              std::size_t p, std::size_t q) {
  std::vector<double> poly{1.0};
  auto mul = [&poly](const std::vector<double>& factor) {
    std::vector<double> next(poly.size() + factor.size() - 1, 0.0);
    for (std::size_t i = 0; i < poly.size(); ++i)
      for (std::size_t j = 0; j < factor.size(); ++j)
        next[i + j] += poly[i] * factor[j];
    poly = next;
  };
  std::size_t pairs = p / 2;
  for (std::size_t i = 0; i < pairs; ++i) {
    double rho = 0.15 + 0.7 * rng.uniform();
    double ang = qns::kPi * rng.uniform();
    mul({1.0, -2.0 * rho * std::cos(ang), rho * rho});
  }
  if (p % 2 == 1) {
    double root = (rng.uniform() < 0.5 ? -1.0 : 1.0) * (0.15 + 0.7 * rng.uniform());
    mul({1.0, -root});
  }
  qns::ArmaModel m;
  m.ar.assign(poly.begin() + 1, poly.end());
  m.ma.resize(q + 1);
  m.ma[0] = 0.05 + 0.25 * rng.uniform();
  for (std::size_t j = 1; j <= q; ++j) m.ma[j] = 0.3 * m.ma[0] * rng.normal();
  return m;
}

// Location of the psd maximum on a dense grid, parabolically refined.
inline double psd_peak_location(const qns::ArmaModel& model,
                                std::size_t grid_points = 4096) {
  auto freqs = qns::frequency_grid(grid_points);
  auto spec = qns::psd(model, freqs);
  std::size_t best = 0;
  for (std::size_t i = 1; i < spec.power.size(); ++i)
    if (spec.power[i] > spec.power[best]) best = i;
  double w = freqs[best];
  if (best > 0 && best + 1 < spec.power.size()) {
    const double y0 = spec.power[best - 1];
    const double y1 = spec.power[best];
    const double y2 = spec.power[best + 1];
    const double den = y0 - 2.0 * y1 + y2;
    if (den < 0.0) {
      double d = std::clamp(0.5 * (y0 - y2) / den, -0.5, 0.5);
      w += d * (freqs[1] - freqs[0]);
    }
  }
  return w;
}

// Scales model.ma so the largest overlap integral across the sequences hits
// the requested value.
inline void scale_to_max_chi(qns::ArmaModel& model,
                             const std::vector<qns::ProbeSequence>& seqs,
                             double target_chi) {
  double mx = 0.0;
  for (const auto& s : seqs) mx = std::max(mx, qns::overlap_chi_time(model, s));
  const double factor = std::sqrt(target_chi / mx);
  for (double& b : model.ma) b *= factor;
}

// Unique scratch directory under the system temp root, removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::uint64_t counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("qns_test_" + tag + "_" + std::to_string(++counter) + "_" +
             std::to_string(static_cast<unsigned long long>(::getpid())));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const {
    return (path_ / name).string();
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace qns_test
