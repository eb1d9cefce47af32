#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "qns/grid.hpp"

namespace qns {

// Interpolation rule attached to a sampled spectrum.
enum class Interpolation { none, cubic_spline };

// ARMA(p, q) noise model.
//
// Stored sign convention: coefficients are kept so that the power spectrum is
//
//   S(ω) = |Σ_{k=0}^{q} b_k e^{-ikω}|² / |1 + Σ_{k=1}^{p} c_k e^{-ikω}|²,
//
// and the matching time-domain recursion, driven by unit-variance Gaussian
// inputs x, is
//
//   y[n] = -Σ_{i=1}^{p} c_i y[n-i] + Σ_{j=0}^{q} b_j x[n-j].
//
// Note the minus sign: the textbook AR recursion coefficients are -c. All
// estimators in this library target the spectrum above, so coefficient values
// should only ever be compared through their spectra.
struct ArmaModel {
  std::vector<double> ar;  // c_1 .. c_p (dimensionless)
  std::vector<double> ma;  // b_0 .. b_q (radians of dephasing phase per step)

  std::size_t p() const { return ar.size(); }
  std::size_t q() const { return ma.empty() ? 0 : ma.size() - 1; }
};

// A power spectrum sampled on a frequency grid in [0, π] (radians/sample).
// Spectra are even in ω; only the non-negative half is stored, and every
// consumer treats them as symmetric.
struct SpectrumEstimate {
  std::vector<double> freqs;   // strictly increasing, within [0, π]
  std::vector<double> power;   // ≥ 0, phase-variance density
  Interpolation interpolation = Interpolation::none;
};

// Stationary autocovariance lags r[0..L-1] (phase-variance units).
struct AutocovarianceSeq {
  std::vector<double> lags;
};

// Evaluates the model's power spectrum on the given grid.
// Throws PoleOnGrid if the denominator |1 + Σ c_k e^{-ikω}|² falls below
// 1e-12 at any grid point.
SpectrumEstimate psd(const ArmaModel& model, const std::vector<double>& freqs);

// Single-frequency convenience wrapper around psd().
double psd_at(const ArmaModel& model, double freq);

// Stationary autocovariance of the model process. Pure-MA models use the
// closed form r[k] = Σ_{j=k}^{q} b_j b_{j-k}; otherwise r is recovered by the
// inverse DFT of the spectrum on a grid_points-point grid (accurate to better
// than 1e-6 relative for well-damped models). Throws NotStationary.
AutocovarianceSeq autocovariance(const ArmaModel& model, std::size_t num_lags,
                                 std::size_t grid_points = kDefaultAutocovGrid);

// Draws y[0..length-1] from the model recursion with unit-variance Gaussian
// drive, after discarding max(1000, 20·(p+q)) burn-in samples. Deterministic
// given the seed. Throws NotStationary.
std::vector<double> sample_trajectory(const ArmaModel& model,
                                      std::size_t length, std::uint64_t seed);

// True iff all roots of 1 + Σ c_k z^{-k} lie strictly inside the unit circle
// (checked via companion-matrix eigenvalues). Pure-MA models are always
// stationary.
bool is_stationary(const ArmaModel& model);

// Reflects any AR root with |z| ≥ 1 to 1/conj(z) and rescales the MA
// coefficients so the power spectrum is unchanged. Repair step for fitted
// models that are wanted for sampling.
ArmaModel reflect_to_stationary(const ArmaModel& model);

// AR(2) resonance builder: poles at pole_radius·e^{±i·center_freq}, i.e.
// ar = {-2·ρ·cos ω₀, ρ²}, ma = {b0}. The psd maximum sits near (not exactly
// at) center_freq for ρ < 1; use the psd itself when a precise peak location
// is needed.
ArmaModel make_ar2_peak(double center_freq, double pole_radius, double b0);

// --- serialization ---------------------------------------------------------

// JSON object {"ar": [...], "ma": [...]}; unknown keys are rejected.
std::string model_to_json(const ArmaModel& model);
ArmaModel model_from_json(const std::string& text);
void save_model(const ArmaModel& model, const std::string& path);
ArmaModel load_model(const std::string& path);  // throws MalformedFile

// CSV with header `freq,power`, one row per grid point, full double
// precision. Loading validates the header, monotone freqs and power ≥ 0.
void save_spectrum_csv(const SpectrumEstimate& spec, const std::string& path);
SpectrumEstimate load_spectrum_csv(const std::string& path);

}  // namespace qns
