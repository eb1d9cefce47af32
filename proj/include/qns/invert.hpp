#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <vector>

#include "qns/arma_core.hpp"
#include "qns/sim.hpp"

namespace qns {

// Per-sequence overlap integrals extracted from measured probabilities, with
// the count of values that had to be clipped at the p ≤ ½ boundary.
struct ChiVector {
  std::vector<double> values;
  std::size_t clip_count = 0;
};

// Linear model χ ≈ F·S on the band grid: row k holds sequence k's filter
// values at the estimation frequencies, folded with the Riemann weight ω*/π
// so that S comes out directly as a power density.
struct FilterMatrix {
  Eigen::MatrixXd entries;     // sequences × frequencies
  std::vector<double> freqs;   // estimation frequencies (FTTPS band grid)
};

// NNLS solver diagnostics.
struct NnlsInfo {
  double residual = 0.0;       // ‖F·S − χ‖₂ at the solution
  std::size_t iterations = 0;  // active-set iterations
};

// χ_k = −ln(2(p_k − ½)) for p_k > ½ + ε; smaller probabilities clip to
// χ_max = −ln(2ε) and are counted. ε = 1/(2·shots), floored at 1e-6 (and the
// floor alone applies when shots = 0, i.e. exact data).
ChiVector chi_from_probs(const QnsDataset& dataset);

// FTTPS band grid {jπ/K : j = 1..num_sequences}.
std::vector<double> fttps_peak_grid(std::size_t gate_count,
                                    std::size_t num_sequences);

// Entry (k, j) = F_k(ω_j)·(ω*/π), where ω* is the band spacing of est_freqs.
// The matrix-vector product then approximates (1/2π)∫S·F as a band Riemann
// sum. Edge rows (j near 1, 63, 64) carry known leakage relative to the exact
// overlap integral: the j=1 row under-counts its DC-side lobe mass by ~50%
// and the Nyquist row over-counts by ~50%; mid-band rows agree within 2%.
FilterMatrix build_filter_matrix(const std::vector<ProbeSequence>& seqs,
                                 const std::vector<double>& est_freqs);

// argmin_{S ≥ 0} ‖F·S − χ‖₂ by the Lawson–Hanson active-set method, run to
// KKT tolerance 1e-10 with an iteration cap of 3·cols (NoConvergence beyond
// it). The result is a band power density on the matrix's frequency grid.
SpectrumEstimate nnls_solve(const FilterMatrix& matrix, const ChiVector& chi,
                            NnlsInfo* info = nullptr);

// Convenience pipeline: chi_from_probs → build_filter_matrix (band grid) →
// nnls_solve.
SpectrumEstimate nnls_pipeline(const QnsDataset& dataset,
                               NnlsInfo* info = nullptr,
                               ChiVector* chi_out = nullptr);

// Natural cubic spline through (spec.freqs, spec.power), evaluated on
// dense_freqs and clamped below at 0. Outside the knot span the boundary
// cubics are extended. Throws TooFewPoints below 4 knots.
SpectrumEstimate interpolate(const SpectrumEstimate& spec,
                             const std::vector<double>& dense_freqs);

// r[k] = (1/π)·∫₀^π S(ω)cos(kω) dω, trapezoid on the spectrum's own grid
// (interpolate first for band spectra).
AutocovarianceSeq autocov_from_spectrum(const SpectrumEstimate& spec,
                                        std::size_t num_lags);

// White-noise power estimate σ̂² = 2·χ̄/K from the mean of the unclipped χ
// values. Throws AllClipped when no usable rows remain.
double mean_power_estimate(const QnsDataset& dataset);

// Natural cubic spline on arbitrary strictly-increasing knots; second
// derivatives vanish at both ends, and evaluation beyond the knot span
// extends the boundary cubics. Shared by interpolate() and the CLI.
class CubicSpline {
 public:
  CubicSpline(const std::vector<double>& x, const std::vector<double>& y);
  double operator()(double at) const;

 private:
  std::vector<double> x_, y_, second_;
};

}  // namespace qns
