#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "qns/arma_core.hpp"
#include "qns/grid.hpp"

namespace qns {

// Fixed-total-time π-pulse probe sequence in the toggling frame: a ±1 sign
// per gate step. Sequence j of a K-gate family concentrates its filter
// function near ω_j = jπ/K.
struct ProbeSequence {
  std::vector<double> signs;  // entries ±1, length gate_count
  std::size_t gate_count = 0;
  std::size_t index = 0;      // harmonic index j ≥ 1
  double peak_freq = 0.0;     // jπ/K (radians/sample)
};

// A probe sequence's filter function F(ω) sampled on a grid. With the
// normalization used here, (1/2π)·∫_{-π}^{π} F dω = K/2.
struct FilterFunction {
  std::vector<double> freqs;
  std::vector<double> values;
};

// Builds the FTTPS family s_j[k] = (-1)^⌊kj/K⌋ for j = 1..num_sequences. All
// sequences share the same gate count (fixed total time). Throws
// InvalidCounts unless 1 ≤ num_sequences ≤ gate_count.
std::vector<ProbeSequence> generate_fttps(std::size_t gate_count,
                                          std::size_t num_sequences);

// Single member of the family above (1 ≤ index ≤ gate_count).
ProbeSequence fttps_sequence(std::size_t gate_count, std::size_t index);

// F(ω) = ½·|Σ_k s[k]·e^{-ikω}|² on the given grid.
FilterFunction filter_function(const ProbeSequence& seq,
                               const std::vector<double>& freqs);

// Overlap integral χ = (1/2π)·∫_{-π}^{π} S(ω)F(ω) dω, evaluated as
// (1/π)·∫₀^π by evenness with the trapezoid rule on the spectrum's own grid.
// Throws NegativePower if the spectrum carries a negative value.
double overlap_chi(const SpectrumEstimate& spectrum, const ProbeSequence& seq);

// Same overlap integral with the spectrum evaluated from an ARMA model on a
// uniform grid (default 4096 points).
double overlap_chi(const ArmaModel& model, const ProbeSequence& seq,
                   std::size_t grid_points = kDefaultChiGrid);

// Exact time-domain overlap χ = ½·sᵀR s with R the K×K Toeplitz
// autocovariance matrix of the model. This is the reference oracle the
// frequency-domain path is validated against.
double overlap_chi_time(const ArmaModel& model, const ProbeSequence& seq);

// Survival probability p̂ = ½ + ½·e^{-χ}.
double predict_survival(const SpectrumEstimate& spectrum,
                        const ProbeSequence& seq);
double predict_survival(const ArmaModel& model, const ProbeSequence& seq,
                        std::size_t grid_points = kDefaultChiGrid);

// Probe-set serialization: JSON {"gate_count": K, "indices": [...]}.
void save_probe_set(const std::vector<ProbeSequence>& seqs,
                    const std::string& path);
std::vector<ProbeSequence> load_probe_set(const std::string& path);

// Filter functions exportable as CSV `freq,value` for plotting.
void save_filter_csv(const FilterFunction& filter, const std::string& path);

}  // namespace qns
