#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qns/arma_core.hpp"
#include "qns/probe.hpp"

namespace qns {

// One QNS experiment: per-sequence survival probabilities with the sampling
// parameters that produced them. trajectories/seed are provenance only (and
// are 0 for datasets loaded from disk; the dataset CSV schema does not carry
// them — they live in the CLI's config echo).
struct QnsDataset {
  std::vector<ProbeSequence> sequences;
  std::vector<double> probs;       // one per sequence, in [0, 1]
  std::uint64_t shots = 0;         // 0 = exact trajectory average, no binomial
  std::uint64_t trajectories = 0;
  std::uint64_t seed = 0;
};

// Monte Carlo SchWARMA simulation. For each sequence, `trajectories`
// independent noise realizations y (the sum of one realization per model) are
// pushed through the toggling frame, φ_m = Σ_k s[k]·y_m[k]; the
// trajectory-averaged survival probability p̄ = (1 + mean_m cos φ_m)/2 is then
// resolved into shot noise as Binomial(shots, p̄)/shots. shots = 0 skips the
// binomial draw and returns p̄ itself. Deterministic given the seed: every
// (model, sequence, trajectory) triple owns a counter-based substream, and
// the trajectory reduction is a fixed-shape pairwise sum, so results are
// independent of any execution order (documented drift tolerance 1e-12).
// Throws NotStationary if any model cannot be sampled.
QnsDataset simulate_qns(const std::vector<ArmaModel>& models,
                        const std::vector<ProbeSequence>& seqs,
                        std::uint64_t trajectories, std::uint64_t shots,
                        std::uint64_t seed);

// Infinite-trajectory (Gaussian/filter-function) limit: p̄ computed exactly as
// ½ + ½·e^{-χ} from the summed model spectra via the time-domain overlap
// oracle, then optionally resolved into Binomial(shots, p̄)/shots shot noise.
// This is the reference data source for noiseless ("shots = 0, exact")
// experiments.
QnsDataset exact_qns(const std::vector<ArmaModel>& models,
                     const std::vector<ProbeSequence>& seqs,
                     std::uint64_t shots, std::uint64_t seed);

// Dataset CSV with header `seq_index,gate_count,shots,prob`, strict schema
// validation on load (uniform gate_count and shots, probabilities in [0, 1],
// valid sequence indices). Throws MalformedFile.
void save_dataset(const QnsDataset& dataset, const std::string& path);
QnsDataset load_dataset(const std::string& path);

}  // namespace qns
