#include "qns/sim.hpp"

#include <algorithm>
#include <cmath>

#include "detail.hpp"
#include "qns/errors.hpp"
#include "qns/rng.hpp"

namespace qns {

namespace {

// Key-domain tag separating per-sequence binomial streams from per-trajectory
// sampling streams.
constexpr std::uint64_t kShotStreamTag = 0x53484f54;  // "SHOT"

// Fixed-shape pairwise summation: splits in halves down to short runs. The
// summation tree depends only on n, so the result is bit-identical no matter
// how the values were produced, and roundoff stays O(log n)·eps.
double pairwise_sum(const double* values, std::size_t n) {
  if (n <= 16) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += values[i];
    return sum;
  }
  const std::size_t half = n / 2;
  return pairwise_sum(values, half) + pairwise_sum(values + half, n - half);
}

double binomial_resolve(double p_bar, std::uint64_t shots, std::uint64_t seed,
                        std::size_t seq_pos) {
  if (shots == 0) return p_bar;
  CounterRng rng(CounterRng::derive_key(seed, {kShotStreamTag, seq_pos}));
  return static_cast<double>(rng.binomial(shots, p_bar)) /
         static_cast<double>(shots);
}

}  // namespace

QnsDataset simulate_qns(const std::vector<ArmaModel>& models,
                        const std::vector<ProbeSequence>& seqs,
                        std::uint64_t trajectories, std::uint64_t shots,
                        std::uint64_t seed) {
  if (models.empty()) throw InvalidCounts("simulate_qns needs >= 1 model");
  if (seqs.empty()) throw InvalidCounts("simulate_qns needs >= 1 sequence");
  if (trajectories < 1)
    throw InvalidCounts("simulate_qns needs trajectories >= 1");
  for (const auto& model : models)
    if (!is_stationary(model))
      throw NotStationary("simulate_qns requires stationary models");

  QnsDataset dataset;
  dataset.sequences = seqs;
  dataset.shots = shots;
  dataset.trajectories = trajectories;
  dataset.seed = seed;
  dataset.probs.resize(seqs.size());

  std::vector<double> cosines(trajectories);
  std::vector<double> noise;
  for (std::size_t k = 0; k < seqs.size(); ++k) {
    const auto& seq = seqs[k];
    const std::size_t gates = seq.gate_count;
    noise.assign(gates, 0.0);
    for (std::uint64_t m = 0; m < trajectories; ++m) {
      std::fill(noise.begin(), noise.end(), 0.0);
      for (std::size_t mi = 0; mi < models.size(); ++mi) {
        const auto y = sample_trajectory(
            models[mi], gates, CounterRng::derive_key(seed, {mi, k, m}));
        for (std::size_t g = 0; g < gates; ++g) noise[g] += y[g];
      }
      double phase = 0.0;
      for (std::size_t g = 0; g < gates; ++g) phase += seq.signs[g] * noise[g];
      cosines[m] = std::cos(phase);
    }
    const double mean_cos = pairwise_sum(cosines.data(), cosines.size()) /
                            static_cast<double>(trajectories);
    const double p_bar = std::clamp(0.5 * (1.0 + mean_cos), 0.0, 1.0);
    dataset.probs[k] = binomial_resolve(p_bar, shots, seed, k);
  }
  return dataset;
}

QnsDataset exact_qns(const std::vector<ArmaModel>& models,
                     const std::vector<ProbeSequence>& seqs,
                     std::uint64_t shots, std::uint64_t seed) {
  if (models.empty()) throw InvalidCounts("exact_qns needs >= 1 model");
  if (seqs.empty()) throw InvalidCounts("exact_qns needs >= 1 sequence");

  QnsDataset dataset;
  dataset.sequences = seqs;
  dataset.shots = shots;
  dataset.trajectories = 0;  // marks the infinite-trajectory limit
  dataset.seed = seed;
  dataset.probs.resize(seqs.size());

  // χ_k = ½·sᵀR s summed over models, with each model's autocovariance
  // computed once (gate counts are uniform in practice; recompute if not).
  std::size_t gates = seqs.front().gate_count;
  std::vector<AutocovarianceSeq> autocovs;
  autocovs.reserve(models.size());
  for (const auto& model : models)
    autocovs.push_back(autocovariance(model, gates));

  for (std::size_t k = 0; k < seqs.size(); ++k) {
    const auto& seq = seqs[k];
    if (seq.gate_count != gates) {
      gates = seq.gate_count;
      for (std::size_t mi = 0; mi < models.size(); ++mi)
        autocovs[mi] = autocovariance(models[mi], gates);
    }
    // Lag-grouped quadratic form, shared across models.
    std::vector<double> sign_corr(gates, 0.0);
    sign_corr[0] = static_cast<double>(gates);
    for (std::size_t lag = 1; lag < gates; ++lag) {
      double corr = 0.0;
      for (std::size_t g = 0; g + lag < gates; ++g)
        corr += seq.signs[g] * seq.signs[g + lag];
      sign_corr[lag] = 2.0 * corr;
    }
    double chi = 0.0;
    for (const auto& r : autocovs)
      for (std::size_t lag = 0; lag < gates; ++lag)
        chi += 0.5 * r.lags[lag] * sign_corr[lag];
    const double p_bar = 0.5 + 0.5 * std::exp(-chi);
    dataset.probs[k] = binomial_resolve(p_bar, shots, seed, k);
  }
  return dataset;
}

void save_dataset(const QnsDataset& dataset, const std::string& path) {
  if (dataset.sequences.size() != dataset.probs.size())
    throw InvalidCounts("dataset sequence/probability count mismatch");
  std::string out = "seq_index,gate_count,shots,prob\n";
  for (std::size_t k = 0; k < dataset.sequences.size(); ++k) {
    out += std::to_string(dataset.sequences[k].index);
    out += ',';
    out += std::to_string(dataset.sequences[k].gate_count);
    out += ',';
    out += std::to_string(dataset.shots);
    out += ',';
    out += detail::fmt_double(dataset.probs[k]);
    out += '\n';
  }
  detail::write_file(path, out);
}

QnsDataset load_dataset(const std::string& path) {
  const auto lines = detail::split_lines(detail::read_file(path));
  if (lines.empty() || lines[0] != "seq_index,gate_count,shots,prob")
    throw MalformedFile(
        "dataset CSV must start with header 'seq_index,gate_count,shots,prob'");

  QnsDataset dataset;
  bool first_row = true;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto fields = detail::split_csv(lines[i]);
    if (fields.size() != 4)
      throw MalformedFile("dataset CSV row needs 4 fields, got " +
                          std::to_string(fields.size()));
    const std::uint64_t seq_index = detail::parse_uint(fields[0], "seq_index");
    const std::uint64_t gate_count = detail::parse_uint(fields[1], "gate_count");
    const std::uint64_t shots = detail::parse_uint(fields[2], "shots");
    const double prob = detail::parse_double(fields[3], "prob");

    if (gate_count < 1) throw MalformedFile("gate_count must be >= 1");
    if (seq_index < 1 || seq_index > gate_count)
      throw MalformedFile("seq_index must lie in [1, gate_count]");
    if (!(prob >= 0.0 && prob <= 1.0))
      throw MalformedFile("prob outside [0, 1]: " + fields[3]);
    if (first_row) {
      dataset.shots = shots;
      first_row = false;
    } else {
      if (shots != dataset.shots)
        throw MalformedFile("shots must be uniform across rows");
      if (gate_count != dataset.sequences.front().gate_count)
        throw MalformedFile("gate_count must be uniform across rows");
    }
    dataset.sequences.push_back(fttps_sequence(gate_count, seq_index));
    dataset.probs.push_back(prob);
  }
  if (dataset.sequences.empty())
    throw MalformedFile("dataset CSV carries no rows");
  return dataset;
}

}  // namespace qns
