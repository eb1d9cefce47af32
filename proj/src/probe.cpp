#include "qns/probe.hpp"

#include <cmath>
#include <complex>
#include <nlohmann/json.hpp>

#include "detail.hpp"
#include "qns/errors.hpp"

namespace qns {

namespace {

using json = nlohmann::json;

// Trapezoid weights for a (possibly non-uniform) strictly increasing grid.
std::vector<double> grid_weights(const std::vector<double>& freqs) {
  const std::size_t n = freqs.size();
  std::vector<double> w(n, 0.0);
  if (n < 2)
    throw InvalidCounts("overlap quadrature needs at least 2 grid points");
  w[0] = 0.5 * (freqs[1] - freqs[0]);
  for (std::size_t i = 1; i + 1 < n; ++i)
    w[i] = 0.5 * (freqs[i + 1] - freqs[i - 1]);
  w[n - 1] = 0.5 * (freqs[n - 1] - freqs[n - 2]);
  return w;
}

}  // namespace

ProbeSequence fttps_sequence(std::size_t gate_count, std::size_t index) {
  if (gate_count < 1 || index < 1 || index > gate_count)
    throw InvalidCounts("fttps_sequence requires 1 <= index <= gate_count");
  ProbeSequence seq;
  seq.gate_count = gate_count;
  seq.index = index;
  seq.peak_freq = static_cast<double>(index) * kPi /
                  static_cast<double>(gate_count);
  seq.signs.resize(gate_count);
  for (std::size_t k = 0; k < gate_count; ++k)
    seq.signs[k] = ((k * index / gate_count) % 2 == 0) ? 1.0 : -1.0;
  return seq;
}

std::vector<ProbeSequence> generate_fttps(std::size_t gate_count,
                                          std::size_t num_sequences) {
  if (gate_count < 1 || num_sequences < 1 || num_sequences > gate_count)
    throw InvalidCounts("generate_fttps requires 1 <= num_sequences <= gate_count");
  std::vector<ProbeSequence> seqs;
  seqs.reserve(num_sequences);
  for (std::size_t j = 1; j <= num_sequences; ++j)
    seqs.push_back(fttps_sequence(gate_count, j));
  return seqs;
}

FilterFunction filter_function(const ProbeSequence& seq,
                               const std::vector<double>& freqs) {
  FilterFunction filter;
  filter.freqs = freqs;
  filter.values.resize(freqs.size());
  for (std::size_t i = 0; i < freqs.size(); ++i) {
    const std::complex<double> step(std::cos(freqs[i]), -std::sin(freqs[i]));
    std::complex<double> phase(1.0, 0.0);
    std::complex<double> sum(0.0, 0.0);
    for (double s : seq.signs) {
      sum += s * phase;
      phase *= step;
    }
    filter.values[i] = 0.5 * std::norm(sum);
  }
  return filter;
}

double overlap_chi(const SpectrumEstimate& spectrum,
                   const ProbeSequence& seq) {
  const auto weights = grid_weights(spectrum.freqs);
  const auto filter = filter_function(seq, spectrum.freqs);
  double chi = 0.0;
  for (std::size_t i = 0; i < spectrum.freqs.size(); ++i) {
    if (spectrum.power[i] < 0.0)
      throw NegativePower("spectrum power < 0 at ω = " +
                          detail::fmt_double(spectrum.freqs[i]));
    chi += weights[i] * spectrum.power[i] * filter.values[i];
  }
  return chi / kPi;
}

double overlap_chi(const ArmaModel& model, const ProbeSequence& seq,
                   std::size_t grid_points) {
  return overlap_chi(psd(model, frequency_grid(grid_points)), seq);
}

double overlap_chi_time(const ArmaModel& model, const ProbeSequence& seq) {
  const std::size_t gates = seq.gate_count;
  const auto r = autocovariance(model, gates);
  // ½·sᵀR s over the Toeplitz R, grouped by lag.
  double chi = 0.5 * r.lags[0] * static_cast<double>(gates);
  for (std::size_t lag = 1; lag < gates; ++lag) {
    double corr = 0.0;
    for (std::size_t k = 0; k + lag < gates; ++k)
      corr += seq.signs[k] * seq.signs[k + lag];
    chi += r.lags[lag] * corr;
  }
  return chi;
}

double predict_survival(const SpectrumEstimate& spectrum,
                        const ProbeSequence& seq) {
  return 0.5 + 0.5 * std::exp(-overlap_chi(spectrum, seq));
}

double predict_survival(const ArmaModel& model, const ProbeSequence& seq,
                        std::size_t grid_points) {
  return 0.5 + 0.5 * std::exp(-overlap_chi(model, seq, grid_points));
}

void save_probe_set(const std::vector<ProbeSequence>& seqs,
                    const std::string& path) {
  if (seqs.empty()) throw InvalidCounts("cannot save an empty probe set");
  json j;
  j["gate_count"] = seqs.front().gate_count;
  std::vector<std::size_t> indices;
  indices.reserve(seqs.size());
  for (const auto& seq : seqs) {
    if (seq.gate_count != seqs.front().gate_count)
      throw InvalidCounts("probe set mixes gate counts");
    indices.push_back(seq.index);
  }
  j["indices"] = indices;
  detail::write_file(path, j.dump(2) + "\n");
}

std::vector<ProbeSequence> load_probe_set(const std::string& path) {
  json j;
  try {
    j = json::parse(detail::read_file(path));
  } catch (const json::exception& e) {
    throw MalformedFile(std::string("probe set JSON parse error: ") + e.what());
  }
  if (!j.is_object()) throw MalformedFile("probe set JSON must be an object");
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (key != "gate_count" && key != "indices")
      throw MalformedFile("unknown key in probe set JSON: '" + key + "'");
  }
  if (!j.contains("gate_count") || !j.contains("indices"))
    throw MalformedFile("probe set JSON requires 'gate_count' and 'indices'");

  std::size_t gate_count = 0;
  std::vector<std::size_t> indices;
  try {
    gate_count = j.at("gate_count").get<std::size_t>();
    indices = j.at("indices").get<std::vector<std::size_t>>();
  } catch (const json::exception& e) {
    throw MalformedFile(std::string("probe set JSON fields: ") + e.what());
  }
  if (gate_count < 1 || indices.empty())
    throw MalformedFile("probe set JSON needs gate_count >= 1 and indices");

  std::vector<ProbeSequence> seqs;
  seqs.reserve(indices.size());
  for (std::size_t index : indices) {
    if (index < 1 || index > gate_count)
      throw MalformedFile("probe index " + std::to_string(index) +
                          " outside [1, gate_count]");
    seqs.push_back(fttps_sequence(gate_count, index));
  }
  return seqs;
}

void save_filter_csv(const FilterFunction& filter, const std::string& path) {
  std::string out = "freq,value\n";
  for (std::size_t i = 0; i < filter.freqs.size(); ++i) {
    out += detail::fmt_double(filter.freqs[i]);
    out += ',';
    out += detail::fmt_double(filter.values[i]);
    out += '\n';
  }
  detail::write_file(path, out);
}

}  // namespace qns
