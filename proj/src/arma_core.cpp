#include "qns/arma_core.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <complex>
#include <nlohmann/json.hpp>

#include "detail.hpp"
#include "qns/errors.hpp"
#include "qns/rng.hpp"

namespace qns {

namespace {

using json = nlohmann::json;

// Magnitude-squared threshold below which a PSD denominator counts as a pole
// sitting on the grid.
constexpr double kPoleThreshold = 1e-12;

// Evaluates P(e^{-iω}) = Σ coeffs[k]·e^{-ikω} by phasor recurrence.
std::complex<double> poly_at(const std::vector<double>& coeffs, double omega) {
  const std::complex<double> step(std::cos(omega), -std::sin(omega));
  std::complex<double> phase(1.0, 0.0);
  std::complex<double> sum(0.0, 0.0);
  for (double c : coeffs) {
    sum += c * phase;
    phase *= step;
  }
  return sum;
}

// AR poles = roots of z^p + c₁z^{p-1} + ... + c_p, via the companion matrix.
std::vector<std::complex<double>> ar_roots(const std::vector<double>& ar) {
  const std::size_t p = ar.size();
  if (p == 0) return {};
  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(p, p);
  for (std::size_t k = 0; k < p; ++k) companion(0, k) = -ar[k];
  for (std::size_t k = 1; k < p; ++k) companion(k, k - 1) = 1.0;
  Eigen::EigenSolver<Eigen::MatrixXd> solver(companion, /*computeEigenvectors=*/false);
  std::vector<std::complex<double>> roots(p);
  for (std::size_t k = 0; k < p; ++k) roots[k] = solver.eigenvalues()(k);
  return roots;
}

}  // namespace

SpectrumEstimate psd(const ArmaModel& model, const std::vector<double>& freqs) {
  SpectrumEstimate spec;
  spec.freqs = freqs;
  spec.power.resize(freqs.size());

  std::vector<double> denom_coeffs(model.ar.size() + 1);
  denom_coeffs[0] = 1.0;
  std::copy(model.ar.begin(), model.ar.end(), denom_coeffs.begin() + 1);

  for (std::size_t i = 0; i < freqs.size(); ++i) {
    const double a2 = std::norm(poly_at(denom_coeffs, freqs[i]));
    if (a2 < kPoleThreshold)
      throw PoleOnGrid("AR denominator vanishes at ω = " +
                       detail::fmt_double(freqs[i]));
    spec.power[i] = std::norm(poly_at(model.ma, freqs[i])) / a2;
  }
  return spec;
}

double psd_at(const ArmaModel& model, double freq) {
  return psd(model, std::vector<double>{freq}).power[0];
}

AutocovarianceSeq autocovariance(const ArmaModel& model, std::size_t num_lags,
                                 std::size_t grid_points) {
  AutocovarianceSeq r;
  r.lags.assign(num_lags, 0.0);

  if (model.p() == 0) {
    // MA closed form: r[k] = Σ_{j=k}^{q} b_j b_{j-k}.
    const auto& b = model.ma;
    for (std::size_t k = 0; k < num_lags && k < b.size(); ++k) {
      double sum = 0.0;
      for (std::size_t j = k; j < b.size(); ++j) sum += b[j] * b[j - k];
      r.lags[k] = sum;
    }
    return r;
  }

  if (!is_stationary(model))
    throw NotStationary("autocovariance requires a stationary model");

  // r[k] = (1/π)·∫₀^π S(ω)cos(kω) dω, trapezoid on a fine grid. The cos(kω)
  // factors come from the Chebyshev-style recurrence to avoid num_lags×grid
  // trig calls.
  const auto freqs = frequency_grid(grid_points);
  const auto weights = trapezoid_weights(grid_points);
  const auto spec = psd(model, freqs);
  for (std::size_t i = 0; i < grid_points; ++i) {
    const double sw = spec.power[i] * weights[i] / kPi;
    const double c1 = std::cos(freqs[i]);
    double ck_prev = 1.0;  // cos(0·ω)
    double ck = c1;        // cos(1·ω)
    r.lags[0] += sw;
    for (std::size_t k = 1; k < num_lags; ++k) {
      r.lags[k] += sw * ck;
      const double next = 2.0 * c1 * ck - ck_prev;
      ck_prev = ck;
      ck = next;
    }
  }
  return r;
}

std::vector<double> sample_trajectory(const ArmaModel& model,
                                      std::size_t length, std::uint64_t seed) {
  if (!is_stationary(model))
    throw NotStationary("sample_trajectory requires a stationary model");

  const std::size_t p = model.p();
  const std::size_t q = model.q();
  const std::size_t burn_in = std::max<std::size_t>(1000, 20 * (p + q));

  CounterRng rng(seed);
  std::vector<double> x(q + 1, 0.0);  // x[0] newest drive sample
  std::vector<double> y(p, 0.0);      // y[0] = y[n-1]
  std::vector<double> out;
  out.reserve(length);

  for (std::size_t n = 0; n < burn_in + length; ++n) {
    for (std::size_t j = q; j > 0; --j) x[j] = x[j - 1];
    x[0] = rng.normal();
    double yn = 0.0;
    for (std::size_t j = 0; j <= q; ++j) yn += model.ma[j] * x[j];
    for (std::size_t i = 0; i < p; ++i) yn -= model.ar[i] * y[i];
    if (p > 0) {
      for (std::size_t i = p - 1; i > 0; --i) y[i] = y[i - 1];
      y[0] = yn;
    }
    if (n >= burn_in) out.push_back(yn);
  }
  return out;
}

bool is_stationary(const ArmaModel& model) {
  if (model.p() == 0) return true;
  for (const auto& root : ar_roots(model.ar))
    if (std::abs(root) >= 1.0) return false;
  return true;
}

ArmaModel reflect_to_stationary(const ArmaModel& model) {
  if (model.p() == 0 || is_stationary(model)) return model;

  auto roots = ar_roots(model.ar);
  double ma_scale = 1.0;
  for (auto& root : roots) {
    double radius = std::abs(root);
    if (radius < 1.0) continue;
    // z → 1/conj(z) maps |z| to 1/|z| and multiplies |A(e^{iω})| by 1/|z|
    // uniformly, so dividing the MA part by |z| keeps the spectrum intact.
    ma_scale /= radius;
    root = std::complex<double>(1.0, 0.0) / std::conj(root);
    radius = std::abs(root);
    if (radius >= 1.0 - 1e-9)  // root was on the unit circle: nudge inside
      root *= (1.0 - 1e-9) / radius;
  }

  // Rebuild z^p + c₁z^{p-1} + ... + c_p = Π (z - root).
  std::vector<std::complex<double>> poly{1.0};
  for (const auto& root : roots) {
    poly.push_back(0.0);
    for (std::size_t k = poly.size() - 1; k > 0; --k)
      poly[k] = poly[k] - root * poly[k - 1];
  }

  ArmaModel repaired;
  repaired.ar.resize(model.p());
  for (std::size_t k = 1; k < poly.size(); ++k)
    repaired.ar[k - 1] = poly[k].real();  // conjugate pairs: imag ≈ 0
  repaired.ma = model.ma;
  for (double& b : repaired.ma) b *= ma_scale;
  return repaired;
}

ArmaModel make_ar2_peak(double center_freq, double pole_radius, double b0) {
  ArmaModel model;
  model.ar = {-2.0 * pole_radius * std::cos(center_freq),
              pole_radius * pole_radius};
  model.ma = {b0};
  return model;
}

// --- serialization ----------------------------------------------------------

std::string model_to_json(const ArmaModel& model) {
  json j;
  j["ar"] = model.ar;
  j["ma"] = model.ma;
  return j.dump(2) + "\n";
}

ArmaModel model_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw MalformedFile(std::string("model JSON parse error: ") + e.what());
  }
  if (!j.is_object()) throw MalformedFile("model JSON must be an object");
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (key != "ar" && key != "ma")
      throw MalformedFile("unknown key in model JSON: '" + key + "'");
  }
  if (!j.contains("ar") || !j.contains("ma"))
    throw MalformedFile("model JSON requires both 'ar' and 'ma'");
  ArmaModel model;
  try {
    model.ar = j.at("ar").get<std::vector<double>>();
    model.ma = j.at("ma").get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw MalformedFile(std::string("model JSON coefficient arrays: ") +
                        e.what());
  }
  if (model.ma.empty())
    throw MalformedFile("model JSON 'ma' must carry at least b0");
  for (double v : model.ar)
    if (!std::isfinite(v)) throw MalformedFile("non-finite AR coefficient");
  for (double v : model.ma)
    if (!std::isfinite(v)) throw MalformedFile("non-finite MA coefficient");
  return model;
}

void save_model(const ArmaModel& model, const std::string& path) {
  detail::write_file(path, model_to_json(model));
}

ArmaModel load_model(const std::string& path) {
  return model_from_json(detail::read_file(path));
}

void save_spectrum_csv(const SpectrumEstimate& spec, const std::string& path) {
  std::string out = "freq,power\n";
  for (std::size_t i = 0; i < spec.freqs.size(); ++i) {
    out += detail::fmt_double(spec.freqs[i]);
    out += ',';
    out += detail::fmt_double(spec.power[i]);
    out += '\n';
  }
  detail::write_file(path, out);
}

SpectrumEstimate load_spectrum_csv(const std::string& path) {
  const auto lines = detail::split_lines(detail::read_file(path));
  if (lines.empty() || lines[0] != "freq,power")
    throw MalformedFile("spectrum CSV must start with header 'freq,power'");

  SpectrumEstimate spec;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto fields = detail::split_csv(lines[i]);
    if (fields.size() != 2)
      throw MalformedFile("spectrum CSV row needs 2 fields, got " +
                          std::to_string(fields.size()));
    const double freq = detail::parse_double(fields[0], "freq");
    const double power = detail::parse_double(fields[1], "power");
    if (!std::isfinite(freq) || !std::isfinite(power))
      throw MalformedFile("non-finite spectrum CSV entry");
    if (!spec.freqs.empty() && freq <= spec.freqs.back())
      throw MalformedFile("spectrum CSV freqs must be strictly increasing");
    if (freq < 0.0 || freq > kPi + 1e-12)
      throw MalformedFile("spectrum CSV freq outside [0, pi]");
    if (power < 0.0) throw MalformedFile("spectrum CSV power must be >= 0");
    spec.freqs.push_back(freq);
    spec.power.push_back(power);
  }
  if (spec.freqs.empty()) throw MalformedFile("spectrum CSV carries no rows");
  return spec;
}

}  // namespace qns
