#include "qns/classical_fit.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "detail.hpp"
#include "qns/errors.hpp"
#include "qns/grid.hpp"
#include "qns/invert.hpp"
#include "qns/minimize.hpp"
#include "qns/probe.hpp"

namespace qns {

namespace {

// Least-squares Yule-Walker for the AR part, with the equation rows starting
// past an MA horizon: r[j] = Σ_{i=1..p} a_i r[|j−i|] for j = q+1 .. L−1.
// Rows must start beyond lag q because the MA part contaminates the
// autocovariance recursion at shorter lags. Returns the textbook a
// coefficients (stored convention is c = −a). overdetermined=false solves
// the square system from exactly p rows.
std::vector<double> yw_ar_coefficients(const std::vector<double>& r,
                                       std::size_t p, std::size_t q,
                                       bool overdetermined) {
  if (p == 0) return {};
  const std::size_t first_row = q + 1;
  const std::size_t last_row =
      overdetermined ? r.size() - 1 : first_row + p - 1;
  if (r.size() < last_row + 1 || last_row < first_row)
    throw InvalidCounts("too few autocovariance lags for AR order " +
                        std::to_string(p));

  const std::size_t rows = last_row - first_row + 1;
  Eigen::MatrixXd lhs(rows, p);
  Eigen::VectorXd rhs(rows);
  for (std::size_t row = 0; row < rows; ++row) {
    const std::size_t j = first_row + row;
    rhs(row) = r[j];
    for (std::size_t i = 1; i <= p; ++i)
      lhs(row, i - 1) = r[j >= i ? j - i : i - j];
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(lhs);
  qr.setThreshold(1e-12);
  if (qr.rank() < static_cast<Eigen::Index>(p))
    throw SingularSystem("Yule-Walker system is rank deficient (order " +
                         std::to_string(p) + ")");
  const Eigen::VectorXd a = qr.solve(rhs);
  return std::vector<double>(a.data(), a.data() + p);
}

// Cepstrum of a minimum-phase polynomial P(z) = Σ p_k z^{-k}, p₀ = 1:
// returns α with ln P(z) = Σ_{n≥1} α_n z^{-n}, via the recursion
// k·p_k = Σ_{m=1}^{k} m·α_m·p_{k−m} (coefficients beyond the degree are 0).
std::vector<double> poly_cepstrum(const std::vector<double>& coeffs,
                                  std::size_t nmax) {
  std::vector<double> padded(coeffs);
  padded.resize(std::max<std::size_t>(nmax + 1, coeffs.size()), 0.0);
  std::vector<double> alpha(nmax + 1, 0.0);
  for (std::size_t k = 1; k <= nmax; ++k) {
    double sum = 0.0;
    for (std::size_t m = 1; m < k; ++m) sum += static_cast<double>(m) * alpha[m] * padded[k - m];
    alpha[k] = padded[k] - sum / static_cast<double>(k);
  }
  return alpha;
}

// Inverse of poly_cepstrum: rebuilds the monic minimum-phase polynomial of
// the given degree from cepstral coefficients α₁..α_degree.
std::vector<double> poly_from_cepstrum(const std::vector<double>& alpha,
                                       std::size_t degree) {
  std::vector<double> coeffs(degree + 1, 0.0);
  coeffs[0] = 1.0;
  for (std::size_t k = 1; k <= degree; ++k) {
    double sum = 0.0;
    for (std::size_t m = 1; m <= k; ++m)
      if (m < alpha.size()) sum += static_cast<double>(m) * alpha[m] * coeffs[k - m];
    coeffs[k] = sum / static_cast<double>(k);
  }
  return coeffs;
}

// Trapezoid weights on a (possibly non-uniform) strictly increasing grid.
std::vector<double> quad_weights(const std::vector<double>& freqs) {
  const std::size_t n = freqs.size();
  std::vector<double> w(n, 0.0);
  w[0] = 0.5 * (freqs[1] - freqs[0]);
  for (std::size_t i = 1; i + 1 < n; ++i)
    w[i] = 0.5 * (freqs[i + 1] - freqs[i - 1]);
  w[n - 1] = 0.5 * (freqs[n - 1] - freqs[n - 2]);
  return w;
}

}  // namespace

ArmaModel yule_walker(const AutocovarianceSeq& r, std::size_t order,
                      bool overdetermined) {
  const auto& lags = r.lags;
  if (lags.size() < (overdetermined ? order : order + 1))
    throw InvalidCounts("yule_walker needs more autocovariance lags");

  const auto a = yw_ar_coefficients(lags, order, 0, overdetermined);

  // Residual variance: r[0] = Σ a_k r[k] + b₀².
  double b0_sq = lags[0];
  for (std::size_t k = 1; k <= order; ++k) b0_sq -= a[k - 1] * lags[k];
  if (b0_sq < -1e-10 * std::max(std::abs(lags[0]), 1.0))
    throw NegativeResidualVariance(
        "autocovariance inconsistent with AR(" + std::to_string(order) +
        "): residual variance " + detail::fmt_double(b0_sq));

  ArmaModel model;
  model.ar.resize(order);
  for (std::size_t k = 0; k < order; ++k) model.ar[k] = -a[k];
  model.ma = {std::sqrt(std::max(b0_sq, 0.0))};
  return model;
}

MaFitResult ma_fit(const AutocovarianceSeq& r, std::size_t order) {
  const auto& lags = r.lags;
  const std::size_t q = order;
  if (lags.size() < q + 1)
    throw InvalidCounts("ma_fit needs at least order+1 autocovariance lags");
  if (lags[0] < 0.0)
    throw InvalidCounts("autocovariance r[0] must be non-negative");

  // Amplitude-scale start: b₀ = sqrt(max(r[0] + 2Σ r[j], r[0])), rest 0.
  double power = lags[0];
  for (std::size_t j = 1; j <= q && j < lags.size(); ++j) power += 2.0 * lags[j];
  Eigen::VectorXd b = Eigen::VectorXd::Zero(q + 1);
  b(0) = std::sqrt(std::max(power, lags[0]));

  const auto model_autocov = [&](const Eigen::VectorXd& coeffs,
                                 std::size_t k) {
    double sum = 0.0;
    for (std::size_t j = k; j <= q; ++j) sum += coeffs(j) * coeffs(j - k);
    return sum;
  };
  const auto objective = [&](const Eigen::VectorXd& coeffs) {
    double obj = 0.0;
    for (std::size_t k = 0; k <= q; ++k) {
      const double e = model_autocov(coeffs, k) - lags[k];
      obj += e * e;
    }
    return obj;
  };

  double obj = objective(b);
  double damping = 1e-8;
  std::size_t iterations = 0;
  bool converged = false;

  for (; iterations < 500; ++iterations) {
    // Residuals e_k, Jacobian J(k,i) = ∂r̂[k]/∂b_i = b_{i−k} + b_{i+k}
    // (terms present only when the index lands in [0, q]).
    Eigen::VectorXd e(q + 1);
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(q + 1, q + 1);
    for (std::size_t k = 0; k <= q; ++k) {
      e(k) = model_autocov(b, k) - lags[k];
      for (std::size_t i = 0; i <= q; ++i) {
        double d = 0.0;
        if (i >= k) d += b(i - k);
        if (i + k <= q) d += b(i + k);
        jac(k, i) = d;
      }
    }
    const Eigen::VectorXd grad = 2.0 * jac.transpose() * e;
    if (grad.norm() < 1e-10) {
      converged = true;
      break;
    }

    // Gauss-Newton term plus the exact second-order correction
    // ∂²r̂[k]/∂b_i∂b_j = 2δ_ij (k = 0) or δ_{|i−j|,k}.
    Eigen::MatrixXd hess = 2.0 * jac.transpose() * jac;
    for (std::size_t k = 0; k <= q; ++k) {
      const double ek2 = 2.0 * e(k);
      for (std::size_t i = 0; i <= q; ++i) {
        if (k == 0) {
          hess(i, i) += 2.0 * ek2;
        } else {
          if (i + k <= q) {
            hess(i, i + k) += ek2;
            hess(i + k, i) += ek2;
          }
        }
      }
    }

    // Damped Newton: grow the damping until the step actually descends.
    bool accepted = false;
    for (int attempt = 0; attempt < 60; ++attempt) {
      Eigen::MatrixXd damped = hess;
      damped.diagonal().array() += damping;
      const Eigen::VectorXd step = damped.ldlt().solve(-grad);
      const Eigen::VectorXd trial = b + step;
      const double trial_obj = objective(trial);
      if (std::isfinite(trial_obj) && trial_obj < obj) {
        b = trial;
        obj = trial_obj;
        damping = std::max(damping / 3.0, 1e-12);
        accepted = true;
        break;
      }
      damping *= 10.0;
    }
    if (!accepted) break;  // no descent direction left at any damping
  }

  if (b(0) < 0.0) b = -b;  // global sign is irrelevant; normalize b₀ ≥ 0

  MaFitResult result;
  result.model.ma.assign(b.data(), b.data() + q + 1);
  result.objective = objective(b);
  result.iterations = iterations;
  result.converged = converged;
  return result;
}

ArmaModel cepstral_arma(const SpectrumEstimate& spectrum, std::size_t p,
                        std::size_t q) {
  const std::size_t n = spectrum.freqs.size();
  if (n < 2) throw InvalidCounts("cepstral_arma needs >= 2 grid points");

  // Floor the spectrum before taking logs; refuse spectra where the floor,
  // not the data, would dominate the cepstrum.
  double peak = 0.0;
  for (double s : spectrum.power) peak = std::max(peak, s);
  if (peak <= 0.0)
    throw DegenerateSpectrum("cepstral_arma: spectrum is identically zero");
  const double floor = 1e-12 * peak;
  std::size_t floored = 0;
  std::vector<double> log_power(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double s = std::max(spectrum.power[i], floor);
    if (spectrum.power[i] < floor) ++floored;
    log_power[i] = std::log(s);
  }
  if (10 * floored > n)
    throw DegenerateSpectrum("cepstral_arma: " + std::to_string(floored) +
                             " of " + std::to_string(n) +
                             " grid points required flooring");

  // AR part from the spectrum's autocovariance, rows past the MA horizon.
  ArmaModel model;
  if (p > 0) {
    const std::size_t num_lags = q + 4 * p + 9;
    const auto r = autocov_from_spectrum(spectrum, num_lags);
    const auto a = yw_ar_coefficients(r.lags, p, q, /*overdetermined=*/true);
    model.ar.resize(p);
    for (std::size_t k = 0; k < p; ++k) model.ar[k] = -a[k];
  }

  // Cepstrum of the data, ĉ_n = (1/π)∫ ln S cos(nω) dω, n = 1..q.
  const auto weights = quad_weights(spectrum.freqs);
  std::vector<double> data_cep(q + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double lw = log_power[i] * weights[i] / kPi;
    const double c1 = std::cos(spectrum.freqs[i]);
    double ck_prev = 1.0;
    double ck = c1;
    data_cep[0] += lw;
    for (std::size_t k = 1; k <= q; ++k) {
      data_cep[k] += lw * ck;
      const double next = 2.0 * c1 * ck - ck_prev;
      ck_prev = ck;
      ck = next;
    }
  }

  // ln S = ln|B|² − ln|A|² termwise in cos(nω): the numerator cepstrum is the
  // data cepstrum plus the denominator polynomial's cepstrum.
  std::vector<double> denom_coeffs(p + 1, 0.0);
  denom_coeffs[0] = 1.0;
  for (std::size_t k = 0; k < p; ++k) denom_coeffs[k + 1] = model.ar[k];
  const auto denom_cep = poly_cepstrum(denom_coeffs, q);
  std::vector<double> numer_cep(q + 1, 0.0);
  for (std::size_t k = 1; k <= q; ++k) numer_cep[k] = data_cep[k] + denom_cep[k];
  model.ma = poly_from_cepstrum(numer_cep, q);  // b'₀ = 1

  // Overall scale κ from the ratio of integrated powers.
  double input_power = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    input_power += spectrum.power[i] * weights[i] / kPi;
  const auto dense = frequency_grid(kDefaultChiGrid);
  const auto dense_w = trapezoid_weights(kDefaultChiGrid);
  const auto model_spec = psd(model, dense);
  double model_power = 0.0;
  for (std::size_t i = 0; i < dense.size(); ++i)
    model_power += model_spec.power[i] * dense_w[i] / kPi;
  const double kappa =
      model_power > 0.0 ? std::sqrt(std::max(input_power, 0.0) / model_power)
                        : 0.0;
  for (double& b : model.ma) b *= kappa;
  return model;
}

ArmaModel kappa_optimize(const ArmaModel& unscaled, const QnsDataset& dataset) {
  if (dataset.probs.empty())
    throw InvalidCounts("kappa_optimize needs a non-empty dataset");

  // Per-sequence overlap of the unscaled model; κ² then scales χ linearly.
  std::vector<double> chi_model(dataset.sequences.size());
  for (std::size_t k = 0; k < dataset.sequences.size(); ++k)
    chi_model[k] = overlap_chi(unscaled, dataset.sequences[k]);

  const auto mse = [&](double kappa_sq) {
    double sum = 0.0;
    for (std::size_t k = 0; k < dataset.probs.size(); ++k) {
      const double predicted = 0.5 + 0.5 * std::exp(-kappa_sq * chi_model[k]);
      const double diff = predicted - dataset.probs[k];
      sum += diff * diff;
    }
    return sum / static_cast<double>(dataset.probs.size());
  };

  // Initial scale from band-integrated powers: NNLS estimate of the data vs
  // the unscaled model. It seeds the search bracket.
  double kappa_sq_init = 1.0;
  try {
    const auto band = nnls_pipeline(dataset);
    const double spacing =
        band.freqs.size() >= 2 ? band.freqs[1] - band.freqs[0] : band.freqs[0];
    double band_power = 0.0;
    for (double s : band.power) band_power += s * spacing / kPi;
    const auto r0 = autocovariance(unscaled, 1);
    if (r0.lags[0] > 0.0 && band_power > 0.0)
      kappa_sq_init = band_power / r0.lags[0];
  } catch (const QnsError&) {
    // fall back to the default bracket; the golden search still expands
  }

  const double hi = std::max(4.0 * kappa_sq_init, 1e-4);
  const double kappa_sq = golden_minimize_expanding(mse, 0.0, hi, 1e-8);

  ArmaModel scaled = unscaled;
  const double kappa = std::sqrt(std::max(kappa_sq, 0.0));
  for (double& b : scaled.ma) b *= kappa;
  return scaled;
}

MusicResult music(const AutocovarianceSeq& r, std::size_t num_components,
                  const std::vector<double>& grid) {
  const std::size_t dim = r.lags.size();
  if (dim <= num_components)
    throw InvalidCounts("music needs more autocovariance lags than components");
  if (grid.size() < 3)
    throw InvalidCounts("music needs a grid of >= 3 points");

  Eigen::MatrixXd toeplitz(dim, dim);
  for (std::size_t i = 0; i < dim; ++i)
    for (std::size_t j = 0; j < dim; ++j)
      toeplitz(i, j) = r.lags[i >= j ? i - j : j - i];

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(toeplitz);
  if (eig.info() != Eigen::Success)
    throw SingularSystem("music: eigendecomposition failed");
  // Eigenvalues come out ascending: the noise subspace is the leading block.
  const Eigen::MatrixXd noise =
      eig.eigenvectors().leftCols(dim - num_components);

  MusicResult result;
  result.pseudo.freqs = grid;
  result.pseudo.power.resize(grid.size());
  Eigen::VectorXd cos_vec(dim), sin_vec(dim);
  for (std::size_t g = 0; g < grid.size(); ++g) {
    for (std::size_t k = 0; k < dim; ++k) {
      cos_vec(k) = std::cos(static_cast<double>(k) * grid[g]);
      sin_vec(k) = std::sin(static_cast<double>(k) * grid[g]);
    }
    const double denom = (noise.transpose() * cos_vec).squaredNorm() +
                         (noise.transpose() * sin_vec).squaredNorm();
    result.pseudo.power[g] = 1.0 / std::max(denom, 1e-300);
  }

  // Interior local maxima, largest first. A pseudo-spectrum whose total
  // variation is at rounding level carries no structure: spurious maxima
  // there are floating-point noise, not components.
  const auto& pm = result.pseudo.power;
  const auto [lo_it, hi_it] = std::minmax_element(pm.begin(), pm.end());
  const bool flat = *hi_it - *lo_it <= 1e-9 * *hi_it;
  std::vector<std::size_t> maxima;
  for (std::size_t i = 1; !flat && i + 1 < grid.size(); ++i)
    if (pm[i] > pm[i - 1] && pm[i] >= pm[i + 1] && grid[i] > 0.0 &&
        grid[i] < kPi)
      maxima.push_back(i);
  std::sort(maxima.begin(), maxima.end(),
            [&](std::size_t a, std::size_t b) { return pm[a] > pm[b]; });
  if (maxima.size() > num_components) maxima.resize(num_components);
  result.too_few_maxima = maxima.size() < num_components;

  for (std::size_t i : maxima) {
    // Parabolic refinement through the three samples around the maximum.
    const double y0 = pm[i - 1], y1 = pm[i], y2 = pm[i + 1];
    const double curvature = y0 - 2.0 * y1 + y2;
    double offset = 0.0;
    if (curvature < 0.0) offset = 0.5 * (y0 - y2) / curvature;
    offset = std::clamp(offset, -0.5, 0.5);
    result.peak_freqs.push_back(grid[i] + offset * (grid[i] - grid[i - 1]));
  }
  std::sort(result.peak_freqs.begin(), result.peak_freqs.end());
  return result;
}

}  // namespace qns
