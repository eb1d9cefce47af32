#include "qns/invert.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "detail.hpp"
#include "qns/errors.hpp"
#include "qns/probe.hpp"

namespace qns {

namespace {

double clip_epsilon(std::uint64_t shots) {
  const double eps = (shots > 0) ? 1.0 / (2.0 * static_cast<double>(shots)) : 0.0;
  return std::max(eps, 1e-6);
}

}  // namespace

ChiVector chi_from_probs(const QnsDataset& dataset) {
  const double eps = clip_epsilon(dataset.shots);
  const double chi_max = -std::log(2.0 * eps);
  ChiVector chi;
  chi.values.reserve(dataset.probs.size());
  for (double p : dataset.probs) {
    if (p > 0.5 + eps) {
      chi.values.push_back(-std::log(2.0 * (p - 0.5)));
    } else {
      chi.values.push_back(chi_max);
      ++chi.clip_count;
    }
  }
  return chi;
}

std::vector<double> fttps_peak_grid(std::size_t gate_count,
                                    std::size_t num_sequences) {
  if (gate_count < 1 || num_sequences < 1 || num_sequences > gate_count)
    throw InvalidCounts("fttps_peak_grid requires 1 <= num_sequences <= gate_count");
  std::vector<double> freqs(num_sequences);
  for (std::size_t j = 1; j <= num_sequences; ++j)
    freqs[j - 1] =
        static_cast<double>(j) * kPi / static_cast<double>(gate_count);
  return freqs;
}

FilterMatrix build_filter_matrix(const std::vector<ProbeSequence>& seqs,
                                 const std::vector<double>& est_freqs) {
  if (seqs.empty() || est_freqs.empty())
    throw InvalidCounts("build_filter_matrix needs sequences and frequencies");
  const double spacing = est_freqs.size() >= 2
                             ? est_freqs[1] - est_freqs[0]
                             : est_freqs[0];
  const double weight = spacing / kPi;

  FilterMatrix matrix;
  matrix.freqs = est_freqs;
  matrix.entries.resize(seqs.size(), est_freqs.size());
  for (std::size_t k = 0; k < seqs.size(); ++k) {
    const auto filter = filter_function(seqs[k], est_freqs);
    for (std::size_t j = 0; j < est_freqs.size(); ++j)
      matrix.entries(k, j) = filter.values[j] * weight;
  }
  return matrix;
}

SpectrumEstimate nnls_solve(const FilterMatrix& matrix, const ChiVector& chi,
                            NnlsInfo* info) {
  const Eigen::MatrixXd& F = matrix.entries;
  const auto rows = F.rows();
  const auto cols = F.cols();
  if (static_cast<std::size_t>(rows) != chi.values.size())
    throw InvalidCounts("filter matrix rows must match chi length");

  Eigen::VectorXd target(rows);
  for (Eigen::Index k = 0; k < rows; ++k) target(k) = chi.values[k];

  // Lawson–Hanson active set. P holds the currently-free (positive)
  // coordinates; everything else is pinned at zero.
  Eigen::VectorXd x = Eigen::VectorXd::Zero(cols);
  std::vector<bool> passive(cols, false);
  const double kkt_tol =
      1e-10 * std::max(1.0, (F.transpose() * target).cwiseAbs().maxCoeff());
  const std::size_t max_iterations = 3 * static_cast<std::size_t>(cols);
  std::size_t iterations = 0;

  auto solve_passive = [&](const std::vector<bool>& mask) {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index j = 0; j < cols; ++j)
      if (mask[j]) idx.push_back(j);
    Eigen::MatrixXd sub(rows, idx.size());
    for (std::size_t c = 0; c < idx.size(); ++c) sub.col(c) = F.col(idx[c]);
    Eigen::VectorXd z = sub.colPivHouseholderQr().solve(target);
    return std::pair(idx, z);
  };

  while (true) {
    const Eigen::VectorXd w = F.transpose() * (target - F * x);
    double w_best = 0.0;
    Eigen::Index t = -1;
    for (Eigen::Index j = 0; j < cols; ++j) {
      if (!passive[j] && w(j) > w_best) {
        w_best = w(j);
        t = j;
      }
    }
    if (t < 0 || w_best <= kkt_tol) break;  // KKT satisfied
    passive[t] = true;

    while (true) {
      if (++iterations > max_iterations)
        throw NoConvergence("NNLS exceeded " +
                            std::to_string(max_iterations) + " iterations");
      auto [idx, z] = solve_passive(passive);
      bool all_positive = true;
      for (Eigen::Index c = 0; c < z.size(); ++c)
        if (z(c) <= 0.0) all_positive = false;
      if (all_positive) {
        x.setZero();
        for (std::size_t c = 0; c < idx.size(); ++c) x(idx[c]) = z(c);
        break;
      }
      // Step as far toward z as non-negativity allows, then retire the
      // coordinates that hit zero.
      double alpha = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < idx.size(); ++c) {
        if (z(c) <= 0.0) {
          const double xj = x(idx[c]);
          alpha = std::min(alpha, xj / (xj - z(c)));
        }
      }
      for (std::size_t c = 0; c < idx.size(); ++c) {
        const Eigen::Index j = idx[c];
        x(j) += alpha * (z(c) - x(j));
        if (x(j) <= 1e-14) {
          x(j) = 0.0;
          passive[j] = false;
        }
      }
    }
  }

  if (info) {
    info->residual = (F * x - target).norm();
    info->iterations = iterations;
  }

  SpectrumEstimate spec;
  spec.freqs = matrix.freqs;
  spec.power.assign(x.data(), x.data() + cols);
  for (double& value : spec.power) value = std::max(value, 0.0);
  return spec;
}

SpectrumEstimate nnls_pipeline(const QnsDataset& dataset, NnlsInfo* info,
                               ChiVector* chi_out) {
  std::vector<double> est_freqs;
  est_freqs.reserve(dataset.sequences.size());
  for (const auto& seq : dataset.sequences) est_freqs.push_back(seq.peak_freq);
  const auto matrix = build_filter_matrix(dataset.sequences, est_freqs);
  const auto chi = chi_from_probs(dataset);
  if (chi_out) *chi_out = chi;
  return nnls_solve(matrix, chi, info);
}

CubicSpline::CubicSpline(const std::vector<double>& x,
                         const std::vector<double>& y)
    : x_(x), y_(y) {
  const std::size_t n = x_.size();
  if (n < 4 || y_.size() != n)
    throw TooFewPoints("cubic spline needs >= 4 knots");
  for (std::size_t i = 1; i < n; ++i)
    if (x_[i] <= x_[i - 1])
      throw InvalidCounts("spline knots must be strictly increasing");

  // Natural boundary: second derivatives vanish at both ends. Thomas
  // algorithm on the interior tridiagonal system.
  second_.assign(n, 0.0);
  std::vector<double> diag(n, 0.0), rhs(n, 0.0), upper(n, 0.0);
  diag[0] = 1.0;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double h0 = x_[i] - x_[i - 1];
    const double h1 = x_[i + 1] - x_[i];
    const double lower = h0;
    diag[i] = 2.0 * (h0 + h1);
    upper[i] = h1;
    rhs[i] = 6.0 * ((y_[i + 1] - y_[i]) / h1 - (y_[i] - y_[i - 1]) / h0);
    // Eliminate the subdiagonal against the previous row.
    if (i > 1) {
      const double factor = lower / diag[i - 1];
      diag[i] -= factor * upper[i - 1];
      rhs[i] -= factor * rhs[i - 1];
    }
  }
  for (std::size_t i = n - 2; i >= 1; --i)
    second_[i] = (rhs[i] - upper[i] * second_[i + 1]) / diag[i];
}

double CubicSpline::operator()(double at) const {
  // Locate the interval; evaluation beyond the ends extends the boundary
  // cubics.
  const std::size_t n = x_.size();
  std::size_t hi = std::upper_bound(x_.begin(), x_.end(), at) - x_.begin();
  hi = std::clamp<std::size_t>(hi, 1, n - 1);
  const std::size_t lo = hi - 1;
  const double h = x_[hi] - x_[lo];
  const double a = (x_[hi] - at) / h;
  const double b = (at - x_[lo]) / h;
  return a * y_[lo] + b * y_[hi] +
         ((a * a * a - a) * second_[lo] + (b * b * b - b) * second_[hi]) *
             (h * h) / 6.0;
}

SpectrumEstimate interpolate(const SpectrumEstimate& spec,
                             const std::vector<double>& dense_freqs) {
  const CubicSpline spline(spec.freqs, spec.power);
  SpectrumEstimate out;
  out.freqs = dense_freqs;
  out.power.resize(dense_freqs.size());
  for (std::size_t i = 0; i < dense_freqs.size(); ++i)
    out.power[i] = std::max(spline(dense_freqs[i]), 0.0);
  out.interpolation = Interpolation::cubic_spline;
  return out;
}

AutocovarianceSeq autocov_from_spectrum(const SpectrumEstimate& spec,
                                        std::size_t num_lags) {
  const std::size_t n = spec.freqs.size();
  if (n < 2)
    throw InvalidCounts("autocov_from_spectrum needs >= 2 grid points");
  AutocovarianceSeq r;
  r.lags.assign(num_lags, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (spec.power[i] < 0.0)
      throw NegativePower("spectrum power < 0 at ω = " +
                          detail::fmt_double(spec.freqs[i]));
    double w;
    if (i == 0)
      w = 0.5 * (spec.freqs[1] - spec.freqs[0]);
    else if (i + 1 == n)
      w = 0.5 * (spec.freqs[n - 1] - spec.freqs[n - 2]);
    else
      w = 0.5 * (spec.freqs[i + 1] - spec.freqs[i - 1]);
    const double sw = spec.power[i] * w / kPi;
    const double c1 = std::cos(spec.freqs[i]);
    double ck_prev = 1.0;
    double ck = c1;
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

double mean_power_estimate(const QnsDataset& dataset) {
  const double eps = clip_epsilon(dataset.shots);
  double chi_sum = 0.0;
  std::size_t usable = 0;
  for (double p : dataset.probs) {
    if (p > 0.5 + eps) {
      chi_sum += -std::log(2.0 * (p - 0.5));
      ++usable;
    }
  }
  if (usable == 0)
    throw AllClipped("no probability exceeded 1/2 + ε; cannot estimate power");
  const double gates =
      static_cast<double>(dataset.sequences.front().gate_count);
  return 2.0 * (chi_sum / static_cast<double>(usable)) / gates;
}

}  // namespace qns
