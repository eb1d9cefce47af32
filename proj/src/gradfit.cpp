#include "qns/gradfit.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <nlohmann/json.hpp>

#include "detail.hpp"
#include "qns/classical_fit.hpp"
#include "qns/errors.hpp"
#include "qns/invert.hpp"
#include "qns/minimize.hpp"
#include "qns/probe.hpp"
#include "qns/rng.hpp"

namespace qns {

namespace {

constexpr double kPoleThreshold = 1e-12;

// Weighted filter table for one set of sequences on one grid. Evaluating it
// dominates workspace setup, and callers such as finite-difference checks
// evaluate the same dataset many times in a row, so the most recent table is
// memoized per thread and reused when the sequences and grid match exactly.
struct FilterTable {
  std::size_t grid_points = 0;
  std::vector<std::vector<double>> signs;
  Eigen::MatrixXd filter_w;  // sequences × grid, F(k,i)·wt_i/π

  bool matches(const std::vector<ProbeSequence>& seqs,
               std::size_t points) const {
    if (points != grid_points || seqs.size() != signs.size()) return false;
    for (std::size_t k = 0; k < seqs.size(); ++k)
      if (seqs[k].signs != signs[k]) return false;
    return true;
  }
};

const Eigen::MatrixXd& weighted_filters(const std::vector<ProbeSequence>& seqs,
                                        const std::vector<double>& grid) {
  thread_local FilterTable cache;
  if (cache.matches(seqs, grid.size())) return cache.filter_w;

  const auto wt = trapezoid_weights(grid.size());
  cache.filter_w.resize(static_cast<Eigen::Index>(seqs.size()),
                        static_cast<Eigen::Index>(grid.size()));
  cache.signs.clear();
  for (std::size_t k = 0; k < seqs.size(); ++k) {
    const auto ff = filter_function(seqs[k], grid);
    for (std::size_t i = 0; i < grid.size(); ++i)
      cache.filter_w(static_cast<Eigen::Index>(k),
                     static_cast<Eigen::Index>(i)) = ff.values[i] * wt[i] / kPi;
    cache.signs.push_back(seqs[k].signs);
  }
  cache.grid_points = grid.size();
  return cache.filter_w;
}

// Everything about the dataset that the descent reuses every step: the
// filter matrix already folded with the quadrature weights (so χ is a
// single matrix-vector product), the observed probabilities, and the
// constant background overlaps.
struct Workspace {
  std::vector<double> grid;
  Eigen::MatrixXd filter_w;  // sequences × grid, F(k,i)·wt_i/π
  Eigen::VectorXd probs;
  Eigen::VectorXd chi_bg;
  double inv_k = 0.0;

  Workspace(const QnsDataset& dataset, const SpectrumEstimate* background,
            std::size_t grid_points) {
    const std::size_t num_seq = dataset.sequences.size();
    if (num_seq == 0 || dataset.probs.size() != num_seq)
      throw InvalidCounts("gradient fit needs a non-empty dataset");
    grid = frequency_grid(grid_points);
    filter_w = weighted_filters(dataset.sequences, grid);

    probs.resize(num_seq);
    for (std::size_t k = 0; k < num_seq; ++k) probs(k) = dataset.probs[k];

    chi_bg = Eigen::VectorXd::Zero(num_seq);
    if (background != nullptr)
      for (std::size_t k = 0; k < num_seq; ++k)
        chi_bg(k) = overlap_chi(*background, dataset.sequences[k]);

    inv_k = 1.0 / static_cast<double>(num_seq);
  }
};

// cos(mω) and sin(mω) columns for m = 0..max_order, by the Chebyshev-style
// two-term recurrence.
struct Harmonics {
  Eigen::MatrixXd cos_t;
  Eigen::MatrixXd sin_t;

  Harmonics(const std::vector<double>& grid, std::size_t max_order) {
    const auto n = static_cast<Eigen::Index>(grid.size());
    cos_t.resize(n, static_cast<Eigen::Index>(max_order) + 1);
    sin_t.resize(n, static_cast<Eigen::Index>(max_order) + 1);
    cos_t.col(0).setOnes();
    sin_t.col(0).setZero();
    if (max_order >= 1) {
      for (Eigen::Index i = 0; i < n; ++i) {
        cos_t(i, 1) = std::cos(grid[static_cast<std::size_t>(i)]);
        sin_t(i, 1) = std::sin(grid[static_cast<std::size_t>(i)]);
      }
      for (std::size_t m = 2; m <= max_order; ++m) {
        const auto mm = static_cast<Eigen::Index>(m);
        cos_t.col(mm) =
            2.0 * cos_t.col(1).cwiseProduct(cos_t.col(mm - 1)) - cos_t.col(mm - 2);
        sin_t.col(mm) =
            2.0 * cos_t.col(1).cwiseProduct(sin_t.col(mm - 1)) - sin_t.col(mm - 2);
      }
    }
  }
};

// θ layout: [c_1..c_p, b_0..b_q].
Eigen::VectorXd pack(const ArmaModel& model) {
  const std::size_t p = model.p();
  Eigen::VectorXd theta(p + model.ma.size());
  for (std::size_t i = 0; i < p; ++i) theta(i) = model.ar[i];
  for (std::size_t i = 0; i < model.ma.size(); ++i)
    theta(static_cast<Eigen::Index>(p + i)) = model.ma[i];
  return theta;
}

ArmaModel unpack(const Eigen::VectorXd& theta, std::size_t p, std::size_t q) {
  ArmaModel model;
  model.ar.resize(p);
  model.ma.resize(q + 1);
  for (std::size_t i = 0; i < p; ++i) model.ar[i] = theta(i);
  for (std::size_t i = 0; i <= q; ++i)
    model.ma[i] = theta(static_cast<Eigen::Index>(p + i));
  return model;
}

struct EvalResult {
  double mse = std::numeric_limits<double>::quiet_NaN();
  Eigen::VectorXd grad;
  bool pole = false;
};

// Loss and its analytic gradient in one pass. Spectrum terms on the grid:
// A = 1 + Σ c_m e^{-imω}, B = Σ b_m e^{-imω}, S = |B|²/|A|²;
//   ∂S/∂b_m = 2(B_re·cos mω + B_im·sin mω)/|A|²
//   ∂S/∂c_m = −S·2(A_re·cos mω + A_im·sin mω)/|A|²
// and each sequence contributes w_k = (2/K)(p̂_k − p_k)·(−½e^{−χ_k−χbg_k})
// through the quadrature row of filter_w.
EvalResult evaluate(const Workspace& ws, const Harmonics& tab, std::size_t p,
                    std::size_t q, const Eigen::VectorXd& theta,
                    bool want_grad) {
  const auto n = static_cast<Eigen::Index>(ws.grid.size());
  EvalResult out;

  Eigen::ArrayXd a_re = Eigen::ArrayXd::Ones(n);
  Eigen::ArrayXd a_im = Eigen::ArrayXd::Zero(n);
  for (std::size_t m = 1; m <= p; ++m) {
    const double c = theta(static_cast<Eigen::Index>(m - 1));
    a_re += c * tab.cos_t.col(static_cast<Eigen::Index>(m)).array();
    a_im += c * tab.sin_t.col(static_cast<Eigen::Index>(m)).array();
  }
  Eigen::ArrayXd b_re = Eigen::ArrayXd::Zero(n);
  Eigen::ArrayXd b_im = Eigen::ArrayXd::Zero(n);
  for (std::size_t m = 0; m <= q; ++m) {
    const double b = theta(static_cast<Eigen::Index>(p + m));
    b_re += b * tab.cos_t.col(static_cast<Eigen::Index>(m)).array();
    b_im += b * tab.sin_t.col(static_cast<Eigen::Index>(m)).array();
  }

  const Eigen::ArrayXd denom = a_re.square() + a_im.square();
  if ((denom <= kPoleThreshold).any()) {
    out.pole = true;
    return out;
  }
  const Eigen::ArrayXd spec = (b_re.square() + b_im.square()) / denom;

  const Eigen::VectorXd chi = ws.filter_w * spec.matrix();
  const Eigen::ArrayXd decay =
      0.5 * (-(chi + ws.chi_bg)).array().exp();
  const Eigen::ArrayXd resid = (0.5 + decay) - ws.probs.array();
  out.mse = resid.square().sum() * ws.inv_k;
  if (!std::isfinite(out.mse)) {
    out.pole = true;  // treat numeric blow-up like a pole: abandon the step
    return out;
  }
  if (!want_grad) return out;

  const Eigen::ArrayXd wk = (2.0 * ws.inv_k) * resid * (-decay);
  const Eigen::ArrayXd big_w =
      (ws.filter_w.transpose() * wk.matrix()).array();
  const Eigen::ArrayXd u = big_w / denom;           // for ∂S/∂b
  const Eigen::ArrayXd v = u * spec;                // for ∂S/∂c

  const Eigen::ArrayXd ub_re = u * b_re;
  const Eigen::ArrayXd ub_im = u * b_im;
  const Eigen::ArrayXd va_re = v * a_re;
  const Eigen::ArrayXd va_im = v * a_im;

  out.grad.resize(theta.size());
  for (std::size_t m = 1; m <= p; ++m) {
    const auto mm = static_cast<Eigen::Index>(m);
    out.grad(mm - 1) =
        -2.0 * ((va_re * tab.cos_t.col(mm).array()).sum() +
                (va_im * tab.sin_t.col(mm).array()).sum());
  }
  for (std::size_t m = 0; m <= q; ++m) {
    const auto mm = static_cast<Eigen::Index>(m);
    out.grad(static_cast<Eigen::Index>(p) + mm) =
        2.0 * ((ub_re * tab.cos_t.col(mm).array()).sum() +
               (ub_im * tab.sin_t.col(mm).array()).sum());
  }
  return out;
}

struct DescentOutcome {
  Eigen::VectorXd theta;
  double best = std::numeric_limits<double>::infinity();
  std::size_t iterations = 0;
  bool converged = false;
  bool start_pole = false;
};

// Adam with bias correction and best-iterate tracking; stops when the best
// loss stops improving, a pole interrupts evaluation, or the budget runs out.
DescentOutcome descend(const Workspace& ws, const Harmonics& tab,
                       std::size_t p, std::size_t q, Eigen::VectorXd theta,
                       const FitOptions& opt) {
  DescentOutcome out;
  out.theta = theta;

  Eigen::VectorXd m = Eigen::VectorXd::Zero(theta.size());
  Eigen::VectorXd v = Eigen::VectorXd::Zero(theta.size());
  double pow_b1 = 1.0, pow_b2 = 1.0;
  std::size_t last_improvement = 0;

  for (std::size_t t = 0; t < opt.max_iterations; ++t) {
    const EvalResult eval = evaluate(ws, tab, p, q, theta, /*want_grad=*/true);
    if (eval.pole) {
      out.start_pole = (t == 0);
      return out;  // keep the best iterate seen so far
    }
    if (eval.mse < out.best - opt.stall_tolerance) last_improvement = t;
    if (eval.mse < out.best) {
      out.best = eval.mse;
      out.theta = theta;
    }
    if (t - last_improvement >= opt.stall_window) {
      out.converged = true;
      return out;
    }

    pow_b1 *= opt.beta1;
    pow_b2 *= opt.beta2;
    m = opt.beta1 * m + (1.0 - opt.beta1) * eval.grad;
    v = opt.beta2 * v +
        (1.0 - opt.beta2) * eval.grad.cwiseProduct(eval.grad);
    const Eigen::ArrayXd m_hat = m.array() / (1.0 - pow_b1);
    const Eigen::ArrayXd v_hat = v.array() / (1.0 - pow_b2);
    theta.array() -= opt.learning_rate * m_hat / (v_hat.sqrt() + 1e-8);
    out.iterations = t + 1;
  }

  // Final position after the last update still counts toward the best.
  const EvalResult eval = evaluate(ws, tab, p, q, theta, /*want_grad=*/false);
  if (!eval.pole && eval.mse < out.best) {
    out.best = eval.mse;
    out.theta = theta;
  }
  return out;
}

// Cepstral starting point: NNLS band spectrum, floored and spline-densified,
// through cepstral_arma, with the overall scale re-optimized against the
// probabilities. Any failure along the way throws and the caller falls back
// to random starts.
ArmaModel cepstral_start(const QnsDataset& dataset, std::size_t p,
                         std::size_t q) {
  SpectrumEstimate bands = nnls_pipeline(dataset);
  double peak = 0.0;
  for (double s : bands.power) peak = std::max(peak, s);
  if (peak <= 0.0)
    throw DegenerateSpectrum("NNLS spectrum is identically zero");
  for (double& s : bands.power) s = std::max(s, 1e-6 * peak);
  SpectrumEstimate dense = interpolate(bands, frequency_grid(1024));
  for (double& s : dense.power) s = std::max(s, 1e-6 * peak);
  const ArmaModel shape = cepstral_arma(dense, p, q);
  return kappa_optimize(shape, dataset);
}

// Random stationary starting point: conjugate pole pairs with moderate
// radius, mild MA taps, overall power matched to the dataset's white-noise
// power estimate.
ArmaModel random_start(const QnsDataset& dataset, std::size_t p,
                       std::size_t q, std::uint64_t seed,
                       std::size_t restart) {
  CounterRng rng(CounterRng::derive_key(seed, {0x696e6974ULL, restart}));

  ArmaModel model;
  model.ar.assign(p, 0.0);
  std::vector<double> poly{1.0};
  const auto mul_factor = [&poly](const std::vector<double>& factor) {
    std::vector<double> next(poly.size() + factor.size() - 1, 0.0);
    for (std::size_t i = 0; i < poly.size(); ++i)
      for (std::size_t j = 0; j < factor.size(); ++j)
        next[i + j] += poly[i] * factor[j];
    poly = std::move(next);
  };
  std::size_t remaining = p;
  while (remaining >= 2) {
    const double radius = 0.3 + 0.55 * rng.uniform();
    const double angle = kPi * rng.uniform();
    mul_factor({1.0, -2.0 * radius * std::cos(angle), radius * radius});
    remaining -= 2;
  }
  if (remaining == 1) {
    const double radius = 0.3 + 0.55 * rng.uniform();
    const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
    mul_factor({1.0, -sign * radius});
  }
  for (std::size_t i = 0; i < p; ++i) model.ar[i] = poly[i + 1];

  model.ma.assign(q + 1, 0.0);
  model.ma[0] = 1.0;
  for (std::size_t j = 1; j <= q; ++j) model.ma[j] = 0.3 * rng.normal();

  double target = 0.0;
  try {
    target = mean_power_estimate(dataset);
  } catch (const QnsError&) {
    target = 0.0;
  }
  if (target <= 0.0) target = 1e-2;
  const double actual = autocovariance(model, 1).lags[0];
  if (actual > 0.0) {
    const double scale = std::sqrt(target / actual);
    for (double& b : model.ma) b *= scale;
  }
  return model;
}

double criterion_value(const FitResult& result, SelectCriterion criterion) {
  switch (criterion) {
    case SelectCriterion::mse:
      return result.mse;
    case SelectCriterion::aic:
      return result.aic;
    default:
      return result.bic;
  }
}

FitResult fit_with_workspace(const Workspace& ws, const Harmonics& tab,
                             const QnsDataset& dataset, std::size_t p,
                             std::size_t q, const FitOptions& options,
                             const ArmaModel* init) {
  struct Candidate {
    Eigen::VectorXd theta;
    InitSource source;
  };
  std::vector<Candidate> candidates;
  if (init != nullptr) {
    if (init->p() != p || init->ma.size() != q + 1)
      throw InvalidCounts("fit: init model order does not match (p, q)");
    candidates.push_back({pack(*init), InitSource::given});
  } else {
    try {
      candidates.push_back({pack(cepstral_start(dataset, p, q)),
                            InitSource::cepstral});
    } catch (const QnsError&) {
      // fall through to random restarts
    }
  }

  const auto push_random_restarts = [&] {
    const std::size_t restarts =
        std::max<std::size_t>(options.random_restarts, 1);
    for (std::size_t k = 0; k < restarts; ++k)
      candidates.push_back(
          {pack(random_start(dataset, p, q, options.seed, k)),
           InitSource::random});
  };
  if (init == nullptr && candidates.empty()) push_random_restarts();

  DescentOutcome best_outcome;
  InitSource best_source = InitSource::random;
  bool any_evaluated = false;
  const auto run_candidates = [&](std::size_t first) {
    for (std::size_t i = first; i < candidates.size(); ++i) {
      const DescentOutcome outcome =
          descend(ws, tab, p, q, candidates[i].theta, options);
      if (outcome.start_pole) continue;  // unusable starting point
      any_evaluated = true;
      if (outcome.best < best_outcome.best) {
        best_outcome = outcome;
        best_source = candidates[i].source;
      }
    }
  };
  run_candidates(0);
  if (!any_evaluated && init == nullptr &&
      candidates.front().source == InitSource::cepstral) {
    // The cepstral start itself sat on a pole; retry from random starts.
    const std::size_t first_new = candidates.size();
    push_random_restarts();
    run_candidates(first_new);
  }
  if (!any_evaluated) {
    if (init != nullptr)
      throw PoleOnGrid("fit: init model has a pole on the quadrature grid");
    throw NoConvergence("fit: every starting point had a pole on the grid");
  }

  FitResult result;
  result.model = unpack(best_outcome.theta, p, q);
  result.mse = best_outcome.best;
  result.iterations = best_outcome.iterations;
  result.converged = best_outcome.converged;
  result.init_source = best_source;

  const double k_count = static_cast<double>(dataset.probs.size());
  const double n_params = static_cast<double>(p + q + 1);
  const double log_mse = std::log(std::max(result.mse, 1e-300));
  const double sign = options.legacy_criterion_signs ? -1.0 : 1.0;
  result.aic = k_count * log_mse + sign * 2.0 * n_params;
  result.bic = k_count * log_mse + sign * n_params * std::log(k_count);
  return result;
}

}  // namespace

double loss(const ArmaModel& model, const QnsDataset& dataset,
            const SpectrumEstimate* background, std::size_t grid_points) {
  const Workspace ws(dataset, background, grid_points);
  const Harmonics tab(ws.grid, std::max(model.p(), model.q()));
  const EvalResult eval = evaluate(ws, tab, model.p(), model.q(),
                                   pack(model), /*want_grad=*/false);
  if (eval.pole)
    throw PoleOnGrid("loss: psd denominator vanishes on the grid");
  return eval.mse;
}

CoefficientGradient gradient(const ArmaModel& model, const QnsDataset& dataset,
                             const SpectrumEstimate* background,
                             std::size_t grid_points) {
  const Workspace ws(dataset, background, grid_points);
  const Harmonics tab(ws.grid, std::max(model.p(), model.q()));
  const EvalResult eval = evaluate(ws, tab, model.p(), model.q(),
                                   pack(model), /*want_grad=*/true);
  if (eval.pole)
    throw PoleOnGrid("gradient: psd denominator vanishes on the grid");

  CoefficientGradient grad;
  grad.d_ar.resize(model.p());
  grad.d_ma.resize(model.ma.size());
  for (std::size_t i = 0; i < model.p(); ++i) grad.d_ar[i] = eval.grad(i);
  for (std::size_t i = 0; i < model.ma.size(); ++i)
    grad.d_ma[i] = eval.grad(static_cast<Eigen::Index>(model.p() + i));
  return grad;
}

FitResult fit(const QnsDataset& dataset, std::size_t p, std::size_t q,
              const FitOptions& options, const ArmaModel* init,
              const SpectrumEstimate* background) {
  const Workspace ws(dataset, background, options.grid_points);
  const Harmonics tab(ws.grid, std::max(p, q));
  return fit_with_workspace(ws, tab, dataset, p, q, options, init);
}

FitResult model_select(const QnsDataset& dataset, std::size_t max_params,
                       SelectCriterion criterion, const FitOptions& options,
                       const SpectrumEstimate* background,
                       std::vector<SelectionRow>* table) {
  if (max_params < 1)
    throw InvalidCounts("model_select: max_params must be >= 1");

  const Workspace ws(dataset, background, options.grid_points);
  const Harmonics tab(ws.grid, max_params - 1);
  if (table != nullptr) table->clear();

  FitResult best;
  double best_value = std::numeric_limits<double>::infinity();
  bool have_best = false;
  for (std::size_t n = 1; n <= max_params; ++n) {
    for (std::size_t p = 0; p < n; ++p) {
      const std::size_t q = n - 1 - p;
      FitOptions per_fit = options;
      per_fit.seed =
          CounterRng::derive_key(dataset.seed ^ options.seed, {p, q});
      const FitResult result =
          fit_with_workspace(ws, tab, dataset, p, q, per_fit, nullptr);
      if (table != nullptr)
        table->push_back({p, q, result.mse, result.aic, result.bic});
      const double value = criterion_value(result, criterion);
      if (!have_best || value < best_value) {
        best = result;
        best_value = value;
        have_best = true;
      }
    }
  }
  return best;
}

double fit_beta(const SpectrumEstimate& native,
                const SpectrumEstimate& injected, const QnsDataset& dataset) {
  for (double s : native.power)
    if (s < 0.0) throw NegativePower("fit_beta: native spectrum is negative");
  for (double s : injected.power)
    if (s < 0.0)
      throw NegativePower("fit_beta: injected spectrum is negative");
  if (dataset.probs.empty())
    throw InvalidCounts("fit_beta needs a non-empty dataset");

  const std::size_t num_seq = dataset.sequences.size();
  std::vector<double> chi_nat(num_seq), chi_inj(num_seq);
  for (std::size_t k = 0; k < num_seq; ++k) {
    chi_nat[k] = overlap_chi(native, dataset.sequences[k]);
    chi_inj[k] = overlap_chi(injected, dataset.sequences[k]);
  }

  const auto mse = [&](double beta) {
    double sum = 0.0;
    for (std::size_t k = 0; k < num_seq; ++k) {
      const double predicted =
          0.5 + 0.5 * std::exp(-(beta * chi_nat[k] + chi_inj[k]));
      const double diff = predicted - dataset.probs[k];
      sum += diff * diff;
    }
    return sum / static_cast<double>(num_seq);
  };
  return golden_minimize_expanding(mse, 0.0, 4.0, 1e-8);
}

void save_fit_json(const std::string& path, const FitResult& result) {
  nlohmann::json doc;
  doc["model"] = nlohmann::json::parse(model_to_json(result.model));
  doc["mse"] = result.mse;
  doc["aic"] = result.aic;
  doc["bic"] = result.bic;
  doc["iterations"] = result.iterations;
  doc["converged"] = result.converged;
  switch (result.init_source) {
    case InitSource::cepstral:
      doc["init_source"] = "cepstral";
      break;
    case InitSource::random:
      doc["init_source"] = "random";
      break;
    default:
      doc["init_source"] = "given";
      break;
  }
  detail::write_file(path, doc.dump(2) + "\n");
}

void save_selection_csv(const std::string& path,
                        const std::vector<SelectionRow>& table) {
  std::string text = "p,q,mse,aic,bic\n";
  for (const auto& row : table) {
    text += std::to_string(row.p) + "," + std::to_string(row.q) + "," +
            detail::fmt_double(row.mse) + "," + detail::fmt_double(row.aic) +
            "," + detail::fmt_double(row.bic) + "\n";
  }
  detail::write_file(path, text);
}

}  // namespace qns
