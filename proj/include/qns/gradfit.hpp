#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "qns/arma_core.hpp"
#include "qns/grid.hpp"
#include "qns/sim.hpp"

namespace qns {

// Where a fit's starting model came from.
enum class InitSource { cepstral, random, given };

// Which figure of merit model_select minimizes.
enum class SelectCriterion { mse, aic, bic };

// Optimizer and reproducibility knobs for the gradient fit. The descent is
// adaptive first-order (Adam-style moment estimates) on the raw ARMA
// coefficients; it stops early once the best loss has improved by less than
// stall_tolerance over stall_window consecutive steps.
struct FitOptions {
  double learning_rate = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  std::size_t max_iterations = 5000;
  double stall_tolerance = 1e-12;
  std::size_t stall_window = 50;
  // When no starting model is available (no cepstral estimate, none given),
  // this many random stationary models are tried and the best fit kept.
  std::size_t random_restarts = 5;
  std::uint64_t seed = 0;
  // Reported-criteria compatibility switch: false (default) uses the
  // standard penalized forms AIC = K·ln(MSE) + 2(p+q+1) and
  // BIC = K·ln(MSE) + (p+q+1)·ln(K); true flips the penalty sign to the
  // subtractive variant some references print (under which minimization
  // always favors the largest model — kept only for comparison runs).
  bool legacy_criterion_signs = false;
  std::size_t grid_points = kDefaultChiGrid;
};

// Outcome of one gradient fit.
struct FitResult {
  ArmaModel model;
  double mse = 0.0;
  double aic = 0.0;
  double bic = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  InitSource init_source = InitSource::random;
};

// ∂MSE/∂coefficient, split by coefficient family. d_ma[m] corresponds to
// b_m (m = 0..q) and d_ar[m] to the stored denominator coefficient c_{m+1}.
struct CoefficientGradient {
  std::vector<double> d_ar;
  std::vector<double> d_ma;
};

// One row of the model-selection grid.
struct SelectionRow {
  std::size_t p = 0;
  std::size_t q = 0;
  double mse = 0.0;
  double aic = 0.0;
  double bic = 0.0;
};

// Mean squared residual between the dataset's survival probabilities and the
// model's predictions p̂_k = ½ + ½·exp(−χ_model,k − χ_background,k). The
// optional background spectrum adds a constant per-sequence overlap (used for
// composite native+injected fits). Throws PoleOnGrid if the model's psd
// denominator vanishes on the quadrature grid.
double loss(const ArmaModel& model, const QnsDataset& dataset,
            const SpectrumEstimate* background = nullptr,
            std::size_t grid_points = kDefaultChiGrid);

// Analytic ∂loss/∂θ for every ARMA coefficient, by the chain rule through
// the overlap quadrature. Same grid and background convention as loss().
CoefficientGradient gradient(const ArmaModel& model, const QnsDataset& dataset,
                             const SpectrumEstimate* background = nullptr,
                             std::size_t grid_points = kDefaultChiGrid);

// Fits an ARMA(p, q) model to the dataset by gradient descent on loss().
// Starting point: `init` when given; otherwise a cepstral estimate built
// from the dataset's NNLS band spectrum; otherwise random restarts. Returns
// the best iterate seen (never worse than the start). converged reports
// whether the stall criterion fired before max_iterations.
FitResult fit(const QnsDataset& dataset, std::size_t p, std::size_t q,
              const FitOptions& options = {}, const ArmaModel* init = nullptr,
              const SpectrumEstimate* background = nullptr);

// Fits every (p, q) with p + q + 1 ≤ max_params and returns the fit that
// minimizes the chosen criterion (ties go to the earlier, smaller model;
// the scan runs in ascending p+q, then ascending p). Each fit is seeded
// deterministically from (dataset.seed, options.seed, p, q). When `table`
// is non-null it receives one row per (p, q) in scan order.
FitResult model_select(const QnsDataset& dataset, std::size_t max_params,
                       SelectCriterion criterion,
                       const FitOptions& options = {},
                       const SpectrumEstimate* background = nullptr,
                       std::vector<SelectionRow>* table = nullptr);

// Composite-fit scale factor: minimizes the MSE of predictions from
// β·S_native + S_injected over β ≥ 0 (golden-section search, tolerance
// 1e-8). Both spectra must be non-negative on their grids.
double fit_beta(const SpectrumEstimate& native,
                const SpectrumEstimate& injected, const QnsDataset& dataset);

// FitResult as JSON: coefficients, mse, aic, bic, iterations, converged,
// init_source.
void save_fit_json(const std::string& path, const FitResult& result);

// Model-selection grid as CSV `p,q,mse,aic,bic` in scan order.
void save_selection_csv(const std::string& path,
                        const std::vector<SelectionRow>& table);

}  // namespace qns
