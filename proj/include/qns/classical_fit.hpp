#pragma once

#include <cstddef>
#include <vector>

#include "qns/arma_core.hpp"
#include "qns/sim.hpp"

namespace qns {

// MUSIC output: the pseudo-spectrum (unnormalized — peak locations are all
// that is meaningful) plus its largest local maxima, sorted ascending.
struct MusicResult {
  SpectrumEstimate pseudo;
  std::vector<double> peak_freqs;
  bool too_few_maxima = false;  // fewer interior maxima than requested
};

// MA descent outcome. converged reflects the gradient-norm stop rule; on a
// hit iteration cap the best iterate is returned with converged = false.
struct MaFitResult {
  ArmaModel model;
  double objective = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
};

// Fits AR(order) to the autocovariance by the Yule-Walker equations.
// Standard form solves the order×order Toeplitz system from lags 1..order;
// the overdetermined form uses every available lag row in least squares.
// b₀ is set from r[0] = Σ a_k r[k] + b₀² with b₀ ≥ 0. Throws SingularSystem
// and NegativeResidualVariance.
ArmaModel yule_walker(const AutocovarianceSeq& r, std::size_t order,
                      bool overdetermined = false);

// Minimizes Σ_{k=0}^{q} (r[k] − Σ_{j=k}^{q} b_j b_{j−k})² by damped Newton
// descent with analytic gradient/Hessian. Initialized at
// b₀ = sqrt(max(r[0] + 2Σ_{j≥1} r[j], r[0])), b_{j>0} = 0. Converged when the
// gradient norm drops below 1e-10 (500 iterations cap). Accepted iterates
// never increase the objective. Returns b with b₀ ≥ 0.
MaFitResult ma_fit(const AutocovarianceSeq& r, std::size_t order);

// ARMA(p, q) from a sampled spectrum: AR part by Yule-Walker on the
// spectrum's autocovariance (rows offset past the MA horizon, least squares);
// MA part from the cepstrum ĉ_n = (1/π)∫ln S cos(nω) dω via the minimum-phase
// recursion with b'₀ = 1; overall scale κ from the ratio of integrated
// powers. The spectrum must be strictly positive: values are floored at
// 1e-12·max before the log, and DegenerateSpectrum is thrown if flooring
// touched more than 10% of the grid.
ArmaModel cepstral_arma(const SpectrumEstimate& spectrum, std::size_t p,
                        std::size_t q);

// Rescales model.ma by κ, where κ² minimizes the MSE between
// predict_survival(κ²·S, seq_k) and the dataset probabilities. κ² is
// initialized from the ratio of band-integrated powers (NNLS estimate of the
// dataset vs the unscaled model psd) and refined by golden-section search to
// tolerance 1e-8.
ArmaModel kappa_optimize(const ArmaModel& unscaled, const QnsDataset& dataset);

// MUSIC pseudo-spectrum: eigendecomposes the J×J Toeplitz autocovariance
// matrix (J = len(r)), projects the steering vector e(ω) onto the J−p
// noise-subspace eigenvectors, and returns the num_components largest local
// maxima in (0, π) from a grid scan with parabolic refinement. With real
// data, real tones occupy ± frequency pairs: to locate n real tones pass
// num_components = 2n and read the positive-frequency peaks (each real tone
// shows up once in (0, π)). Requires J > num_components.
MusicResult music(const AutocovarianceSeq& r, std::size_t num_components,
                  const std::vector<double>& grid);

}  // namespace qns
