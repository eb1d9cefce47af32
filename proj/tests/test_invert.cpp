#include <doctest.h>

#include <cmath>
#include <map>
#include <vector>

#include "helpers.hpp"
#include "qns/arma_core.hpp"
#include "qns/errors.hpp"
#include "qns/grid.hpp"
#include "qns/invert.hpp"
#include "qns/probe.hpp"
#include "qns/sim.hpp"

using namespace qns;
using qns_test::rel_err;

namespace {

QnsDataset dataset_with_probs(std::vector<double> probs, std::uint64_t shots) {
  QnsDataset ds;
  ds.sequences = generate_fttps(64, probs.size());
  ds.probs = std::move(probs);
  ds.shots = shots;
  return ds;
}

}  // namespace

TEST_CASE("chi extraction inverts the survival law") {
  auto ds = dataset_with_probs({1.0, 0.5 + 0.5 * std::exp(-1.0)}, 0);
  auto chi = chi_from_probs(ds);
  CHECK(chi.values[0] == doctest::Approx(0.0).scale(1e-12));
  CHECK(chi.values[1] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(chi.clip_count == 0);
}

TEST_CASE("chi extraction clips probabilities at or below one half") {
  auto ds = dataset_with_probs({0.9, 0.4}, 1000);
  auto chi = chi_from_probs(ds);
  // epsilon = 1/(2*shots) = 5e-4, so the clip ceiling is -ln(2*5e-4).
  CHECK(chi.values[1] == doctest::Approx(-std::log(1e-3)).epsilon(1e-12));
  CHECK(chi.clip_count == 1);
  CHECK(chi.values[0] == doctest::Approx(-std::log(2.0 * 0.4)).epsilon(1e-12));
}

TEST_CASE("chi clipping falls back to the floor for exact datasets") {
  auto ds = dataset_with_probs({0.5}, 0);
  auto chi = chi_from_probs(ds);
  CHECK(chi.values[0] == doctest::Approx(-std::log(2e-6)).epsilon(1e-12));
  CHECK(chi.clip_count == 1);
}

TEST_CASE("the band grid holds the probe peak frequencies") {
  auto grid = fttps_peak_grid(64, 64);
  REQUIRE(grid.size() == 64);
  for (std::size_t j = 1; j <= 64; ++j)
    CHECK(grid[j - 1] == doctest::Approx(j * kPi / 64.0).epsilon(1e-15));
}

TEST_CASE("filter matrix columns sample the filter with the band weight") {
  auto seqs = generate_fttps(64, 64);
  auto grid = fttps_peak_grid(64, 64);
  auto F = build_filter_matrix(seqs, grid);
  REQUIRE(F.entries.rows() == 64);
  REQUIRE(F.entries.cols() == 64);
  const double weight = (kPi / 64.0) / kPi;
  for (std::size_t k : {0ul, 12ul, 63ul}) {
    auto f = filter_function(seqs[k], grid);
    for (std::size_t j = 0; j < grid.size(); ++j)
      CHECK(F.entries(k, j) ==
            doctest::Approx(f.values[j] * weight).epsilon(1e-12));
  }
  CHECK((F.entries.array() >= 0.0).all());
}

TEST_CASE("filter matrix rows against the white-noise overlap") {
  // A flat spectrum sigma^2 has exact overlap K sigma^2 / 2 on every row.
  // The band Riemann sum reproduces that within 2% except at seven known
  // edge rows, whose exact leakage ratios are pinned below.
  auto seqs = generate_fttps(64, 64);
  auto F = build_filter_matrix(seqs, fttps_peak_grid(64, 64));
  const double sigma2 = 0.0025;
  const double exact = 64.0 * sigma2 / 2.0;
  Eigen::VectorXd flat = Eigen::VectorXd::Constant(64, sigma2);
  Eigen::VectorXd chi = F.entries * flat;

  const std::map<int, double> edge_ratio = {
      {1, 0.5},     {3, 0.94140625}, {21, 1.046875}, {43, 0.94140625},
      {61, 1.046875}, {63, 1.46875},   {64, 1.5}};
  for (int j = 1; j <= 64; ++j) {
    const double ratio = chi[j - 1] / exact;
    auto it = edge_ratio.find(j);
    if (it != edge_ratio.end())
      CHECK(ratio == doctest::Approx(it->second).epsilon(1e-9));
    else
      CHECK(std::abs(ratio - 1.0) <= 0.02);
  }
}

TEST_CASE("filter matrix row maxima sit on the diagonal") {
  auto seqs = generate_fttps(64, 64);
  auto F = build_filter_matrix(seqs, fttps_peak_grid(64, 64));
  for (int k = 0; k < 64; ++k) {
    int best;
    F.entries.row(k).maxCoeff(&best);
    if (k == 62)  // sequence 63 peaks one band step over, at Nyquist
      CHECK(best == 63);
    else
      CHECK(best == k);
  }
}

TEST_CASE("identity-system NNLS returns the data") {
  FilterMatrix F;
  F.entries = Eigen::MatrixXd::Identity(3, 3);
  F.freqs = {0.1, 0.2, 0.3};
  ChiVector chi;
  chi.values = {1.0, 2.0, 3.0};
  NnlsInfo info;
  auto s = nnls_solve(F, chi, &info);
  CHECK(s.power[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(s.power[1] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(s.power[2] == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(info.residual == doctest::Approx(0.0).scale(1e-10));
}

TEST_CASE("NNLS pins negative-pull coordinates at zero") {
  FilterMatrix F;
  F.entries = Eigen::MatrixXd::Identity(3, 3);
  F.freqs = {0.1, 0.2, 0.3};
  ChiVector chi;
  chi.values = {1.0, -1.0, 2.0};
  auto s = nnls_solve(F, chi);
  CHECK(s.power[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(s.power[1] == 0.0);
  CHECK(s.power[2] == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("NNLS recovers a noiseless band spectrum exactly") {
  auto seqs = generate_fttps(64, 64);
  auto grid = fttps_peak_grid(64, 64);
  auto F = build_filter_matrix(seqs, grid);
  ArmaModel ar1{{-0.5}, {0.05}};
  auto strue = psd(ar1, grid);
  Eigen::Map<const Eigen::VectorXd> sv(strue.power.data(), 64);
  Eigen::VectorXd chi_vec = F.entries * sv;
  ChiVector chi;
  chi.values.assign(chi_vec.data(), chi_vec.data() + 64);
  auto s = nnls_solve(F, chi);
  for (int j = 0; j < 64; ++j)
    CHECK(std::abs(s.power[j] - strue.power[j]) < 1e-6);
}

TEST_CASE("NNLS solutions satisfy the optimality conditions") {
  // gradient of 0.5*||Fs - chi||^2 is F^T(Fs - chi): non-negative on active
  // (zero) coordinates, zero on free ones.
  auto seqs = generate_fttps(64, 64);
  auto F = build_filter_matrix(seqs, fttps_peak_grid(64, 64));
  ChiVector chi;
  CounterRng rng(CounterRng::derive_key(55, {4}));
  for (int k = 0; k < 64; ++k)
    chi.values.push_back(0.05 + 0.03 * rng.normal());
  auto s = nnls_solve(F, chi);
  Eigen::Map<const Eigen::VectorXd> sv(s.power.data(), 64);
  Eigen::Map<const Eigen::VectorXd> cv(chi.values.data(), 64);
  Eigen::VectorXd grad = F.entries.transpose() * (F.entries * sv - cv);
  const double scale = std::max(1.0, grad.cwiseAbs().maxCoeff());
  for (int j = 0; j < 64; ++j) {
    if (s.power[j] > 0.0)
      CHECK(std::abs(grad[j]) / scale < 1e-8);
    else
      CHECK(grad[j] / scale > -1e-8);
  }
}

TEST_CASE("the full inversion pipeline conserves band power") {
  // Smooth spectrum, exact data: the band-integrated NNLS power matches the
  // model's total power within 5%.
  ArmaModel m{{-0.5}, {0.05}};
  auto seqs = generate_fttps(64, 64);
  auto ds = exact_qns({m}, seqs, 0, 11);
  NnlsInfo info;
  ChiVector chi;
  auto bands = nnls_pipeline(ds, &info, &chi);
  REQUIRE(bands.power.size() == 64);
  CHECK(chi.clip_count == 0);
  double band_power = 0.0;
  for (double v : bands.power) band_power += v * (kPi / 64.0) / kPi;
  double r0 = autocovariance(m, 1).lags[0];
  CHECK(rel_err(band_power, r0) < 0.05);
}

TEST_CASE("spline interpolation reproduces constants, knots, and lines") {
  SpectrumEstimate spec;
  for (int i = 0; i < 8; ++i) {
    spec.freqs.push_back(0.1 + 0.35 * i);
    spec.power.push_back(2.5);
  }
  auto dense = frequency_grid(101);

  SUBCASE("constant data") {
    auto out = interpolate(spec, dense);
    for (double v : out.power) CHECK(v == doctest::Approx(2.5).epsilon(1e-12));
    CHECK(out.interpolation == Interpolation::cubic_spline);
  }

  SUBCASE("knot values are exact") {
    for (std::size_t i = 0; i < spec.freqs.size(); ++i) spec.power[i] = 1.0 + i * i;
    auto out = interpolate(spec, spec.freqs);
    for (std::size_t i = 0; i < spec.freqs.size(); ++i)
      CHECK(out.power[i] == doctest::Approx(spec.power[i]).epsilon(1e-12));
  }

  SUBCASE("linear data reproduces the line everywhere") {
    for (std::size_t i = 0; i < spec.freqs.size(); ++i)
      spec.power[i] = 0.7 + 1.3 * spec.freqs[i];
    auto out = interpolate(spec, dense);
    for (std::size_t i = 0; i < dense.size(); ++i)
      CHECK(out.power[i] ==
            doctest::Approx(0.7 + 1.3 * dense[i]).epsilon(1e-9));
  }
}

TEST_CASE("spline interpolation clamps below zero and needs four knots") {
  SpectrumEstimate spec;
  spec.freqs = {0.5, 1.0, 1.5, 2.0};
  spec.power = {0.0, 1.0, 0.0, 1.0};
  auto out = interpolate(spec, frequency_grid(200));
  for (double v : out.power) CHECK(v >= 0.0);

  SpectrumEstimate tiny;
  tiny.freqs = {0.1, 0.2, 0.3};
  tiny.power = {1.0, 1.0, 1.0};
  CHECK_THROWS_AS(interpolate(tiny, frequency_grid(10)), TooFewPoints);
}

TEST_CASE("autocovariance from a flat spectrum is white") {
  SpectrumEstimate flat;
  flat.freqs = frequency_grid(2048);
  flat.power.assign(2048, 0.3);
  auto r = autocov_from_spectrum(flat, 6);
  CHECK(r.lags[0] == doctest::Approx(0.3).epsilon(1e-10));
  for (std::size_t k = 1; k < 6; ++k) CHECK(std::abs(r.lags[k]) < 1e-10);
}

TEST_CASE("autocovariance from a model psd matches the model") {
  ArmaModel ma1{{}, {1.0, 0.5}};
  auto spec = psd(ma1, frequency_grid(4096));
  auto r = autocov_from_spectrum(spec, 4);
  CHECK(r.lags[0] == doctest::Approx(1.25).epsilon(1e-6));
  CHECK(r.lags[1] == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(std::abs(r.lags[2]) < 1e-8);

  ArmaModel arma{{-0.6, 0.2}, {0.8, 0.3}};
  auto spec2 = psd(arma, frequency_grid(8192));
  auto r2 = autocov_from_spectrum(spec2, 11);
  auto truth = autocovariance(arma, 11);
  for (std::size_t k = 0; k <= 10; ++k)
    CHECK(rel_err(r2.lags[k], truth.lags[k]) < 1e-4);
}

TEST_CASE("a narrow spectral line transforms to a cosine autocovariance") {
  // Rectangle of height h and half-width dw around w0 integrates to power
  // P = h * 2dw / (2pi) per side; r[k] ~ P_total * cos(k w0).
  const double w0 = 0.9, dw = 0.002, h = 100.0;
  SpectrumEstimate line;
  line.freqs = frequency_grid(65536);
  line.power.assign(line.freqs.size(), 0.0);
  for (std::size_t i = 0; i < line.freqs.size(); ++i)
    if (std::abs(line.freqs[i] - w0) <= dw) line.power[i] = h;
  auto r = autocov_from_spectrum(line, 4);
  const double P = r.lags[0];
  REQUIRE(P > 0.0);
  for (std::size_t k = 1; k <= 3; ++k)
    CHECK(r.lags[k] == doctest::Approx(P * std::cos(k * w0)).epsilon(0.01));
}

TEST_CASE("mean power inverts exact white-noise datasets") {
  const double sigma2 = 0.004;
  const double p = 0.5 + 0.5 * std::exp(-64.0 * sigma2 / 2.0);
  QnsDataset ds;
  ds.sequences = generate_fttps(64, 64);
  ds.probs.assign(64, p);
  ds.shots = 0;
  CHECK(rel_err(mean_power_estimate(ds), sigma2) < 1e-12);
}

TEST_CASE("mean power tracks simulated white noise at finite shots") {
  ArmaModel white{{}, {0.05}};
  auto seqs = generate_fttps(64, 64);
  auto ds = simulate_qns({white}, seqs, 1000, 1000, 123);
  CHECK(rel_err(mean_power_estimate(ds), 0.0025) < 0.03);
}

TEST_CASE("mean power reports fully clipped datasets") {
  QnsDataset ds;
  ds.sequences = generate_fttps(64, 4);
  ds.probs = {0.5, 0.49, 0.3, 0.5};
  ds.shots = 100;
  CHECK_THROWS_AS(mean_power_estimate(ds), AllClipped);
}
