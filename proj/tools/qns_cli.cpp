// qns — command-line front end for the noise-spectroscopy library.
//
// Verbs:
//   simulate   build an FTTPS dataset from configured noise models
//   estimate   run one estimator (nnls|yw|ma|cepstral|music|schwarma)
//   select     gradient-fit model-order search (AIC/BIC/MSE)
//   composite  fit the native-noise scale factor β against a known injection
//   superres   sweep an AR(2) peak between probe bands and compare
//              NNLS band argmax vs gradient-fit peak localization
//
// All configuration is JSON (--config) with unknown keys rejected; a handful
// of command-line flags override the matching config keys. Every verb writes
// a config_echo.json holding the fully-resolved configuration, so any output
// directory can be reproduced from its echo alone.
//
// Exit codes: 0 success, 2 configuration/input-file error, 3 estimator error.

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "qns/arma_core.hpp"
#include "qns/classical_fit.hpp"
#include "qns/errors.hpp"
#include "qns/gradfit.hpp"
#include "qns/grid.hpp"
#include "qns/invert.hpp"
#include "qns/probe.hpp"
#include "qns/rng.hpp"
#include "qns/sim.hpp"

namespace {

using nlohmann::json;

// ---------------------------------------------------------------------------
// small utilities

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw qns::ConfigError("cannot write file: " + path);
  out << content;
  if (!out) throw qns::ConfigError("write failed: " + path);
}

void write_json(const std::string& path, const json& doc) {
  write_text(path, doc.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// config access with strict key checking

void check_keys(const json& obj, const std::vector<std::string>& allowed,
                const std::string& where) {
  if (!obj.is_object())
    throw qns::ConfigError(where + " must be a JSON object");
  for (const auto& item : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), item.key()) == allowed.end())
      throw qns::ConfigError("unknown key '" + item.key() + "' in " + where);
  }
}

std::uint64_t get_uint(const json& obj, const std::string& key,
                       std::uint64_t fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number_integer() && !v.is_number_unsigned())
    throw qns::ConfigError("'" + key + "' must be an integer");
  if (v.is_number_integer() && v.get<std::int64_t>() < 0)
    throw qns::ConfigError("'" + key + "' must be >= 0");
  return v.get<std::uint64_t>();
}

double get_num(const json& obj, const std::string& key, double fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number()) throw qns::ConfigError("'" + key + "' must be a number");
  return v.get<double>();
}

std::string get_str(const json& obj, const std::string& key,
                    const std::string& fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_string()) throw qns::ConfigError("'" + key + "' must be a string");
  return v.get<std::string>();
}

bool get_bool(const json& obj, const std::string& key, bool fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_boolean()) throw qns::ConfigError("'" + key + "' must be a bool");
  return v.get<bool>();
}

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw qns::ConfigError("cannot open config file: " + path);
  json cfg;
  try {
    in >> cfg;
  } catch (const json::exception& e) {
    throw qns::ConfigError("config is not valid JSON: " +
                           std::string(e.what()));
  }
  check_keys(cfg,
             {"models", "gate_count", "num_sequences", "shots", "trajectories",
              "seed", "output_dir", "dataset", "sample_rate_hz", "estimator",
              "composite", "sweep"},
             "config");
  return cfg;
}

// A noise-model spec is either an inline {"ar": [...], "ma": [...]} object or
// {"file": "model.json"}.
qns::ArmaModel parse_model_spec(const json& spec, const std::string& where) {
  if (!spec.is_object())
    throw qns::ConfigError(where + " must be a model object");
  if (spec.contains("file")) {
    check_keys(spec, {"file"}, where);
    return qns::load_model(get_str(spec, "file", ""));
  }
  try {
    return qns::model_from_json(spec.dump());
  } catch (const qns::MalformedFile& e) {
    throw qns::ConfigError(where + ": " + e.what());
  }
}

// A spectrum spec is a model spec (evaluated on the default quadrature grid)
// or {"spectrum_file": "spectrum.csv"}.
qns::SpectrumEstimate parse_spectrum_spec(const json& spec,
                                          const std::string& where) {
  if (spec.is_object() && spec.contains("spectrum_file")) {
    check_keys(spec, {"spectrum_file"}, where);
    return qns::load_spectrum_csv(get_str(spec, "spectrum_file", ""));
  }
  return qns::psd(parse_model_spec(spec, where),
                  qns::frequency_grid(qns::kDefaultChiGrid));
}

json model_as_json(const qns::ArmaModel& model) {
  return json::parse(qns::model_to_json(model));
}

// ---------------------------------------------------------------------------
// shared resolved settings

struct Overrides {
  std::string config_path;
  std::string out;
  std::string dataset;
  std::string method;
  std::string select;
  std::int64_t seed = -1;
  std::int64_t shots = -1;
  std::int64_t trajectories = -1;
  std::int64_t gate_count = -1;
  std::int64_t num_sequences = -1;
  std::int64_t components = -1;
  std::int64_t order = -1;
  std::int64_t order_p = -1;
  std::int64_t order_q = -1;
  std::int64_t max_params = -1;
};

struct Common {
  json cfg;
  std::string out_dir;
  std::uint64_t gate_count = 64;
  std::uint64_t num_sequences = 64;
  std::uint64_t shots = 0;
  std::uint64_t trajectories = 0;
  std::uint64_t seed = 1;
  std::optional<double> sample_rate_hz;
};

Common resolve_common(const Overrides& ov) {
  Common c;
  c.cfg = load_config(ov.config_path);
  c.out_dir = !ov.out.empty() ? ov.out : get_str(c.cfg, "output_dir", ".");
  c.gate_count = ov.gate_count >= 0
                     ? static_cast<std::uint64_t>(ov.gate_count)
                     : get_uint(c.cfg, "gate_count", 64);
  c.num_sequences = ov.num_sequences >= 0
                        ? static_cast<std::uint64_t>(ov.num_sequences)
                        : get_uint(c.cfg, "num_sequences", c.gate_count);
  c.shots = ov.shots >= 0 ? static_cast<std::uint64_t>(ov.shots)
                          : get_uint(c.cfg, "shots", 0);
  c.trajectories = ov.trajectories >= 0
                       ? static_cast<std::uint64_t>(ov.trajectories)
                       : get_uint(c.cfg, "trajectories", 0);
  c.seed = ov.seed >= 0 ? static_cast<std::uint64_t>(ov.seed)
                        : get_uint(c.cfg, "seed", 1);
  if (c.cfg.contains("sample_rate_hz")) {
    const double rate = get_num(c.cfg, "sample_rate_hz", 0.0);
    if (rate <= 0.0)
      throw qns::ConfigError("'sample_rate_hz' must be positive");
    c.sample_rate_hz = rate;
  }
  if (c.gate_count == 0) throw qns::ConfigError("'gate_count' must be >= 1");
  if (c.num_sequences == 0 || c.num_sequences > c.gate_count)
    throw qns::ConfigError("'num_sequences' must be in [1, gate_count]");
  std::filesystem::create_directories(c.out_dir);
  return c;
}

std::string out_path(const Common& c, const std::string& name) {
  return (std::filesystem::path(c.out_dir) / name).string();
}

json base_echo(const Common& c, const std::string& verb) {
  json echo;
  echo["verb"] = verb;
  echo["gate_count"] = c.gate_count;
  echo["num_sequences"] = c.num_sequences;
  echo["shots"] = c.shots;
  echo["trajectories"] = c.trajectories;
  echo["seed"] = c.seed;
  echo["output_dir"] = c.out_dir;
  if (c.sample_rate_hz) echo["sample_rate_hz"] = *c.sample_rate_hz;
  return echo;
}

double to_hz(double omega, double sample_rate_hz) {
  return omega * sample_rate_hz / (2.0 * qns::kPi);
}

qns::QnsDataset dataset_for(const Common& c, const std::string& override_path) {
  const std::string path =
      !override_path.empty() ? override_path : get_str(c.cfg, "dataset", "");
  if (path.empty())
    throw qns::ConfigError("a dataset path is required (--dataset or config "
                           "key 'dataset')");
  return qns::load_dataset(path);
}

// Peak of a model's psd on the default dense grid, parabolic-refined.
double psd_peak_location(const qns::ArmaModel& model) {
  const auto grid = qns::frequency_grid(qns::kDefaultChiGrid);
  const auto spec = qns::psd(model, grid);
  std::size_t best = 0;
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (spec.power[i] > spec.power[best]) best = i;
  if (best == 0 || best + 1 == grid.size()) return grid[best];
  const double y0 = spec.power[best - 1];
  const double y1 = spec.power[best];
  const double y2 = spec.power[best + 1];
  const double curvature = y0 - 2.0 * y1 + y2;
  double offset = 0.0;
  if (curvature < 0.0) offset = 0.5 * (y0 - y2) / curvature;
  offset = std::clamp(offset, -0.5, 0.5);
  return grid[best] + offset * (grid[1] - grid[0]);
}

// ---------------------------------------------------------------------------
// estimator settings

struct EstimatorCfg {
  std::string method;
  std::size_t order = 2;         // yw / ma
  std::size_t order_p = 2;       // cepstral / schwarma
  std::size_t order_q = 0;
  std::size_t components = 2;    // music
  std::size_t num_lags = 0;      // 0 = per-method default
  bool overdetermined = false;   // yw
  std::string select;            // schwarma: "", "mse", "aic", "bic"
  std::size_t max_params = 8;
  std::size_t grid_points = qns::kDefaultChiGrid;
  std::size_t report_grid_points = 512;
  bool legacy_criterion_signs = false;
};

EstimatorCfg resolve_estimator(const Common& c, const Overrides& ov,
                               const std::string& default_method) {
  json est = c.cfg.contains("estimator") ? c.cfg.at("estimator")
                                         : json::object();
  check_keys(est,
             {"method", "order", "order_p", "order_q", "components",
              "num_lags", "overdetermined", "select", "max_params",
              "grid_points", "report_grid_points", "legacy_criterion_signs"},
             "config.estimator");
  EstimatorCfg e;
  e.method = !ov.method.empty() ? ov.method
                                : get_str(est, "method", default_method);
  e.order = static_cast<std::size_t>(
      ov.order >= 0 ? ov.order : static_cast<std::int64_t>(get_uint(est, "order", 2)));
  e.order_p = static_cast<std::size_t>(
      ov.order_p >= 0 ? ov.order_p
                      : static_cast<std::int64_t>(get_uint(est, "order_p", 2)));
  e.order_q = static_cast<std::size_t>(
      ov.order_q >= 0 ? ov.order_q
                      : static_cast<std::int64_t>(get_uint(est, "order_q", 0)));
  e.components = static_cast<std::size_t>(
      ov.components >= 0
          ? ov.components
          : static_cast<std::int64_t>(get_uint(est, "components", 2)));
  e.num_lags = static_cast<std::size_t>(get_uint(est, "num_lags", 0));
  e.overdetermined = get_bool(est, "overdetermined", false);
  e.select = !ov.select.empty() ? ov.select : get_str(est, "select", "");
  e.max_params = static_cast<std::size_t>(
      ov.max_params >= 0
          ? ov.max_params
          : static_cast<std::int64_t>(get_uint(est, "max_params", 8)));
  e.grid_points = static_cast<std::size_t>(
      get_uint(est, "grid_points", qns::kDefaultChiGrid));
  e.report_grid_points =
      static_cast<std::size_t>(get_uint(est, "report_grid_points", 512));
  e.legacy_criterion_signs = get_bool(est, "legacy_criterion_signs", false);
  if (e.method.empty())
    throw qns::ConfigError("an estimator method is required (--method or "
                           "config key estimator.method)");
  if (e.grid_points < 2 || e.report_grid_points < 2)
    throw qns::ConfigError("grid point counts must be >= 2");
  return e;
}

json estimator_echo(const EstimatorCfg& e) {
  json j;
  j["method"] = e.method;
  if (e.method == "yw" || e.method == "ma") j["order"] = e.order;
  if (e.method == "yw") j["overdetermined"] = e.overdetermined;
  if (e.method == "cepstral" || e.method == "schwarma") {
    j["order_p"] = e.order_p;
    j["order_q"] = e.order_q;
  }
  if (e.method == "music") {
    j["components"] = e.components;
    j["grid_points"] = e.grid_points;
  }
  if (e.num_lags > 0) j["num_lags"] = e.num_lags;
  if (e.method == "schwarma") {
    if (!e.select.empty()) {
      j["select"] = e.select;
      j["max_params"] = e.max_params;
    }
    j["grid_points"] = e.grid_points;
    j["legacy_criterion_signs"] = e.legacy_criterion_signs;
  }
  j["report_grid_points"] = e.report_grid_points;
  return j;
}

qns::SelectCriterion parse_criterion(const std::string& name) {
  if (name == "mse") return qns::SelectCriterion::mse;
  if (name == "aic") return qns::SelectCriterion::aic;
  if (name == "bic") return qns::SelectCriterion::bic;
  throw qns::ConfigError("unknown selection criterion '" + name +
                         "' (expected mse, aic or bic)");
}

// NNLS band spectrum → spline-densified spectrum → autocovariance: the
// classical estimators all consume this chain.
qns::AutocovarianceSeq autocov_chain(const qns::QnsDataset& dataset,
                                     std::size_t num_lags) {
  const auto bands = qns::nnls_pipeline(dataset);
  const auto dense = qns::interpolate(bands, qns::frequency_grid(1024));
  return qns::autocov_from_spectrum(dense, num_lags);
}

// Cepstral chain needs a strictly positive spectrum; floor the NNLS bands
// (active-set zeros are exact) before densifying.
qns::SpectrumEstimate positive_dense_spectrum(const qns::QnsDataset& dataset) {
  auto bands = qns::nnls_pipeline(dataset);
  double peak = 0.0;
  for (double s : bands.power) peak = std::max(peak, s);
  if (peak <= 0.0)
    throw qns::DegenerateSpectrum("NNLS spectrum is identically zero");
  for (double& s : bands.power) s = std::max(s, 1e-6 * peak);
  auto dense = qns::interpolate(bands, qns::frequency_grid(1024));
  for (double& s : dense.power) s = std::max(s, 1e-6 * peak);
  return dense;
}

// ---------------------------------------------------------------------------
// verbs

int cmd_simulate(const Overrides& ov) {
  const Common c = resolve_common(ov);
  if (!c.cfg.contains("models") || !c.cfg.at("models").is_array() ||
      c.cfg.at("models").empty())
    throw qns::ConfigError("'models' must be a non-empty array");
  std::vector<qns::ArmaModel> models;
  for (std::size_t i = 0; i < c.cfg.at("models").size(); ++i)
    models.push_back(parse_model_spec(c.cfg.at("models")[i],
                                      "models[" + std::to_string(i) + "]"));

  const auto seqs = qns::generate_fttps(c.gate_count, c.num_sequences);
  const qns::QnsDataset dataset =
      c.trajectories == 0
          ? qns::exact_qns(models, seqs, c.shots, c.seed)
          : qns::simulate_qns(models, seqs, c.trajectories, c.shots, c.seed);
  qns::save_dataset(dataset, out_path(c, "dataset.csv"));

  json echo = base_echo(c, "simulate");
  echo["models"] = json::array();
  for (const auto& m : models) echo["models"].push_back(model_as_json(m));
  write_json(out_path(c, "config_echo.json"), echo);
  return 0;
}

int cmd_estimate(const Overrides& ov, const std::string& default_method,
                 const std::string& verb) {
  const Common c = resolve_common(ov);
  EstimatorCfg e = resolve_estimator(c, ov, default_method);
  if (verb == "select" && e.select.empty()) e.select = "bic";
  const qns::QnsDataset dataset = dataset_for(c, ov.dataset);
  const auto report_grid = qns::frequency_grid(e.report_grid_points);

  json diag;
  diag["method"] = e.method;

  if (e.method == "nnls") {
    qns::NnlsInfo info;
    qns::ChiVector chi;
    const auto spectrum = qns::nnls_pipeline(dataset, &info, &chi);
    qns::save_spectrum_csv(spectrum, out_path(c, "spectrum.csv"));
    diag["residual"] = info.residual;
    diag["iterations"] = info.iterations;
    diag["clipped_sequences"] = chi.clip_count;
  } else if (e.method == "yw") {
    const std::size_t lags =
        e.num_lags > 0 ? e.num_lags
                       : (e.overdetermined ? e.order + 9 : e.order + 1);
    const auto r = autocov_chain(dataset, lags);
    const auto model = qns::yule_walker(r, e.order, e.overdetermined);
    qns::save_model(model, out_path(c, "model.json"));
    qns::save_spectrum_csv(qns::psd(model, report_grid),
                           out_path(c, "spectrum.csv"));
    diag["order"] = e.order;
    diag["num_lags"] = lags;
    diag["overdetermined"] = e.overdetermined;
    diag["model"] = model_as_json(model);
  } else if (e.method == "ma") {
    const std::size_t lags = e.num_lags > 0 ? e.num_lags : e.order + 1;
    const auto r = autocov_chain(dataset, lags);
    const auto result = qns::ma_fit(r, e.order);
    qns::save_model(result.model, out_path(c, "model.json"));
    qns::save_spectrum_csv(qns::psd(result.model, report_grid),
                           out_path(c, "spectrum.csv"));
    diag["order"] = e.order;
    diag["objective"] = result.objective;
    diag["iterations"] = result.iterations;
    diag["converged"] = result.converged;
    diag["model"] = model_as_json(result.model);
  } else if (e.method == "cepstral") {
    const auto dense = positive_dense_spectrum(dataset);
    auto model = qns::cepstral_arma(dense, e.order_p, e.order_q);
    model = qns::kappa_optimize(model, dataset);
    qns::save_model(model, out_path(c, "model.json"));
    qns::save_spectrum_csv(qns::psd(model, report_grid),
                           out_path(c, "spectrum.csv"));
    diag["order_p"] = e.order_p;
    diag["order_q"] = e.order_q;
    diag["model"] = model_as_json(model);
  } else if (e.method == "music") {
    const std::size_t lags =
        e.num_lags > 0 ? e.num_lags
                       : std::max<std::size_t>(e.components + 1, 32);
    const auto r = autocov_chain(dataset, lags);
    const auto result =
        qns::music(r, e.components, qns::frequency_grid(e.grid_points));
    qns::save_spectrum_csv(result.pseudo, out_path(c, "spectrum.csv"));
    diag["components"] = e.components;
    diag["num_lags"] = lags;
    diag["too_few_maxima"] = result.too_few_maxima;
    diag["peak_freqs"] = result.peak_freqs;
    // Real spectra are even in ω: each positive-frequency component found
    // stands for a ± pair, so p components cover p/2 real tones. Report the
    // strongest ⌈p/2⌉ peaks mirrored into ± pairs.
    std::vector<double> by_value = result.peak_freqs;
    std::sort(by_value.begin(), by_value.end(),
              [&](double a, double b) {
                const auto& ps = result.pseudo;
                const auto value_at = [&](double freq) {
                  std::size_t nearest = 0;
                  for (std::size_t i = 1; i < ps.freqs.size(); ++i)
                    if (std::abs(ps.freqs[i] - freq) <
                        std::abs(ps.freqs[nearest] - freq))
                      nearest = i;
                  return ps.power[nearest];
                };
                return value_at(a) > value_at(b);
              });
    const std::size_t tones = (e.components + 1) / 2;
    if (by_value.size() > tones) by_value.resize(tones);
    std::vector<double> signed_peaks;
    for (double w : by_value) {
      signed_peaks.push_back(-w);
      signed_peaks.push_back(w);
    }
    std::sort(signed_peaks.begin(), signed_peaks.end());
    diag["signed_peaks"] = signed_peaks;
    if (c.sample_rate_hz) {
      std::vector<double> hz;
      for (double w : signed_peaks) hz.push_back(to_hz(w, *c.sample_rate_hz));
      diag["signed_peaks_hz"] = hz;
    }
  } else if (e.method == "schwarma") {
    qns::FitOptions options;
    options.seed = c.seed;
    options.grid_points = e.grid_points;
    options.legacy_criterion_signs = e.legacy_criterion_signs;
    qns::FitResult result;
    if (!e.select.empty()) {
      std::vector<qns::SelectionRow> table;
      result = qns::model_select(dataset, e.max_params,
                                 parse_criterion(e.select), options, nullptr,
                                 &table);
      qns::save_selection_csv(out_path(c, "selection.csv"), table);
      diag["criterion"] = e.select;
      diag["max_params"] = e.max_params;
    } else {
      result = qns::fit(dataset, e.order_p, e.order_q, options);
    }
    qns::save_fit_json(out_path(c, "fit.json"), result);
    qns::save_spectrum_csv(qns::psd(result.model, report_grid),
                           out_path(c, "spectrum.csv"));
    diag["order_p"] = result.model.p();
    diag["order_q"] = result.model.q();
    diag["mse"] = result.mse;
    diag["aic"] = result.aic;
    diag["bic"] = result.bic;
    diag["converged"] = result.converged;
    const double peak = psd_peak_location(result.model);
    diag["psd_peak"] = peak;
    if (c.sample_rate_hz) diag["psd_peak_hz"] = to_hz(peak, *c.sample_rate_hz);
  } else {
    throw qns::ConfigError("unknown estimator method '" + e.method +
                           "' (expected nnls, yw, ma, cepstral, music or "
                           "schwarma)");
  }

  write_json(out_path(c, "diagnostics.json"), diag);
  json echo = base_echo(c, verb);
  echo["dataset"] =
      !ov.dataset.empty() ? ov.dataset : get_str(c.cfg, "dataset", "");
  echo["estimator"] = estimator_echo(e);
  write_json(out_path(c, "config_echo.json"), echo);
  return 0;
}

int cmd_composite(const Overrides& ov) {
  const Common c = resolve_common(ov);
  if (!c.cfg.contains("composite"))
    throw qns::ConfigError("'composite' section is required");
  const json& comp = c.cfg.at("composite");
  check_keys(comp, {"native", "injected"}, "config.composite");
  if (!comp.contains("native") || !comp.contains("injected"))
    throw qns::ConfigError(
        "config.composite needs 'native' and 'injected' specs");

  const auto native = parse_spectrum_spec(comp.at("native"),
                                          "composite.native");
  const auto injected = parse_spectrum_spec(comp.at("injected"),
                                            "composite.injected");
  const qns::QnsDataset dataset = dataset_for(c, ov.dataset);

  const double beta = qns::fit_beta(native, injected, dataset);
  double mse = 0.0;
  for (std::size_t k = 0; k < dataset.sequences.size(); ++k) {
    const double chi = beta * qns::overlap_chi(native, dataset.sequences[k]) +
                       qns::overlap_chi(injected, dataset.sequences[k]);
    const double diff = 0.5 + 0.5 * std::exp(-chi) - dataset.probs[k];
    mse += diff * diff;
  }
  mse /= static_cast<double>(dataset.sequences.size());

  json result;
  result["beta"] = beta;
  result["mse"] = mse;
  write_json(out_path(c, "composite.json"), result);

  json echo = base_echo(c, "composite");
  echo["dataset"] =
      !ov.dataset.empty() ? ov.dataset : get_str(c.cfg, "dataset", "");
  echo["composite"] = comp;
  write_json(out_path(c, "config_echo.json"), echo);
  return 0;
}

int cmd_superres(const Overrides& ov) {
  const Common c = resolve_common(ov);
  if (!c.cfg.contains("sweep"))
    throw qns::ConfigError("'sweep' section is required");
  const json& sweep = c.cfg.at("sweep");
  check_keys(sweep, {"center_start", "center_stop", "steps", "pole_radius",
                     "b0"},
             "config.sweep");
  if (!sweep.contains("center_start"))
    throw qns::ConfigError("config.sweep needs 'center_start'");
  const double start = get_num(sweep, "center_start", 0.0);
  const double stop = get_num(sweep, "center_stop", start);
  const std::size_t steps =
      static_cast<std::size_t>(get_uint(sweep, "steps", 1));
  const double rho = get_num(sweep, "pole_radius", 0.9);
  const double b0 = get_num(sweep, "b0", 0.1);
  if (steps == 0) throw qns::ConfigError("'steps' must be >= 1");
  if (start <= 0.0 || start >= qns::kPi || stop <= 0.0 || stop >= qns::kPi)
    throw qns::ConfigError("sweep centers must lie in (0, pi)");
  if (rho <= 0.0 || rho >= 1.0)
    throw qns::ConfigError("'pole_radius' must lie in (0, 1)");

  const auto seqs = qns::generate_fttps(c.gate_count, c.num_sequences);
  std::string csv = "true_freq,nnls_peak,schwarma_peak,abs_err_nnls,"
                    "abs_err_schwarma\n";
  std::vector<std::size_t> failed;
  const double nan = std::nan("");

  for (std::size_t i = 0; i < steps; ++i) {
    const double center =
        steps == 1 ? start
                   : start + (stop - start) * static_cast<double>(i) /
                         static_cast<double>(steps - 1);
    const qns::ArmaModel model = qns::make_ar2_peak(center, rho, b0);
    const double true_freq = psd_peak_location(model);
    double nnls_peak = nan, schwarma_peak = nan;
    try {
      const std::uint64_t point_seed =
          qns::CounterRng::derive_key(c.seed, {0x73776565ULL, i});
      const qns::QnsDataset dataset =
          c.trajectories == 0
              ? qns::exact_qns({model}, seqs, c.shots, point_seed)
              : qns::simulate_qns({model}, seqs, c.trajectories, c.shots,
                                  point_seed);

      const auto bands = qns::nnls_pipeline(dataset);
      std::size_t best = 0;
      for (std::size_t j = 1; j < bands.power.size(); ++j)
        if (bands.power[j] > bands.power[best]) best = j;
      nnls_peak = bands.freqs[best];

      qns::FitOptions options;
      options.seed = point_seed;
      const qns::FitResult fitted = qns::fit(dataset, 2, 0, options);
      schwarma_peak = psd_peak_location(fitted.model);
    } catch (const qns::QnsError&) {
      failed.push_back(i);
    }
    csv += fmt(true_freq) + "," + fmt(nnls_peak) + "," + fmt(schwarma_peak) +
           "," + fmt(std::abs(nnls_peak - true_freq)) + "," +
           fmt(std::abs(schwarma_peak - true_freq)) + "\n";
  }
  write_text(out_path(c, "superres.csv"), csv);

  json diag;
  diag["band_spacing"] = qns::kPi / static_cast<double>(c.gate_count);
  diag["failed_points"] = failed;
  write_json(out_path(c, "diagnostics.json"), diag);

  json echo = base_echo(c, "superres");
  echo["sweep"] = {{"center_start", start},
                   {"center_stop", stop},
                   {"steps", steps},
                   {"pole_radius", rho},
                   {"b0", b0}};
  write_json(out_path(c, "config_echo.json"), echo);
  return 0;
}

void add_common_flags(CLI::App* sub, Overrides& ov, bool with_sim_flags) {
  sub->add_option("--config", ov.config_path, "JSON configuration file");
  sub->add_option("--out", ov.out, "output directory (overrides config)");
  sub->add_option("--seed", ov.seed, "RNG seed (overrides config)");
  if (with_sim_flags) {
    sub->add_option("--shots", ov.shots, "shots per sequence, 0 = exact");
    sub->add_option("--trajectories", ov.trajectories,
                    "Monte Carlo trajectories, 0 = filter-function limit");
    sub->add_option("--gate-count", ov.gate_count, "gates per sequence");
    sub->add_option("--num-sequences", ov.num_sequences,
                    "number of FTTPS sequences");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qubit noise spectroscopy: simulation and spectrum estimation"};
  app.require_subcommand(1);

  Overrides ov;
  CLI::App* simulate = app.add_subcommand(
      "simulate", "generate an FTTPS survival-probability dataset");
  add_common_flags(simulate, ov, true);

  CLI::App* estimate =
      app.add_subcommand("estimate", "run one spectrum estimator");
  add_common_flags(estimate, ov, false);
  estimate->add_option("--dataset", ov.dataset, "dataset CSV path");
  estimate->add_option("--method", ov.method,
                       "nnls | yw | ma | cepstral | music | schwarma");
  estimate->add_option("--select", ov.select,
                       "schwarma model search criterion: mse | aic | bic");
  estimate->add_option("--components", ov.components, "music component count");
  estimate->add_option("--order", ov.order, "yw/ma model order");
  estimate->add_option("--order-p", ov.order_p, "AR order");
  estimate->add_option("--order-q", ov.order_q, "MA order");
  estimate->add_option("--max-params", ov.max_params,
                       "model search budget: p+q+1 <= max-params");

  CLI::App* select = app.add_subcommand(
      "select", "gradient-fit model-order search (schwarma estimator)");
  add_common_flags(select, ov, false);
  select->add_option("--dataset", ov.dataset, "dataset CSV path");
  select->add_option("--select", ov.select, "criterion: mse | aic | bic");
  select->add_option("--max-params", ov.max_params,
                     "search budget: p+q+1 <= max-params");

  CLI::App* composite = app.add_subcommand(
      "composite", "fit the native-noise scale factor beta");
  add_common_flags(composite, ov, false);
  composite->add_option("--dataset", ov.dataset, "dataset CSV path");

  CLI::App* superres = app.add_subcommand(
      "superres", "AR(2) peak sweep: NNLS bin vs gradient-fit localization");
  add_common_flags(superres, ov, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (simulate->parsed()) return cmd_simulate(ov);
    if (estimate->parsed()) return cmd_estimate(ov, "", "estimate");
    if (select->parsed()) {
      ov.method = "schwarma";
      return cmd_estimate(ov, "schwarma", "select");
    }
    if (composite->parsed()) return cmd_composite(ov);
    if (superres->parsed()) return cmd_superres(ov);
    std::cerr << "error: ConfigError: no command given\n";
    return 2;
  } catch (const qns::ConfigError& e) {
    std::cerr << "error: " << e.name() << ": " << e.what() << "\n";
    return 2;
  } catch (const qns::MalformedFile& e) {
    std::cerr << "error: " << e.name() << ": " << e.what() << "\n";
    return 2;
  } catch (const qns::QnsError& e) {
    std::cerr << "error: " << e.name() << ": " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: Internal: " << e.what() << "\n";
    return 3;
  }
}
