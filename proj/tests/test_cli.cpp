#include <doctest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "qns/arma_core.hpp"
#include "qns/grid.hpp"
#include "qns/invert.hpp"
#include "qns/sim.hpp"

using nlohmann::json;
using qns_test::TempDir;

namespace {

struct CliResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

CliResult run_cli(const TempDir& dir, const std::string& args) {
  const std::string out_file = dir.file("cli_stdout.txt");
  const std::string err_file = dir.file("cli_stderr.txt");
  const std::string cmd = std::string(QNS_CLI_PATH) + " " + args + " >" +
                          out_file + " 2>" + err_file;
  int rc = std::system(cmd.c_str());
  CliResult res;
  res.exit_code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  res.out = slurp(out_file);
  res.err = slurp(err_file);
  return res;
}

void write_json_file(const std::string& path, const json& value) {
  std::ofstream out(path);
  out << value.dump(2) << "\n";
}

json white_sim_config(const std::string& out_dir, double b0,
                      std::uint64_t trajectories, std::uint64_t shots,
                      std::uint64_t seed) {
  return json{{"models", json::array({{{"ar", json::array()},
                                       {"ma", json::array({b0})}}})},
              {"gate_count", 64},
              {"num_sequences", 64},
              {"shots", shots},
              {"trajectories", trajectories},
              {"seed", seed},
              {"output_dir", out_dir}};
}

}  // namespace

TEST_CASE("simulate: zero noise yields certain survival") {
  TempDir dir("cli_zero");
  auto cfg = white_sim_config(dir.file("out"), 0.0, 0, 0, 1);
  cfg["num_sequences"] = 8;
  write_json_file(dir.file("sim.json"), cfg);
  auto res = run_cli(dir, "simulate --config " + dir.file("sim.json"));
  REQUIRE(res.exit_code == 0);
  auto ds = qns::load_dataset(dir.file("out/dataset.csv"));
  REQUIRE(ds.probs.size() == 8);
  for (double p : ds.probs) CHECK(p == 1.0);
  // The echo records the resolved configuration.
  auto echo = json::parse(slurp(dir.file("out/config_echo.json")));
  CHECK(echo["seed"].get<std::uint64_t>() == 1);
  CHECK(echo["gate_count"].get<std::uint64_t>() == 64);
}

TEST_CASE("simulate: identical config and seed give byte-identical datasets") {
  TempDir dir("cli_det");
  for (int i = 0; i < 2; ++i) {
    auto cfg = white_sim_config(dir.file("out" + std::to_string(i)), 0.05, 50,
                                200, 7);
    write_json_file(dir.file("sim.json"), cfg);
    auto res = run_cli(dir, "simulate --config " + dir.file("sim.json"));
    REQUIRE(res.exit_code == 0);
  }
  CHECK(slurp(dir.file("out0/dataset.csv")) ==
        slurp(dir.file("out1/dataset.csv")));
  CHECK_FALSE(slurp(dir.file("out0/dataset.csv")).empty());
}

TEST_CASE("simulate: white-noise dataset carries the configured power") {
  TempDir dir("cli_white");
  write_json_file(dir.file("sim.json"),
                  white_sim_config(dir.file("out"), 0.05, 1000, 1000, 3));
  auto res = run_cli(dir, "simulate --config " + dir.file("sim.json"));
  REQUIRE(res.exit_code == 0);
  auto ds = qns::load_dataset(dir.file("out/dataset.csv"));
  double est = qns::mean_power_estimate(ds);
  CHECK(std::abs(est - 0.0025) / 0.0025 < 0.03);
}

TEST_CASE("estimate: the nnls method reproduces the library pipeline") {
  TempDir dir("cli_nnls");
  json sim = json{{"models", json::array({{{"ar", json::array({-0.5})},
                                           {"ma", json::array({0.05})}}})},
                  {"gate_count", 64},
                  {"num_sequences", 64},
                  {"shots", 0},
                  {"trajectories", 0},
                  {"seed", 11},
                  {"output_dir", dir.file("sim")}};
  write_json_file(dir.file("sim.json"), sim);
  REQUIRE(run_cli(dir, "simulate --config " + dir.file("sim.json")).exit_code == 0);

  json est = json{{"dataset", dir.file("sim/dataset.csv")},
                  {"output_dir", dir.file("est")},
                  {"estimator", json{{"method", "nnls"}}}};
  write_json_file(dir.file("est.json"), est);
  REQUIRE(run_cli(dir, "estimate --config " + dir.file("est.json")).exit_code == 0);

  auto got = qns::load_spectrum_csv(dir.file("est/spectrum.csv"));
  auto ref = qns::nnls_pipeline(qns::load_dataset(dir.file("sim/dataset.csv")));
  REQUIRE(got.power.size() == ref.power.size());
  for (std::size_t i = 0; i < ref.power.size(); ++i)
    CHECK(got.power[i] == doctest::Approx(ref.power[i]).epsilon(1e-12));

  auto diag = json::parse(slurp(dir.file("est/diagnostics.json")));
  CHECK(diag.contains("residual"));
  CHECK(diag.contains("iterations"));
  CHECK(diag["clipped_sequences"].get<std::size_t>() == 0);
}

TEST_CASE("select: the chosen order pair lands in fit.json and the grid CSV") {
  TempDir dir("cli_select");
  write_json_file(dir.file("sim.json"),
                  white_sim_config(dir.file("sim"), 0.1, 0, 500, 13));
  REQUIRE(run_cli(dir, "simulate --config " + dir.file("sim.json")).exit_code == 0);

  auto res = run_cli(dir, "select --dataset " + dir.file("sim/dataset.csv") +
                              " --max-params 2 --out " + dir.file("est"));
  REQUIRE(res.exit_code == 0);
  auto fit = json::parse(slurp(dir.file("est/fit.json")));
  REQUIRE(fit.contains("model"));
  CHECK(fit["model"].contains("ar"));
  CHECK(fit["model"].contains("ma"));
  CHECK(fit.contains("mse"));
  std::size_t p = fit["model"]["ar"].size();
  std::size_t q = fit["model"]["ma"].size() - 1;
  CHECK(p + q + 1 <= 2);

  std::string grid = slurp(dir.file("est/selection.csv"));
  CHECK(grid.rfind("p,q,mse,aic,bic\n", 0) == 0);
  // rows: header + (0,0), (1,0), (0,1)
  CHECK(std::count(grid.begin(), grid.end(), '\n') == 4);

  auto diag = json::parse(slurp(dir.file("est/diagnostics.json")));
  CHECK(diag["order_p"].get<std::size_t>() == p);
  CHECK(diag["order_q"].get<std::size_t>() == q);
  CHECK(diag["criterion"].get<std::string>() == "bic");
}

TEST_CASE("estimate: music finds a single real tone as a plus-minus pair") {
  TempDir dir("cli_music");
  const double w0 = 0.3 * qns::kPi, rho = 0.98;
  json sim = json{
      {"models",
       json::array({{{"ar", json::array({-2.0 * rho * std::cos(w0), rho * rho})},
                     {"ma", json::array({0.02})}}})},
      {"gate_count", 64},
      {"num_sequences", 64},
      {"shots", 0},
      {"trajectories", 0},
      {"seed", 9},
      {"output_dir", dir.file("sim")}};
  write_json_file(dir.file("sim.json"), sim);
  REQUIRE(run_cli(dir, "simulate --config " + dir.file("sim.json")).exit_code == 0);

  auto res = run_cli(dir, "estimate --dataset " + dir.file("sim/dataset.csv") +
                              " --method music --components 2 --out " +
                              dir.file("est"));
  REQUIRE(res.exit_code == 0);
  auto diag = json::parse(slurp(dir.file("est/diagnostics.json")));
  auto peaks = diag["signed_peaks"].get<std::vector<double>>();
  REQUIRE(peaks.size() == 2);
  CHECK(peaks[0] == doctest::Approx(-peaks[1]).epsilon(1e-12));
  CHECK(std::abs(peaks[1] - w0) < 0.01);
}

TEST_CASE("composite: the native scale factor is recovered end to end") {
  TempDir dir("cli_comp");
  json nat = {{"ar", json::array({-0.6, 0.25})}, {"ma", json::array({0.08})}};
  json inj = {{"ar", json::array({0.5, 0.25})}, {"ma", json::array({0.08})}};
  json sim = json{{"models", json::array({nat, inj})},
                  {"gate_count", 64},
                  {"num_sequences", 64},
                  {"shots", 0},
                  {"trajectories", 0},
                  {"seed", 17},
                  {"output_dir", dir.file("sim")}};
  write_json_file(dir.file("sim.json"), sim);
  REQUIRE(run_cli(dir, "simulate --config " + dir.file("sim.json")).exit_code == 0);

  json comp = json{{"dataset", dir.file("sim/dataset.csv")},
                   {"output_dir", dir.file("fit")},
                   {"composite", json{{"native", nat}, {"injected", inj}}}};
  write_json_file(dir.file("comp.json"), comp);
  REQUIRE(run_cli(dir, "composite --config " + dir.file("comp.json")).exit_code == 0);
  auto result = json::parse(slurp(dir.file("fit/composite.json")));
  CHECK(std::abs(result["beta"].get<double>() - 1.0) < 1e-3);
  CHECK(result.contains("mse"));
}

TEST_CASE("superres: a single-point sweep writes one report row") {
  TempDir dir("cli_sweep");
  json cfg = json{{"gate_count", 64},
                  {"num_sequences", 64},
                  {"shots", 0},
                  {"trajectories", 0},
                  {"seed", 4},
                  {"output_dir", dir.file("out")},
                  {"sweep", json{{"center_start", 16.5 * qns::kPi / 64.0},
                                 {"pole_radius", 0.9},
                                 {"b0", 0.1}}}};
  write_json_file(dir.file("sweep.json"), cfg);
  auto res = run_cli(dir, "superres --config " + dir.file("sweep.json"));
  REQUIRE(res.exit_code == 0);
  std::string csv = slurp(dir.file("out/superres.csv"));
  CHECK(csv.rfind("true_freq,nnls_peak,schwarma_peak,abs_err_nnls,abs_err_schwarma\n",
                  0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 2);  // header + one row
  auto diag = json::parse(slurp(dir.file("out/diagnostics.json")));
  CHECK(diag["failed_points"].is_array());
  CHECK(diag["failed_points"].empty());
  CHECK(diag["band_spacing"].get<double>() ==
        doctest::Approx(qns::kPi / 64.0).epsilon(1e-12));
}

TEST_CASE("config errors exit with code 2 and a structured message") {
  TempDir dir("cli_err2");

  SUBCASE("unknown key") {
    auto cfg = white_sim_config(dir.file("out"), 0.05, 10, 0, 1);
    cfg["typo_key"] = 5;
    write_json_file(dir.file("sim.json"), cfg);
    auto res = run_cli(dir, "simulate --config " + dir.file("sim.json"));
    CHECK(res.exit_code == 2);
    CHECK(res.err.find("ConfigError") != std::string::npos);
  }

  SUBCASE("missing dataset file") {
    auto res = run_cli(dir, "estimate --dataset " + dir.file("nope.csv") +
                                " --method nnls --out " + dir.file("est"));
    CHECK(res.exit_code == 2);
    CHECK(res.err.find("MalformedFile") != std::string::npos);
  }

  SUBCASE("sweep start out of range") {
    json cfg = json{{"gate_count", 64},   {"num_sequences", 64},
                    {"shots", 0},         {"trajectories", 0},
                    {"seed", 4},          {"output_dir", dir.file("out")},
                    {"sweep", json{{"center_start", 0.0}}}};
    write_json_file(dir.file("sweep.json"), cfg);
    auto res = run_cli(dir, "superres --config " + dir.file("sweep.json"));
    CHECK(res.exit_code == 2);
    CHECK(res.err.find("ConfigError") != std::string::npos);
  }
}

TEST_CASE("estimator failures exit with code 3 naming the error") {
  TempDir dir("cli_err3");
  // A noise-free dataset has an all-zero band spectrum: the cepstral
  // estimator has nothing to take logarithms of.
  write_json_file(dir.file("sim.json"),
                  white_sim_config(dir.file("sim"), 0.0, 0, 0, 2));
  REQUIRE(run_cli(dir, "simulate --config " + dir.file("sim.json")).exit_code == 0);
  auto res = run_cli(dir, "estimate --dataset " + dir.file("sim/dataset.csv") +
                              " --method cepstral --order-p 1 --order-q 1 --out " +
                              dir.file("est"));
  CHECK(res.exit_code == 3);
  CHECK(res.err.find("DegenerateSpectrum") != std::string::npos);
}
