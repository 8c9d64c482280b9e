// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// mmwave_scs: command-line front end for the channel-estimation library.
//
//   mmwave_scs [--config FILE] [--seed N] [--workers N] [--format csv|json]
//              [--out-dir DIR] <subcommand> [options]
//
// Subcommands: linkbudget, estimate, sweep-mse, sweep-ber, theory-check.
// Every run writes <subcommand>.csv, <subcommand>.json and
// <subcommand>.manifest.json into --out-dir.
//
// Exit codes: 0 success, 2 configuration or usage error, 3 runtime/numerical
// error.

#include "scs/scs.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct GlobalOptions {
  std::string config_path;
  std::uint64_t seed = 0;
  int workers = 1;
  std::string format = "csv";
  std::string out_dir = ".";
};

struct Output {
  std::string csv;
  json summary;
};

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

json num_json(double v) {
  if (std::isfinite(v)) return v;
  return num(v);
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json config_json(const scs::SystemConfig& c) {
  return {{"n_ant_user", c.n_ant_user},
          {"n_chain_user", c.n_chain_user},
          {"n_ant_bs", c.n_ant_bs},
          {"n_chain_bs", c.n_chain_bs},
          {"n_bs", c.n_bs},
          {"n_paths", c.n_paths},
          {"n_subcarriers", c.n_subcarriers},
          {"n_pilot_subcarriers", c.n_pilot_subcarriers},
          {"bandwidth_hz", c.bandwidth_hz},
          {"max_delay_s", c.max_delay_s},
          {"antenna_spacing_ratio", c.antenna_spacing_ratio},
          {"rician_k_db", c.rician_k_db},
          {"snr_db", num_json(c.snr_db)},
          {"n_slots", c.n_slots}};
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

/// Writes CSV, JSON summary and manifest, then prints the requested format.
void emit(const GlobalOptions& g, const std::string& subcommand,
          const scs::SystemConfig& config, const std::vector<std::string>& argv,
          const Output& out) {
  const fs::path dir(g.out_dir);
  fs::create_directories(dir);
  const fs::path csv_path = dir / (subcommand + ".csv");
  const fs::path json_path = dir / (subcommand + ".json");
  const fs::path manifest_path = dir / (subcommand + ".manifest.json");

  write_file(csv_path, out.csv);
  write_file(json_path, out.summary.dump(2) + "\n");

  json manifest = {{"version", std::string(scs::kVersion)},
                   {"subcommand", subcommand},
                   {"seed", g.seed},
                   {"workers", g.workers},
                   {"timestamp", utc_timestamp()},
                   {"arguments", argv},
                   {"config", config_json(config)},
                   {"config_text", scs::write_config(config)},
                   {"long_running", scs::is_long_running(config)},
                   {"outputs",
                    {{"csv", csv_path.string()},
                     {"summary", json_path.string()},
                     {"manifest", manifest_path.string()}}}};
  write_file(manifest_path, manifest.dump(2) + "\n");

  if (g.format == "json") {
    std::cout << out.summary.dump(2) << "\n";
  } else {
    std::cout << out.csv;
  }
}

// ---------------------------------------------------------------------------

struct LinkBudgetArgs {
  double fc_mhz = 30000.0;
  double alpha = 2.0;
  double d_km = 0.1;
  double atmos = 0.1;
  double rain = 5.0;
};

Output run_linkbudget(const LinkBudgetArgs& a) {
  const double eta = scs::path_loss_db({a.fc_mhz, a.alpha, a.d_km, a.atmos, a.rain});
  std::cerr << "path loss: " << std::fixed;
  std::cerr.precision(2);
  std::cerr << eta << " dB\n"
            << "note: direct evaluation of the printed link-budget formula; the prose "
               "values quoted alongside it (192.62 / 188.27 / 161.78 dB) do not follow "
               "from it\n";
  std::cerr.unsetf(std::ios::floatfield);
  Output out;
  out.csv = "fc_mhz,alpha,d_km,atmos_db_per_km,rain_db_per_km,path_loss_db\n" +
            num(a.fc_mhz) + "," + num(a.alpha) + "," + num(a.d_km) + "," + num(a.atmos) +
            "," + num(a.rain) + "," + num(eta) + "\n";
  out.summary = {{"fc_mhz", a.fc_mhz},          {"alpha", a.alpha},
                 {"d_km", a.d_km},              {"atmos_db_per_km", a.atmos},
                 {"rain_db_per_km", a.rain},    {"path_loss_db", eta}};
  return out;
}

Output run_estimate(const scs::SystemConfig& c, std::uint64_t seed) {
  const scs::TrialRecord rec = scs::run_trial(c, seed);
  Output out;
  out.csv = "estimator,nmse_db,exact_support_match,iterations,wall_time_s\n";
  json estimators = json::array();
  for (const auto& e : rec.estimators) {
    out.csv += e.name + "," + num(e.nmse_db) + "," + (e.exact_support_match ? "1" : "0") +
               "," + std::to_string(e.iterations) + "," + num(e.wall_time_s) + "\n";
    estimators.push_back({{"estimator", e.name},
                          {"nmse_db", num_json(e.nmse_db)},
                          {"exact_support_match", e.exact_support_match},
                          {"iterations", e.iterations},
                          {"wall_time_s", e.wall_time_s}});
  }
  out.summary = {{"seed", rec.seed},
                 {"noise_variance", rec.noise_variance},
                 {"sparsity", c.sparsity()},
                 {"estimators", estimators}};
  return out;
}

struct SweepMseArgs {
  std::string var = "G";
  std::vector<double> values;
  int trials = 20;
};

Output run_sweep_mse(const scs::SystemConfig& c, const GlobalOptions& g,
                     const SweepMseArgs& a) {
  const auto var = a.var == "G" ? scs::SweepVariable::slots : scs::SweepVariable::snr_db;
  std::vector<double> values = a.values;
  if (values.empty()) {
    values.push_back(var == scs::SweepVariable::slots ? c.n_slots : c.snr_db);
  }
  const scs::ResultTable table = scs::sweep(c, var, values, a.trials, g.seed, g.workers);
  Output out;
  out.csv = "sweep_var,value,estimator,nmse_db,support_rate,trials,stderr\n";
  json rows = json::array();
  for (const auto& r : table.rows) {
    out.csv += table.sweep_var + "," + num(r.value) + "," + r.estimator + "," +
               num(r.mean_nmse_db) + "," + num(r.support_rate) + "," +
               std::to_string(r.trials) + "," + num(r.stderr_db) + "\n";
    rows.push_back({{"value", num_json(r.value)},
                    {"estimator", r.estimator},
                    {"nmse_db", num_json(r.mean_nmse_db)},
                    {"support_rate", r.support_rate},
                    {"trials", r.trials},
                    {"stderr", num_json(r.stderr_db)}});
  }
  out.summary = {{"sweep_var", table.sweep_var}, {"base_seed", g.seed}, {"rows", rows}};
  return out;
}

struct SweepBerArgs {
  std::vector<double> snr = {0, 5, 10, 15, 20, 25, 30};
  std::int64_t symbols = 100000;
  bool noiseless_estimation = false;
};

Output run_sweep_ber(const scs::SystemConfig& c, const GlobalOptions& g,
                     const SweepBerArgs& a) {
  scs::BerOptions opts;
  opts.workers = g.workers;
  opts.noiseless_estimation = a.noiseless_estimation;
  const scs::BerTable table = scs::ber_experiment(c, a.snr, a.symbols, g.seed, opts);
  Output out;
  out.csv = "snr_db,csi_source,ber,symbols\n";
  json rows = json::array();
  for (const auto& r : table.rows) {
    out.csv += num(r.snr_db) + "," + r.csi_source + "," + num(r.ber) + "," +
               std::to_string(r.symbols) + "\n";
    rows.push_back({{"snr_db", num_json(r.snr_db)},
                    {"csi_source", r.csi_source},
                    {"ber", r.ber},
                    {"symbols", r.symbols}});
  }
  out.summary = {{"seed", g.seed}, {"rows", rows}};
  return out;
}

Output run_theory_check(std::uint64_t seed, int trials) {
  const scs::TheoryCheckSummary s = scs::theory_check(trials, seed);
  Output out;
  out.csv =
      "instance,rows,cols,sparsity,vectors,spark,rank_ytilde,certificate,l0_unique,"
      "l0_matches_truth\n";
  json cases = json::array();
  int index = 0;
  for (const auto& c : s.cases) {
    out.csv += std::to_string(index++) + "," + std::to_string(c.shape.rows) + "," +
               std::to_string(c.shape.cols) + "," + std::to_string(c.shape.sparsity) +
               "," + std::to_string(c.shape.n_vectors) + "," +
               std::to_string(c.certificate.spark_phi1) + "," +
               std::to_string(c.certificate.rank_ytilde) + "," +
               (c.certificate.condition_holds ? "1" : "0") + "," +
               (c.l0_unique ? "1" : "0") + "," + (c.l0_matches_truth ? "1" : "0") + "\n";
    cases.push_back({{"rows", c.shape.rows},
                     {"cols", c.shape.cols},
                     {"sparsity", c.shape.sparsity},
                     {"vectors", c.shape.n_vectors},
                     {"spark", c.certificate.spark_phi1},
                     {"rank_ytilde", c.certificate.rank_ytilde},
                     {"l0_unique", c.l0_unique},
                     {"l0_matches_truth", c.l0_matches_truth}});
  }
  std::cerr << s.consistent() << "/" << s.cases.size()
            << " certificates consistent with exhaustive search\n";
  out.summary = {{"certified", s.cases.size()},
                 {"consistent", s.consistent()},
                 {"drawn", s.drawn},
                 {"not_evaluable", s.not_evaluable},
                 {"cases", cases}};
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Structured compressive sensing channel estimation for mmWave massive MIMO"};
  app.set_version_flag("--version", std::string(scs::kVersion));
  app.require_subcommand(1);

  GlobalOptions g;
  app.add_option("--config", g.config_path, "key = value configuration file")
      ->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "base seed for all randomness");
  app.add_option("--workers", g.workers, "worker threads for trials")
      ->check(CLI::PositiveNumber);
  app.add_option("--format", g.format, "stdout format")
      ->check(CLI::IsMember({"csv", "json"}));
  app.add_option("--out-dir", g.out_dir, "directory for result files");

  LinkBudgetArgs lb;
  auto* linkbudget = app.add_subcommand("linkbudget", "evaluate the path-loss formula");
  linkbudget->add_option("--fc-mhz", lb.fc_mhz, "carrier frequency in MHz");
  linkbudget->add_option("--alpha", lb.alpha, "path-loss exponent");
  linkbudget->add_option("--d-km", lb.d_km, "distance in km");
  linkbudget->add_option("--atmos", lb.atmos, "atmospheric attenuation in dB/km");
  linkbudget->add_option("--rain", lb.rain, "rain attenuation in dB/km");

  auto* estimate = app.add_subcommand("estimate", "run one estimation trial");

  SweepMseArgs mse;
  auto* sweep_mse = app.add_subcommand("sweep-mse", "NMSE sweep over G or SNR");
  sweep_mse->add_option("--var", mse.var, "sweep variable")
      ->check(CLI::IsMember({"G", "snr_db"}));
  sweep_mse->add_option("--values", mse.values, "sweep values (default: config value)")
      ->delimiter(',');
  sweep_mse->add_option("--trials", mse.trials, "trials per value")
      ->check(CLI::PositiveNumber);

  SweepBerArgs ber;
  auto* sweep_ber = app.add_subcommand("sweep-ber", "downlink BER with estimated CSI");
  sweep_ber->add_option("--snr", ber.snr, "SNR points in dB")->delimiter(',');
  sweep_ber->add_option("--symbols", ber.symbols, "16-QAM symbols per point")
      ->check(CLI::Range(std::int64_t{10000}, std::int64_t{1} << 40));
  sweep_ber->add_flag("--noiseless-estimation", ber.noiseless_estimation,
                      "estimate from noiseless pilots");

  int theory_trials = 100;
  auto* theory = app.add_subcommand("theory-check", "uniqueness certificate battery");
  theory->add_option("--trials", theory_trials, "certified instances")
      ->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  const std::vector<std::string> args(argv + 1, argv + argc);
  scs::SystemConfig config;
  try {
    if (!g.config_path.empty()) config = scs::parse_config(g.config_path);
  } catch (const scs::ConfigError& e) {
    std::cerr << e.what() << "\n";
    return kExitConfig;
  }
  if (scs::is_long_running(config)) {
    std::cerr << "warning: angular dimension " << config.angular_dim()
              << " is full scale; this run is long-running\n";
  }

  try {
    if (*linkbudget) {
      emit(g, "linkbudget", config, args, run_linkbudget(lb));
    } else if (*estimate) {
      emit(g, "estimate", config, args, run_estimate(config, g.seed));
    } else if (*sweep_mse) {
      emit(g, "sweep-mse", config, args, run_sweep_mse(config, g, mse));
    } else if (*sweep_ber) {
      emit(g, "sweep-ber", config, args, run_sweep_ber(config, g, ber));
    } else if (*theory) {
      emit(g, "theory-check", config, args, run_theory_check(g.seed, theory_trials));
    }
  } catch (const scs::InvalidParameter& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}
