// Command-line front end: scenario simulation, HVAR estimation over a
// phase-series CSV, weight-vector computation, steady-gain caching and
// config validation.

#include <cstdio>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tsgen/csv.hpp"
#include "tsgen/hadamard.hpp"
#include "tsgen/kalman.hpp"
#include "tsgen/scenario.hpp"

namespace {

int cmd_simulate(const std::string& config_path, const std::string& out_dir,
                 const std::vector<std::uint64_t>& seeds) {
  tsgen::ScenarioConfig cfg = tsgen::load_config(config_path);
  if (!out_dir.empty()) cfg.output_dir = out_dir;
  if (!seeds.empty()) cfg.seeds = seeds;
  const tsgen::ArtifactSet artifacts = tsgen::run_scenario(cfg);
  std::cout << "wrote " << artifacts.files.size() << " artifacts + manifest to "
            << artifacts.directory.string() << "\n";
  return 0;
}

int cmd_hvar(const std::string& input, const std::string& column, double tau,
             int m, bool octaves) {
  const std::vector<double> phase = tsgen::read_csv_column(input, column);
  if (octaves) {
    const auto grid =
        tsgen::octave_m_grid(static_cast<int>(phase.size()) - 1);
    std::cout << "m,interval_s,value\n";
    for (int mm : grid) {
      std::cout << mm << ',' << tsgen::format_double(mm * tau) << ','
                << tsgen::format_double(tsgen::hvar_estimate(phase, tau, mm))
                << "\n";
    }
  } else {
    std::cout << tsgen::format_double(tsgen::hvar_estimate(phase, tau, m))
              << "\n";
  }
  return 0;
}

void print_weights(const char* name, const Eigen::VectorXd& q) {
  std::cout << name << ':';
  for (Eigen::Index i = 0; i < q.size(); ++i) {
    std::cout << (i ? "," : " ") << tsgen::format_double(q(i));
  }
  std::cout << "\n";
}

int cmd_weights(const std::string& config_path, const std::string& mode,
                double tau_opt) {
  const tsgen::ScenarioConfig cfg = tsgen::load_config(config_path);
  const tsgen::EnsembleSpec spec = cfg.build_ensemble();
  if (mode == "short" || mode == "all") {
    print_weights("q_short_term", tsgen::short_term_weight(spec.sigma1_sq()).q);
  }
  if (mode == "long" || mode == "all") {
    print_weights("q_long_term",
                  tsgen::long_term_weight(spec.sigma2_sq(), spec.size(),
                                          spec.hm_count())
                      .q);
  }
  if (mode == "general" || mode == "all") {
    print_weights("q_general",
                  tsgen::optimal_weight(tau_opt, spec.sigma1_sq(),
                                        spec.sigma2_sq(), spec.sigma3_sq())
                      .q);
  }
  if (mode == "config") {
    print_weights("q", cfg.resolve_weights().q);
  }
  return 0;
}

int cmd_gains(const std::string& config_path, const std::string& out_path) {
  const tsgen::ScenarioConfig cfg = tsgen::load_config(config_path);
  const tsgen::EnsembleSpec spec = cfg.build_ensemble();
  const tsgen::SystemMatrices sys = tsgen::assemble_system(spec);
  const tsgen::ObservableDecomposition dec =
      tsgen::observable_decomposition(spec, cfg.resolve_weights());
  const tsgen::SteadyGains gains = tsgen::steady_gains(dec, sys.Q, spec.r);
  tsgen::save_gains(gains, out_path);
  std::cout << "closed_loop_spectral_radius="
            << tsgen::format_double(gains.closed_loop_spectral_radius) << "\n"
            << "wrote " << out_path << "\n";
  return 0;
}

int cmd_validate(const std::string& config_path) {
  tsgen::load_config(config_path);
  std::cout << "config ok\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"time scale generation from mixed atomic clock ensembles"};
  app.require_subcommand(1);

  std::string config_path, out_dir, input, column = "p", mode = "all",
                                           gains_out = "gains.csv";
  std::vector<std::uint64_t> seeds;
  double tau = 1.0, tau_opt = 1.0;
  int m = 1;
  bool octaves = false;

  auto* sim = app.add_subcommand("simulate", "run a scenario config");
  sim->add_option("--config", config_path, "scenario config file")->required();
  sim->add_option("--output-dir", out_dir, "override outputs.dir");
  sim->add_option("--seed", seeds, "override run.seeds (repeatable)");

  auto* hv = app.add_subcommand("hvar", "Hadamard variance of a phase CSV");
  hv->add_option("--input", input, "CSV with a phase column")->required();
  hv->add_option("--column", column, "column name or 0-based index");
  hv->add_option("--tau", tau, "sampling interval in seconds");
  hv->add_option("--m", m, "step multiplier");
  hv->add_flag("--octaves", octaves, "full octave grid instead of one m");

  auto* wt = app.add_subcommand("weights", "weight vectors for a config");
  wt->add_option("--config", config_path, "scenario config file")->required();
  wt->add_option("--mode", mode, "short|long|general|config|all");
  wt->add_option("--tau-opt", tau_opt, "interval for --mode general");

  auto* gn = app.add_subcommand("gains", "compute and cache steady gains");
  gn->add_option("--config", config_path, "scenario config file")->required();
  gn->add_option("--output", gains_out, "gains artifact path");

  auto* va = app.add_subcommand("validate", "check a config and exit");
  va->add_option("--config", config_path, "scenario config file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 2;
  }

  try {
    if (sim->parsed()) return cmd_simulate(config_path, out_dir, seeds);
    if (hv->parsed()) return cmd_hvar(input, column, tau, m, octaves);
    if (wt->parsed()) return cmd_weights(config_path, mode, tau_opt);
    if (gn->parsed()) return cmd_gains(config_path, gains_out);
    if (va->parsed()) return cmd_validate(config_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
