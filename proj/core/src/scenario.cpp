#include "tsgen/scenario.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "tsgen/csv.hpp"
#include "tsgen/hadamard.hpp"
#include "tsgen/rng.hpp"
#include "tsgen/sync_control.hpp"

namespace tsgen {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& field, const std::string& rule) {
  throw std::invalid_argument("config error at '" + field + "': " + rule);
}

const json& require(const json& j, const std::string& parent,
                    const std::string& key) {
  auto it = j.find(key);
  if (it == j.end()) fail(parent + "." + key, "missing required field");
  return *it;
}

double require_number(const json& j, const std::string& parent,
                      const std::string& key) {
  const json& v = require(j, parent, key);
  if (!v.is_number()) fail(parent + "." + key, "must be a number");
  return v.get<double>();
}

}  // namespace

EnsembleSpec ScenarioConfig::build_ensemble() const {
  EnsembleSpec spec;
  spec.tau = tau;
  spec.r = r;
  for (const auto& row : clock_rows) {
    ClockSpec c;
    c.kind = row.kind;
    c.sigma1 = row.sigma_raw[0] * sigma_scales[0];
    c.sigma2 = row.sigma_raw[1] * sigma_scales[1];
    c.sigma3 = row.sigma_raw.size() > 2 ? row.sigma_raw[2] * sigma_scales[2] : 0.0;
    spec.clocks.push_back(c);
  }
  const int n = spec.size();
  if (v_rows.empty()) {
    spec.V = default_difference_matrix(n);
  } else {
    spec.V = Eigen::MatrixXd(static_cast<Eigen::Index>(v_rows.size()), n);
    for (std::size_t i = 0; i < v_rows.size(); ++i) {
      for (int jcol = 0; jcol < n; ++jcol) {
        spec.V(static_cast<Eigen::Index>(i), jcol) = v_rows[i][static_cast<std::size_t>(jcol)];
      }
    }
  }
  return spec;
}

WeightVector ScenarioConfig::resolve_weights() const {
  const EnsembleSpec spec = build_ensemble();
  switch (weight_mode) {
    case WeightMode::ShortTerm:
      return short_term_weight(spec.sigma1_sq());
    case WeightMode::LongTerm:
      return long_term_weight(spec.sigma2_sq(), spec.size(), spec.hm_count());
    case WeightMode::General:
      return optimal_weight(tau_opt, spec.sigma1_sq(), spec.sigma2_sq(),
                            spec.sigma3_sq());
    case WeightMode::Custom: {
      WeightVector w;
      w.q = Eigen::Map<const Eigen::VectorXd>(
          custom_q.data(), static_cast<Eigen::Index>(custom_q.size()));
      w.validate();
      return w;
    }
  }
  throw std::logic_error("unreachable weight mode");
}

bool ScenarioConfig::runs_filter(const std::string& name) const {
  return std::find(filters.begin(), filters.end(), name) != filters.end();
}

namespace {

WeightMode parse_weight_mode(const std::string& s) {
  if (s == "short_term") return WeightMode::ShortTerm;
  if (s == "long_term") return WeightMode::LongTerm;
  if (s == "general") return WeightMode::General;
  if (s == "custom") return WeightMode::Custom;
  fail("weights.mode", "must be one of short_term|long_term|general|custom");
}

std::string weight_mode_name(WeightMode m) {
  switch (m) {
    case WeightMode::ShortTerm: return "short_term";
    case WeightMode::LongTerm: return "long_term";
    case WeightMode::General: return "general";
    case WeightMode::Custom: return "custom";
  }
  return "?";
}

}  // namespace

ScenarioConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config parse error: ") + e.what());
  }

  ScenarioConfig cfg;
  const json& ens = require(j, "", "ensemble");
  cfg.tau = require_number(ens, "ensemble", "tau_s");
  if (!(cfg.tau > 0.0)) fail("ensemble.tau_s", "must be > 0");
  cfg.r = require_number(ens, "ensemble", "measurement_noise_r");
  if (!(cfg.r > 0.0)) fail("ensemble.measurement_noise_r", "must be > 0");

  if (ens.contains("sigma_scales")) {
    const json& sc = ens["sigma_scales"];
    if (!sc.is_array() || sc.size() != 3) {
      fail("ensemble.sigma_scales", "must be an array of 3 numbers");
    }
    for (int i = 0; i < 3; ++i) cfg.sigma_scales[static_cast<std::size_t>(i)] = sc[static_cast<std::size_t>(i)].get<double>();
  }

  const json& clocks = require(ens, "ensemble", "clocks");
  if (!clocks.is_array() || clocks.size() < 2) {
    fail("ensemble.clocks", "must be an array of at least 2 clocks");
  }
  for (std::size_t i = 0; i < clocks.size(); ++i) {
    const std::string path = "ensemble.clocks[" + std::to_string(i) + "]";
    const json& c = clocks[i];
    ScenarioConfig::ClockRow row;
    const std::string kind = require(c, path, "kind").get<std::string>();
    if (kind == "cs") row.kind = ClockKind::Cs;
    else if (kind == "hm") row.kind = ClockKind::Hm;
    else fail(path + ".kind", "must be 'cs' or 'hm'");
    const json& s = require(c, path, "sigma");
    if (!s.is_array()) fail(path + ".sigma", "must be an array");
    for (const auto& v : s) row.sigma_raw.push_back(v.get<double>());
    if (row.kind == ClockKind::Cs &&
        !(row.sigma_raw.size() == 2 ||
          (row.sigma_raw.size() == 3 && row.sigma_raw[2] == 0.0))) {
      fail(path + ".sigma", "Cs clock takes [sigma1, sigma2] (sigma3 must be 0)");
    }
    if (row.kind == ClockKind::Hm && row.sigma_raw.size() != 3) {
      fail(path + ".sigma", "Hm clock takes [sigma1, sigma2, sigma3]");
    }
    cfg.clock_rows.push_back(std::move(row));
  }

  if (ens.contains("difference_matrix") && !ens["difference_matrix"].is_string()) {
    const json& vm = ens["difference_matrix"];
    if (!vm.is_array()) {
      fail("ensemble.difference_matrix", "must be 'star' or an array of rows");
    }
    for (const auto& r : vm) {
      std::vector<double> row;
      for (const auto& v : r) row.push_back(v.get<double>());
      if (row.size() != cfg.clock_rows.size()) {
        fail("ensemble.difference_matrix", "each row must have N entries");
      }
      cfg.v_rows.push_back(std::move(row));
    }
  } else if (ens.contains("difference_matrix") &&
             ens["difference_matrix"].get<std::string>() != "star") {
    fail("ensemble.difference_matrix", "the only named form is 'star'");
  }

  const json& weights = require(j, "", "weights");
  cfg.weight_mode =
      parse_weight_mode(require(weights, "weights", "mode").get<std::string>());
  if (cfg.weight_mode == WeightMode::General) {
    cfg.tau_opt = require_number(weights, "weights", "tau_opt");
    if (!(cfg.tau_opt > 0.0)) fail("weights.tau_opt", "must be > 0");
  }
  if (cfg.weight_mode == WeightMode::Custom) {
    const json& q = require(weights, "weights", "q");
    if (!q.is_array() || q.size() != cfg.clock_rows.size()) {
      fail("weights.q", "must be an array of N weights");
    }
    for (const auto& v : q) cfg.custom_q.push_back(v.get<double>());
  }

  const json& ctrl = require(j, "", "controller");
  cfg.gamma = require_number(ctrl, "controller", "gamma");
  cfg.allow_unstable = ctrl.value("allow_unstable", false);
  if (!cfg.allow_unstable && !(std::abs(1.0 - cfg.gamma) < 1.0)) {
    fail("controller.gamma",
         "synchronization requires |1-gamma| < 1 (or set allow_unstable)");
  }

  const json& filt = require(j, "", "filter");
  const json& run_list = require(filt, "filter", "run");
  if (!run_list.is_array()) fail("filter.run", "must be an array");
  for (const auto& f : run_list) {
    const std::string name = f.get<std::string>();
    if (name != "ckf" && name != "tkf" && name != "sstkf") {
      fail("filter.run", "entries must be ckf|tkf|sstkf");
    }
    cfg.filters.push_back(name);
  }
  const std::string form = filt.value("ckf_update_form", "standard");
  if (form == "standard") cfg.ckf_update_form = CkfUpdateForm::Standard;
  else if (form == "as_printed") cfg.ckf_update_form = CkfUpdateForm::AsPrinted;
  else fail("filter.ckf_update_form", "must be standard|as_printed");
  cfg.ckf_p0 = filt.value("ckf_p0", 0.0);
  if (cfg.ckf_p0 < 0.0) fail("filter.ckf_p0", "must be >= 0");
  cfg.tkf_p0 = filt.value("tkf_p0", 1e-18);
  if (cfg.tkf_p0 < 0.0) fail("filter.tkf_p0", "must be >= 0");

  const json& run = require(j, "", "run");
  const double horizon = require_number(run, "run", "horizon");
  if (horizon < 8 || horizon != std::floor(horizon)) {
    fail("run.horizon", "must be an integer >= 8");
  }
  cfg.horizon = static_cast<int>(horizon);
  const json& seeds = require(run, "run", "seeds");
  if (!seeds.is_array() || seeds.empty()) {
    fail("run.seeds", "must be a non-empty array of integers");
  }
  for (const auto& s : seeds) cfg.seeds.push_back(s.get<std::uint64_t>());
  cfg.record_noise = run.value("record_noise", false);

  if (j.contains("outputs")) {
    cfg.output_dir = j["outputs"].value("dir", cfg.output_dir);
  }

  // Full model-level validation (ordering, kernel of V, sigma signs...).
  const EnsembleSpec spec = cfg.build_ensemble();
  spec.validate();
  cfg.resolve_weights();
  return cfg;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const ScenarioConfig& cfg) {
  json j;
  json clocks = json::array();
  for (const auto& row : cfg.clock_rows) {
    json c;
    c["kind"] = row.kind == ClockKind::Cs ? "cs" : "hm";
    c["sigma"] = row.sigma_raw;
    clocks.push_back(c);
  }
  j["ensemble"]["tau_s"] = cfg.tau;
  j["ensemble"]["measurement_noise_r"] = cfg.r;
  j["ensemble"]["sigma_scales"] = cfg.sigma_scales;
  j["ensemble"]["clocks"] = clocks;
  if (cfg.v_rows.empty()) {
    j["ensemble"]["difference_matrix"] = "star";
  } else {
    j["ensemble"]["difference_matrix"] = cfg.v_rows;
  }
  j["weights"]["mode"] = weight_mode_name(cfg.weight_mode);
  if (cfg.weight_mode == WeightMode::General) j["weights"]["tau_opt"] = cfg.tau_opt;
  if (cfg.weight_mode == WeightMode::Custom) j["weights"]["q"] = cfg.custom_q;
  j["controller"]["gamma"] = cfg.gamma;
  j["controller"]["allow_unstable"] = cfg.allow_unstable;
  j["filter"]["run"] = cfg.filters;
  j["filter"]["ckf_update_form"] =
      cfg.ckf_update_form == CkfUpdateForm::Standard ? "standard" : "as_printed";
  j["filter"]["ckf_p0"] = cfg.ckf_p0;
  j["filter"]["tkf_p0"] = cfg.tkf_p0;
  j["run"]["horizon"] = cfg.horizon;
  j["run"]["seeds"] = cfg.seeds;
  j["run"]["record_noise"] = cfg.record_noise;
  j["outputs"]["dir"] = cfg.output_dir;
  return j.dump(2) + "\n";
}

std::string tsgen_version() { return "tsgen 0.1.0"; }

namespace {

void write_free_trace(const std::filesystem::path& path,
                      const SimulationTrace& tr, int n, int ncs) {
  CsvWriter csv(path);
  csv.header({"k", "clock_id", "p", "f", "z", "u"});
  const int h = static_cast<int>(tr.x.rows()) - 1;
  for (int k = 0; k <= h; ++k) {
    for (int i = 0; i < n; ++i) {
      csv.field(static_cast<long long>(k));
      csv.field(static_cast<long long>(i + 1));
      csv.field(tr.x(k, i));
      csv.field(tr.x(k, n + i));
      csv.field(i >= ncs ? tr.z(k, i - ncs) : 0.0);
      csv.field(k < h ? tr.u(k, i) : 0.0);
      csv.end_row();
    }
  }
  csv.close();
}

void write_closed_trace(const std::filesystem::path& path,
                        const ClosedLoopTrace& tr, int n, int ncs) {
  CsvWriter csv(path);
  csv.header({"k", "clock_id", "p", "f", "z", "u", "p_hat", "p_corr", "theta",
              "resid_p"});
  const int h = static_cast<int>(tr.sim.x.rows()) - 1;
  for (int k = 0; k <= h; ++k) {
    for (int i = 0; i < n; ++i) {
      csv.field(static_cast<long long>(k));
      csv.field(static_cast<long long>(i + 1));
      csv.field(tr.sim.x(k, i));
      csv.field(tr.sim.x(k, n + i));
      csv.field(i >= ncs ? tr.sim.z(k, i - ncs) : 0.0);
      csv.field(k < h ? tr.sim.u(k, i) : 0.0);
      csv.field(tr.phase_est(k, i));
      csv.field(tr.corrected(k, i));
      csv.field(tr.theta(k));
      csv.field(tr.phase_est(k, i) - tr.sim.x(k, i));
      csv.end_row();
    }
  }
  csv.close();
}

void append_curve(CsvWriter& csv, const HvarCurve& c) {
  for (const auto& pt : c.points) {
    csv.field(c.series);
    csv.field(c.source);
    csv.field(static_cast<long long>(pt.m));
    csv.field(pt.interval);
    csv.field(pt.value);
    csv.end_row();
  }
}

std::vector<double> column_of(const Eigen::MatrixXd& m, int col) {
  std::vector<double> out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index k = 0; k < m.rows(); ++k) out[static_cast<std::size_t>(k)] = m(k, col);
  return out;
}

}  // namespace

ArtifactSet run_scenario(const ScenarioConfig& cfg) {
  const EnsembleSpec spec = cfg.build_ensemble();
  spec.validate();
  const SystemMatrices sys = assemble_system(spec);
  const WeightVector q = cfg.resolve_weights();
  const ObservableDecomposition dec = observable_decomposition(spec, q);
  const SteadyGains gains = steady_gains(dec, sys.Q, spec.r);
  const ControllerConfig ctrl =
      feedback_gains(cfg.gamma, cfg.tau, cfg.allow_unstable);

  const int n = spec.size();
  const int ncs = spec.cs_count();

  std::filesystem::path out_dir = cfg.output_dir;
  if (const char* env = std::getenv("TSGEN_OUTPUT_DIR")) {
    if (*env) out_dir = env;
  }
  const std::filesystem::path tmp_dir = out_dir / "_partial";
  std::filesystem::create_directories(tmp_dir);

  ArtifactSet artifacts;
  artifacts.directory = out_dir;

  const WeightVector q_short = short_term_weight(spec.sigma1_sq());
  const WeightVector q_long =
      long_term_weight(spec.sigma2_sq(), n, spec.hm_count());

  try {
    for (std::uint64_t seed : cfg.seeds) {
      const std::string tag = "_s" + std::to_string(seed);

      // Free-running ensemble (zero input), same noise streams as the
      // controlled run.
      const auto zero_policy = [n](int, const Eigen::VectorXd&,
                                   const SimulationTrace&) {
        return Eigen::VectorXd::Zero(n).eval();
      };
      const SimulationTrace free_tr = simulate_ensemble(
          sys, spec, zero_policy, cfg.horizon, seed, cfg.record_noise);
      write_free_trace(tmp_dir / ("free_trace" + tag + ".csv"), free_tr, n, ncs);
      artifacts.files.push_back("free_trace" + tag + ".csv");

      // Closed loop under the mean-synchronization controller.
      ClosedLoopOptions clopts;
      clopts.horizon = cfg.horizon;
      clopts.seed = seed;
      clopts.record_noise = cfg.record_noise;
      const ClosedLoopTrace closed =
          closed_loop_simulate(spec, dec, gains, ctrl, clopts);
      write_closed_trace(tmp_dir / ("closed_trace" + tag + ".csv"), closed, n,
                         ncs);
      artifacts.files.push_back("closed_trace" + tag + ".csv");

      // Weighted-mean reference trajectories for both limit weights.
      WeightedMean wm_short{q_short, spec.sigma1_sq(), spec.sigma2_sq(),
                            spec.sigma3_sq(), spec.tau};
      WeightedMean wm_long{q_long, spec.sigma1_sq(), spec.sigma2_sq(),
                           spec.sigma3_sq(), spec.tau};
      const std::vector<double> h_short =
          simulate_weighted_mean(wm_short, cfg.horizon, seed);
      const std::vector<double> h_long =
          simulate_weighted_mean(wm_long, cfg.horizon, seed);
      {
        CsvWriter csv(tmp_dir / ("mean_refs" + tag + ".csv"));
        csv.header({"k", "h_short_term", "h_long_term"});
        for (std::size_t k = 0; k < h_short.size(); ++k) {
          csv.field(static_cast<long long>(k));
          csv.field(h_short[k]);
          csv.field(h_long[k]);
          csv.end_row();
        }
        csv.close();
        artifacts.files.push_back("mean_refs" + tag + ".csv");
      }

      // HVAR curves: free clocks, controlled (corrected) clocks, both
      // reference means, plus the theoretical reference curves.
      {
        const std::vector<int> grid = octave_m_grid(cfg.horizon);
        CsvWriter csv(tmp_dir / ("hvar" + tag + ".csv"));
        csv.header({"series", "source", "m", "interval_s", "value"});
        for (int i = 0; i < n; ++i) {
          const auto kind = i < ncs ? "cs" : "hm";
          append_curve(csv, hvar_curve(column_of(free_tr.x, i), spec.tau, grid,
                                       "free_" + std::string(kind) + "_" +
                                           std::to_string(i + 1)));
        }
        for (int i = 0; i < n; ++i) {
          append_curve(csv,
                       hvar_curve(column_of(closed.corrected, i), spec.tau,
                                  grid, "controlled_" + std::to_string(i + 1)));
        }
        append_curve(csv, hvar_curve(h_short, spec.tau, grid, "mean_short_term"));
        append_curve(csv, hvar_curve(h_long, spec.tau, grid, "mean_long_term"));
        HvarCurve th_short{"mean_short_term", "theoretical", {}};
        HvarCurve th_long{"mean_long_term", "theoretical", {}};
        for (int m : grid) {
          th_short.points.push_back(
              {m, m * spec.tau, hvar_weighted_mean_at(wm_short, m * spec.tau)});
          th_long.points.push_back(
              {m, m * spec.tau, hvar_weighted_mean_at(wm_long, m * spec.tau)});
        }
        append_curve(csv, th_short);
        append_curve(csv, th_long);
        csv.close();
        artifacts.files.push_back("hvar" + tag + ".csv");
      }

      // Estimator diagnostics over the free-running measurements.
      if (!cfg.filters.empty()) {
        CsvWriter csv(tmp_dir / ("filter_diag" + tag + ".csv"));
        csv.header({"k", "filter", "metric", "value"});
        const Eigen::VectorXd zero_u = Eigen::VectorXd::Zero(n);
        CkfState ckf;
        TkfState tkf;
        SstkfState sst;
        const bool run_ckf = cfg.runs_filter("ckf");
        const bool run_tkf = cfg.runs_filter("tkf");
        const bool run_sst = cfg.runs_filter("sstkf");
        if (run_ckf) ckf = ckf_init(sys, cfg.ckf_p0);
        if (run_tkf) tkf = tkf_init(dec, cfg.tkf_p0);
        if (run_sst) {
          sst.obs_est = Eigen::VectorXd::Zero(dec.obs_dim());
          sst.mean_est.setZero();
        }
        for (int k = 1; k <= cfg.horizon; ++k) {
          const Eigen::VectorXd y = free_tr.y.row(k).transpose();
          if (run_ckf) {
            ckf = ckf_step(ckf, y, zero_u, sys, spec.r, cfg.ckf_update_form);
            csv.field(static_cast<long long>(k)).field("ckf");
            csv.field("max_diag_P").field(ckf.P.diagonal().maxCoeff());
            csv.end_row();
          }
          if (run_tkf) {
            tkf = tkf_step(tkf, y, zero_u, dec, sys.Q, spec.r);
            csv.field(static_cast<long long>(k)).field("tkf");
            csv.field("frob_P_oo").field(tkf.obs_cov.norm());
            csv.end_row();
            csv.field(static_cast<long long>(k)).field("tkf");
            csv.field("frob_P_cross").field(tkf.cross_cov.norm());
            csv.end_row();
          }
          if (run_sst) {
            const Eigen::VectorXd innov =
                y - dec.obs_output * (dec.obs_dyn * sst.obs_est);
            sst = sstkf_step(sst, y, zero_u, dec, gains);
            csv.field(static_cast<long long>(k)).field("sstkf");
            csv.field("innovation_norm").field(innov.norm());
            csv.end_row();
          }
        }
        csv.close();
        artifacts.files.push_back("filter_diag" + tag + ".csv");
      }
    }

    // Manifest: config hash, seeds, version, per-file content hashes.
    // The hash covers the scenario content, not where it was written.
    {
      ScenarioConfig hashed = cfg;
      hashed.output_dir.clear();
      json manifest;
      manifest["tool"] = tsgen_version();
      manifest["config_hash"] = hex64(fnv1a64(serialize_config(hashed)));
      manifest["seeds"] = cfg.seeds;
      manifest["initial_conditions"] =
          "zero true states and estimates; ckf_p0=" + format_double(cfg.ckf_p0) +
          ", tkf_p0=" + format_double(cfg.tkf_p0);
      json files = json::object();
      for (const auto& f : artifacts.files) {
        files[f.string()] = hex64(hash_file(tmp_dir / f));
      }
      manifest["files"] = files;
      std::ofstream out(tmp_dir / "manifest.json");
      out << manifest.dump(2) << "\n";
    }
    artifacts.manifest = "manifest.json";

    // Atomically publish: move every file out of the staging directory.
    for (const auto& f : artifacts.files) {
      std::filesystem::rename(tmp_dir / f, out_dir / f);
    }
    std::filesystem::rename(tmp_dir / "manifest.json", out_dir / "manifest.json");
    std::filesystem::remove_all(tmp_dir);
  } catch (...) {
    std::filesystem::remove_all(tmp_dir);
    throw;
  }
  return artifacts;
}

}  // namespace tsgen
