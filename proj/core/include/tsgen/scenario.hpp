#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "tsgen/decomposition.hpp"
#include "tsgen/ensemble.hpp"
#include "tsgen/kalman.hpp"

namespace tsgen {

enum class WeightMode { ShortTerm, LongTerm, General, Custom };

// A fully validated scenario. Sigma values are stored as read from the
// config (table units) next to their scale factors; SI values are
// produced when the ensemble is built, so serialization round-trips all
// numbers exactly.
struct ScenarioConfig {
  struct ClockRow {
    ClockKind kind = ClockKind::Cs;
    std::vector<double> sigma_raw;  // 2 entries for Cs, 3 for Hm
  };

  double tau = 1.0;
  double r = 0.0;
  std::array<double, 3> sigma_scales{1.0, 1.0, 1.0};
  std::vector<ClockRow> clock_rows;
  // Explicit difference-matrix rows; empty means the star default.
  std::vector<std::vector<double>> v_rows;

  WeightMode weight_mode = WeightMode::ShortTerm;
  double tau_opt = 1.0;              // for WeightMode::General
  std::vector<double> custom_q;      // for WeightMode::Custom

  double gamma = 0.0;
  bool allow_unstable = false;

  std::vector<std::string> filters;  // subset of {ckf, tkf, sstkf}
  CkfUpdateForm ckf_update_form = CkfUpdateForm::Standard;
  double ckf_p0 = 0.0;
  double tkf_p0 = 1e-18;

  int horizon = 0;
  std::vector<std::uint64_t> seeds;
  bool record_noise = false;

  std::string output_dir = "out";

  EnsembleSpec build_ensemble() const;
  WeightVector resolve_weights() const;
  bool runs_filter(const std::string& name) const;
};

// Parses and validates; errors name the offending field and rule.
// Comments (// and /* */) are allowed in the file.
ScenarioConfig load_config(const std::filesystem::path& path);
ScenarioConfig parse_config(const std::string& text);

// Canonical serialization (also used for the config hash).
std::string serialize_config(const ScenarioConfig& cfg);

struct ArtifactSet {
  std::filesystem::path directory;
  std::vector<std::filesystem::path> files;  // relative to directory
  std::filesystem::path manifest;            // relative to directory
};

// Runs every seed of the scenario: free-running trace, closed-loop trace,
// weighted-mean reference traces, HVAR curves and filter diagnostics, all
// as CSV plus a manifest listing every output with a content hash. Honors
// the TSGEN_OUTPUT_DIR environment variable over cfg.output_dir. Partial
// outputs are removed on failure.
ArtifactSet run_scenario(const ScenarioConfig& cfg);

std::string tsgen_version();

}  // namespace tsgen
