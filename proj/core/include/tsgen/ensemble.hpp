#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "tsgen/clock_model.hpp"
#include "tsgen/rng.hpp"

namespace tsgen {

// N-clock mixed ensemble: all Cs clocks first, then M >= 1 Hm clocks.
// V is the (N-1)xN difference-measurement matrix with ker V = span(1_N);
// r is the per-channel measurement noise variance.
struct EnsembleSpec {
  std::vector<ClockSpec> clocks;
  double tau = 1.0;
  double r = 0.0;
  Eigen::MatrixXd V;

  int size() const { return static_cast<int>(clocks.size()); }
  int hm_count() const;
  int cs_count() const { return size() - hm_count(); }
  int state_dim() const { return 2 * size() + hm_count(); }

  // Checks clock ordering, per-clock invariants, tau/r positivity, and
  // that V has the right shape, V 1 = 0 and rank N-1 (singular values
  // against 1e-10 x largest).
  void validate() const;

  // Everything except r > 0; what matrix assembly and simulation need.
  // Degenerate r = 0 runs are legal there.
  void validate_model() const;

  // Diagonals of the noise-level matrices (sigma1^2 .. sigma3^2), each
  // of length N; sigma3 entries are zero for the Cs clocks.
  Eigen::VectorXd sigma1_sq() const;
  Eigen::VectorXd sigma2_sq() const;
  Eigen::VectorXd sigma3_sq() const;
};

// The star-shaped difference matrix [I_{N-1} | -1_{N-1}].
Eigen::MatrixXd default_difference_matrix(int n);

// Stacked state-space model of the ensemble with state [x; z],
// x = [p_1..p_N, f_1..f_N], z = Hm drifts.
struct SystemMatrices {
  Eigen::MatrixXd Acal;  // (2N+M) x (2N+M)
  Eigen::MatrixXd Bcal;  // (2N+M) x N
  Eigen::MatrixXd Ccal;  // (N-1) x (2N+M)
  Eigen::MatrixXd Q;     // process noise covariance, (2N+M)^2
  Eigen::MatrixXd J;     // N x M selector of the Hm clocks
  // Diagonal/structured noise blocks used to assemble Q.
  Eigen::MatrixXd Sigma1, Sigma2, Sigma3;  // N x N diagonal
  Eigen::MatrixXd Sigma4;                  // N x M
  Eigen::MatrixXd Sigma5;                  // M x M diagonal
  int n_clocks = 0;
  int n_hm = 0;

  int state_dim() const { return 2 * n_clocks + n_hm; }
};

SystemMatrices assemble_system(const EnsembleSpec& spec);

// Process covariance for an arbitrary clock list (no ordering or size
// constraints); the degenerate single-Cs case reduces to the 2x2
// one-clock covariance.
Eigen::MatrixXd assemble_process_covariance(const std::vector<ClockSpec>& clocks,
                                            double tau);

// Time-indexed record of one simulation. States are stored per step
// (rows 0..horizon); u has one row per transition (rows 0..horizon-1);
// y[k] is generated from x[k] for every k including k = 0.
struct SimulationTrace {
  Eigen::MatrixXd x;  // (horizon+1) x 2N
  Eigen::MatrixXd z;  // (horizon+1) x M
  Eigen::MatrixXd y;  // (horizon+1) x (N-1)
  Eigen::MatrixXd u;  // horizon x N
  std::uint64_t seed = 0;
  // Debug mode: drawn noises, so the recursion can be replayed exactly.
  std::optional<Eigen::MatrixXd> vx;  // horizon x 2N
  std::optional<Eigen::MatrixXd> vz;  // horizon x M
  std::optional<Eigen::MatrixXd> w;   // (horizon+1) x (N-1)
};

// u[k] as a function of the step index, the measurement y[k] and the
// trace so far (everything up to and including step k).
using ControlPolicy = std::function<Eigen::VectorXd(
    int k, const Eigen::VectorXd& y_k, const SimulationTrace& so_far)>;

// Noise source shared by every simulator: one labeled stream per clock
// plus one for the measurement channels, all derived from the master
// seed, so runs with and without control consume identical draws.
class EnsembleNoise {
 public:
  EnsembleNoise(const EnsembleSpec& spec, std::uint64_t seed);

  // Draws v^x (2N, [p-noise; f-noise]) and v^z (M) for one transition.
  void process(Eigen::VectorXd& vx, Eigen::VectorXd& vz);
  Eigen::VectorXd measurement();

 private:
  const EnsembleSpec* spec_;
  std::vector<Eigen::MatrixXd> factors_;
  std::vector<GaussianStream> clock_streams_;
  GaussianStream meas_stream_;
};

// initial_state, when given, must have 2N+M entries; the default is the
// all-zero state. Validation happens at assembly/config time, not here,
// so degenerate noise settings (all sigmas zero, r = 0) are simulable.
SimulationTrace simulate_ensemble(const SystemMatrices& sys,
                                  const EnsembleSpec& spec,
                                  const ControlPolicy& policy, int horizon,
                                  std::uint64_t seed, bool record_noise = false,
                                  const std::optional<Eigen::VectorXd>&
                                      initial_state = std::nullopt);

// Observability matrix rank of (Acal, Ccal), counting singular values
// above 1e-10 x largest.
int observability_rank(const SystemMatrices& sys);

}  // namespace tsgen
