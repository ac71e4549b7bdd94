#pragma once

#include <Eigen/Core>

namespace tsgen {

enum class ClockKind { Cs, Hm };

// Per-clock noise levels, stored in SI units (any table scale factors are
// applied at config-ingest time, never here).
//   sigma1 — white frequency noise
//   sigma2 — random walk frequency noise
//   sigma3 — random run of frequency drift (zero for Cs)
struct ClockSpec {
  ClockKind kind = ClockKind::Cs;
  double sigma1 = 0.0;
  double sigma2 = 0.0;
  double sigma3 = 0.0;

  int state_dim() const { return kind == ClockKind::Cs ? 2 : 3; }

  // Throws std::invalid_argument on non-finite/negative sigmas or a Cs
  // clock with a drift noise term.
  void validate() const;
};

// phase in seconds, frequency dimensionless, drift in 1/s (zero for Cs).
struct ClockState {
  double phase = 0.0;
  double freq = 0.0;
  double drift = 0.0;
};

// The 2-state building blocks shared by every model for a fixed sampling
// interval tau: A = [[1,t],[0,1]], B = [t,1]^T, beta = [t^2/2, t]^T,
// C = [1,0].
struct BaseMatrices {
  double tau = 1.0;
  Eigen::Matrix2d A;
  Eigen::Vector2d B;
  Eigen::Vector2d beta;
  Eigen::RowVector2d C;

  static BaseMatrices make(double tau);  // throws on tau <= 0
};

// Process-noise covariance of a 2-state (Cs) clock over one step.
Eigen::Matrix2d cs_process_covariance(double tau, const ClockSpec& spec);

// Process-noise covariance of a 3-state (Hm) clock over one step. With
// sigma3 = 0 the top-left 2x2 block equals cs_process_covariance bit for
// bit (same expression ordering).
Eigen::Matrix3d hm_process_covariance(double tau, const ClockSpec& spec);

// Kind dispatch: 2x2 or 3x3.
Eigen::MatrixXd process_covariance(double tau, const ClockSpec& spec);

// One deterministic step of the clock deviation model plus an additive
// noise sample. noise must have 2 entries for Cs, 3 for Hm; the drift
// state receives no input.
ClockState step_clock(const ClockState& state, ClockKind kind, double u,
                      const Eigen::VectorXd& noise, const BaseMatrices& base);

// Closed-form Hadamard variance of a free-running clock at sampling
// interval tau: sigma1^2/tau + tau*sigma2^2/6 + 11*tau^3*sigma3^2/120.
double free_running_hvar(double tau, const ClockSpec& spec);

// Lower-triangular factor L with L L^T = cov, for drawing correlated
// noise. Uses Cholesky when the matrix is positive definite and an
// eigenvalue factor with negative eigenvalues clamped to zero otherwise
// (one-step covariances can be singular, e.g. all-zero sigmas).
Eigen::MatrixXd noise_factor(const Eigen::MatrixXd& cov);

}  // namespace tsgen
