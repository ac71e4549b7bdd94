#pragma once

#include <filesystem>

#include <Eigen/Core>

#include "tsgen/decomposition.hpp"
#include "tsgen/ensemble.hpp"

namespace tsgen {

// Measurement-update form of the conventional filter. AsPrinted applies
// the state transition once more inside the update (x+ = A x_prior +
// L(y - C x_prior)); Standard is the usual x+ = x_prior + L(y - C x_prior).
// Standard is the default: the transformed-filter equivalence holds only
// for it.
enum class CkfUpdateForm { Standard, AsPrinted };

// Conventional Kalman filter state over the stacked ensemble model. The
// covariance diverges along the unobservable directions; that is the
// behavior this type exists to demonstrate.
struct CkfState {
  Eigen::VectorXd xhat;  // (2N+M)
  Eigen::MatrixXd P;     // (2N+M)^2, symmetric
  Eigen::MatrixXd gain;  // last computed gain, (2N+M) x (N-1)
};

CkfState ckf_init(const SystemMatrices& sys, double p0_scale);

CkfState ckf_step(const CkfState& state, const Eigen::VectorXd& y,
                  const Eigen::VectorXd& u, const SystemMatrices& sys,
                  double r, CkfUpdateForm form = CkfUpdateForm::Standard);

// Transformed filter state: only the observable covariance block and the
// mean/observable cross block are propagated; no mean-mean block exists.
struct TkfState {
  Eigen::VectorXd obs_est;    // eta_o, 2(N-1)+M
  Eigen::Vector2d mean_est;   // eta_mean
  Eigen::MatrixXd obs_cov;    // P_oo (posterior), symmetric
  Eigen::MatrixXd cross_cov;  // P_mean,obs (posterior), 2 x (2(N-1)+M)
  Eigen::MatrixXd obs_gain;   // last L_o
  Eigen::MatrixXd mean_gain;  // last L_mean
  // Priors from the last step, exposed for convergence studies.
  Eigen::MatrixXd obs_cov_prior;
  Eigen::MatrixXd cross_cov_prior;
};

TkfState tkf_init(const ObservableDecomposition& dec, double obs_cov_scale);

// Initialize consistently with a conventional filter at covariance P0:
// covariance blocks of T P0 T^T.
TkfState tkf_init_from_full(const ObservableDecomposition& dec,
                            const Eigen::MatrixXd& P0);

TkfState tkf_step(const TkfState& state, const Eigen::VectorXd& y,
                  const Eigen::VectorXd& u, const ObservableDecomposition& dec,
                  const Eigen::MatrixXd& Q, double r);

struct RiccatiOptions {
  double fixed_point_tol = 1e-12;  // relative per-iteration change
  long long max_iterations = 1000000;
  // Newton refinement (fixed-gain Stein solves) after the fixed-point
  // stage; polishes the solution to machine-level residual even when the
  // closed loop is extremely slow. Set to 0 for the plain iteration.
  int newton_iterations = 8;
};

// Steady-state prior covariance of the observable block: the unique
// stabilizing fixed point of
//   P = ToQTo' + Aoo P Aoo' - Aoo P Co'(Co P Co' + rI)^-1 Co P Aoo'.
Eigen::MatrixXd solve_riccati(const ObservableDecomposition& dec,
                              const Eigen::MatrixXd& Q, double r,
                              const RiccatiOptions& opts = {});

// Same fixed point for a generic (dyn, out, noise_cov, r) quadruple.
Eigen::MatrixXd solve_riccati(const Eigen::MatrixXd& dyn,
                              const Eigen::MatrixXd& out,
                              const Eigen::MatrixXd& noise_cov, double r,
                              const RiccatiOptions& opts = {});

// Steady-state mean/observable cross covariance: unique solution of the
// linear fixed point (paper's vectorized form), given the steady
// observable covariance and gain. Throws if rho(Aoo(I - L Co)) >= 1.
Eigen::MatrixXd solve_cross_covariance(const ObservableDecomposition& dec,
                                       const Eigen::MatrixXd& Q, double r,
                                       const Eigen::MatrixXd& obs_cov_star,
                                       const Eigen::MatrixXd& obs_gain_star);

struct SteadyGains {
  Eigen::MatrixXd obs_cov;    // P*_oo (prior)
  Eigen::MatrixXd obs_gain;   // L*_o
  Eigen::MatrixXd cross_cov;  // P*_mean,obs (prior)
  Eigen::MatrixXd mean_gain;  // L*_mean
  double closed_loop_spectral_radius = 0.0;
};

SteadyGains steady_gains(const ObservableDecomposition& dec,
                         const Eigen::MatrixXd& Q, double r,
                         const RiccatiOptions& opts = {});

// Mean-only steady-state filter (no covariance updates at runtime).
struct SstkfState {
  Eigen::VectorXd obs_est;
  Eigen::Vector2d mean_est;
};

SstkfState sstkf_step(const SstkfState& state, const Eigen::VectorXd& y,
                      const Eigen::VectorXd& u,
                      const ObservableDecomposition& dec,
                      const SteadyGains& gains);

// Versioned CSV artifact so control runs can reuse precomputed gains.
void save_gains(const SteadyGains& gains, const std::filesystem::path& path);
SteadyGains load_gains(const std::filesystem::path& path);

double spectral_radius(const Eigen::MatrixXd& m);

}  // namespace tsgen
