#include "tsgen/clock_model.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

namespace tsgen {

namespace {

void require_positive_tau(double tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) {
    throw std::invalid_argument("tau must be positive and finite");
  }
}

}  // namespace

void ClockSpec::validate() const {
  auto ok = [](double s) { return std::isfinite(s) && s >= 0.0; };
  if (!ok(sigma1) || !ok(sigma2) || !ok(sigma3)) {
    throw std::invalid_argument("clock sigmas must be finite and non-negative");
  }
  if (kind == ClockKind::Cs && sigma3 != 0.0) {
    throw std::invalid_argument("Cs clock must have sigma3 = 0");
  }
}

BaseMatrices BaseMatrices::make(double tau) {
  require_positive_tau(tau);
  BaseMatrices b;
  b.tau = tau;
  b.A << 1.0, tau, 0.0, 1.0;
  b.B << tau, 1.0;
  b.beta << tau * tau / 2.0, tau;
  b.C << 1.0, 0.0;
  return b;
}

Eigen::Matrix2d cs_process_covariance(double tau, const ClockSpec& spec) {
  require_positive_tau(tau);
  spec.validate();
  if (spec.kind != ClockKind::Cs) {
    throw std::invalid_argument("cs_process_covariance called with an Hm spec");
  }
  const double s1 = spec.sigma1 * spec.sigma1;
  const double s2 = spec.sigma2 * spec.sigma2;
  Eigen::Matrix2d q;
  q(0, 0) = tau * s1 + tau * tau * tau / 3.0 * s2;
  q(0, 1) = tau * tau / 2.0 * s2;
  q(1, 0) = q(0, 1);
  q(1, 1) = tau * s2;
  return q;
}

Eigen::Matrix3d hm_process_covariance(double tau, const ClockSpec& spec) {
  require_positive_tau(tau);
  spec.validate();
  if (spec.kind != ClockKind::Hm) {
    throw std::invalid_argument("hm_process_covariance called with a Cs spec");
  }
  const double s1 = spec.sigma1 * spec.sigma1;
  const double s2 = spec.sigma2 * spec.sigma2;
  const double s3 = spec.sigma3 * spec.sigma3;
  const double t2 = tau * tau;
  const double t3 = t2 * tau;
  const double t4 = t3 * tau;
  const double t5 = t4 * tau;
  Eigen::Matrix3d q;
  // Shared-entry expressions keep the exact ordering of the 2x2 case so
  // sigma3 = 0 reproduces it bit for bit.
  q(0, 0) = tau * s1 + tau * tau * tau / 3.0 * s2 + t5 / 20.0 * s3;
  q(0, 1) = tau * tau / 2.0 * s2 + t4 / 8.0 * s3;
  q(0, 2) = t3 / 6.0 * s3;
  q(1, 1) = tau * s2 + t3 / 3.0 * s3;
  q(1, 2) = t2 / 2.0 * s3;
  q(2, 2) = tau * s3;
  q(1, 0) = q(0, 1);
  q(2, 0) = q(0, 2);
  q(2, 1) = q(1, 2);
  return q;
}

Eigen::MatrixXd process_covariance(double tau, const ClockSpec& spec) {
  if (spec.kind == ClockKind::Cs) return cs_process_covariance(tau, spec);
  return hm_process_covariance(tau, spec);
}

ClockState step_clock(const ClockState& state, ClockKind kind, double u,
                      const Eigen::VectorXd& noise, const BaseMatrices& base) {
  const int dim = kind == ClockKind::Cs ? 2 : 3;
  if (noise.size() != dim) {
    throw std::invalid_argument("noise dimension does not match clock kind");
  }
  ClockState next;
  if (kind == ClockKind::Cs) {
    next.phase = state.phase + base.tau * state.freq + base.B(0) * u + noise(0);
    next.freq = state.freq + base.B(1) * u + noise(1);
    next.drift = 0.0;
  } else {
    next.phase = state.phase + base.tau * state.freq + base.beta(0) * state.drift +
                 base.B(0) * u + noise(0);
    next.freq = state.freq + base.beta(1) * state.drift + base.B(1) * u + noise(1);
    next.drift = state.drift + noise(2);
  }
  return next;
}

double free_running_hvar(double tau, const ClockSpec& spec) {
  require_positive_tau(tau);
  spec.validate();
  return spec.sigma1 * spec.sigma1 / tau +
         tau / 6.0 * spec.sigma2 * spec.sigma2 +
         11.0 * tau * tau * tau / 120.0 * spec.sigma3 * spec.sigma3;
}

Eigen::MatrixXd noise_factor(const Eigen::MatrixXd& cov) {
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() == Eigen::Success) {
    return llt.matrixL();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  if (es.info() != Eigen::Success) {
    throw std::runtime_error("noise_factor: eigendecomposition failed");
  }
  Eigen::VectorXd d = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * d.asDiagonal();
}

}  // namespace tsgen
