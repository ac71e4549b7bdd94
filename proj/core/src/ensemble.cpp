#include "tsgen/ensemble.hpp"

#include <stdexcept>
#include <string>

#include <Eigen/SVD>

#include "tsgen/rng.hpp"

namespace tsgen {

int EnsembleSpec::hm_count() const {
  int m = 0;
  for (const auto& c : clocks) {
    if (c.kind == ClockKind::Hm) ++m;
  }
  return m;
}

void EnsembleSpec::validate() const {
  validate_model();
  if (!(r > 0.0)) throw std::invalid_argument("measurement noise r must be positive");
}

void EnsembleSpec::validate_model() const {
  const int n = size();
  if (n < 2) throw std::invalid_argument("ensemble needs at least 2 clocks");
  const int m = hm_count();
  if (m < 1) throw std::invalid_argument("ensemble needs at least 1 Hm clock");
  if (n - m < 1) throw std::invalid_argument("ensemble needs at least 1 Cs clock");
  bool seen_hm = false;
  for (int i = 0; i < n; ++i) {
    clocks[static_cast<std::size_t>(i)].validate();
    const bool is_hm = clocks[static_cast<std::size_t>(i)].kind == ClockKind::Hm;
    if (seen_hm && !is_hm) {
      throw std::invalid_argument(
          "clock ordering violated: all Cs clocks must precede the Hm clocks");
    }
    seen_hm = seen_hm || is_hm;
  }
  if (!(tau > 0.0)) throw std::invalid_argument("tau must be positive");
  if (V.rows() != n - 1 || V.cols() != n) {
    throw std::invalid_argument("V must be (N-1) x N");
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(V);
  const double smax = svd.singularValues()(0);
  const double tol = 1e-10 * smax;
  if (svd.singularValues().minCoeff() <= tol) {
    throw std::invalid_argument("V must have rank N-1");
  }
  if ((V * Eigen::VectorXd::Ones(n)).cwiseAbs().maxCoeff() > tol) {
    throw std::invalid_argument("V must annihilate the all-ones vector");
  }
}

Eigen::VectorXd EnsembleSpec::sigma1_sq() const {
  Eigen::VectorXd v(size());
  for (int i = 0; i < size(); ++i) {
    const double s = clocks[static_cast<std::size_t>(i)].sigma1;
    v(i) = s * s;
  }
  return v;
}

Eigen::VectorXd EnsembleSpec::sigma2_sq() const {
  Eigen::VectorXd v(size());
  for (int i = 0; i < size(); ++i) {
    const double s = clocks[static_cast<std::size_t>(i)].sigma2;
    v(i) = s * s;
  }
  return v;
}

Eigen::VectorXd EnsembleSpec::sigma3_sq() const {
  Eigen::VectorXd v(size());
  for (int i = 0; i < size(); ++i) {
    const double s = clocks[static_cast<std::size_t>(i)].sigma3;
    v(i) = s * s;
  }
  return v;
}

Eigen::MatrixXd default_difference_matrix(int n) {
  if (n < 2) throw std::invalid_argument("difference matrix needs N >= 2");
  Eigen::MatrixXd v = Eigen::MatrixXd::Zero(n - 1, n);
  v.leftCols(n - 1).setIdentity();
  v.col(n - 1).setConstant(-1.0);
  return v;
}

Eigen::MatrixXd assemble_process_covariance(const std::vector<ClockSpec>& clocks,
                                            double tau) {
  const int n = static_cast<int>(clocks.size());
  int m = 0;
  for (const auto& c : clocks) {
    if (c.kind == ClockKind::Hm) ++m;
  }
  const int dim = 2 * n + m;
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(dim, dim);
  int zi = 0;
  for (int i = 0; i < n; ++i) {
    const auto& c = clocks[static_cast<std::size_t>(i)];
    const Eigen::MatrixXd qi = process_covariance(tau, c);
    // Scatter the per-clock block into [p_i, f_i, (z_i)] coordinates.
    q(i, i) = qi(0, 0);
    q(i, n + i) = qi(0, 1);
    q(n + i, i) = qi(1, 0);
    q(n + i, n + i) = qi(1, 1);
    if (c.kind == ClockKind::Hm) {
      const int zrow = 2 * n + zi;
      q(i, zrow) = qi(0, 2);
      q(zrow, i) = qi(2, 0);
      q(n + i, zrow) = qi(1, 2);
      q(zrow, n + i) = qi(2, 1);
      q(zrow, zrow) = qi(2, 2);
      ++zi;
    }
  }
  return q;
}

SystemMatrices assemble_system(const EnsembleSpec& spec) {
  spec.validate_model();
  const int n = spec.size();
  const int m = spec.hm_count();
  const int dim = 2 * n + m;

  SystemMatrices sys;
  sys.n_clocks = n;
  sys.n_hm = m;

  sys.J = Eigen::MatrixXd::Zero(n, m);
  sys.J.bottomRows(m).setIdentity();

  const double tau = spec.tau;
  sys.Acal = Eigen::MatrixXd::Zero(dim, dim);
  sys.Acal.topLeftCorner(n, n).setIdentity();
  sys.Acal.block(0, n, n, n) = tau * Eigen::MatrixXd::Identity(n, n);
  sys.Acal.block(n, n, n, n).setIdentity();
  sys.Acal.block(0, 2 * n, n, m) = tau * tau / 2.0 * sys.J;
  sys.Acal.block(n, 2 * n, n, m) = tau * sys.J;
  sys.Acal.bottomRightCorner(m, m).setIdentity();

  sys.Bcal = Eigen::MatrixXd::Zero(dim, n);
  sys.Bcal.topRows(n) = tau * Eigen::MatrixXd::Identity(n, n);
  sys.Bcal.middleRows(n, n).setIdentity();

  sys.Ccal = Eigen::MatrixXd::Zero(n - 1, dim);
  sys.Ccal.leftCols(n) = spec.V;

  sys.Sigma1 = spec.sigma1_sq().asDiagonal();
  sys.Sigma2 = spec.sigma2_sq().asDiagonal();
  sys.Sigma3 = spec.sigma3_sq().asDiagonal();
  sys.Sigma4 = Eigen::MatrixXd::Zero(n, m);
  sys.Sigma4.bottomRows(m) =
      spec.sigma3_sq().tail(m).asDiagonal().toDenseMatrix();
  sys.Sigma5 = spec.sigma3_sq().tail(m).asDiagonal();

  sys.Q = assemble_process_covariance(spec.clocks, tau);
  return sys;
}

EnsembleNoise::EnsembleNoise(const EnsembleSpec& spec, std::uint64_t seed)
    : spec_(&spec), meas_stream_(seed, "measurement") {
  for (int i = 0; i < spec.size(); ++i) {
    const auto& c = spec.clocks[static_cast<std::size_t>(i)];
    factors_.push_back(noise_factor(process_covariance(spec.tau, c)));
    clock_streams_.emplace_back(seed, "process/clock/" + std::to_string(i + 1));
  }
}

void EnsembleNoise::process(Eigen::VectorXd& vx, Eigen::VectorXd& vz) {
  const int n = spec_->size();
  const int ncs = spec_->cs_count();
  vx.setZero(2 * n);
  vz.setZero(spec_->hm_count());
  for (int i = 0; i < n; ++i) {
    const int dim = spec_->clocks[static_cast<std::size_t>(i)].state_dim();
    const Eigen::VectorXd v = factors_[static_cast<std::size_t>(i)] *
                              clock_streams_[static_cast<std::size_t>(i)].vector(dim);
    vx(i) = v(0);
    vx(n + i) = v(1);
    if (dim == 3) vz(i - ncs) = v(2);
  }
}

Eigen::VectorXd EnsembleNoise::measurement() {
  return std::sqrt(spec_->r) * meas_stream_.vector(spec_->size() - 1);
}

SimulationTrace simulate_ensemble(const SystemMatrices& sys,
                                  const EnsembleSpec& spec,
                                  const ControlPolicy& policy, int horizon,
                                  std::uint64_t seed, bool record_noise,
                                  const std::optional<Eigen::VectorXd>& initial_state) {
  if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
  const int n = spec.size();
  const int m = spec.hm_count();

  SimulationTrace tr;
  tr.seed = seed;
  tr.x = Eigen::MatrixXd::Zero(horizon + 1, 2 * n);
  tr.z = Eigen::MatrixXd::Zero(horizon + 1, m);
  tr.y = Eigen::MatrixXd::Zero(horizon + 1, n - 1);
  tr.u = Eigen::MatrixXd::Zero(horizon, n);
  if (record_noise) {
    tr.vx = Eigen::MatrixXd::Zero(horizon, 2 * n);
    tr.vz = Eigen::MatrixXd::Zero(horizon, m);
    tr.w = Eigen::MatrixXd::Zero(horizon + 1, n - 1);
  }

  EnsembleNoise noise(spec, seed);
  Eigen::VectorXd state = Eigen::VectorXd::Zero(sys.state_dim());
  if (initial_state) {
    if (initial_state->size() != sys.state_dim()) {
      throw std::invalid_argument("initial state has wrong dimension");
    }
    state = *initial_state;
    tr.x.row(0) = state.head(2 * n).transpose();
    tr.z.row(0) = state.tail(m).transpose();
  }

  Eigen::VectorXd w0 = noise.measurement();
  tr.y.row(0) = (sys.Ccal * state + w0).transpose();
  if (record_noise) tr.w->row(0) = w0.transpose();

  Eigen::VectorXd vx, vz;
  for (int k = 0; k < horizon; ++k) {
    Eigen::VectorXd u = policy(k, tr.y.row(k).transpose(), tr);
    if (u.size() != n) {
      throw std::invalid_argument("policy returned input of wrong dimension");
    }
    tr.u.row(k) = u.transpose();

    noise.process(vx, vz);
    if (record_noise) {
      tr.vx->row(k) = vx.transpose();
      tr.vz->row(k) = vz.transpose();
    }
    Eigen::VectorXd v(sys.state_dim());
    v << vx, vz;
    state = sys.Acal * state + sys.Bcal * u + v;

    Eigen::VectorXd wk = noise.measurement();
    tr.y.row(k + 1) = (sys.Ccal * state + wk).transpose();
    if (record_noise) tr.w->row(k + 1) = wk.transpose();

    tr.x.row(k + 1) = state.head(2 * n).transpose();
    tr.z.row(k + 1) = state.tail(m).transpose();
  }
  return tr;
}

int observability_rank(const SystemMatrices& sys) {
  const int dim = sys.state_dim();
  const int rows = static_cast<int>(sys.Ccal.rows());
  Eigen::MatrixXd obs(rows * dim, dim);
  Eigen::MatrixXd block = sys.Ccal;
  for (int i = 0; i < dim; ++i) {
    obs.middleRows(i * rows, rows) = block;
    block = block * sys.Acal;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(obs);
  const double tol = 1e-10 * svd.singularValues()(0);
  return static_cast<int>(
      (svd.singularValues().array() > tol).count());
}

}  // namespace tsgen
