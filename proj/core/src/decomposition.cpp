#include "tsgen/decomposition.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/LU>
#include <Eigen/SVD>

namespace tsgen {

void WeightVector::validate() const {
  if (q.size() < 1 || !q.allFinite()) {
    throw std::invalid_argument("weight vector must be non-empty and finite");
  }
  if (std::abs(q.sum() - 1.0) > 1e-12) {
    throw std::invalid_argument("weight vector must satisfy q^T 1 = 1");
  }
}

Eigen::MatrixXd complement_basis(const WeightVector& q) {
  q.validate();
  const Eigen::Index n = q.q.size();
  // (I - 1 q^T) S: column i is e_i - q_i * 1.
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n - 1);
  for (Eigen::Index i = 0; i < n - 1; ++i) {
    w.col(i) = -q.q(i) * Eigen::VectorXd::Ones(n);
    w(i, i) += 1.0;
  }
  return w;
}

Eigen::MatrixXd weighted_right_inverse(const Eigen::MatrixXd& V,
                                       const WeightVector& q) {
  const Eigen::MatrixXd w = complement_basis(q);
  const Eigen::MatrixXd vw = V * w;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(vw);
  const double smin = svd.singularValues().minCoeff();
  const double smax = svd.singularValues().maxCoeff();
  if (!(smin > 0.0) || smax / smin > 1e12) {
    throw std::runtime_error(
        "weighted_right_inverse: V W is singular or ill conditioned (cond = " +
        std::to_string(smin > 0.0 ? smax / smin : INFINITY) + ")");
  }
  return w * vw.partialPivLu().solve(
                 Eigen::MatrixXd::Identity(vw.rows(), vw.cols()));
}

ObservableDecomposition observable_decomposition(const EnsembleSpec& spec,
                                                 const WeightVector& q) {
  spec.validate_model();
  q.validate();
  const int n = spec.size();
  if (q.q.size() != n) {
    throw std::invalid_argument("weight vector length must equal N");
  }
  const int m = spec.hm_count();
  const int d = n - 1;
  const int no = 2 * d + m;
  const int dim = 2 * n + m;
  const double tau = spec.tau;

  ObservableDecomposition dec;
  dec.q = q;
  dec.n_clocks = n;
  dec.n_hm = m;
  dec.tau = tau;
  dec.base_A << 1.0, tau, 0.0, 1.0;
  dec.base_B << tau, 1.0;
  dec.base_beta << tau * tau / 2.0, tau;

  dec.basis_W = complement_basis(q);
  dec.v_right_inv = weighted_right_inverse(spec.V, q);

  const Eigen::MatrixXd& V = spec.V;
  Eigen::MatrixXd jsel = Eigen::MatrixXd::Zero(n, m);
  jsel.bottomRows(m).setIdentity();
  const Eigen::MatrixXd vj = V * jsel;                      // d x m
  const Eigen::RowVectorXd qj = q.q.transpose() * jsel;     // 1 x m
  dec.drift_diff = vj;
  dec.drift_weight = qj;

  // Projections onto the observable coordinates [Vp; Vf; z] and the mean
  // coordinates [q^T p; q^T f].
  dec.obs_proj = Eigen::MatrixXd::Zero(no, dim);
  dec.obs_proj.block(0, 0, d, n) = V;
  dec.obs_proj.block(d, n, d, n) = V;
  dec.obs_proj.block(2 * d, 2 * n, m, m).setIdentity();

  dec.mean_proj = Eigen::MatrixXd::Zero(2, dim);
  dec.mean_proj.block(0, 0, 1, n) = q.q.transpose();
  dec.mean_proj.block(1, n, 1, n) = q.q.transpose();

  dec.transform = Eigen::MatrixXd::Zero(dim, dim);
  dec.transform.topRows(no) = dec.obs_proj;
  dec.transform.bottomRows(2) = dec.mean_proj;

  // Closed-form inverse: x = (I2 (x) V+) xi + (I2 (x) 1) eta_mean, z = nu.
  dec.inverse_transform = Eigen::MatrixXd::Zero(dim, dim);
  dec.inverse_transform.block(0, 0, n, d) = dec.v_right_inv;
  dec.inverse_transform.block(n, d, n, d) = dec.v_right_inv;
  dec.inverse_transform.block(2 * n, 2 * d, m, m).setIdentity();
  dec.inverse_transform.block(0, no, n, 1) = Eigen::VectorXd::Ones(n);
  dec.inverse_transform.block(n, no + 1, n, 1) = Eigen::VectorXd::Ones(n);

  // Transformed blocks.
  dec.obs_dyn = Eigen::MatrixXd::Zero(no, no);
  dec.obs_dyn.block(0, 0, d, d).setIdentity();
  dec.obs_dyn.block(0, d, d, d) = tau * Eigen::MatrixXd::Identity(d, d);
  dec.obs_dyn.block(d, d, d, d).setIdentity();
  dec.obs_dyn.block(0, 2 * d, d, m) = tau * tau / 2.0 * vj;
  dec.obs_dyn.block(d, 2 * d, d, m) = tau * vj;
  dec.obs_dyn.block(2 * d, 2 * d, m, m).setIdentity();

  dec.mean_coupling = Eigen::MatrixXd::Zero(2, no);
  dec.mean_coupling.block(0, 2 * d, 1, m) = tau * tau / 2.0 * qj;
  dec.mean_coupling.block(1, 2 * d, 1, m) = tau * qj;

  dec.obs_input = Eigen::MatrixXd::Zero(no, n);
  dec.obs_input.topRows(d) = tau * V;
  dec.obs_input.middleRows(d, d) = V;

  dec.mean_input = Eigen::MatrixXd::Zero(2, n);
  dec.mean_input.row(0) = tau * q.q.transpose();
  dec.mean_input.row(1) = q.q.transpose();

  dec.obs_output = Eigen::MatrixXd::Zero(d, no);
  dec.obs_output.leftCols(d).setIdentity();

  return dec;
}

}  // namespace tsgen
