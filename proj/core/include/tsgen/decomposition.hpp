#pragma once

#include <Eigen/Core>

#include "tsgen/ensemble.hpp"

namespace tsgen {

// Weights over the N clocks defining the ensemble mean q^T p. Only the
// affine constraint q^T 1 = 1 is enforced; negative entries are legal.
struct WeightVector {
  Eigen::VectorXd q;

  void validate() const;  // |q^T 1 - 1| <= 1e-12, finite entries
};

// Full-column-rank basis W of the hyperplane q^T W = 0, built as
// (I - 1 q^T) S with S the first N-1 standard basis columns.
Eigen::MatrixXd complement_basis(const WeightVector& q);

// Weighted right inverse of the difference matrix: V+ = W (V W)^-1,
// which satisfies V V+ = I and q^T V+ = 0. Throws when V W is too ill
// conditioned (cond > 1e12), reporting the condition number.
Eigen::MatrixXd weighted_right_inverse(const Eigen::MatrixXd& V,
                                       const WeightVector& q);

// Coordinate change separating the measurable inter-clock differences
// (observable block, dim 2(N-1)+M) from the weighted ensemble mean
// (2 unobservable coordinates), plus the transformed system blocks.
//
// transform stacks [obs_proj; mean_proj]; inverse_transform is built in
// closed form from V+ and 1_N, no numerical inversion involved.
struct ObservableDecomposition {
  WeightVector q;
  Eigen::MatrixXd basis_W;            // N x (N-1)
  Eigen::MatrixXd v_right_inv;        // N x (N-1)
  Eigen::MatrixXd transform;          // (2N+M) x (2N+M)
  Eigen::MatrixXd inverse_transform;  // (2N+M) x (2N+M)

  Eigen::MatrixXd obs_dyn;        // (2(N-1)+M)^2   observable dynamics
  Eigen::MatrixXd mean_coupling;  // 2 x (2(N-1)+M) drift feed into the mean
  Eigen::MatrixXd obs_input;      // (2(N-1)+M) x N
  Eigen::MatrixXd mean_input;     // 2 x N
  Eigen::MatrixXd obs_output;     // (N-1) x (2(N-1)+M)
  Eigen::MatrixXd obs_proj;       // (2(N-1)+M) x (2N+M) rows of transform
  Eigen::MatrixXd mean_proj;      // 2 x (2N+M) rows of transform
  Eigen::MatrixXd drift_diff;     // V J, (N-1) x M
  Eigen::RowVectorXd drift_weight;  // q^T J, 1 x M

  Eigen::Matrix2d base_A;  // per-clock 2-state transition for the mean block
  Eigen::Vector2d base_B;
  Eigen::Vector2d base_beta;

  int n_clocks = 0;
  int n_hm = 0;
  double tau = 0.0;

  int obs_dim() const { return 2 * (n_clocks - 1) + n_hm; }
  int state_dim() const { return 2 * n_clocks + n_hm; }
  int diff_dim() const { return n_clocks - 1; }
};

ObservableDecomposition observable_decomposition(const EnsembleSpec& spec,
                                                 const WeightVector& q);

}  // namespace tsgen
