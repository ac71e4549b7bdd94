#pragma once

#include <vector>

#include "tsgen/decomposition.hpp"
#include "tsgen/ensemble.hpp"

namespace tsgen::test {

// The 10-clock mixed ensemble used across the suite: 7 Cs + 3 Hm with
// the standard noise table, tau = 1 s, r = 1e-27 s^2, star differences.
inline EnsembleSpec mixed10() {
  const double s1[] = {0.17, 0.088, 0.122, 0.127, 0.218,
                       0.106, 0.18,  0.0216, 0.0093, 0.01801};
  const double s2[] = {0.15, 0.053, 0.016, 0.077, 0.294,
                       0.049, 0.04, 0.0829, 0.0520, 0.0566};
  const double s3[] = {0, 0, 0, 0, 0, 0, 0, 1.0, 1.0, 1.7};
  EnsembleSpec spec;
  for (int i = 0; i < 10; ++i) {
    ClockSpec c;
    c.kind = i < 7 ? ClockKind::Cs : ClockKind::Hm;
    c.sigma1 = s1[i] * 1e-9;
    c.sigma2 = s2[i] * 1e-12;
    c.sigma3 = s3[i] * 1e-19;
    spec.clocks.push_back(c);
  }
  spec.tau = 1.0;
  spec.r = 1e-27;
  spec.V = default_difference_matrix(10);
  return spec;
}

// A small, deliberately noisy ensemble whose filters converge within a
// few hundred steps; used for run-to-convergence oracles with tight
// tolerances.
inline EnsembleSpec small3() {
  EnsembleSpec spec;
  ClockSpec a{ClockKind::Cs, 0.5, 0.1, 0.0};
  ClockSpec b{ClockKind::Cs, 0.7, 0.2, 0.0};
  ClockSpec c{ClockKind::Hm, 0.3, 0.15, 0.4};
  spec.clocks = {a, b, c};
  spec.tau = 1.0;
  spec.r = 1e-2;
  spec.V = default_difference_matrix(3);
  return spec;
}

inline WeightVector uniform_weights(int n) {
  WeightVector w;
  w.q = Eigen::VectorXd::Constant(n, 1.0 / n);
  return w;
}

inline double rel_err(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a - b).norm() / std::max(a.norm(), b.norm());
}

}  // namespace tsgen::test
