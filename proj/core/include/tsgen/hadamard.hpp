#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "tsgen/decomposition.hpp"

namespace tsgen {

// Empirical Hadamard variance of a phase series {p[0..T]} at step m:
// mean of squared third differences over k = 0..T-3m-1, divided by
// 6 (m tau)^2. Requires T >= 3m + 1.
double hvar_estimate(std::span<const double> phase, double tau, int m);

// Free-running dynamics of the weighted ensemble mean: a 2-state
// integrator driven by the q-weighted x process noise.
struct WeightedMean {
  WeightVector q;
  Eigen::VectorXd sigma1_sq, sigma2_sq, sigma3_sq;  // diagonals, length N
  double tau = 1.0;

  void validate() const;
};

// diag(Pi(tau)) = tau*S1 + tau^3/6*S2 + 13 tau^5/360 * S3.
Eigen::VectorXd pi_diagonal(double tau, const Eigen::VectorXd& sigma1_sq,
                            const Eigen::VectorXd& sigma2_sq,
                            const Eigen::VectorXd& sigma3_sq);

// Closed-form HVAR of the weighted mean: q^T Pi(tau) q / tau^2.
double hvar_weighted_mean(const WeightedMean& model);

// Same quantity at a coarser interval (m tau); the model's noise
// aggregation is sampling-interval consistent, so this is the expected
// value of hvar_estimate at step m.
double hvar_weighted_mean_at(const WeightedMean& model, double interval);

// Simulates the weighted-mean phase h[0..steps] with the same per-clock
// noise streams the ensemble simulators use.
std::vector<double> simulate_weighted_mean(const WeightedMean& model,
                                           int steps, std::uint64_t seed);

// Weight vector minimizing q^T Pi(tau) q subject to q^T 1 = 1.
WeightVector optimal_weight(double tau, const Eigen::VectorXd& sigma1_sq,
                            const Eigen::VectorXd& sigma2_sq,
                            const Eigen::VectorXd& sigma3_sq);

// tau -> 0 limit: inverse white-FM-variance weights.
WeightVector short_term_weight(const Eigen::VectorXd& sigma1_sq);

// tau -> inf limit: inverse RWFM-variance weights over the Cs clocks,
// exact zeros on the M Hm clocks.
WeightVector long_term_weight(const Eigen::VectorXd& sigma2_sq, int n_clocks,
                              int n_hm);

struct HvarPoint {
  int m = 1;
  double interval = 0.0;  // m * tau, seconds
  double value = 0.0;
};

struct HvarCurve {
  std::string series;
  std::string source;  // "empirical" or "theoretical"
  std::vector<HvarPoint> points;
};

// Octave-spaced m grid 1, 2, 4, ... capped at horizon/4.
std::vector<int> octave_m_grid(int horizon);

HvarCurve hvar_curve(std::span<const double> phase, double tau,
                     const std::vector<int>& m_grid, std::string series);

}  // namespace tsgen
