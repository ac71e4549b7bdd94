#include "tsgen/hadamard.hpp"

#include <cmath>
#include <stdexcept>

#include "tsgen/clock_model.hpp"
#include "tsgen/rng.hpp"

namespace tsgen {

double hvar_estimate(std::span<const double> phase, double tau, int m) {
  if (m < 1) throw std::invalid_argument("hvar step m must be >= 1");
  if (!(tau > 0.0)) throw std::invalid_argument("tau must be positive");
  const long long t = static_cast<long long>(phase.size()) - 1;
  if (t < 3LL * m + 1) {
    throw std::invalid_argument("phase series too short for m = " +
                                std::to_string(m));
  }
  const long long count = t - 3LL * m;
  double acc = 0.0;
  for (long long k = 0; k < count; ++k) {
    const double d3 = phase[static_cast<std::size_t>(k + 3LL * m)] -
                      3.0 * phase[static_cast<std::size_t>(k + 2LL * m)] +
                      3.0 * phase[static_cast<std::size_t>(k + m)] -
                      phase[static_cast<std::size_t>(k)];
    acc += d3 * d3;
  }
  const double mt = static_cast<double>(m) * tau;
  return acc / static_cast<double>(count) / (6.0 * mt * mt);
}

void WeightedMean::validate() const {
  q.validate();
  const Eigen::Index n = q.q.size();
  if (sigma1_sq.size() != n || sigma2_sq.size() != n || sigma3_sq.size() != n) {
    throw std::invalid_argument("weighted-mean sigma diagonals must have length N");
  }
  if (!(tau > 0.0)) throw std::invalid_argument("tau must be positive");
  if (sigma1_sq.minCoeff() < 0.0 || sigma2_sq.minCoeff() < 0.0 ||
      sigma3_sq.minCoeff() < 0.0) {
    throw std::invalid_argument("sigma diagonals must be non-negative");
  }
}

Eigen::VectorXd pi_diagonal(double tau, const Eigen::VectorXd& sigma1_sq,
                            const Eigen::VectorXd& sigma2_sq,
                            const Eigen::VectorXd& sigma3_sq) {
  const double t3 = tau * tau * tau;
  const double t5 = t3 * tau * tau;
  return tau * sigma1_sq + t3 / 6.0 * sigma2_sq + 13.0 * t5 / 360.0 * sigma3_sq;
}

double hvar_weighted_mean(const WeightedMean& model) {
  return hvar_weighted_mean_at(model, model.tau);
}

double hvar_weighted_mean_at(const WeightedMean& model, double interval) {
  model.validate();
  if (!(interval > 0.0)) throw std::invalid_argument("interval must be positive");
  const Eigen::VectorXd pi =
      pi_diagonal(interval, model.sigma1_sq, model.sigma2_sq, model.sigma3_sq);
  return model.q.q.dot(pi.cwiseProduct(model.q.q)) / (interval * interval);
}

std::vector<double> simulate_weighted_mean(const WeightedMean& model,
                                           int steps, std::uint64_t seed) {
  model.validate();
  if (steps < 1) throw std::invalid_argument("steps must be >= 1");
  const int n = static_cast<int>(model.q.q.size());
  const double tau = model.tau;

  // Per-clock [v_p; v_f] factors from the x block of the one-step
  // covariance (drift noise feeds the x block even though no drift state
  // is propagated here).
  std::vector<Eigen::Matrix2d> factors;
  std::vector<GaussianStream> streams;
  factors.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double s1 = model.sigma1_sq(i);
    const double s2 = model.sigma2_sq(i);
    const double s3 = model.sigma3_sq(i);
    const double t2 = tau * tau;
    const double t3 = t2 * tau;
    const double t4 = t3 * tau;
    const double t5 = t4 * tau;
    Eigen::Matrix2d cov;
    cov(0, 0) = tau * s1 + t3 / 3.0 * s2 + t5 / 20.0 * s3;
    cov(0, 1) = t2 / 2.0 * s2 + t4 / 8.0 * s3;
    cov(1, 0) = cov(0, 1);
    cov(1, 1) = tau * s2 + t3 / 3.0 * s3;
    factors.push_back(Eigen::Matrix2d(noise_factor(cov)));
    streams.emplace_back(seed, "process/clock/" + std::to_string(i + 1));
  }

  std::vector<double> h(static_cast<std::size_t>(steps) + 1, 0.0);
  double g_p = 0.0, g_f = 0.0;
  for (int k = 0; k < steps; ++k) {
    double np = 0.0, nf = 0.0;
    for (int i = 0; i < n; ++i) {
      const Eigen::Vector2d v =
          factors[static_cast<std::size_t>(i)] *
          Eigen::Vector2d(streams[static_cast<std::size_t>(i)].next(),
                          streams[static_cast<std::size_t>(i)].next());
      np += model.q.q(i) * v(0);
      nf += model.q.q(i) * v(1);
    }
    g_p += tau * g_f + np;
    g_f += nf;
    h[static_cast<std::size_t>(k) + 1] = g_p;
  }
  return h;
}

namespace {

WeightVector normalized_inverse(const Eigen::VectorXd& diag,
                                const char* what) {
  if (diag.minCoeff() <= 0.0) {
    throw std::invalid_argument(std::string(what) +
                                " has a zero diagonal entry; weights singular");
  }
  WeightVector w;
  w.q = diag.cwiseInverse();
  w.q /= w.q.sum();
  return w;
}

}  // namespace

WeightVector optimal_weight(double tau, const Eigen::VectorXd& sigma1_sq,
                            const Eigen::VectorXd& sigma2_sq,
                            const Eigen::VectorXd& sigma3_sq) {
  if (!(tau > 0.0)) throw std::invalid_argument("tau must be positive");
  const Eigen::VectorXd pi = pi_diagonal(tau, sigma1_sq, sigma2_sq, sigma3_sq);
  return normalized_inverse(pi, "Pi(tau)");
}

WeightVector short_term_weight(const Eigen::VectorXd& sigma1_sq) {
  return normalized_inverse(sigma1_sq, "Sigma1");
}

WeightVector long_term_weight(const Eigen::VectorXd& sigma2_sq, int n_clocks,
                              int n_hm) {
  if (sigma2_sq.size() != n_clocks) {
    throw std::invalid_argument("sigma2 diagonal must have length N");
  }
  if (n_hm < 0 || n_hm >= n_clocks) {
    throw std::invalid_argument("need 0 <= M < N");
  }
  const int ncs = n_clocks - n_hm;
  const WeightVector cs = normalized_inverse(sigma2_sq.head(ncs), "Cs Sigma2");
  WeightVector w;
  w.q = Eigen::VectorXd::Zero(n_clocks);
  w.q.head(ncs) = cs.q;
  return w;
}

std::vector<int> octave_m_grid(int horizon) {
  std::vector<int> grid;
  for (int m = 1; m <= horizon / 4; m *= 2) grid.push_back(m);
  return grid;
}

HvarCurve hvar_curve(std::span<const double> phase, double tau,
                     const std::vector<int>& m_grid, std::string series) {
  HvarCurve c;
  c.series = std::move(series);
  c.source = "empirical";
  for (int m : m_grid) {
    c.points.push_back(
        {m, m * tau, hvar_estimate(phase, tau, m)});
  }
  return c;
}

}  // namespace tsgen
