#include <doctest.h>

#include "tsgen/clock_model.hpp"

#include <Eigen/Eigenvalues>
#include "tsgen/hadamard.hpp"
#include "tsgen/rng.hpp"

#include "helpers.hpp"

using namespace tsgen;

namespace {

ClockSpec cs1() { return {ClockKind::Cs, 0.17e-9, 0.15e-12, 0.0}; }
ClockSpec hm8() { return {ClockKind::Hm, 0.0216e-9, 0.0829e-12, 1e-19}; }

}  // namespace

TEST_CASE("cs process covariance, hand-evaluated entries") {
  const Eigen::Matrix2d q = cs_process_covariance(1.0, cs1());
  const double s1 = 0.17e-9 * 0.17e-9;
  const double s2 = 0.15e-12 * 0.15e-12;
  CHECK(q(0, 0) == doctest::Approx(s1 + s2 / 3.0).epsilon(1e-15));
  CHECK(q(0, 0) == doctest::Approx(2.8900e-20).epsilon(1e-4));
  CHECK(q(0, 1) == doctest::Approx(1.125e-26).epsilon(1e-12));
  CHECK(q(1, 0) == q(0, 1));
  CHECK(q(1, 1) == doctest::Approx(2.25e-26).epsilon(1e-12));
}

TEST_CASE("cs process covariance, no noise") {
  const Eigen::Matrix2d q =
      cs_process_covariance(1.0, {ClockKind::Cs, 0.0, 0.0, 0.0});
  CHECK(q.isZero(0.0));
}

TEST_CASE("hm process covariance, drift column") {
  const Eigen::Matrix3d q = hm_process_covariance(1.0, hm8());
  CHECK(q(2, 2) == doctest::Approx(1e-38).epsilon(1e-14));
  CHECK(q(1, 2) == doctest::Approx(0.5e-38).epsilon(1e-14));
  CHECK(q(0, 2) == doctest::Approx(1e-38 / 6.0).epsilon(1e-14));
  CHECK(q.isApprox(q.transpose()));
}

TEST_CASE("hm covariance with zero drift noise embeds the cs covariance") {
  ClockSpec spec{ClockKind::Hm, 3.1e-10, 2.7e-13, 0.0};
  ClockSpec cs_spec{ClockKind::Cs, spec.sigma1, spec.sigma2, 0.0};
  for (double tau : {0.1, 1.0, 10.0, 100.0}) {
    const Eigen::Matrix3d qh = hm_process_covariance(tau, spec);
    const Eigen::Matrix2d qc = cs_process_covariance(tau, cs_spec);
    // Bit-level equality: same expression ordering plus additive zeros.
    CHECK(qh(0, 0) == qc(0, 0));
    CHECK(qh(0, 1) == qc(0, 1));
    CHECK(qh(1, 1) == qc(1, 1));
    CHECK(qh(0, 2) == 0.0);
    CHECK(qh(2, 2) == 0.0);
  }
}

TEST_CASE("process covariances stay symmetric PSD over tau and spec draws") {
  GaussianStream g(99, "spec-draws");
  for (double tau : {0.1, 1.0, 10.0, 100.0}) {
    for (int trial = 0; trial < 25; ++trial) {
      ClockSpec spec;
      spec.kind = trial % 2 ? ClockKind::Hm : ClockKind::Cs;
      spec.sigma1 = std::abs(g.next()) * 1e-9;
      spec.sigma2 = std::abs(g.next()) * 1e-12;
      spec.sigma3 = spec.kind == ClockKind::Hm ? std::abs(g.next()) * 1e-19 : 0.0;
      const Eigen::MatrixXd q = process_covariance(tau, spec);
      CHECK((q - q.transpose()).norm() == 0.0);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(q);
      CHECK(es.eigenvalues().minCoeff() >=
            -1e-12 * std::max(es.eigenvalues().maxCoeff(), 0.0));
    }
  }
}

TEST_CASE("step_clock propagation") {
  const BaseMatrices base = BaseMatrices::make(1.0);

  SUBCASE("origin is a fixed point of the free Cs dynamics") {
    const ClockState s = step_clock({0, 0, 0}, ClockKind::Cs, 0.0,
                                    Eigen::VectorXd::Zero(2), base);
    CHECK(s.phase == 0.0);
    CHECK(s.freq == 0.0);
  }
  SUBCASE("drift feeds phase and frequency through beta") {
    const double d = 3e-15;
    const ClockState s = step_clock({0, 0, d}, ClockKind::Hm, 0.0,
                                    Eigen::VectorXd::Zero(3), base);
    CHECK(s.phase == doctest::Approx(d / 2).epsilon(1e-15));
    CHECK(s.freq == doctest::Approx(d).epsilon(1e-15));
    CHECK(s.drift == d);
  }
  SUBCASE("unit input maps through B") {
    const ClockState s = step_clock({0, 0, 0}, ClockKind::Cs, 1.0,
                                    Eigen::VectorXd::Zero(2), base);
    CHECK(s.phase == 1.0);
    CHECK(s.freq == 1.0);
  }
  SUBCASE("noise dimension must match the kind") {
    CHECK_THROWS_AS(step_clock({0, 0, 0}, ClockKind::Cs, 0.0,
                               Eigen::VectorXd::Zero(3), base),
                    std::invalid_argument);
    CHECK_THROWS_AS(step_clock({0, 0, 0}, ClockKind::Hm, 0.0,
                               Eigen::VectorXd::Zero(2), base),
                    std::invalid_argument);
  }
}

TEST_CASE("free-running hvar closed form") {
  CHECK(free_running_hvar(1.0, cs1()) ==
        doctest::Approx(0.17e-9 * 0.17e-9 + 0.15e-12 * 0.15e-12 / 6.0)
            .epsilon(1e-15));
  CHECK(free_running_hvar(1.0, cs1()) == doctest::Approx(2.8900e-20).epsilon(1e-4));
  CHECK(free_running_hvar(1.0, {ClockKind::Cs, 0, 0, 0}) == 0.0);
  CHECK(free_running_hvar(1.0, hm8()) == doctest::Approx(4.666e-22).epsilon(1e-3));
}

TEST_CASE("domain errors") {
  CHECK_THROWS_AS(cs_process_covariance(0.0, cs1()), std::invalid_argument);
  CHECK_THROWS_AS(cs_process_covariance(-1.0, cs1()), std::invalid_argument);
  CHECK_THROWS_AS(cs_process_covariance(1.0, hm8()), std::invalid_argument);
  CHECK_THROWS_AS(hm_process_covariance(1.0, cs1()), std::invalid_argument);
  CHECK_THROWS_AS(free_running_hvar(0.0, cs1()), std::invalid_argument);
  ClockSpec bad = cs1();
  bad.sigma3 = 1e-19;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cs1();
  bad.sigma1 = -1.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

namespace {

// Free-running single-clock phase series from the one-step covariance.
std::vector<double> simulate_free_clock(const ClockSpec& spec, double tau,
                                        int steps, std::uint64_t seed) {
  const BaseMatrices base = BaseMatrices::make(tau);
  const Eigen::MatrixXd factor = noise_factor(process_covariance(tau, spec));
  GaussianStream g(seed, "free-clock");
  std::vector<double> phase(static_cast<std::size_t>(steps) + 1, 0.0);
  ClockState s;
  for (int k = 0; k < steps; ++k) {
    s = step_clock(s, spec.kind, 0.0, factor * g.vector(spec.state_dim()), base);
    phase[static_cast<std::size_t>(k) + 1] = s.phase;
  }
  return phase;
}

}  // namespace

TEST_CASE("monte carlo hvar consistency with the closed form") {
  const int steps = 200000;
  SUBCASE("cs clock") {
    const auto phase = simulate_free_clock(cs1(), 1.0, steps, 7771);
    const double est = hvar_estimate(phase, 1.0, 1);
    CHECK(est == doctest::Approx(free_running_hvar(1.0, cs1())).epsilon(0.2));
  }
  SUBCASE("hm clock") {
    const auto phase = simulate_free_clock(hm8(), 1.0, steps, 7772);
    const double est = hvar_estimate(phase, 1.0, 1);
    CHECK(est == doctest::Approx(free_running_hvar(1.0, hm8())).epsilon(0.2));
  }
}
