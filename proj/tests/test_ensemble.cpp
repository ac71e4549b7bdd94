#include <doctest.h>

#include "tsgen/ensemble.hpp"

#include "helpers.hpp"

using namespace tsgen;
using tsgen::test::mixed10;
using tsgen::test::small3;

TEST_CASE("default difference matrix") {
  const Eigen::MatrixXd v3 = default_difference_matrix(3);
  Eigen::MatrixXd expect(2, 3);
  expect << 1, 0, -1, 0, 1, -1;
  CHECK(v3 == expect);

  Eigen::MatrixXd expect2(1, 2);
  expect2 << 1, -1;
  CHECK(default_difference_matrix(2) == expect2);

  for (int n : {2, 3, 5, 10, 17}) {
    CHECK((default_difference_matrix(n) * Eigen::VectorXd::Ones(n)).norm() ==
          0.0);
  }
  CHECK_THROWS_AS(default_difference_matrix(1), std::invalid_argument);
}

TEST_CASE("assemble_system block structure, N=2 M=1") {
  EnsembleSpec spec;
  spec.clocks = {{ClockKind::Cs, 1e-9, 1e-12, 0.0},
                 {ClockKind::Hm, 1e-9, 1e-12, 1e-19}};
  spec.tau = 1.0;
  spec.r = 1e-27;
  spec.V = default_difference_matrix(2);
  const SystemMatrices sys = assemble_system(spec);

  REQUIRE(sys.Acal.rows() == 5);
  // phase-frequency coupling and the drift feed through beta (x) J.
  CHECK(sys.Acal(0, 2) == 1.0);
  CHECK(sys.Acal(1, 4) == 0.5);
  CHECK(sys.Acal(0, 4) == 0.0);
  CHECK(sys.Acal(3, 4) == 1.0);
  CHECK(sys.Acal(4, 4) == 1.0);
  CHECK(sys.Bcal(0, 0) == 1.0);
  CHECK(sys.Bcal(2, 0) == 1.0);
  CHECK(sys.Bcal(4, 0) == 0.0);
  CHECK(sys.Ccal(0, 0) == 1.0);
  CHECK(sys.Ccal(0, 1) == -1.0);
  CHECK(sys.Ccal(0, 4) == 0.0);
}

TEST_CASE("assemble_system noise covariance") {
  SUBCASE("all-zero sigmas give Q = 0") {
    EnsembleSpec spec;
    spec.clocks = {{ClockKind::Cs, 0, 0, 0}, {ClockKind::Hm, 0, 0, 0}};
    spec.tau = 1.0;
    spec.r = 1e-27;
    spec.V = default_difference_matrix(2);
    CHECK(assemble_system(spec).Q.isZero(0.0));
  }
  SUBCASE("top-left entry of the standard 10-clock table") {
    const SystemMatrices sys = assemble_system(mixed10());
    CHECK(sys.Q(0, 0) == doctest::Approx(2.8900e-20).epsilon(1e-4));
    CHECK((sys.Q - sys.Q.transpose()).norm() == 0.0);
  }
}

TEST_CASE("single-clock degenerate covariance equals the 2x2 block") {
  ClockSpec c{ClockKind::Cs, 0.17e-9, 0.15e-12, 0.0};
  const Eigen::MatrixXd q = assemble_process_covariance({c}, 1.0);
  CHECK(q == cs_process_covariance(1.0, c));
}

TEST_CASE("spec validation errors") {
  EnsembleSpec spec = small3();
  SUBCASE("ordering: Hm before Cs") {
    std::swap(spec.clocks[0], spec.clocks[2]);
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  }
  SUBCASE("V that does not annihilate ones") {
    spec.V << 1, 1, 0, 0, 1, -1;
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  }
  SUBCASE("rank-deficient V") {
    spec.V << 1, 0, -1, 2, 0, -2;
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  }
  SUBCASE("no Hm clock") {
    spec.clocks[2].kind = ClockKind::Cs;
    spec.clocks[2].sigma3 = 0.0;
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  }
  SUBCASE("non-positive r") {
    spec.r = 0.0;
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  }
}

TEST_CASE("two-dimensional unobservable subspace") {
  for (const EnsembleSpec& spec : {small3(), mixed10()}) {
    const SystemMatrices sys = assemble_system(spec);
    const int n = spec.size();
    const int dim = sys.state_dim();
    CHECK(observability_rank(sys) == dim - 2);

    // The common-phase and common-frequency directions are invisible to
    // every power of the dynamics.
    Eigen::VectorXd common_p = Eigen::VectorXd::Zero(dim);
    common_p.head(n).setOnes();
    Eigen::VectorXd common_f = Eigen::VectorXd::Zero(dim);
    common_f.segment(n, n).setOnes();
    for (Eigen::VectorXd v : {common_p, common_f}) {
      for (int k = 0; k < dim; ++k) {
        CHECK((sys.Ccal * v).norm() <= 1e-12 * v.norm());
        v = sys.Acal * v;
      }
    }
  }
}

namespace {

ControlPolicy zero_policy(int n) {
  return [n](int, const Eigen::VectorXd&, const SimulationTrace&) {
    return Eigen::VectorXd::Zero(n).eval();
  };
}

}  // namespace

TEST_CASE("simulate: noise-free degenerate cases") {
  EnsembleSpec spec;
  spec.clocks = {{ClockKind::Cs, 0, 0, 0}, {ClockKind::Hm, 0, 0, 0}};
  spec.tau = 1.0;
  spec.r = 1e-27;  // validated value; the runs below override it to zero
  spec.V = default_difference_matrix(2);
  const SystemMatrices sys = assemble_system(spec);
  EnsembleSpec noiseless = spec;
  noiseless.r = 0.0;

  SUBCASE("zero everything stays zero") {
    const SimulationTrace tr =
        simulate_ensemble(sys, noiseless, zero_policy(2), 50, 1);
    CHECK(tr.x.isZero(0.0));
    CHECK(tr.y.isZero(0.0));
  }
  SUBCASE("a common phase offset is invisible to the measurements") {
    Eigen::VectorXd x0 = Eigen::VectorXd::Zero(5);
    x0.head(2).setConstant(3.5e-9);
    const SimulationTrace tr =
        simulate_ensemble(sys, noiseless, zero_policy(2), 50, 1, false, x0);
    CHECK(tr.y.isZero(0.0));
    CHECK(tr.x(50, 0) == 3.5e-9);
  }
}

TEST_CASE("simulate: determinism and exact replay") {
  const EnsembleSpec spec = small3();
  const SystemMatrices sys = assemble_system(spec);
  const SimulationTrace a =
      simulate_ensemble(sys, spec, zero_policy(3), 200, 42, true);
  const SimulationTrace b =
      simulate_ensemble(sys, spec, zero_policy(3), 200, 42, true);
  CHECK(a.x == b.x);
  CHECK(a.y == b.y);

  // Recorded noises replay the recursion exactly.
  for (int k = 0; k < 200; ++k) {
    Eigen::VectorXd state(sys.state_dim());
    state << a.x.row(k).transpose(), a.z.row(k).transpose();
    Eigen::VectorXd v(sys.state_dim());
    v << a.vx->row(k).transpose(), a.vz->row(k).transpose();
    const Eigen::VectorXd next =
        sys.Acal * state + sys.Bcal * a.u.row(k).transpose() + v;
    CHECK(next.head(6) == a.x.row(k + 1).transpose());
    CHECK(next.tail(1) == a.z.row(k + 1).transpose());
  }
}

TEST_CASE("simulate: policy output dimension is checked") {
  const EnsembleSpec spec = small3();
  const SystemMatrices sys = assemble_system(spec);
  const auto bad = [](int, const Eigen::VectorXd&, const SimulationTrace&) {
    return Eigen::VectorXd::Zero(2).eval();
  };
  CHECK_THROWS_AS(simulate_ensemble(sys, spec, bad, 10, 1),
                  std::invalid_argument);
}
