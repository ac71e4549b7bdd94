#include <doctest.h>

#include "tsgen/decomposition.hpp"

#include <Eigen/SVD>
#include "tsgen/rng.hpp"

#include "helpers.hpp"

using namespace tsgen;
using tsgen::test::mixed10;
using tsgen::test::rel_err;
using tsgen::test::small3;

TEST_CASE("complement basis construction") {
  SUBCASE("two clocks, even weights") {
    WeightVector q{Eigen::Vector2d(0.5, 0.5)};
    const Eigen::MatrixXd w = complement_basis(q);
    REQUIRE(w.rows() == 2);
    CHECK(w(0, 0) == 0.5);
    CHECK(w(1, 0) == -0.5);
  }
  SUBCASE("all weight on the first clock") {
    WeightVector q{Eigen::VectorXd::Zero(4)};
    q.q(0) = 1.0;
    const Eigen::MatrixXd w = complement_basis(q);
    // Column i is e_i - q_i * ones.
    CHECK(w.col(0) == Eigen::Vector4d(0, -1, -1, -1));
    CHECK(w.col(1) == Eigen::Vector4d(0, 1, 0, 0));
    CHECK(w.col(2) == Eigen::Vector4d(0, 0, 1, 0));
  }
  SUBCASE("orthogonality and rank for random weights") {
    GaussianStream g(5, "weights");
    for (int trial = 0; trial < 20; ++trial) {
      const int n = 2 + trial % 6;
      Eigen::VectorXd raw = g.vector(n);
      raw(0) += 1.0 - raw.sum();  // force sum 1
      WeightVector q{raw};
      const Eigen::MatrixXd w = complement_basis(q);
      CHECK((q.q.transpose() * w).cwiseAbs().maxCoeff() <= 1e-12);
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(w);
      CHECK(svd.singularValues().minCoeff() >
            1e-10 * svd.singularValues().maxCoeff());
    }
  }
  SUBCASE("invalid weights are rejected") {
    WeightVector q{Eigen::Vector2d(0.5, 0.6)};
    CHECK_THROWS_AS(complement_basis(q), std::invalid_argument);
  }
}

TEST_CASE("weighted right inverse") {
  SUBCASE("two clocks") {
    WeightVector q{Eigen::Vector2d(0.5, 0.5)};
    const Eigen::MatrixXd vp =
        weighted_right_inverse(default_difference_matrix(2), q);
    CHECK(vp(0, 0) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(vp(1, 0) == doctest::Approx(-0.5).epsilon(1e-14));
  }
  SUBCASE("defining properties") {
    GaussianStream g(6, "weights");
    for (int n : {2, 3, 7, 10}) {
      Eigen::VectorXd raw = g.vector(n);
      raw(0) += 1.0 - raw.sum();
      WeightVector q{raw};
      const Eigen::MatrixXd v = default_difference_matrix(n);
      const Eigen::MatrixXd vp = weighted_right_inverse(v, q);
      CHECK((v * vp - Eigen::MatrixXd::Identity(n - 1, n - 1)).norm() <= 1e-10);
      CHECK((q.q.transpose() * vp).cwiseAbs().maxCoeff() <= 1e-12);
    }
  }
  SUBCASE("singular V W reports the conditioning") {
    Eigen::MatrixXd v(2, 3);
    v << 1, -1, 0, 2, -2, 0;  // rank 1, still annihilates ones
    WeightVector q{Eigen::Vector3d(1.0 / 3, 1.0 / 3, 1.0 / 3)};
    CHECK_THROWS_AS(weighted_right_inverse(v, q), std::runtime_error);
  }
}

TEST_CASE("observable decomposition blocks and inverse") {
  const EnsembleSpec spec = mixed10();
  Eigen::VectorXd s1sq = spec.sigma1_sq();
  WeightVector q{s1sq.cwiseInverse() / s1sq.cwiseInverse().sum()};
  const ObservableDecomposition dec = observable_decomposition(spec, q);

  SUBCASE("dimensions") {
    CHECK(dec.obs_dyn.rows() == 21);
    CHECK(dec.obs_dyn.cols() == 21);
    CHECK(dec.mean_coupling.rows() == 2);
    CHECK(dec.mean_coupling.cols() == 21);
    CHECK(dec.obs_output.rows() == 9);
    CHECK(dec.obs_output.cols() == 21);
  }
  SUBCASE("transform pair") {
    CHECK((dec.transform * dec.inverse_transform -
           Eigen::MatrixXd::Identity(23, 23))
              .norm() <= 1e-10);
  }
  SUBCASE("common phase and frequency land in the mean coordinates") {
    const double c = 2.5e-9, d = -1.1e-13;
    Eigen::VectorXd x = Eigen::VectorXd::Zero(23);
    x.head(10).setConstant(c);
    x.segment(10, 10).setConstant(d);
    const Eigen::VectorXd eta = dec.transform * x;
    CHECK(eta.head(21).cwiseAbs().maxCoeff() <= 1e-22);
    CHECK(eta(21) == doctest::Approx(c).epsilon(1e-12));
    CHECK(eta(22) == doctest::Approx(d).epsilon(1e-12));
  }
  SUBCASE("block identity against the stacked model") {
    const SystemMatrices sys = assemble_system(spec);
    const int no = dec.obs_dim();
    Eigen::MatrixXd lifted = Eigen::MatrixXd::Zero(23, 23);
    lifted.topLeftCorner(no, no) = dec.obs_dyn;
    lifted.bottomLeftCorner(2, no) = dec.mean_coupling;
    lifted.bottomRightCorner(2, 2) = dec.base_A;
    CHECK(rel_err(dec.transform * sys.Acal * dec.inverse_transform, lifted) <=
          1e-10);

    Eigen::MatrixXd b(23, 10);
    b << dec.obs_input, dec.mean_input;
    CHECK(rel_err(dec.transform * sys.Bcal, b) <= 1e-10);

    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(9, 23);
    c.leftCols(no) = dec.obs_output;
    CHECK(rel_err(sys.Ccal * dec.inverse_transform, c) <= 1e-10);
  }
  SUBCASE("round trip of random states") {
    GaussianStream g(17, "states");
    for (int trial = 0; trial < 20; ++trial) {
      const Eigen::VectorXd x = g.vector(23);
      CHECK((dec.inverse_transform * (dec.transform * x) - x).norm() <=
            1e-10 * x.norm());
    }
  }
  SUBCASE("mean projection matches the weighted averages") {
    GaussianStream g(18, "states");
    const Eigen::VectorXd x = g.vector(23);
    const Eigen::Vector2d mean = dec.mean_proj * x;
    CHECK(mean(0) == doctest::Approx(q.q.dot(x.head(10))).epsilon(1e-12));
    CHECK(mean(1) == doctest::Approx(q.q.dot(x.segment(10, 10))).epsilon(1e-12));
  }
}

TEST_CASE("decomposition on the small ensemble") {
  const EnsembleSpec spec = small3();
  const WeightVector q = tsgen::test::uniform_weights(3);
  const ObservableDecomposition dec = observable_decomposition(spec, q);
  CHECK((dec.transform * dec.inverse_transform -
         Eigen::MatrixXd::Identity(7, 7))
            .norm() <= 1e-12);
  CHECK(dec.drift_diff.rows() == 2);
  CHECK(dec.drift_weight(0) == doctest::Approx(1.0 / 3).epsilon(1e-14));
}
