#include <catch2/catch.hpp>

#include "f2narx/pca.hpp"
#include "f2narx/random.hpp"

using namespace f2narx;

namespace {

Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) m.row(i) = rng.normal_vector(cols).transpose();
  return m;
}

}  // namespace

TEST_CASE("perfectly correlated data retains a single component") {
  Eigen::MatrixXd m(3, 2);
  m << 1, 1, 2, 2, 3, 3;
  const PcaProjector p = fit_pca(m, 0.9999);
  CHECK(p.retained() == 1);
  CHECK(p.retained_fraction() == Approx(1.0));
}

TEST_CASE("full retention keeps every component") {
  const Eigen::MatrixXd m = random_matrix(50, 10, 1);
  const PcaProjector p = fit_pca(m, 1.0);
  CHECK(p.retained() == 10);
}

TEST_CASE("basis is orthonormal within 1e-10") {
  const Eigen::MatrixXd m = random_matrix(80, 14, 2);
  const PcaProjector p = fit_pca(m, 0.95);
  const Eigen::MatrixXd gram = p.basis().transpose() * p.basis();
  CHECK((gram - Eigen::MatrixXd::Identity(p.retained(), p.retained())).cwiseAbs().maxCoeff() <
        1e-10);
}

TEST_CASE("eigenvalues are descending and nonnegative") {
  const Eigen::MatrixXd m = random_matrix(60, 8, 3);
  const PcaProjector p = fit_pca(m, 0.99);
  for (Eigen::Index i = 1; i < p.eigenvalues().size(); ++i)
    CHECK(p.eigenvalues()[i] <= p.eigenvalues()[i - 1] + 1e-12);
  CHECK(p.eigenvalues().minCoeff() >= 0.0);
}

TEST_CASE("reconstruction error equals the discarded eigenvalue fraction") {
  // With correlated columns the truncation is nontrivial.
  Rng rng(4);
  Eigen::MatrixXd m(200, 30);
  for (Eigen::Index i = 0; i < 200; ++i) {
    const Eigen::VectorXd latent = rng.normal_vector(5);
    for (Eigen::Index j = 0; j < 30; ++j)
      m(i, j) = latent[j % 5] + 0.3 * rng.normal() + 0.1 * latent[(j + 1) % 5];
  }
  const PcaProjector p = fit_pca(m, 0.9);
  REQUIRE(p.retained() < 30);
  const Eigen::MatrixXd z =
      ((m.rowwise() - p.mean()).array().rowwise() / p.stddev().array()).matrix();
  const Eigen::MatrixXd residual = z - z * p.basis() * p.basis().transpose();
  const double ratio = residual.squaredNorm() / z.squaredNorm();
  const double discarded = 1.0 - p.retained_fraction();
  CHECK(ratio == Approx(discarded).margin(1e-10));
  CHECK(ratio <= discarded + 1e-12);
}

TEST_CASE("projection geometry") {
  const Eigen::MatrixXd m = random_matrix(40, 6, 5);
  const PcaProjector p = fit_pca(m, 1.0);

  SECTION("the mean row maps to the zero feature vector") {
    CHECK(p.project(p.mean()).cwiseAbs().maxCoeff() < 1e-12);
  }
  SECTION("zero features map back to the mean row") {
    CHECK((p.inverse_project(Eigen::RowVectorXd::Zero(p.retained())) - p.mean())
              .cwiseAbs()
              .maxCoeff() < 1e-12);
  }
  SECTION("full-retention round trip recovers the data") {
    CHECK((p.inverse_project(p.project(m)) - m).cwiseAbs().maxCoeff() < 1e-8);
  }
  SECTION("project after inverse_project is the identity on feature space") {
    const Eigen::MatrixXd features = random_matrix(7, p.retained(), 6);
    CHECK((p.project(p.inverse_project(features)) - features).cwiseAbs().maxCoeff() < 1e-10);
  }
  SECTION("column mismatch is rejected") {
    CHECK_THROWS_AS(p.project(Eigen::MatrixXd::Zero(2, 5)), std::invalid_argument);
    CHECK_THROWS_AS(p.inverse_project(Eigen::MatrixXd::Zero(2, p.retained() + 1)),
                    std::invalid_argument);
  }
}

TEST_CASE("features of the fit data are uncorrelated") {
  const Eigen::MatrixXd m = random_matrix(300, 12, 7);
  const PcaProjector p = fit_pca(m, 0.999);
  const Eigen::MatrixXd scores = p.project(m);
  const Eigen::MatrixXd centered = scores.rowwise() - scores.colwise().mean();
  const Eigen::MatrixXd cov = centered.transpose() * centered / (300.0 - 1.0);
  const double diag_scale = cov.diagonal().maxCoeff();
  for (Eigen::Index i = 0; i < cov.rows(); ++i)
    for (Eigen::Index j = 0; j < cov.cols(); ++j)
      if (i != j) CHECK(std::abs(cov(i, j)) < 1e-8 * diag_scale);
}

TEST_CASE("zero-variance columns do not poison the decomposition") {
  Eigen::MatrixXd m = random_matrix(30, 5, 8);
  m.col(2).setConstant(7.5);
  const PcaProjector p = fit_pca(m, 1.0);
  CHECK(p.stddev()[2] == 1.0);
  const Eigen::MatrixXd rebuilt = p.inverse_project(p.project(m));
  CHECK((rebuilt.col(2).array() - 7.5).abs().maxCoeff() < 1e-10);
}

TEST_CASE("retained count never decreases with eps_lambda") {
  const Eigen::MatrixXd m = random_matrix(100, 9, 9);
  Eigen::Index previous = 0;
  for (const double eps : {0.5, 0.9, 0.99, 0.999, 1.0}) {
    const Eigen::Index retained = fit_pca(m, eps).retained();
    CHECK(retained >= previous);
    previous = retained;
  }
}

TEST_CASE("variance reconstruction maps diagonal feature covariances") {
  const Eigen::MatrixXd m = random_matrix(50, 4, 10);
  const PcaProjector p = fit_pca(m, 1.0);
  Eigen::MatrixXd feature_var(1, p.retained());
  Rng rng(11);
  for (Eigen::Index k = 0; k < p.retained(); ++k) feature_var(0, k) = rng.uniform(0.1, 2.0);
  const Eigen::MatrixXd out = p.inverse_project_variance(feature_var);
  // Reference: diag(V S V^T) .* sigma^2 computed densely.
  const Eigen::MatrixXd s = feature_var.row(0).asDiagonal();
  const Eigen::VectorXd reference =
      ((p.basis() * s * p.basis().transpose()).diagonal().array() *
       p.stddev().transpose().array().square())
          .matrix();
  CHECK((out.row(0).transpose() - reference).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("fit rejects degenerate inputs") {
  CHECK_THROWS_AS(fit_pca(Eigen::MatrixXd::Zero(1, 4), 0.99), std::invalid_argument);
  CHECK_THROWS_AS(fit_pca(Eigen::MatrixXd::Zero(5, 4), 0.0), std::invalid_argument);
  Eigen::MatrixXd bad = Eigen::MatrixXd::Zero(5, 4);
  bad(1, 1) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(fit_pca(bad, 0.99), std::invalid_argument);
}
