#include <catch2/catch.hpp>

#include "f2narx/gp.hpp"
#include "f2narx/random.hpp"
#include "f2narx/sgp.hpp"

using namespace f2narx;

namespace {

GpTrainConfig quick_config(int restarts = 1, int iters = 60) {
  GpTrainConfig cfg;
  cfg.restarts = restarts;
  cfg.max_iters = iters;
  return cfg;
}

struct Smooth2d {
  double operator()(const Eigen::RowVectorXd& x) const {
    return std::sin(x[0]) * std::cos(0.5 * x[1]) + 0.2 * x[0];
  }
};

}  // namespace

TEST_CASE("pinned inducing set reproduces the exact GP") {
  Rng rng(1);
  Eigen::MatrixXd x(100, 2);
  Eigen::VectorXd y(100);
  Smooth2d f;
  for (int i = 0; i < 100; ++i) {
    x.row(i) << rng.uniform(-3, 3), rng.uniform(-3, 3);
    y[i] = f(x.row(i));
  }
  const GpModel gp = fit_gp(x, y, quick_config(2, 80));
  const SgpModel sgp = pin_sgp_to_gp(gp, x, y);
  REQUIRE(sgp.n_inducing() == 100);

  Eigen::MatrixXd probes(60, 2);
  for (int i = 0; i < 60; ++i) probes.row(i) << rng.uniform(-3, 3), rng.uniform(-3, 3);
  Eigen::VectorXd gp_mean(60), gp_var(60), sgp_mean(60), sgp_var(60);
  gp.predict_batch(probes, gp_mean, gp_var);
  sgp.predict_batch(probes, sgp_mean, sgp_var);
  const double scale = std::sqrt((y.array() - y.mean()).square().mean());
  CHECK((gp_mean - sgp_mean).cwiseAbs().maxCoeff() / scale < 1e-4);
  CHECK((gp_var - sgp_var).cwiseAbs().maxCoeff() / (scale * scale) < 1e-4);
}

TEST_CASE("near-interpolation at inducing points after a low-noise pinned fit") {
  Rng rng(2);
  Eigen::MatrixXd x(40, 1);
  Eigen::VectorXd y(40);
  for (int i = 0; i < 40; ++i) {
    x(i, 0) = 6.0 * i / 39.0;
    y[i] = std::sin(x(i, 0));
  }
  const GpModel gp = fit_gp(x, y, quick_config(2, 100));
  const SgpModel sgp = pin_sgp_to_gp(gp, x, y);
  Eigen::VectorXd mean(40), variance(40);
  sgp.predict_batch(x, mean, variance);
  CHECK((mean - y).cwiseAbs().maxCoeff() < 1e-3);
}

TEST_CASE("large smooth problem: sparse fit tracks a subsampled exact GP") {
  const int n = 5000;
  Rng rng(3);
  Eigen::MatrixXd x(n, 2);
  Eigen::VectorXd y(n);
  Smooth2d f;
  for (int i = 0; i < n; ++i) {
    x.row(i) << rng.uniform(-3, 3), rng.uniform(-3, 3);
    y[i] = f(x.row(i)) + 0.01 * rng.normal();
  }
  GpTrainConfig sparse_cfg = quick_config(1, 50);
  const SgpModel sgp = fit_sgp(x, y, 128, sparse_cfg);

  GpTrainConfig exact_cfg = quick_config(1, 40);
  const GpModel gp = fit_gp(x.topRows(500), y.head(500), exact_cfg);

  Eigen::MatrixXd probes(400, 2);
  Eigen::VectorXd truth(400);
  for (int i = 0; i < 400; ++i) {
    probes.row(i) << rng.uniform(-2.5, 2.5), rng.uniform(-2.5, 2.5);
    truth[i] = f(probes.row(i));
  }
  Eigen::VectorXd sgp_mean(400), sgp_var(400), gp_mean(400), gp_var(400);
  sgp.predict_batch(probes, sgp_mean, sgp_var);
  gp.predict_batch(probes, gp_mean, gp_var);
  const double sgp_rmse = std::sqrt((sgp_mean - truth).squaredNorm() / 400.0);
  const double gp_rmse = std::sqrt((gp_mean - truth).squaredNorm() / 400.0);
  INFO("sgp rmse " << sgp_rmse << " vs exact-subsample rmse " << gp_rmse);
  CHECK(sgp_rmse <= 2.0 * gp_rmse);
}

TEST_CASE("constant targets degenerate exactly like the exact GP") {
  Rng rng(4);
  Eigen::MatrixXd x(50, 2);
  for (int i = 0; i < 50; ++i) x.row(i) = rng.normal_vector(2).transpose();
  const Eigen::VectorXd y = Eigen::VectorXd::Constant(50, -2.5);
  const SgpModel sgp = fit_sgp(x, y, 10, quick_config());
  const auto [mean, variance] = sgp.predict(rng.normal_vector(2));
  CHECK(mean == Approx(-2.5).margin(1e-9));
  CHECK(variance >= 0.0);
}

TEST_CASE("far-field reversion and variance bounds") {
  Rng rng(5);
  Eigen::MatrixXd x(300, 2);
  Eigen::VectorXd y(300);
  Smooth2d f;
  for (int i = 0; i < 300; ++i) {
    x.row(i) << rng.uniform(-2, 2), rng.uniform(-2, 2);
    y[i] = f(x.row(i)) + 0.05 * rng.normal();
  }
  const SgpModel sgp = fit_sgp(x, y, 32, quick_config(2, 60));
  const SgpState& s = sgp.state();
  const double prior_var = (s.signal_variance + s.noise_variance) * s.y_scale * s.y_scale;

  SECTION("far point reverts to the prior") {
    const Eigen::VectorXd far =
        (s.x_norm.mean.transpose().array() +
         s.x_norm.scale.transpose().array() * s.lengthscales.array() * 40.0)
            .matrix();
    const auto [mean, variance] = sgp.predict(far);
    CHECK(mean == Approx(s.y_mean).margin(0.01 * std::max(1.0, std::abs(s.y_mean))));
    CHECK(variance == Approx(prior_var).epsilon(0.01));
  }

  SECTION("variance lies in [0, signal + noise] everywhere") {
    Eigen::MatrixXd probes(500, 2);
    for (int i = 0; i < 500; ++i) probes.row(i) << rng.uniform(-6, 6), rng.uniform(-6, 6);
    Eigen::VectorXd mean(500), variance(500);
    sgp.predict_batch(probes, mean, variance);
    CHECK(variance.minCoeff() >= 0.0);
    CHECK(variance.maxCoeff() <= prior_var + 1e-8 * s.y_scale * s.y_scale);
  }
}

TEST_CASE("variational-bound gradient matches central differences") {
  Rng rng(6);
  Eigen::MatrixXd x(40, 2);
  Eigen::VectorXd y(40);
  Smooth2d f;
  for (int i = 0; i < 40; ++i) {
    x.row(i) << rng.uniform(-2, 2), rng.uniform(-2, 2);
    y[i] = f(x.row(i));
  }
  CHECK(sgp_gradient_max_rel_error(x, y, 12, false) < 1e-4);
  CHECK(sgp_gradient_max_rel_error(x, y, 12, true) < 1e-4);
}

TEST_CASE("optimized bound dominates every start") {
  Rng rng(7);
  Eigen::MatrixXd x(200, 2);
  Eigen::VectorXd y(200);
  Smooth2d f;
  for (int i = 0; i < 200; ++i) {
    x.row(i) << rng.uniform(-2, 2), rng.uniform(-2, 2);
    y[i] = f(x.row(i)) + 0.02 * rng.normal();
  }
  const SgpModel sgp = fit_sgp(x, y, 24, quick_config(3, 50));
  for (const double start : sgp.report().start_objectives)
    CHECK(sgp.report().final_objective <= start + 1e-9);
}

TEST_CASE("default inducing count follows min(256, ceil(n/4))") {
  Rng rng(8);
  Eigen::MatrixXd x(100, 1);
  Eigen::VectorXd y(100);
  for (int i = 0; i < 100; ++i) {
    x(i, 0) = rng.uniform(-1, 1);
    y[i] = x(i, 0);
  }
  const SgpModel sgp = fit_sgp(x, y, 0, quick_config(1, 10));
  CHECK(sgp.n_inducing() == 25);
}
