/**
 * @file ut.hpp
 * @brief Unscented-transform variance estimate for a regression model with
 *        Gaussian input uncertainty.
 *
 * For x* ~ N(mu, Sigma) and a model exposing mean mu_f and variance sig2_f,
 *   Var(f(x*)) ~= sum_i alpha_i [ sig2_f(s_i) + (mu_f(s_i) - mu_f(mu))^2 ]
 * over the 2p+1 sigma points s_0 = mu, s_i = mu +/- sqrt((p+kappa) Sigma)_i
 * with alpha_0 = kappa/(p+kappa), alpha_i = 1/(2(p+kappa)). For Gaussian
 * inputs kappa is set so p + kappa = 3, which makes kappa (and alpha_0)
 * negative for p > 3; the weights are applied as-is and the final estimate
 * is clamped at zero. A clamped mode with kappa = max(3-p, 0) is available.
 */
#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <functional>
#include <stdexcept>

namespace f2narx {

struct UtWeights {
  double scale;       ///< p + kappa: sigma points sit at +/- sqrt(scale * var)
  double alpha_side;  ///< weight of each +/- point
  double alpha0;      ///< weight of the central point

  static UtWeights make(Eigen::Index p, bool clamp_kappa) {
    UtWeights w;
    const double dim = static_cast<double>(p);
    const double kappa = clamp_kappa ? std::max(3.0 - dim, 0.0) : 3.0 - dim;
    w.scale = dim + kappa;
    w.alpha0 = kappa / w.scale;
    w.alpha_side = 1.0 / (2.0 * w.scale);
    return w;
  }
};

/**
 * @brief Literal sigma-point estimator over all p input dimensions.
 *
 * sigma_diag holds the diagonal of the (diagonal) input covariance; the
 * matrix square root reduces to elementwise square roots.
 */
inline double ut_variance(const std::function<double(const Eigen::VectorXd&)>& mean_fn,
                          const std::function<double(const Eigen::VectorXd&)>& var_fn,
                          const Eigen::VectorXd& mu, const Eigen::VectorXd& sigma_diag,
                          bool clamp_kappa = false) {
  const Eigen::Index p = mu.size();
  if (sigma_diag.size() != p) throw std::invalid_argument("ut_variance: dimension mismatch");
  if ((sigma_diag.array() < 0.0).any())
    throw std::invalid_argument("ut_variance: negative diagonal entry");

  const UtWeights w = UtWeights::make(p, clamp_kappa);
  // Zero-variance dimensions place both their sigma points on the center;
  // folding them there keeps the weight algebra exact (weights sum to one).
  Eigen::Index active = 0;
  for (Eigen::Index d = 0; d < p; ++d) active += sigma_diag[d] > 0.0 ? 1 : 0;
  const double center_weight = 1.0 - 2.0 * static_cast<double>(active) * w.alpha_side;

  const double mean_at_center = mean_fn(mu);
  double estimate = center_weight * var_fn(mu);  // central (mu - mu)^2 term is zero
  Eigen::VectorXd point = mu;
  for (Eigen::Index d = 0; d < p; ++d) {
    if (!(sigma_diag[d] > 0.0)) continue;
    const double shift = std::sqrt(w.scale * sigma_diag[d]);
    for (const double sign : {1.0, -1.0}) {
      point[d] = mu[d] + sign * shift;
      const double delta = mean_fn(point) - mean_at_center;
      estimate += w.alpha_side * (var_fn(point) + delta * delta);
    }
    point[d] = mu[d];
  }
  return std::max(estimate, 0.0);
}

}  // namespace f2narx
