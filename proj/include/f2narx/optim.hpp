/**
 * @file optim.hpp
 * @brief Box-constrained L-BFGS minimizer with backtracking line search.
 *
 * Small quasi-Newton loop used for marginal-likelihood and variational-bound
 * maximization. Parameters live in an unconstrained (log) space; bounds are
 * enforced by projection, and the curvature history is dropped whenever a
 * projection actually moves the iterate.
 */
#pragma once

#include <Eigen/Core>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <utility>

namespace f2narx {

struct OptimResult {
  Eigen::VectorXd x;
  double value = std::numeric_limits<double>::infinity();
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
};

/**
 * @brief Minimizes objective(x, grad) subject to lower <= x <= upper.
 *
 * The objective fills grad and returns f(x); it may return +inf (with any
 * grad) to reject a point. Deterministic for fixed inputs.
 */
template <typename Objective>
OptimResult minimize_lbfgs(Objective&& objective, Eigen::VectorXd x0,
                           const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                           int max_iters, double grad_tol = 1e-6) {
  constexpr int kHistory = 8;
  constexpr double kArmijo = 1e-4;
  const auto dim = x0.size();

  auto project = [&](Eigen::VectorXd& v) { v = v.cwiseMax(lower).cwiseMin(upper); };
  project(x0);

  OptimResult result;
  Eigen::VectorXd x = x0;
  Eigen::VectorXd grad(dim);
  double f = objective(x, grad);
  ++result.evaluations;
  if (!std::isfinite(f)) {
    result.x = x;
    return result;
  }

  std::deque<std::pair<Eigen::VectorXd, Eigen::VectorXd>> history;  // (s, y) pairs
  Eigen::VectorXd direction(dim), x_new(dim), grad_new(dim);

  for (int iter = 0; iter < max_iters; ++iter) {
    result.iterations = iter + 1;

    // Two-loop recursion for the search direction.
    direction = -grad;
    Eigen::VectorXd alphas(static_cast<Eigen::Index>(history.size()));
    Eigen::Index idx = static_cast<Eigen::Index>(history.size()) - 1;
    for (auto it = history.rbegin(); it != history.rend(); ++it, --idx) {
      const double rho = 1.0 / it->second.dot(it->first);
      alphas[idx] = rho * it->first.dot(direction);
      direction -= alphas[idx] * it->second;
    }
    if (!history.empty()) {
      const auto& [s_last, y_last] = history.back();
      direction *= s_last.dot(y_last) / y_last.squaredNorm();
    }
    idx = 0;
    for (auto it = history.begin(); it != history.end(); ++it, ++idx) {
      const double rho = 1.0 / it->second.dot(it->first);
      const double beta = rho * it->second.dot(direction);
      direction += (alphas[idx] - beta) * it->first;
    }
    if (direction.dot(grad) >= 0.0) direction = -grad;  // safeguard: fall back to steepest descent

    double step = history.empty() ? 1.0 / std::max(1.0, grad.norm()) : 1.0;
    const double slope = grad.dot(direction);
    bool accepted = false;
    bool was_projected = false;
    double f_new = f;
    for (int bt = 0; bt < 40; ++bt) {
      x_new = x + step * direction;
      const Eigen::VectorXd pre_projection = x_new;
      project(x_new);
      was_projected = (x_new - pre_projection).lpNorm<Eigen::Infinity>() > 0.0;
      f_new = objective(x_new, grad_new);
      ++result.evaluations;
      if (std::isfinite(f_new) && f_new <= f + kArmijo * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;

    const Eigen::VectorXd s = x_new - x;
    const Eigen::VectorXd y = grad_new - grad;
    x = x_new;
    f = f_new;
    grad = grad_new;
    if (was_projected) {
      history.clear();
    } else if (y.dot(s) > 1e-12 * y.norm() * s.norm()) {
      history.emplace_back(s, y);
      if (history.size() > kHistory) history.pop_front();
    }

    if (grad.lpNorm<Eigen::Infinity>() < grad_tol * std::max(1.0, std::abs(f))) {
      result.converged = true;
      break;
    }
    if (s.lpNorm<Eigen::Infinity>() < 1e-12) {
      result.converged = true;
      break;
    }
  }

  result.x = std::move(x);
  result.value = f;
  return result;
}

}  // namespace f2narx
