/**
 * @file metrics.hpp
 * @brief Prediction-error metrics.
 */
#pragma once

#include <Eigen/Core>
#include <stdexcept>
#include <utility>
#include <vector>

#include "f2narx/types.hpp"

namespace f2narx {

/**
 * @brief Normalized mean squared error of a prediction against the truth:
 *        mean squared error divided by the population variance of the truth.
 */
inline double nmse(const Eigen::VectorXd& y_true, const Eigen::VectorXd& y_pred) {
  if (y_true.size() != y_pred.size()) throw std::invalid_argument("nmse: length mismatch");
  if (y_true.size() == 0) throw std::invalid_argument("nmse: empty input");
  const double n = static_cast<double>(y_true.size());
  const double mean = y_true.mean();
  const double variance = (y_true.array() - mean).square().sum() / n;
  if (!(variance > 0.0)) throw std::invalid_argument("nmse: truth has zero variance");
  return (y_true - y_pred).squaredNorm() / n / variance;
}

inline double nmse(const Trajectory& y_true, const Trajectory& y_pred) {
  return nmse(y_true.values(), y_pred.values());
}

/// Arithmetic mean of per-record NMSE over (truth, prediction) pairs.
inline double mean_nmse(const std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>>& pairs) {
  if (pairs.empty()) throw std::invalid_argument("mean_nmse: empty set");
  double acc = 0.0;
  for (const auto& [truth, pred] : pairs) acc += nmse(truth, pred);
  return acc / static_cast<double>(pairs.size());
}

inline double mean_nmse(const std::vector<Trajectory>& truth, const std::vector<Trajectory>& pred) {
  if (truth.size() != pred.size()) throw std::invalid_argument("mean_nmse: list length mismatch");
  if (truth.empty()) throw std::invalid_argument("mean_nmse: empty set");
  double acc = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) acc += nmse(truth[i], pred[i]);
  return acc / static_cast<double>(truth.size());
}

}  // namespace f2narx
