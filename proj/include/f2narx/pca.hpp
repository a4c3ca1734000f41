/**
 * @file pca.hpp
 * @brief Standardized PCA of local window functions with variance-proportion
 *        truncation and exact inverse mapping.
 *
 * Fitting standardizes each column to zero mean and unit variance, builds the
 * sample covariance C = Z^T Z / (N-1), and eigendecomposes it. The retained
 * count m is the smallest value whose cumulative eigenvalue fraction reaches
 * the threshold. Because the forward mapping standardizes, the inverse
 * mapping re-applies sigma and mu.
 */
#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace f2narx {

class PcaProjector {
 public:
  PcaProjector() = default;

  PcaProjector(Eigen::RowVectorXd mu, Eigen::RowVectorXd sigma, Eigen::MatrixXd basis,
               Eigen::VectorXd lambdas, double eps_lambda)
      : mu_(std::move(mu)),
        sigma_(std::move(sigma)),
        basis_(std::move(basis)),
        lambdas_(std::move(lambdas)),
        eps_lambda_(eps_lambda) {
    if (mu_.size() != sigma_.size() || basis_.rows() != mu_.size() ||
        lambdas_.size() != mu_.size() || basis_.cols() > basis_.rows())
      throw std::invalid_argument("PcaProjector: inconsistent shapes");
  }

  Eigen::Index input_dim() const { return mu_.size(); }
  Eigen::Index retained() const { return basis_.cols(); }
  const Eigen::RowVectorXd& mean() const { return mu_; }
  const Eigen::RowVectorXd& stddev() const { return sigma_; }
  const Eigen::MatrixXd& basis() const { return basis_; }
  const Eigen::VectorXd& eigenvalues() const { return lambdas_; }
  double eps_lambda() const { return eps_lambda_; }

  /// Fraction of total standardized variance carried by the retained basis.
  double retained_fraction() const {
    const double total = lambdas_.sum();
    return total > 0.0 ? lambdas_.head(retained()).sum() / total : 1.0;
  }

  /// Feature scores of raw rows: ((rows - mu) / sigma) * V.
  Eigen::MatrixXd project(const Eigen::MatrixXd& rows) const {
    if (rows.cols() != input_dim())
      throw std::invalid_argument("PcaProjector::project: expected " + std::to_string(input_dim()) +
                                  " columns, got " + std::to_string(rows.cols()));
    return ((rows.rowwise() - mu_).array().rowwise() / sigma_.array()).matrix() * basis_;
  }

  /// Raw rows from feature scores: (features * V^T) * sigma + mu.
  Eigen::MatrixXd inverse_project(const Eigen::MatrixXd& features) const {
    if (features.cols() != retained())
      throw std::invalid_argument("PcaProjector::inverse_project: expected " +
                                  std::to_string(retained()) + " columns, got " +
                                  std::to_string(features.cols()));
    return ((features * basis_.transpose()).array().rowwise() * sigma_.array()).matrix().rowwise() +
           mu_;
  }

  /**
   * @brief Sample-space variances from diagonal feature covariances, one row
   *        per input: diag(V S V^T) scaled by sigma^2.
   */
  Eigen::MatrixXd inverse_project_variance(const Eigen::MatrixXd& feature_variances) const {
    if (feature_variances.cols() != retained())
      throw std::invalid_argument("PcaProjector::inverse_project_variance: column mismatch");
    // diag(V S V^T)_t = sum_k V_tk^2 S_kk, then un-standardize by sigma_t^2.
    Eigen::MatrixXd out = feature_variances * basis_.array().square().matrix().transpose();
    out.array().rowwise() *= sigma_.array().square();
    return out;
  }

 private:
  Eigen::RowVectorXd mu_;
  Eigen::RowVectorXd sigma_;
  Eigen::MatrixXd basis_;    ///< n_T x m, orthonormal columns
  Eigen::VectorXd lambdas_;  ///< all eigenvalues, descending
  double eps_lambda_ = 1.0;
};

/**
 * @brief Fits a projector on a data matrix (rows = observations).
 *
 * Columns whose standard deviation is below 1e-12 * max|M| are treated as
 * constant: their sigma is replaced by 1 so the standardized column is
 * exactly zero. Eigenvalues are clamped at zero before the proportion test.
 */
inline PcaProjector fit_pca(const Eigen::MatrixXd& data, double eps_lambda) {
  if (data.rows() < 2) throw std::invalid_argument("fit_pca: need at least 2 rows");
  if (!(eps_lambda > 0.0 && eps_lambda <= 1.0))
    throw std::invalid_argument("fit_pca: eps_lambda must lie in (0, 1]");
  if (!data.allFinite()) throw std::invalid_argument("fit_pca: non-finite entry");

  const auto n = static_cast<double>(data.rows());
  const Eigen::Index dim = data.cols();
  const Eigen::RowVectorXd mu = data.colwise().mean();
  Eigen::MatrixXd centered = data.rowwise() - mu;
  Eigen::RowVectorXd sigma = (centered.array().square().colwise().sum() / (n - 1.0)).sqrt();
  const double floor = 1e-12 * std::max(1e-300, data.array().abs().maxCoeff());
  for (Eigen::Index j = 0; j < dim; ++j)
    if (!(sigma[j] > floor)) sigma[j] = 1.0;
  centered.array().rowwise() /= sigma.array();

  const Eigen::MatrixXd covariance = centered.transpose() * centered / (n - 1.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(covariance);
  if (solver.info() != Eigen::Success) throw std::runtime_error("fit_pca: eigendecomposition failed");

  // Eigen returns ascending order; flip to descending and clamp at zero.
  Eigen::VectorXd lambdas = solver.eigenvalues().reverse().cwiseMax(0.0);
  Eigen::MatrixXd vectors = solver.eigenvectors().rowwise().reverse();

  const double total = lambdas.sum();
  Eigen::Index m = dim;
  if (total > 0.0) {
    double cumulative = 0.0;
    for (Eigen::Index k = 0; k < dim; ++k) {
      cumulative += lambdas[k];
      if (cumulative / total >= eps_lambda) {
        m = k + 1;
        break;
      }
    }
  } else {
    m = 1;  // fully degenerate data: keep one direction so shapes stay valid
  }
  return PcaProjector(mu, sigma, vectors.leftCols(m), std::move(lambdas), eps_lambda);
}

}  // namespace f2narx
