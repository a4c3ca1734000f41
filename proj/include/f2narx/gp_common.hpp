/**
 * @file gp_common.hpp
 * @brief Shared Gaussian-process machinery: ARD squared-exponential kernel,
 *        input/output normalization, k-means summaries, training config.
 */
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "f2narx/random.hpp"

namespace f2narx {

/// Training configuration shared by the exact and sparse regressors.
struct GpTrainConfig {
  int restarts = 4;      ///< multi-start count for hyperparameter optimization
  int max_iters = 120;   ///< L-BFGS iteration cap per start
  std::uint64_t seed = 0;

  double noise_init = 1e-2;     ///< initial noise variance (normalized units)
  double jitter_min = 1e-10;    ///< first rung of the Cholesky jitter ladder
  double jitter_max = 1e-6;     ///< last rung; failure beyond this throws
  bool normalize_outputs = true;

  // Log-space box bounds for [signal variance, lengthscales, noise variance].
  double log_signal_min = std::log(1e-8), log_signal_max = std::log(1e4);
  double log_length_min = std::log(1e-3), log_length_max = std::log(1e4);
  double log_noise_min = std::log(1e-10), log_noise_max = std::log(1e2);

  // Sparse-model knobs (ignored by the exact GP).
  int n_inducing = 0;             ///< 0 = min(256, ceil(n/4))
  bool optimize_inducing = true;  ///< optimize inducing locations with the bound
  int kmeans_iters = 15;
};

/// Optimization trace kept with a fitted model.
struct FitReport {
  std::vector<double> start_objectives;  ///< negative objective at each initialization
  double final_objective = std::numeric_limits<double>::infinity();  ///< negative, minimized
  int chosen_restart = -1;
  int iterations = 0;
  double train_seconds = 0.0;
};

namespace gpdetail {

/// Per-column affine normalizer; constant columns get unit scale.
struct Normalizer {
  Eigen::RowVectorXd mean;
  Eigen::RowVectorXd scale;

  static Normalizer fit(const Eigen::MatrixXd& data) {
    Normalizer n;
    n.mean = data.colwise().mean();
    const double rows = static_cast<double>(data.rows());
    n.scale = ((data.rowwise() - n.mean).array().square().colwise().sum() / std::max(1.0, rows - 1.0))
                  .sqrt();
    for (Eigen::Index j = 0; j < n.scale.size(); ++j)
      if (!(n.scale[j] > 1e-13)) n.scale[j] = 1.0;
    return n;
  }

  Eigen::MatrixXd apply(const Eigen::MatrixXd& data) const {
    return ((data.rowwise() - mean).array().rowwise() / scale.array()).matrix();
  }
};

/// Rows scaled by inverse lengthscales: X * diag(1/l).
inline Eigen::MatrixXd scale_rows(const Eigen::MatrixXd& rows, const Eigen::VectorXd& lengthscales) {
  return (rows.array().rowwise() / lengthscales.transpose().array()).matrix();
}

/**
 * @brief ARD squared-exponential cross-kernel from pre-scaled rows:
 *        K_ij = sf2 * exp(-0.5 * |xs_i - zs_j|^2).
 */
inline Eigen::MatrixXd se_kernel(const Eigen::MatrixXd& xs, const Eigen::MatrixXd& zs, double sf2) {
  const Eigen::VectorXd xn = xs.rowwise().squaredNorm();
  const Eigen::VectorXd zn = zs.rowwise().squaredNorm();
  Eigen::MatrixXd k = xs * zs.transpose();
  k *= -2.0;
  k.colwise() += xn;
  k.rowwise() += zn.transpose();
  return (sf2 * (-0.5 * k.array().max(0.0)).exp()).matrix();
}

/**
 * @brief Accumulates d/d(log l_d) of sum_ij W_ij K_ij for the SE kernel,
 *        where M = W .* K is supplied: grad_d = sum_ij M_ij (x_id - z_jd)^2 / l_d^2.
 *
 * Uses the expansion (x - z)^2 = x^2 - 2xz + z^2 so the cost is one GEMM.
 */
inline void add_length_grad(const Eigen::MatrixXd& weighted_kernel, const Eigen::MatrixXd& x,
                            const Eigen::MatrixXd& z, const Eigen::VectorXd& lengthscales,
                            Eigen::Ref<Eigen::VectorXd> grad) {
  const Eigen::VectorXd row_sums = weighted_kernel.rowwise().sum();
  const Eigen::VectorXd col_sums = weighted_kernel.colwise().sum();
  const Eigen::MatrixXd mz = weighted_kernel * z;  // n x p
  for (Eigen::Index d = 0; d < lengthscales.size(); ++d) {
    const double xx = x.col(d).array().square().matrix().dot(row_sums);
    const double zz = z.col(d).array().square().matrix().dot(col_sums);
    const double xz = x.col(d).dot(mz.col(d));
    grad[d] += (xx - 2.0 * xz + zz) / (lengthscales[d] * lengthscales[d]);
  }
}

/// Cholesky with an escalating diagonal jitter; throws past jitter_max.
inline Eigen::LLT<Eigen::MatrixXd> robust_llt(const Eigen::MatrixXd& m, double jitter_min,
                                              double jitter_max, double* jitter_used = nullptr) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() == Eigen::Success) {
    if (jitter_used) *jitter_used = 0.0;
    return llt;
  }
  for (double jitter = jitter_min; jitter <= jitter_max * (1.0 + 1e-12); jitter *= 10.0) {
    Eigen::MatrixXd bumped = m;
    bumped.diagonal().array() += jitter;
    llt.compute(bumped);
    if (llt.info() == Eigen::Success) {
      if (jitter_used) *jitter_used = jitter;
      return llt;
    }
  }
  throw std::runtime_error("robust_llt: factorization failed at maximum jitter");
}

/// k-means++ seeded Lloyd iterations; returns k cluster centers.
inline Eigen::MatrixXd kmeans_centers(const Eigen::MatrixXd& points, Eigen::Index k, Rng rng,
                                      int max_iters) {
  const Eigen::Index n = points.rows();
  if (k >= n) return points;
  Eigen::MatrixXd centers(k, points.cols());
  // k-means++ seeding.
  Eigen::VectorXd dist2 = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::infinity());
  centers.row(0) = points.row(static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n))));
  for (Eigen::Index c = 1; c < k; ++c) {
    for (Eigen::Index i = 0; i < n; ++i)
      dist2[i] = std::min(dist2[i], (points.row(i) - centers.row(c - 1)).squaredNorm());
    const double total = dist2.sum();
    if (!(total > 0.0)) {
      centers.row(c) = points.row(static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n))));
      continue;
    }
    double pick = rng.uniform() * total;
    Eigen::Index chosen = n - 1;
    for (Eigen::Index i = 0; i < n; ++i) {
      pick -= dist2[i];
      if (pick <= 0.0) {
        chosen = i;
        break;
      }
    }
    centers.row(c) = points.row(chosen);
  }
  // Lloyd updates.
  std::vector<Eigen::Index> assignment(static_cast<std::size_t>(n), 0);
  for (int it = 0; it < max_iters; ++it) {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::Index best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (Eigen::Index c = 0; c < k; ++c) {
        const double d = (points.row(i) - centers.row(c)).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (assignment[static_cast<std::size_t>(i)] != best) changed = true;
      assignment[static_cast<std::size_t>(i)] = best;
    }
    if (!changed && it > 0) break;
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, points.cols());
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(k);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(assignment[static_cast<std::size_t>(i)]) += points.row(i);
      counts[assignment[static_cast<std::size_t>(i)]] += 1.0;
    }
    for (Eigen::Index c = 0; c < k; ++c) {
      if (counts[c] > 0.0)
        centers.row(c) = sums.row(c) / counts[c];
      else
        centers.row(c) = points.row(static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n))));
    }
  }
  return centers;
}

}  // namespace gpdetail
}  // namespace f2narx
