/**
 * @file f2narx.hpp
 * @brief Function-on-function autoregressive surrogate of dynamical systems.
 *
 * The model predicts response features one time window ahead from the
 * current/previous excitation features, the previous response features, and
 * the system parameters. Training fits two PCA projectors on the window
 * matrices, a bank of exact GPs for the first window
 *   xi_y_1 = f0([xi_u_1, u(t0), y(t0), theta]),
 * and a bank of sparse GPs for the recursion
 *   xi_y_j = f([xi_u_j, xi_u_{j-1}, xi_y_{j-1}, theta]).
 *
 * Prediction rolls windows forward feeding predictive means; probabilistic
 * prediction additionally propagates a diagonal feature covariance with the
 * unscented transform, reconstructing pointwise trajectory variances through
 * the response basis. All batch entry points process records in fixed-size
 * chunks so results are identical for any thread count.
 */
#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "f2narx/gp.hpp"
#include "f2narx/metrics.hpp"
#include "f2narx/parallel.hpp"
#include "f2narx/pca.hpp"
#include "f2narx/random.hpp"
#include "f2narx/sgp.hpp"
#include "f2narx/ut.hpp"
#include "f2narx/windowing.hpp"

namespace f2narx {

struct F2NarxConfig {
  GpTrainConfig gp;    ///< first-window bank (exact GPs)
  GpTrainConfig sgp;   ///< recursive bank (sparse GPs)
  int n_threads = 0;   ///< 0 = hardware concurrency
  bool clamp_kappa = false;  ///< UT fallback kappa = max(3-p, 0)
  std::uint64_t seed = 0;

  F2NarxConfig() {
    gp.restarts = 4;
    gp.max_iters = 120;
    sgp.restarts = 2;
    sgp.max_iters = 80;
  }
};

/// Pointwise mean and variance trajectories; variance[0] is exactly zero.
struct ProbabilisticPrediction {
  Trajectory mean;
  Trajectory variance;
};

class F2NarxModel {
 public:
  F2NarxModel() = default;

  F2NarxModel(TimeGrid grid, WindowGeometry geo, PcaProjector pca_u, PcaProjector pca_y,
              std::vector<GpModel> f0_bank, std::vector<SgpModel> f_bank, Eigen::Index n_s,
              bool clamp_kappa, double train_seconds = 0.0)
      : grid_(grid),
        geo_(geo),
        pca_u_(std::move(pca_u)),
        pca_y_(std::move(pca_y)),
        f0_bank_(std::move(f0_bank)),
        f_bank_(std::move(f_bank)),
        n_s_(n_s),
        clamp_kappa_(clamp_kappa),
        train_seconds_(train_seconds) {
    const Eigen::Index m_y = pca_y_.retained();
    if (static_cast<Eigen::Index>(f0_bank_.size()) != m_y)
      throw std::invalid_argument("F2NarxModel: f0 bank size != m_y");
    if (!f_bank_.empty() && static_cast<Eigen::Index>(f_bank_.size()) != m_y)
      throw std::invalid_argument("F2NarxModel: f bank size != m_y");
    if (geo_.n_windows > 1 && f_bank_.empty())
      throw std::invalid_argument("F2NarxModel: recursive bank missing for multi-window geometry");
  }

  const TimeGrid& grid() const { return grid_; }
  const WindowGeometry& geometry() const { return geo_; }
  const PcaProjector& pca_u() const { return pca_u_; }
  const PcaProjector& pca_y() const { return pca_y_; }
  const std::vector<GpModel>& f0_bank() const { return f0_bank_; }
  const std::vector<SgpModel>& f_bank() const { return f_bank_; }
  Eigen::Index theta_dim() const { return n_s_; }
  Eigen::Index m_u() const { return pca_u_.retained(); }
  Eigen::Index m_y() const { return pca_y_.retained(); }
  bool clamp_kappa() const { return clamp_kappa_; }
  double train_seconds() const { return train_seconds_; }
  Eigen::Index first_window_input_dim() const { return m_u() + 2 + n_s_; }
  Eigen::Index recursive_input_dim() const { return 2 * m_u() + m_y() + n_s_; }

  // ---- single-record API -------------------------------------------------

  Trajectory predict_mean(const Eigen::VectorXd& theta, const Trajectory& u, double y0) const {
    return predict_mean_batch(theta.transpose(), {u}, Eigen::VectorXd::Constant(1, y0)).front();
  }

  ProbabilisticPrediction predict_probabilistic(const Eigen::VectorXd& theta, const Trajectory& u,
                                                double y0) const {
    return predict_probabilistic_batch(theta.transpose(), {u}, Eigen::VectorXd::Constant(1, y0))
        .front();
  }

  // ---- batch API (chunked; deterministic for any thread count) ------------

  std::vector<Trajectory> predict_mean_batch(const Eigen::MatrixXd& thetas,
                                             const std::vector<Trajectory>& excitations,
                                             const Eigen::VectorXd& y0s, int n_threads = 1) const {
    check_batch(thetas, excitations, y0s);
    const std::size_t count = excitations.size();
    std::vector<Eigen::VectorXd> values(count);
    const std::size_t n_chunks = (count + kChunk - 1) / kChunk;
    parallel_for(n_chunks, n_threads, [&](std::size_t c0, std::size_t c1) {
      for (std::size_t c = c0; c < c1; ++c) {
        const std::size_t lo = c * kChunk;
        const std::size_t hi = std::min(count, lo + kChunk);
        roll_chunk(thetas, excitations, y0s, lo, hi, &values, nullptr);
      }
    });
    std::vector<Trajectory> out;
    out.reserve(count);
    for (auto& v : values) out.emplace_back(grid_, std::move(v));
    return out;
  }

  std::vector<ProbabilisticPrediction> predict_probabilistic_batch(
      const Eigen::MatrixXd& thetas, const std::vector<Trajectory>& excitations,
      const Eigen::VectorXd& y0s, int n_threads = 1) const {
    check_batch(thetas, excitations, y0s);
    const std::size_t count = excitations.size();
    std::vector<Eigen::VectorXd> means(count);
    std::vector<Eigen::VectorXd> vars(count);
    const std::size_t n_chunks = (count + kChunk - 1) / kChunk;
    parallel_for(n_chunks, n_threads, [&](std::size_t c0, std::size_t c1) {
      for (std::size_t c = c0; c < c1; ++c) {
        const std::size_t lo = c * kChunk;
        const std::size_t hi = std::min(count, lo + kChunk);
        roll_chunk(thetas, excitations, y0s, lo, hi, &means, &vars);
      }
    });
    std::vector<ProbabilisticPrediction> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i)
      out.push_back({Trajectory(grid_, std::move(means[i])), Trajectory(grid_, std::move(vars[i]))});
    return out;
  }

  /**
   * @brief Monte-Carlo quadrature of the diagonal-Gaussian recursion itself:
   *        before each window the carried feature samples are replaced by
   *        fresh independent draws from their fitted per-feature Gaussian, so
   *        cross-window sample correlations are discarded exactly as the
   *        sigma-point estimator assumes. Sampling error aside, this is the
   *        quantity the unscented transform approximates window by window.
   */
  ProbabilisticPrediction mcs_recursion_oracle(const Eigen::VectorXd& theta, const Trajectory& u,
                                               double y0, int n_samples, Rng rng) const {
    return mcs_oracle_impl(theta, u, y0, n_samples, std::move(rng), true);
  }

  /**
   * @brief Monte-Carlo propagation oracle: empirical mean/variance over
   *        autoregressive rollouts that sample every window's features from
   *        the per-feature posterior Gaussians and carry them forward.
   */
  ProbabilisticPrediction mcs_variance_oracle(const Eigen::VectorXd& theta, const Trajectory& u,
                                              double y0, int n_samples, Rng rng) const {
    return mcs_oracle_impl(theta, u, y0, n_samples, std::move(rng), false);
  }

 private:
  ProbabilisticPrediction mcs_oracle_impl(const Eigen::VectorXd& theta, const Trajectory& u,
                                          double y0, int n_samples, Rng rng,
                                          bool redraw_marginals) const {
    if (n_samples < 2) throw std::invalid_argument("mcs_variance_oracle: need >= 2 samples");
    check_batch(theta.transpose(), {u}, Eigen::VectorXd::Constant(1, y0));
    const auto n_t = static_cast<Eigen::Index>(grid_.size());
    const Eigen::Index my = m_y();
    const Eigen::Index n_w = geo_.n_windows;
    const Eigen::MatrixXd fu = pca_u_.project(segment_record(u.values(), geo_));

    Eigen::VectorXd sum = Eigen::VectorXd::Zero(n_t);
    Eigen::VectorXd sum_sq = Eigen::VectorXd::Zero(n_t);

    // First-window posterior is shared by every rollout.
    Eigen::VectorXd mu0(my), var0(my);
    {
      Eigen::MatrixXd x0(1, first_window_input_dim());
      x0 << fu.row(0), u[0], y0, theta.transpose();
      Eigen::VectorXd m1(1), v1(1);
      for (Eigen::Index k = 0; k < my; ++k) {
        f0_bank_[static_cast<std::size_t>(k)].predict_batch(x0, m1, v1);
        mu0[k] = m1[0];
        var0[k] = v1[0];
      }
    }

    const int chunk = std::min(n_samples, 1024);
    Eigen::MatrixXd paths;  // rollouts x n_t
    for (int done = 0; done < n_samples; done += chunk) {
      const int r = std::min(chunk, n_samples - done);
      paths.resize(r, n_t);
      paths.col(0).setConstant(y0);
      Eigen::MatrixXd xi(r, my);
      for (Eigen::Index k = 0; k < my; ++k) {
        const double sd = std::sqrt(std::max(0.0, var0[k]));
        for (int i = 0; i < r; ++i) xi(i, k) = mu0[k] + sd * rng.normal();
      }
      write_window_rows(pca_y_.inverse_project(xi), 0, paths);
      Eigen::MatrixXd x(r, recursive_input_dim());
      Eigen::VectorXd mean_col(r), var_col(r);
      for (Eigen::Index w = 1; w < n_w; ++w) {
        if (redraw_marginals) {
          // Replace carried samples by draws from their fitted diagonal
          // Gaussian: the recursion's own input law.
          for (Eigen::Index k = 0; k < my; ++k) {
            const double m = xi.col(k).mean();
            const double sd = std::sqrt(std::max(0.0, (xi.col(k).array() - m).square().mean()));
            for (int i = 0; i < r; ++i) xi(i, k) = m + sd * rng.normal();
          }
        }
        x.leftCols(m_u()) = fu.row(w).replicate(r, 1);
        x.middleCols(m_u(), m_u()) = fu.row(w - 1).replicate(r, 1);
        x.middleCols(2 * m_u(), my) = xi;
        x.rightCols(n_s_) = theta.transpose().replicate(r, 1);
        for (Eigen::Index k = 0; k < my; ++k) {
          f_bank_[static_cast<std::size_t>(k)].predict_batch(x, mean_col, var_col);
          for (int i = 0; i < r; ++i)
            xi(i, k) = mean_col[i] + std::sqrt(std::max(0.0, var_col[i])) * rng.normal();
        }
        write_window_rows(pca_y_.inverse_project(xi), w, paths);
      }
      sum += paths.colwise().sum().transpose();
      sum_sq += paths.array().square().colwise().sum().matrix().transpose();
    }

    const double n = static_cast<double>(n_samples);
    Eigen::VectorXd mean = sum / n;
    Eigen::VectorXd variance =
        ((sum_sq.array() / n) - mean.array().square()).max(0.0).matrix();
    variance[0] = 0.0;
    return {Trajectory(grid_, std::move(mean)), Trajectory(grid_, std::move(variance))};
  }

 private:
  static constexpr std::size_t kChunk = 256;

  void check_batch(const Eigen::MatrixXd& thetas, const std::vector<Trajectory>& excitations,
                   const Eigen::VectorXd& y0s) const {
    if (thetas.rows() != static_cast<Eigen::Index>(excitations.size()) ||
        y0s.size() != static_cast<Eigen::Index>(excitations.size()))
      throw std::invalid_argument("predict: batch sizes differ");
    if (thetas.cols() != n_s_) throw std::invalid_argument("predict: theta dimension mismatch");
    for (const auto& u : excitations)
      if (!(u.grid() == grid_)) throw std::invalid_argument("predict: excitation grid mismatch");
  }

  /// Scatters reconstructed window rows into per-record trajectories.
  void scatter_rows(const Eigen::MatrixXd& rows, Eigen::Index w, std::size_t lo,
                    std::vector<Eigen::VectorXd>& out) const {
    const Eigen::Index start = geo_.window_start(w);
    for (Eigen::Index i = 0; i < rows.rows(); ++i)
      out[lo + static_cast<std::size_t>(i)].segment(start, geo_.n_per_window) = rows.row(i);
  }

  /// Same, for a matrix of rollout paths (rollouts x n_t).
  void write_window_rows(const Eigen::MatrixXd& rows, Eigen::Index w, Eigen::MatrixXd& paths) const {
    paths.middleCols(geo_.window_start(w), geo_.n_per_window) = rows;
  }

  /**
   * @brief Rolls records [lo, hi). Fills means always; when vars != nullptr
   *        also propagates feature covariances with the unscented transform.
   */
  void roll_chunk(const Eigen::MatrixXd& thetas, const std::vector<Trajectory>& excitations,
                  const Eigen::VectorXd& y0s, std::size_t lo, std::size_t hi,
                  std::vector<Eigen::VectorXd>* means, std::vector<Eigen::VectorXd>* vars) const {
    const auto b = static_cast<Eigen::Index>(hi - lo);
    const auto n_t = static_cast<Eigen::Index>(grid_.size());
    const Eigen::Index mu_dim = m_u();
    const Eigen::Index my = m_y();
    const Eigen::Index n_w = geo_.n_windows;
    const bool probabilistic = vars != nullptr;

    // Excitation features for the chunk, record-major.
    Eigen::MatrixXd fu(b * n_w, mu_dim);
    for (Eigen::Index i = 0; i < b; ++i)
      fu.middleRows(i * n_w, n_w) =
          pca_u_.project(segment_record(excitations[lo + static_cast<std::size_t>(i)].values(), geo_));

    for (Eigen::Index i = 0; i < b; ++i) {
      (*means)[lo + static_cast<std::size_t>(i)].resize(n_t);
      (*means)[lo + static_cast<std::size_t>(i)][0] = y0s[static_cast<Eigen::Index>(lo) + i];
      if (probabilistic) {
        (*vars)[lo + static_cast<std::size_t>(i)].setZero(n_t);
      }
    }

    // Window 1: exact-GP bank on [xi_u_1 | u(t0) | y(t0) | theta].
    Eigen::MatrixXd x0(b, first_window_input_dim());
    for (Eigen::Index i = 0; i < b; ++i) {
      x0.block(i, 0, 1, mu_dim) = fu.row(i * n_w);
      x0(i, mu_dim) = excitations[lo + static_cast<std::size_t>(i)][0];
      x0(i, mu_dim + 1) = y0s[static_cast<Eigen::Index>(lo) + i];
      x0.block(i, mu_dim + 2, 1, n_s_) = thetas.row(static_cast<Eigen::Index>(lo) + i);
    }
    Eigen::MatrixXd feat_mean(b, my), feat_var(b, my);
    Eigen::VectorXd col_mean(b), col_var(b);
    for (Eigen::Index k = 0; k < my; ++k) {
      if (probabilistic) {
        f0_bank_[static_cast<std::size_t>(k)].predict_batch(x0, col_mean, col_var);
        feat_var.col(k) = col_var;
      } else {
        f0_bank_[static_cast<std::size_t>(k)].predict_mean_batch(x0, col_mean);
      }
      feat_mean.col(k) = col_mean;
    }
    scatter_rows(pca_y_.inverse_project(feat_mean), 0, lo, *means);
    if (probabilistic) scatter_rows(pca_y_.inverse_project_variance(feat_var), 0, lo, *vars);

    if (n_w == 1) return;

    // Recursive windows. The center chain always goes through a B x p batch
    // call, so the probabilistic mean equals the plain mean prediction bit
    // for bit. Sigma points expand only the m_y previous-feature
    // coordinates; every other input coordinate has zero variance and its
    // collapsed pair of sigma points folds into the center weight.
    const UtWeights w_ut = UtWeights::make(recursive_input_dim(), clamp_kappa_);
    // The 2(p - m_y) sigma points of the zero-variance coordinates coincide
    // with the center; their weight folds in exactly (all weights sum to 1).
    const double center_weight = 1.0 - 2.0 * static_cast<double>(my) * w_ut.alpha_side;
    const Eigen::Index s_count = 2 * my;  // off-center sigma points per record
    Eigen::MatrixXd x(b, recursive_input_dim());
    Eigen::MatrixXd x_sig, sig_mean, sig_var;
    Eigen::VectorXd big_mean, big_var;
    if (probabilistic) {
      x_sig.resize(b * s_count, recursive_input_dim());
      sig_mean.resize(b * s_count, my);
      sig_var.resize(b * s_count, my);
      big_mean.resize(b * s_count);
      big_var.resize(b * s_count);
    }
    Eigen::MatrixXd next_mean(b, my), center_var(b, my);

    for (Eigen::Index w = 1; w < n_w; ++w) {
      for (Eigen::Index i = 0; i < b; ++i) {
        x.block(i, 0, 1, mu_dim) = fu.row(i * n_w + w);
        x.block(i, mu_dim, 1, mu_dim) = fu.row(i * n_w + w - 1);
        x.block(i, 2 * mu_dim, 1, my) = feat_mean.row(i);
        x.block(i, 2 * mu_dim + my, 1, n_s_) = thetas.row(static_cast<Eigen::Index>(lo) + i);
      }
      if (probabilistic) {
        for (Eigen::Index i = 0; i < b; ++i) {
          const Eigen::Index base = i * s_count;
          for (Eigen::Index s = 0; s < s_count; ++s) x_sig.row(base + s) = x.row(i);
          for (Eigen::Index j = 0; j < my; ++j) {
            const double shift = std::sqrt(w_ut.scale * std::max(0.0, feat_var(i, j)));
            x_sig(base + 2 * j, 2 * mu_dim + j) += shift;
            x_sig(base + 2 * j + 1, 2 * mu_dim + j) -= shift;
          }
        }
      }
      for (Eigen::Index k = 0; k < my; ++k) {
        if (probabilistic) {
          f_bank_[static_cast<std::size_t>(k)].predict_batch(x, col_mean, col_var);
          center_var.col(k) = col_var;
          f_bank_[static_cast<std::size_t>(k)].predict_batch(x_sig, big_mean, big_var);
          sig_mean.col(k) = big_mean;
          sig_var.col(k) = big_var;
        } else {
          f_bank_[static_cast<std::size_t>(k)].predict_mean_batch(x, col_mean);
        }
        next_mean.col(k) = col_mean;
      }
      if (probabilistic) {
        for (Eigen::Index i = 0; i < b; ++i) {
          const Eigen::Index base = i * s_count;
          for (Eigen::Index k = 0; k < my; ++k) {
            double estimate = center_weight * center_var(i, k);
            const double center = next_mean(i, k);
            for (Eigen::Index s = 0; s < s_count; ++s) {
              const double delta = sig_mean(base + s, k) - center;
              estimate += w_ut.alpha_side * (sig_var(base + s, k) + delta * delta);
            }
            feat_var(i, k) = std::max(estimate, 0.0);
          }
        }
      }
      feat_mean = next_mean;
      scatter_rows(pca_y_.inverse_project(feat_mean), w, lo, *means);
      if (probabilistic) scatter_rows(pca_y_.inverse_project_variance(feat_var), w, lo, *vars);
    }

    // The initial value is known exactly.
    if (probabilistic)
      for (Eigen::Index i = 0; i < b; ++i) (*vars)[lo + static_cast<std::size_t>(i)][0] = 0.0;
  }

  TimeGrid grid_{0.0, 1.0, 2};
  WindowGeometry geo_;
  PcaProjector pca_u_;
  PcaProjector pca_y_;
  std::vector<GpModel> f0_bank_;
  std::vector<SgpModel> f_bank_;
  Eigen::Index n_s_ = 0;
  bool clamp_kappa_ = false;
  double train_seconds_ = 0.0;
};

/**
 * @brief Trains the composite surrogate on an experimental design with the
 *        given window width and retained-variance threshold.
 */
inline F2NarxModel train(const Dataset& ds, double window_width, double eps_lambda,
                         const F2NarxConfig& cfg = {}) {
  if (ds.empty()) throw std::invalid_argument("train: dataset is empty");
  const auto t_start = std::chrono::steady_clock::now();
  const WindowGeometry geo = make_geometry(window_width, ds.grid());
  const WindowMatrices wm = segment(ds, geo);
  PcaProjector pca_u = fit_pca(wm.excitation, eps_lambda);
  PcaProjector pca_y = fit_pca(wm.response, eps_lambda);
  const Eigen::MatrixXd features_u = pca_u.project(wm.excitation);
  const Eigen::MatrixXd features_y = pca_y.project(wm.response);
  const Eigen::Index my = pca_y.retained();

  const FirstWindowData first = assemble_first_window_training(ds, geo, features_u, features_y);
  std::vector<GpModel> f0_bank(static_cast<std::size_t>(my));
  Rng seeder(cfg.seed);
  parallel_for(static_cast<std::size_t>(my), cfg.n_threads, [&](std::size_t k0, std::size_t k1) {
    for (std::size_t k = k0; k < k1; ++k) {
      GpTrainConfig gp_cfg = cfg.gp;
      gp_cfg.seed = seeder.substream("f0", k).next_u64();
      f0_bank[k] = fit_gp(first.inputs, first.targets.col(static_cast<Eigen::Index>(k)), gp_cfg);
    }
  });

  std::vector<SgpModel> f_bank;
  if (geo.n_windows > 1) {
    const RecursiveData recursive = assemble_recursive_training(ds, geo, features_u, features_y);
    f_bank.resize(static_cast<std::size_t>(my));
    parallel_for(static_cast<std::size_t>(my), cfg.n_threads, [&](std::size_t k0, std::size_t k1) {
      for (std::size_t k = k0; k < k1; ++k) {
        GpTrainConfig sgp_cfg = cfg.sgp;
        sgp_cfg.seed = seeder.substream("f", k).next_u64();
        f_bank[k] = fit_sgp(recursive.inputs, recursive.targets.col(static_cast<Eigen::Index>(k)),
                            sgp_cfg.n_inducing, sgp_cfg);
      }
    });
  }

  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  F2NarxModel model(ds.grid(), geo, std::move(pca_u), std::move(pca_y), std::move(f0_bank),
                    std::move(f_bank), ds.theta_dim(), cfg.clamp_kappa, seconds);

  // Self-check: one training record must roll out to a finite trajectory.
  const Trajectory probe =
      model.predict_mean(ds.params().front().theta(), ds.excitations().front(),
                         ds.responses().front()[0]);
  if (!probe.values().allFinite()) throw std::runtime_error("train: self-check produced non-finite output");
  return model;
}

/// Cross-validation grid search over (T, eps_lambda).
struct HyperparameterSelection {
  double window_width = 0.0;
  double eps_lambda = 0.0;
  Eigen::MatrixXd mean_errors;  ///< T_grid.size() x eps_grid.size(), +inf where training failed
};

/**
 * @brief Picks the (T, eps) pair minimizing mean out-of-fold NMSE of the mean
 *        prediction; ties break toward smaller T, then larger eps.
 */
inline HyperparameterSelection select_hyperparameters(const Dataset& ds,
                                                      const std::vector<double>& width_grid,
                                                      const std::vector<double>& eps_grid,
                                                      int k_folds, const F2NarxConfig& cfg = {}) {
  if (width_grid.empty() || eps_grid.empty())
    throw std::invalid_argument("select_hyperparameters: empty grid");
  if (k_folds < 2) throw std::invalid_argument("select_hyperparameters: need k_folds >= 2");
  if (static_cast<std::size_t>(k_folds) > ds.size())
    throw std::invalid_argument("select_hyperparameters: more folds than records");

  // Deterministic shuffled fold assignment.
  std::vector<std::size_t> order(ds.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng = Rng(cfg.seed).substream("cv-folds");
  for (std::size_t i = order.size(); i > 1; --i)
    std::swap(order[i - 1], order[rng.below(i)]);

  HyperparameterSelection best;
  best.mean_errors = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(width_grid.size()),
                                               static_cast<Eigen::Index>(eps_grid.size()),
                                               std::numeric_limits<double>::infinity());
  double best_error = std::numeric_limits<double>::infinity();
  bool any_trained = false;

  for (std::size_t wi = 0; wi < width_grid.size(); ++wi) {
    for (std::size_t ei = 0; ei < eps_grid.size(); ++ei) {
      double error_sum = 0.0;
      std::size_t error_count = 0;
      bool failed = false;
      for (int fold = 0; fold < k_folds && !failed; ++fold) {
        std::vector<std::size_t> train_idx, test_idx;
        for (std::size_t i = 0; i < order.size(); ++i) {
          if (static_cast<int>(i % static_cast<std::size_t>(k_folds)) == fold)
            test_idx.push_back(order[i]);
          else
            train_idx.push_back(order[i]);
        }
        try {
          const Dataset train_ds = ds.subset(train_idx);
          const Dataset test_ds = ds.subset(test_idx);
          const F2NarxModel model = train(train_ds, width_grid[wi], eps_grid[ei], cfg);
          Eigen::MatrixXd thetas(test_ds.size(), test_ds.theta_dim());
          Eigen::VectorXd y0s(test_ds.size());
          for (std::size_t i = 0; i < test_ds.size(); ++i) {
            thetas.row(static_cast<Eigen::Index>(i)) = test_ds.params()[i].theta().transpose();
            y0s[static_cast<Eigen::Index>(i)] = test_ds.responses()[i][0];
          }
          const std::vector<Trajectory> predictions =
              model.predict_mean_batch(thetas, test_ds.excitations(), y0s, cfg.n_threads);
          for (std::size_t i = 0; i < test_ds.size(); ++i) {
            error_sum += nmse(test_ds.responses()[i], predictions[i]);
            ++error_count;
          }
        } catch (const std::exception&) {
          failed = true;
        }
      }
      if (failed || error_count == 0) continue;
      const double mean_error = error_sum / static_cast<double>(error_count);
      best.mean_errors(static_cast<Eigen::Index>(wi), static_cast<Eigen::Index>(ei)) = mean_error;
      any_trained = true;
      const bool better =
          mean_error < best_error ||
          (mean_error == best_error && (width_grid[wi] < best.window_width ||
                                        (width_grid[wi] == best.window_width &&
                                         eps_grid[ei] > best.eps_lambda)));
      if (better) {
        best_error = mean_error;
        best.window_width = width_grid[wi];
        best.eps_lambda = eps_grid[ei];
      }
    }
  }
  if (!any_trained) throw std::runtime_error("select_hyperparameters: every grid point failed to train");
  return best;
}

}  // namespace f2narx
