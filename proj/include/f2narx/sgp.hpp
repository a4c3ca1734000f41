/**
 * @file sgp.hpp
 * @brief Sparse variational Gaussian-process regression (inducing points).
 *
 * Implements the collapsed variational lower bound
 *   L = log N(y | 0, Q + sn2 I) - 1/(2 sn2) tr(K - Q),   Q = Knm Kmm^{-1} Kmn,
 * maximized over kernel hyperparameters, noise, and (optionally) the
 * inducing locations, all with analytic gradients. With the inducing set
 * pinned to the training inputs the posterior coincides with the exact GP,
 * which the oracle suite exploits.
 *
 * Everything is expressed through
 *   A = Lm^{-1} Kmn / sn,  B = I + A A^T  (Lm = chol(Kmm)),
 * so each bound/gradient evaluation costs O(n m^2 + n m p).
 */
#pragma once

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <stdexcept>
#include <utility>

#include "f2narx/gp.hpp"
#include "f2narx/gp_common.hpp"
#include "f2narx/optim.hpp"

namespace f2narx {

/// Prediction-sufficient state of a fitted sparse GP; the serialization unit.
struct SgpState {
  gpdetail::Normalizer x_norm;
  double y_mean = 0.0;
  double y_scale = 1.0;
  double signal_variance = 1.0;
  Eigen::VectorXd lengthscales;
  double noise_variance = 1e-2;
  Eigen::MatrixXd inducing;         ///< Z, normalized inputs (m x p)
  Eigen::MatrixXd inducing_scaled;  ///< Z scaled by 1/l
  Eigen::MatrixXd chol_kmm;         ///< Lm with Lm Lm^T = Kmm + jitter
  Eigen::MatrixXd chol_b;           ///< Lb with Lb Lb^T = I + A A^T
  Eigen::VectorXd mean_weights;     ///< w: predictive mean is k_*m . w
};

namespace gpdetail {

/// Shared factor computation for the bound, its gradient, and model finalization.
struct SgpFactors {
  Eigen::MatrixXd kmm;  // m x m kernel (no jitter)
  Eigen::MatrixXd knm;  // n x m kernel
  Eigen::LLT<Eigen::MatrixXd> llt_kmm;
  Eigen::MatrixXd a;       // m x n
  Eigen::LLT<Eigen::MatrixXd> llt_b;
  Eigen::VectorXd a_y;     // A y
  Eigen::VectorXd c;       // Lb^{-1} A y
  double bound_neg = 0.0;  // negative lower bound (to minimize)
};

inline bool sgp_factorize(const Eigen::MatrixXd& xs, const Eigen::MatrixXd& zs, double sf2,
                          double sn2, const Eigen::VectorXd& y, double jitter_min,
                          double jitter_max, SgpFactors& out) {
  const Eigen::Index n = xs.rows();
  out.kmm = se_kernel(zs, zs, sf2);
  Eigen::MatrixXd kmm_j = out.kmm;
  kmm_j.diagonal().array() += jitter_min;  // constant, so kernel gradients stay exact
  try {
    out.llt_kmm = robust_llt(kmm_j, jitter_min, jitter_max);
  } catch (const std::runtime_error&) {
    return false;
  }
  out.knm = se_kernel(xs, zs, sf2);
  const double inv_sn = 1.0 / std::sqrt(sn2);
  out.a = out.llt_kmm.matrixL().solve(out.knm.transpose()) * inv_sn;  // m x n
  Eigen::MatrixXd b = out.a * out.a.transpose();
  b.diagonal().array() += 1.0;
  out.llt_b.compute(b);
  if (out.llt_b.info() != Eigen::Success) return false;
  out.a_y = out.a * y;
  out.c = out.llt_b.matrixL().solve(out.a_y);

  const double log_det_b = 2.0 * out.llt_b.matrixLLT().diagonal().array().log().sum();
  const double quad = (y.squaredNorm() - out.c.squaredNorm()) / sn2;
  const double trace_term =
      (static_cast<double>(n) * sf2 - sn2 * out.a.squaredNorm()) / (2.0 * sn2);
  out.bound_neg = 0.5 * (static_cast<double>(n) * std::log(2.0 * M_PI) + log_det_b +
                         static_cast<double>(n) * std::log(sn2) + quad) +
                  trace_term;
  return std::isfinite(out.bound_neg);
}

/**
 * @brief Negative collapsed bound and gradient.
 *
 * psi = [log sf2, log l (p), log sn2, vec(Z) (m*p, row-major per point)]
 * when inducing locations are free; the Z block is absent when pinned.
 */
struct SgpObjective {
  const Eigen::MatrixXd& x;  // normalized inputs, n x p
  const Eigen::VectorXd& y;  // normalized targets
  Eigen::Index n_inducing;
  bool optimize_inducing;
  const Eigen::MatrixXd* fixed_inducing;  // used when !optimize_inducing
  double jitter_min;
  double jitter_max;

  Eigen::Index param_count() const {
    return x.cols() + 2 + (optimize_inducing ? n_inducing * x.cols() : 0);
  }

  Eigen::MatrixXd inducing_from(const Eigen::VectorXd& psi) const {
    if (!optimize_inducing) return *fixed_inducing;
    const Eigen::Index p = x.cols();
    return Eigen::Map<const Eigen::MatrixXd>(psi.data() + p + 2, n_inducing, p);
  }

  double operator()(const Eigen::VectorXd& psi, Eigen::VectorXd& grad) const {
    const Eigen::Index n = x.rows();
    const Eigen::Index p = x.cols();
    const Eigen::Index m = n_inducing;
    const double sf2 = std::exp(psi[0]);
    const Eigen::VectorXd lengths = psi.segment(1, p).array().exp();
    const double sn2 = std::exp(psi[p + 1]);
    grad.setZero(psi.size());

    const Eigen::MatrixXd z = inducing_from(psi);
    const Eigen::MatrixXd xs = scale_rows(x, lengths);
    const Eigen::MatrixXd zs = scale_rows(z, lengths);
    SgpFactors f;
    if (!sgp_factorize(xs, zs, sf2, sn2, y, jitter_min, jitter_max, f))
      return std::numeric_limits<double>::infinity();

    // beta = P^{-1} y with P = Q + sn2 I, via Woodbury.
    const Eigen::VectorXd w_raw = f.llt_b.solve(f.a_y);  // B^{-1} A y
    const Eigen::VectorXd beta = (y - f.a.transpose() * w_raw) / sn2;

    // W = Kmm^{-1} Kmn = sn * Lm^{-T} A.
    const Eigen::MatrixXd w_mat =
        std::sqrt(sn2) * f.llt_kmm.matrixU().solve(f.a);        // m x n
    const Eigen::VectorXd w_beta = w_mat * beta;                 // m
    const Eigen::MatrixXd awt = f.a * w_mat.transpose();         // m x m
    const Eigen::MatrixXd d = f.llt_b.solve(awt);                // B^{-1} A W^T

    // dL/dKnm and dL/dKmm collapse to compact forms (the 1/sn2 W^T terms cancel).
    Eigen::MatrixXd grad_knm = beta * w_beta.transpose();        // n x m
    grad_knm.noalias() += f.a.transpose() * d / sn2;
    Eigen::MatrixXd grad_kmm = -0.5 * w_beta * w_beta.transpose();
    grad_kmm.noalias() -= awt.transpose() * d / (2.0 * sn2);

    const double trace_q = sn2 * f.a.squaredNorm();
    const double sum_kdiag = static_cast<double>(n) * sf2;
    const Eigen::MatrixXd a_b = f.llt_b.matrixL().solve(f.a);
    const double trace_p_inv = (static_cast<double>(n) - a_b.squaredNorm()) / sn2;
    const double trace_g = beta.squaredNorm() - trace_p_inv;

    // Gradients of L; negate at the end since we minimize -L.
    const Eigen::MatrixXd m_nm = grad_knm.cwiseProduct(f.knm);
    const Eigen::MatrixXd m_mm = grad_kmm.cwiseProduct(f.kmm);
    double g_sf2 = m_nm.sum() + m_mm.sum() - sum_kdiag / (2.0 * sn2);
    double g_sn2 = (0.5 * trace_g + (sum_kdiag - trace_q) / (2.0 * sn2 * sn2)) * sn2;

    Eigen::VectorXd g_lengths = Eigen::VectorXd::Zero(p);
    add_length_grad(m_nm, x, z, lengths, g_lengths);
    add_length_grad(m_mm, z, z, lengths, g_lengths);

    grad[0] = -g_sf2;
    grad.segment(1, p) = -g_lengths;
    grad[p + 1] = -g_sn2;

    if (optimize_inducing) {
      // d/dZ from Knm: [(Mnm^T X) - diag(colsum) Z] / l^2; from Kmm via the
      // symmetrized weight.
      Eigen::MatrixXd z_grad = m_nm.transpose() * x;                      // m x p
      z_grad.noalias() -= m_nm.colwise().sum().transpose().asDiagonal() * z;
      const Eigen::MatrixXd m_mm_sym = m_mm + m_mm.transpose();
      z_grad.noalias() += m_mm_sym * z;
      z_grad.noalias() -= m_mm_sym.rowwise().sum().asDiagonal() * z;
      z_grad.array().rowwise() /= lengths.transpose().array().square();
      Eigen::Map<Eigen::MatrixXd>(grad.data() + p + 2, m, p) = -z_grad;
    }
    return f.bound_neg;
  }
};

}  // namespace gpdetail

class SgpModel {
 public:
  SgpModel() = default;
  explicit SgpModel(SgpState state, FitReport report = {})
      : state_(std::move(state)), report_(std::move(report)) {
    if (state_.mean_weights.size() != state_.inducing.rows())
      throw std::invalid_argument("SgpModel: inconsistent state");
  }

  const SgpState& state() const { return state_; }
  const FitReport& report() const { return report_; }
  Eigen::Index n_inducing() const { return state_.inducing.rows(); }
  Eigen::Index input_dim() const { return state_.lengthscales.size(); }
  /// Learned variances in the units of the (unnormalized) targets.
  double signal_variance() const { return state_.signal_variance * state_.y_scale * state_.y_scale; }
  double noise_variance() const { return state_.noise_variance * state_.y_scale * state_.y_scale; }

  std::pair<double, double> predict(const Eigen::VectorXd& x) const {
    Eigen::VectorXd mean(1), variance(1);
    predict_batch(x.transpose(), mean, variance);
    return {mean[0], variance[0]};
  }

  void predict_batch(const Eigen::Ref<const Eigen::MatrixXd>& x, Eigen::Ref<Eigen::VectorXd> means,
                     Eigen::Ref<Eigen::VectorXd> variances) const {
    const Eigen::MatrixXd cross = cross_kernel(x);  // B x m
    means = cross * state_.mean_weights;
    const Eigen::MatrixXd t1 =
        state_.chol_kmm.triangularView<Eigen::Lower>().solve(cross.transpose());
    const Eigen::MatrixXd t2 = state_.chol_b.triangularView<Eigen::Lower>().solve(t1);
    const Eigen::ArrayXd raw = state_.signal_variance + state_.noise_variance -
                               t1.colwise().squaredNorm().transpose().array() +
                               t2.colwise().squaredNorm().transpose().array();
    variances = raw.max(0.0).matrix();
    means = (means.array() * state_.y_scale + state_.y_mean).matrix();
    variances *= state_.y_scale * state_.y_scale;
  }

  void predict_mean_batch(const Eigen::Ref<const Eigen::MatrixXd>& x,
                          Eigen::Ref<Eigen::VectorXd> means) const {
    means = cross_kernel(x) * state_.mean_weights;
    means = (means.array() * state_.y_scale + state_.y_mean).matrix();
  }

 private:
  Eigen::MatrixXd cross_kernel(const Eigen::Ref<const Eigen::MatrixXd>& x) const {
    const Eigen::MatrixXd xs =
        gpdetail::scale_rows(state_.x_norm.apply(x), state_.lengthscales);
    return gpdetail::se_kernel(xs, state_.inducing_scaled, state_.signal_variance);
  }

  SgpState state_;
  FitReport report_;
};

namespace gpdetail {

/// Builds the prediction state for given hyperparameters and inducing set.
inline SgpState finalize_sgp(const Normalizer& x_norm, double y_mean, double y_scale,
                             const Eigen::MatrixXd& xn, const Eigen::VectorXd& yn,
                             const Eigen::MatrixXd& z, double sf2,
                             const Eigen::VectorXd& lengths, double sn2, double jitter_min,
                             double jitter_max) {
  SgpState state;
  state.x_norm = x_norm;
  state.y_mean = y_mean;
  state.y_scale = y_scale;
  state.signal_variance = sf2;
  state.lengthscales = lengths;
  state.noise_variance = sn2;
  state.inducing = z;
  const Eigen::MatrixXd xs = scale_rows(xn, lengths);
  state.inducing_scaled = scale_rows(z, lengths);
  SgpFactors f;
  if (!sgp_factorize(xs, state.inducing_scaled, sf2, sn2, yn, jitter_min, jitter_max, f))
    throw std::runtime_error("fit_sgp: factorization failed for the selected hyperparameters");
  state.chol_kmm = f.llt_kmm.matrixL();
  state.chol_b = f.llt_b.matrixL();
  // w = Lm^{-T} B^{-1} A y / sn.
  state.mean_weights =
      f.llt_kmm.matrixU().solve(f.llt_b.solve(f.a_y)) / std::sqrt(sn2);
  return state;
}

}  // namespace gpdetail

/**
 * @brief Fits a sparse variational GP. n_inducing = 0 picks
 *        min(256, ceil(n/4)); values >= n pin the inducing set to the data.
 */
inline SgpModel fit_sgp(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, int n_inducing,
                        const GpTrainConfig& cfg = {}) {
  if (x.rows() < 2) throw std::invalid_argument("fit_sgp: need at least 2 rows");
  if (x.rows() != y.size()) throw std::invalid_argument("fit_sgp: row count mismatch");
  if (!x.allFinite() || !y.allFinite()) throw std::invalid_argument("fit_sgp: non-finite data");
  const auto t_start = std::chrono::steady_clock::now();
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  Eigen::Index m = n_inducing > 0 ? n_inducing
                                  : std::min<Eigen::Index>(256, (n + 3) / 4);
  m = std::min(m, n);

  gpdetail::Normalizer x_norm = gpdetail::Normalizer::fit(x);
  const double y_mean = cfg.normalize_outputs ? y.mean() : 0.0;
  const double y_sd = std::sqrt((y.array() - y.mean()).square().sum() /
                                std::max<double>(1.0, static_cast<double>(n) - 1.0));
  const double y_scale = (cfg.normalize_outputs && y_sd > 1e-13) ? y_sd : 1.0;
  const Eigen::MatrixXd xn = x_norm.apply(x);
  const Eigen::VectorXd yn = (y.array() - y_mean) / y_scale;

  Rng rng(cfg.seed);
  const Eigen::MatrixXd z0 = (m >= n) ? xn
                                      : gpdetail::kmeans_centers(xn, m, rng.substream("kmeans"),
                                                                 cfg.kmeans_iters);
  const bool move_inducing = cfg.optimize_inducing && m < n;

  gpdetail::SgpObjective objective{xn, yn, m, move_inducing, &z0, cfg.jitter_min, cfg.jitter_max};
  Eigen::VectorXd lower(objective.param_count()), upper(objective.param_count());
  lower.head(p + 2) = gpdetail::gp_bounds_lower(p, cfg);
  upper.head(p + 2) = gpdetail::gp_bounds_upper(p, cfg);
  if (move_inducing) {
    lower.tail(m * p).setConstant(-50.0);
    upper.tail(m * p).setConstant(50.0);
  }

  FitReport report;
  Eigen::VectorXd best_psi;
  Eigen::VectorXd probe_grad;
  for (int r = 0; r < std::max(1, cfg.restarts); ++r) {
    Eigen::VectorXd psi0(objective.param_count());
    psi0.head(p + 2) = gpdetail::gp_start_point(
        p, r, cfg, rng.substream("sgp-restart", static_cast<std::uint64_t>(r)));
    if (move_inducing)
      Eigen::Map<Eigen::MatrixXd>(psi0.data() + p + 2, m, p) = z0;
    report.start_objectives.push_back(objective(psi0, probe_grad));
    const OptimResult run = minimize_lbfgs(objective, psi0, lower, upper, cfg.max_iters);
    if (run.value < report.final_objective) {
      report.final_objective = run.value;
      report.chosen_restart = r;
      report.iterations = run.iterations;
      best_psi = run.x;
    }
  }
  if (!std::isfinite(report.final_objective))
    throw std::runtime_error("fit_sgp: variational bound non-finite at every start");

  const double sf2 = std::exp(best_psi[0]);
  const Eigen::VectorXd lengths = best_psi.segment(1, p).array().exp();
  const double sn2 = std::exp(best_psi[p + 1]);
  const Eigen::MatrixXd z = move_inducing
                                ? Eigen::MatrixXd(Eigen::Map<const Eigen::MatrixXd>(
                                      best_psi.data() + p + 2, m, p))
                                : z0;
  SgpState state = gpdetail::finalize_sgp(x_norm, y_mean, y_scale, xn, yn, z, sf2, lengths, sn2,
                                          cfg.jitter_min, cfg.jitter_max);
  report.train_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return SgpModel(std::move(state), std::move(report));
}

/**
 * @brief Variational model with the inducing set pinned to the training
 *        inputs and hyperparameters copied from an exact GP fit on the same
 *        data. With Q = K the posterior equals the exact GP posterior, so
 *        predictions must agree up to jitter; the oracle suite asserts this.
 */
inline SgpModel pin_sgp_to_gp(const GpModel& gp, const Eigen::MatrixXd& x,
                              const Eigen::VectorXd& y, const GpTrainConfig& cfg = {}) {
  const GpState& g = gp.state();
  const Eigen::MatrixXd xn = g.x_norm.apply(x);
  const Eigen::VectorXd yn = (y.array() - g.y_mean) / g.y_scale;
  SgpState state = gpdetail::finalize_sgp(g.x_norm, g.y_mean, g.y_scale, xn, yn, xn,
                                          g.signal_variance, g.lengthscales, g.noise_variance,
                                          cfg.jitter_min, cfg.jitter_max);
  return SgpModel(std::move(state));
}

/// Max relative error of the analytic bound gradient vs central differences.
inline double sgp_gradient_max_rel_error(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                         int n_inducing, bool optimize_inducing,
                                         const GpTrainConfig& cfg = {}, double h = 1e-5) {
  const Eigen::Index p = x.cols();
  const gpdetail::Normalizer norm = gpdetail::Normalizer::fit(x);
  const Eigen::MatrixXd xn = norm.apply(x);
  const double y_mean = y.mean();
  const double y_sd = std::sqrt((y.array() - y_mean).square().sum() /
                                std::max<double>(1.0, static_cast<double>(y.size()) - 1.0));
  const Eigen::VectorXd yn = (y.array() - y_mean) / (y_sd > 1e-13 ? y_sd : 1.0);
  const Eigen::Index m = std::min<Eigen::Index>(n_inducing, xn.rows());
  Rng rng(cfg.seed);
  const Eigen::MatrixXd z0 = gpdetail::kmeans_centers(xn, m, rng, cfg.kmeans_iters);
  gpdetail::SgpObjective objective{xn, yn, m, optimize_inducing, &z0,
                                   cfg.jitter_min, cfg.jitter_max};
  Eigen::VectorXd psi(objective.param_count());
  psi[0] = std::log(0.9);
  psi.segment(1, p).setConstant(std::log(1.2));
  psi[p + 1] = std::log(4e-3);
  if (optimize_inducing) Eigen::Map<Eigen::MatrixXd>(psi.data() + p + 2, m, p) = z0;

  Eigen::VectorXd grad(psi.size()), scratch(psi.size());
  objective(psi, grad);
  double worst = 0.0;
  for (Eigen::Index i = 0; i < psi.size(); ++i) {
    Eigen::VectorXd plus = psi, minus = psi;
    plus[i] += h;
    minus[i] -= h;
    const double fd = (objective(plus, scratch) - objective(minus, scratch)) / (2.0 * h);
    const double denom = std::max({std::abs(fd), std::abs(grad[i]), 1e-8});
    worst = std::max(worst, std::abs(fd - grad[i]) / denom);
  }
  return worst;
}

}  // namespace f2narx
