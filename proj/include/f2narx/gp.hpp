/**
 * @file gp.hpp
 * @brief Exact single-output Gaussian-process regression with an ARD
 *        squared-exponential kernel.
 *
 * Hyperparameters (signal variance, per-dimension lengthscales, noise
 * variance) maximize the log marginal likelihood by multi-start L-BFGS in
 * log space with analytic gradients. Inputs are standardized per dimension
 * and outputs centered/scaled before fitting; predictions undo both. The
 * reported predictive variance is for a new observation, i.e. it includes
 * the learned noise variance.
 */
#pragma once

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <stdexcept>
#include <utility>

#include "f2narx/gp_common.hpp"
#include "f2narx/optim.hpp"
#include "f2narx/random.hpp"

namespace f2narx {

/// Everything needed to reproduce predictions; the serialization unit.
struct GpState {
  gpdetail::Normalizer x_norm;
  double y_mean = 0.0;
  double y_scale = 1.0;
  double signal_variance = 1.0;           ///< normalized-output units
  Eigen::VectorXd lengthscales;           ///< normalized-input units
  double noise_variance = 1e-2;           ///< normalized-output units
  Eigen::MatrixXd train_scaled;           ///< inputs, normalized then 1/l scaled
  Eigen::MatrixXd chol;                   ///< L with L L^T = K + noise I
  Eigen::VectorXd alpha;                  ///< (K + noise I)^{-1} y_normalized
};

namespace gpdetail {

/// Negative log marginal likelihood and gradient in psi = [log sf2, log l, log sn2].
struct GpObjective {
  const Eigen::MatrixXd& x;  // normalized inputs, n x p
  const Eigen::VectorXd& y;  // normalized targets
  double jitter_min;
  double jitter_max;

  double operator()(const Eigen::VectorXd& psi, Eigen::VectorXd& grad) const {
    const Eigen::Index n = x.rows();
    const Eigen::Index p = x.cols();
    const double sf2 = std::exp(psi[0]);
    const Eigen::VectorXd lengths = psi.segment(1, p).array().exp();
    const double sn2 = std::exp(psi[p + 1]);
    grad.setZero(psi.size());

    const Eigen::MatrixXd xs = scale_rows(x, lengths);
    const Eigen::MatrixXd kernel = se_kernel(xs, xs, sf2);
    Eigen::MatrixXd gram = kernel;
    gram.diagonal().array() += sn2;
    Eigen::LLT<Eigen::MatrixXd> llt;
    try {
      llt = robust_llt(gram, jitter_min, jitter_max);
    } catch (const std::runtime_error&) {
      return std::numeric_limits<double>::infinity();
    }
    const Eigen::VectorXd alpha = llt.solve(y);
    const double log_det_half = llt.matrixLLT().diagonal().array().log().sum();
    const double value = 0.5 * y.dot(alpha) + log_det_half +
                         0.5 * static_cast<double>(n) * std::log(2.0 * M_PI);
    if (!std::isfinite(value)) return std::numeric_limits<double>::infinity();

    // dF/dpsi = -1/2 tr((alpha alpha^T - K^{-1}) dK/dpsi)
    Eigen::MatrixXd weight = llt.solve(Eigen::MatrixXd::Identity(n, n));
    weight.noalias() -= alpha * alpha.transpose();  // = -(alpha alpha^T - K^{-1})
    grad[0] = 0.5 * weight.cwiseProduct(kernel).sum();
    grad[p + 1] = 0.5 * weight.trace() * sn2;
    const Eigen::MatrixXd weighted_kernel = 0.5 * weight.cwiseProduct(kernel);
    add_length_grad(weighted_kernel, x, x, lengths, grad.segment(1, p));
    return value;
  }
};

inline Eigen::VectorXd gp_bounds_lower(Eigen::Index p, const GpTrainConfig& cfg) {
  Eigen::VectorXd lo(p + 2);
  lo[0] = cfg.log_signal_min;
  lo.segment(1, p).setConstant(cfg.log_length_min);
  lo[p + 1] = cfg.log_noise_min;
  return lo;
}

inline Eigen::VectorXd gp_bounds_upper(Eigen::Index p, const GpTrainConfig& cfg) {
  Eigen::VectorXd hi(p + 2);
  hi[0] = cfg.log_signal_max;
  hi.segment(1, p).setConstant(cfg.log_length_max);
  hi[p + 1] = cfg.log_noise_max;
  return hi;
}

/// Multi-start initialization r for a (p+2)-parameter log-space search.
/// Lengthscales start at sqrt(p) so that typical squared distances between
/// standardized inputs map to order-one kernel arguments; a unit start makes
/// the kernel vanish in high dimension and strands the optimizer in the
/// noise-only optimum.
inline Eigen::VectorXd gp_start_point(Eigen::Index p, int restart, const GpTrainConfig& cfg,
                                      Rng rng) {
  Eigen::VectorXd psi(p + 2);
  psi[0] = 0.0;
  psi.segment(1, p).setConstant(0.5 * std::log(static_cast<double>(p)));
  psi[p + 1] = std::log(cfg.noise_init);
  if (restart > 0) {
    static constexpr double kNoiseGrid[4] = {1e-2, 1e-4, 1e-1, 1e-6};
    psi[0] += 0.3 * rng.normal();
    for (Eigen::Index d = 0; d < p; ++d) psi[1 + d] += 0.6 * rng.normal();
    psi[p + 1] = std::log(kNoiseGrid[restart % 4]) + 0.5 * rng.normal();
  }
  return psi;
}

}  // namespace gpdetail

class GpModel {
 public:
  GpModel() = default;
  explicit GpModel(GpState state, FitReport report = {})
      : state_(std::move(state)), report_(std::move(report)) {
    if (state_.alpha.size() != state_.train_scaled.rows())
      throw std::invalid_argument("GpModel: inconsistent state");
  }

  const GpState& state() const { return state_; }
  const FitReport& report() const { return report_; }
  Eigen::Index input_dim() const { return state_.lengthscales.size(); }
  /// Learned variances in the units of the (unnormalized) targets.
  double signal_variance() const { return state_.signal_variance * state_.y_scale * state_.y_scale; }
  double noise_variance() const { return state_.noise_variance * state_.y_scale * state_.y_scale; }
  const Eigen::VectorXd& lengthscales() const { return state_.lengthscales; }

  /// Predictive mean and variance (variance includes the noise term).
  std::pair<double, double> predict(const Eigen::VectorXd& x) const {
    Eigen::VectorXd mean(1), variance(1);
    predict_batch(x.transpose(), mean, variance);
    return {mean[0], variance[0]};
  }

  void predict_batch(const Eigen::Ref<const Eigen::MatrixXd>& x, Eigen::Ref<Eigen::VectorXd> means,
                     Eigen::Ref<Eigen::VectorXd> variances) const {
    const Eigen::MatrixXd cross = cross_kernel(x);
    means = cross * state_.alpha;
    const Eigen::MatrixXd t1 =
        state_.chol.triangularView<Eigen::Lower>().solve(cross.transpose());
    const Eigen::ArrayXd raw = state_.signal_variance + state_.noise_variance -
                               t1.colwise().squaredNorm().transpose().array();
    variances = raw.max(0.0).matrix();
    unnormalize(means, variances);
  }

  void predict_mean_batch(const Eigen::Ref<const Eigen::MatrixXd>& x,
                          Eigen::Ref<Eigen::VectorXd> means) const {
    means = cross_kernel(x) * state_.alpha;
    means = (means.array() * state_.y_scale + state_.y_mean).matrix();
  }

 private:
  Eigen::MatrixXd cross_kernel(const Eigen::Ref<const Eigen::MatrixXd>& x) const {
    const Eigen::MatrixXd xs =
        gpdetail::scale_rows(state_.x_norm.apply(x), state_.lengthscales);
    return gpdetail::se_kernel(xs, state_.train_scaled, state_.signal_variance);
  }

  void unnormalize(Eigen::Ref<Eigen::VectorXd> means, Eigen::Ref<Eigen::VectorXd> variances) const {
    means = (means.array() * state_.y_scale + state_.y_mean).matrix();
    variances *= state_.y_scale * state_.y_scale;
  }

  GpState state_;
  FitReport report_;
};

/**
 * @brief Fits an exact GP by multi-start gradient ascent on the log marginal
 *        likelihood.
 */
inline GpModel fit_gp(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                      const GpTrainConfig& cfg = {}) {
  if (x.rows() < 2) throw std::invalid_argument("fit_gp: need at least 2 rows");
  if (x.rows() != y.size()) throw std::invalid_argument("fit_gp: row count mismatch");
  if (!x.allFinite() || !y.allFinite()) throw std::invalid_argument("fit_gp: non-finite data");
  const auto t_start = std::chrono::steady_clock::now();
  const Eigen::Index p = x.cols();

  GpState state;
  state.x_norm = gpdetail::Normalizer::fit(x);
  state.y_mean = cfg.normalize_outputs ? y.mean() : 0.0;
  const double y_sd = std::sqrt((y.array() - y.mean()).square().sum() /
                                std::max<double>(1.0, static_cast<double>(y.size()) - 1.0));
  state.y_scale = (cfg.normalize_outputs && y_sd > 1e-13) ? y_sd : 1.0;

  const Eigen::MatrixXd xn = state.x_norm.apply(x);
  const Eigen::VectorXd yn = (y.array() - state.y_mean) / state.y_scale;

  gpdetail::GpObjective objective{xn, yn, cfg.jitter_min, cfg.jitter_max};
  const Eigen::VectorXd lower = gpdetail::gp_bounds_lower(p, cfg);
  const Eigen::VectorXd upper = gpdetail::gp_bounds_upper(p, cfg);

  FitReport report;
  Eigen::VectorXd best_psi;
  Rng rng(cfg.seed);
  Eigen::VectorXd probe_grad;
  for (int r = 0; r < std::max(1, cfg.restarts); ++r) {
    const Eigen::VectorXd psi0 =
        gpdetail::gp_start_point(p, r, cfg, rng.substream("gp-restart", static_cast<std::uint64_t>(r)));
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
    throw std::runtime_error("fit_gp: likelihood non-finite at every start");

  state.signal_variance = std::exp(best_psi[0]);
  state.lengthscales = best_psi.segment(1, p).array().exp();
  state.noise_variance = std::exp(best_psi[p + 1]);
  state.train_scaled = gpdetail::scale_rows(xn, state.lengthscales);
  Eigen::MatrixXd gram = gpdetail::se_kernel(state.train_scaled, state.train_scaled,
                                             state.signal_variance);
  gram.diagonal().array() += state.noise_variance;
  const auto llt = gpdetail::robust_llt(gram, cfg.jitter_min, cfg.jitter_max);
  state.chol = llt.matrixL();
  state.alpha = llt.solve(yn);
  report.train_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return GpModel(std::move(state), std::move(report));
}

/**
 * @brief Max relative error between the analytic likelihood gradient and a
 *        central finite difference at a benign interior point. Built-in
 *        self-test for the objective wiring.
 */
inline double gp_gradient_max_rel_error(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                        const GpTrainConfig& cfg = {}, double h = 1e-5) {
  const Eigen::Index p = x.cols();
  const gpdetail::Normalizer norm = gpdetail::Normalizer::fit(x);
  const Eigen::MatrixXd xn = norm.apply(x);
  const double y_mean = y.mean();
  const double y_sd = std::sqrt((y.array() - y_mean).square().sum() /
                                std::max<double>(1.0, static_cast<double>(y.size()) - 1.0));
  const Eigen::VectorXd yn = (y.array() - y_mean) / (y_sd > 1e-13 ? y_sd : 1.0);
  gpdetail::GpObjective objective{xn, yn, cfg.jitter_min, cfg.jitter_max};

  Eigen::VectorXd psi(p + 2);
  psi[0] = std::log(0.8);
  psi.segment(1, p).setConstant(std::log(1.3));
  psi[p + 1] = std::log(5e-3);

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
