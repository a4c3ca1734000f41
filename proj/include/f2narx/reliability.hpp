/**
 * @file reliability.hpp
 * @brief First-passage failure probability by surrogate Monte-Carlo and the
 *        active-learning loop with the double-sided U_min acquisition.
 *
 * The loop alternates: train the surrogate on the current design, predict the
 * whole pool probabilistically, estimate P_f from the predicted means, then
 * either enrich the design with the pool member minimizing U_min (while the
 * sampling budget lasts) or check the estimator CoV and enlarge the pool.
 */
#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "f2narx/f2narx.hpp"
#include "f2narx/random.hpp"

namespace f2narx {

/// 1 iff max_j |y(t_j)| >= y_th (double-sided crossing).
inline int first_passage_indicator(const Trajectory& y, double y_th) {
  return y.values().array().abs().maxCoeff() >= y_th ? 1 : 0;
}

/// MCS estimate P_f = (failing count) / N with CoV sqrt((1-Pf)/((N-1)Pf)).
struct PfEstimate {
  double pf = 0.0;
  double cov = std::numeric_limits<double>::infinity();
};

inline PfEstimate estimate_pf_from_counts(std::size_t n_fail, std::size_t n_total) {
  if (n_total == 0) throw std::invalid_argument("estimate_pf: empty sample set");
  PfEstimate out;
  out.pf = static_cast<double>(n_fail) / static_cast<double>(n_total);
  if (out.pf > 0.0 && n_total > 1)
    out.cov = std::sqrt((1.0 - out.pf) / (static_cast<double>(n_total - 1) * out.pf));
  else if (out.pf > 0.0)
    out.cov = std::numeric_limits<double>::infinity();
  return out;
}

inline PfEstimate estimate_pf(const std::vector<Trajectory>& responses, double y_th) {
  std::size_t n_fail = 0;
  for (const auto& y : responses) n_fail += static_cast<std::size_t>(first_passage_indicator(y, y_th));
  return estimate_pf_from_counts(n_fail, responses.size());
}

/**
 * @brief Double-sided U_min acquisition score; smaller = more informative.
 *
 * Instants with zero predictive deviation contribute U = +inf (they cannot
 * straddle the threshold). A side that confidently fails somewhere (mean
 * beyond the threshold with U >= 2) saturates at u_e. A fully deterministic,
 * non-failing prediction therefore scores +inf.
 */
inline double u_min_double_sided(const ProbabilisticPrediction& pred, double y_th, double u_e) {
  const auto& mean = pred.mean.values();
  const auto& variance = pred.variance.values();
  double min_upper = std::numeric_limits<double>::infinity();
  double min_lower = std::numeric_limits<double>::infinity();
  bool saturated_upper = false;
  bool saturated_lower = false;
  for (Eigen::Index j = 0; j < mean.size(); ++j) {
    const double sd = std::sqrt(std::max(0.0, variance[j]));
    const double u_upper =
        sd > 0.0 ? std::abs(mean[j] - y_th) / sd : std::numeric_limits<double>::infinity();
    const double u_lower =
        sd > 0.0 ? std::abs(mean[j] + y_th) / sd : std::numeric_limits<double>::infinity();
    if (mean[j] >= y_th && u_upper >= 2.0) saturated_upper = true;
    if (mean[j] <= -y_th && u_lower >= 2.0) saturated_lower = true;
    min_upper = std::min(min_upper, u_upper);
    min_lower = std::min(min_lower, u_lower);
  }
  const double upper = saturated_upper ? u_e : min_upper;
  const double lower = saturated_lower ? u_e : min_lower;
  return std::min(upper, lower);
}

enum class Acquisition { UMin, Random };

struct ReliabilityConfig {
  double y_th = 0.14;            ///< threshold, response units
  std::size_t n_pool = 10000;    ///< initial MCS pool size
  std::size_t n_initial = 10;    ///< initial design size
  std::size_t n_target_new = 20; ///< sampling budget
  double cov_target = 0.1;       ///< CoV stopping threshold
  double u_e = 10.0;             ///< U_min saturation value (> 2)
  std::size_t pool_growth = 10000;  ///< members added per enrichment
  std::size_t max_pool = 200000;    ///< hard cap on enrichment
  std::uint64_t seed = 0;
  Acquisition acquisition = Acquisition::UMin;
  bool use_true_labels_for_selected = false;  ///< substitute known indicators in P_f
  double window_width = 0.08;
  double eps_lambda = 0.9999;
  int n_threads = 0;

  void validate() const {
    if (!(y_th > 0.0)) throw std::invalid_argument("reliability: y_th must be > 0");
    if (!(u_e > 2.0)) throw std::invalid_argument("reliability: u_e must exceed 2");
    if (!(cov_target > 0.0 && cov_target < 1.0))
      throw std::invalid_argument("reliability: cov_target must lie in (0, 1)");
    if (n_pool == 0 || n_initial < 2)
      throw std::invalid_argument("reliability: need a pool and at least 2 initial records");
  }
};

/// Ground-truth hooks the loop drives; simulate may throw to signal failure.
struct ReliabilityProblem {
  TimeGrid grid{0.0, 0.004, 3001};
  std::function<ParamSample(Rng&)> sample_input;
  std::function<Trajectory(const ParamSample&)> make_excitation;
  std::function<Trajectory(const ParamSample&, const Trajectory&)> simulate;
  std::function<double(const ParamSample&)> initial_value;  ///< y(t0) for a sample
};

struct IterationRecord {
  std::size_t n_new = 0;
  double pf = 0.0;
  double cov = std::numeric_limits<double>::infinity();
  std::ptrdiff_t selected = -1;  ///< pool index enriched this iteration, -1 if none
  std::size_t pool_size = 0;
  double wall_seconds = 0.0;
};

struct ReliabilityResult {
  double pf = 0.0;
  double cov = std::numeric_limits<double>::infinity();
  bool cov_met = false;
  std::vector<IterationRecord> history;
  std::vector<std::size_t> selected;         ///< pool indices added, in order
  std::vector<std::size_t> failed_samples;   ///< pool indices whose simulation failed
  F2NarxModel model;                         ///< final trained surrogate
  Dataset design;                            ///< final training design
};

/// Pool member `index` exactly as run_active_learning draws it for `seed`.
inline ParamSample draw_pool_member(const ReliabilityProblem& problem, std::uint64_t seed,
                                    std::size_t index) {
  Rng stream = Rng(seed).substream("pool", index);
  return problem.sample_input(stream);
}

namespace reldetail {

/**
 * @brief Surrogate scores for a pool slice: failure indicator always, U_min
 *        only when the iteration will select (with_scores).
 */
inline void score_pool(const F2NarxModel& model, const ReliabilityConfig& cfg,
                       const std::vector<ParamSample>& pool,
                       const std::vector<Trajectory>& pool_u,
                       const std::vector<double>& pool_y0, std::size_t lo, std::size_t hi,
                       bool with_scores, std::vector<int>& indicators,
                       std::vector<double>& scores) {
  constexpr std::size_t kSlice = 1024;  // bounds transient trajectory storage
  for (std::size_t base = lo; base < hi; base += kSlice) {
    const std::size_t end = std::min(hi, base + kSlice);
    const auto b = static_cast<Eigen::Index>(end - base);
    Eigen::MatrixXd thetas(b, pool[base].theta().size());
    Eigen::VectorXd y0s(b);
    std::vector<Trajectory> u_slice;
    u_slice.reserve(static_cast<std::size_t>(b));
    for (Eigen::Index i = 0; i < b; ++i) {
      const std::size_t idx = base + static_cast<std::size_t>(i);
      thetas.row(i) = pool[idx].theta().transpose();
      y0s[i] = pool_y0[idx];
      u_slice.push_back(pool_u[idx]);
    }
    if (with_scores) {
      const std::vector<ProbabilisticPrediction> preds =
          model.predict_probabilistic_batch(thetas, u_slice, y0s, cfg.n_threads);
      for (Eigen::Index i = 0; i < b; ++i) {
        const std::size_t idx = base + static_cast<std::size_t>(i);
        indicators[idx] =
            first_passage_indicator(preds[static_cast<std::size_t>(i)].mean, cfg.y_th);
        scores[idx] = u_min_double_sided(preds[static_cast<std::size_t>(i)], cfg.y_th, cfg.u_e);
      }
    } else {
      const std::vector<Trajectory> means =
          model.predict_mean_batch(thetas, u_slice, y0s, cfg.n_threads);
      for (Eigen::Index i = 0; i < b; ++i) {
        const std::size_t idx = base + static_cast<std::size_t>(i);
        indicators[idx] = first_passage_indicator(means[static_cast<std::size_t>(i)], cfg.y_th);
      }
    }
  }
}

}  // namespace reldetail

/**
 * @brief Active-learning first-passage estimation (pool generation, initial
 *        design, train/predict/enrich loop, CoV-checked pool growth).
 */
inline ReliabilityResult run_active_learning(const ReliabilityProblem& problem,
                                             const ReliabilityConfig& cfg,
                                             const F2NarxConfig& surrogate_cfg,
                                             std::ostream* log = nullptr) {
  cfg.validate();
  if (!problem.sample_input || !problem.make_excitation || !problem.simulate ||
      !problem.initial_value)
    throw std::invalid_argument("run_active_learning: incomplete problem definition");

  Rng master(cfg.seed);
  const auto t_run_start = std::chrono::steady_clock::now();

  // Step 1: sample pool. Each member has a fixed substream index so pool
  // enrichment extends, never reshuffles, the sequence.
  std::vector<ParamSample> pool;
  std::vector<Trajectory> pool_u;
  std::vector<double> pool_y0;
  auto grow_pool = [&](std::size_t target) {
    while (pool.size() < target) {
      ParamSample sample = draw_pool_member(problem, cfg.seed, pool.size());
      pool_u.push_back(problem.make_excitation(sample));
      pool_y0.push_back(problem.initial_value(sample));
      pool.push_back(std::move(sample));
    }
  };
  grow_pool(cfg.n_pool);

  // Step 2: initial design, drawn independently of the pool.
  std::vector<ParamSample> design_params;
  std::vector<Trajectory> design_u;
  std::vector<Trajectory> design_y;
  {
    Rng stream = master.substream("design");
    for (std::size_t i = 0; i < cfg.n_initial; ++i) {
      ParamSample sample = problem.sample_input(stream);
      Trajectory u = problem.make_excitation(sample);
      design_y.push_back(problem.simulate(sample, u));
      design_u.push_back(std::move(u));
      design_params.push_back(std::move(sample));
    }
  }
  Dataset design(problem.grid, std::move(design_params), std::move(design_u), std::move(design_y));

  ReliabilityResult result{.design = design};
  std::vector<bool> is_selected(pool.size(), false);
  std::vector<int> indicators;
  std::vector<double> scores;
  std::size_t n_new = 0;
  Rng random_pick = master.substream("random-pick");

  auto pf_from_indicators = [&](std::size_t upto) {
    std::size_t n_fail = 0;
    for (std::size_t i = 0; i < upto; ++i) {
      int ind = indicators[i];
      if (cfg.use_true_labels_for_selected && is_selected[i]) {
        // The surrogate was trained on this member; use its known label.
        for (std::size_t s = 0; s < result.selected.size(); ++s)
          if (result.selected[s] == i) {
            ind = first_passage_indicator(result.design.responses()[cfg.n_initial + s], cfg.y_th);
            break;
          }
      }
      n_fail += static_cast<std::size_t>(ind);
    }
    return estimate_pf_from_counts(n_fail, upto);
  };

  while (true) {
    const auto t_iter = std::chrono::steady_clock::now();

    // Step 3: train on the current design.
    result.model = train(result.design, cfg.window_width, cfg.eps_lambda, surrogate_cfg);

    // Step 4: predictions over the full pool. U_min scores are only needed
    // when this iteration will select a new sample (Step 6).
    const bool will_select = n_new < cfg.n_target_new;
    indicators.assign(pool.size(), 0);
    scores.assign(pool.size(), std::numeric_limits<double>::infinity());
    reldetail::score_pool(result.model, cfg, pool, pool_u, pool_y0, 0, pool.size(), will_select,
                          indicators, scores);
    PfEstimate estimate = pf_from_indicators(pool.size());

    auto record = [&](std::ptrdiff_t chosen) {
      IterationRecord rec;
      rec.n_new = n_new;
      rec.pf = estimate.pf;
      rec.cov = estimate.cov;
      rec.selected = chosen;
      rec.pool_size = pool.size();
      rec.wall_seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t_iter).count();
      result.history.push_back(rec);
      if (log)
        (*log) << rec.n_new << '\t' << rec.pf << '\t' << rec.cov << '\t' << rec.selected << '\t'
               << rec.pool_size << '\t' << rec.wall_seconds << '\n';
    };

    // Step 5: budget check.
    if (!will_select) {
      // Steps 7/8: CoV check with pool enrichment under the same model.
      while (!(estimate.cov < cfg.cov_target) && pool.size() < cfg.max_pool) {
        record(-1);
        const std::size_t old_size = pool.size();
        grow_pool(std::min(cfg.max_pool, old_size + cfg.pool_growth));
        is_selected.resize(pool.size(), false);
        indicators.resize(pool.size(), 0);
        scores.resize(pool.size(), std::numeric_limits<double>::infinity());
        reldetail::score_pool(result.model, cfg, pool, pool_u, pool_y0, old_size, pool.size(),
                              false, indicators, scores);
        estimate = pf_from_indicators(pool.size());
      }
      record(-1);
      result.pf = estimate.pf;
      result.cov = estimate.cov;
      result.cov_met = estimate.cov < cfg.cov_target;
      return result;
    }

    // Step 6: enrich the design.
    std::ptrdiff_t chosen = -1;
    Trajectory chosen_response(problem.grid,
                               Eigen::VectorXd::Zero(static_cast<Eigen::Index>(problem.grid.size())));
    while (chosen < 0) {
      std::ptrdiff_t candidate = -1;
      if (cfg.acquisition == Acquisition::UMin) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < pool.size(); ++i)
          if (!is_selected[i] && scores[i] < best) {
            best = scores[i];
            candidate = static_cast<std::ptrdiff_t>(i);
          }
        if (candidate < 0) {
          // All remaining scores are +inf (fully deterministic predictions);
          // fall back to the first unselected member.
          for (std::size_t i = 0; i < pool.size(); ++i)
            if (!is_selected[i]) {
              candidate = static_cast<std::ptrdiff_t>(i);
              break;
            }
        }
      } else {
        std::vector<std::size_t> open;
        for (std::size_t i = 0; i < pool.size(); ++i)
          if (!is_selected[i]) open.push_back(i);
        if (!open.empty())
          candidate = static_cast<std::ptrdiff_t>(open[random_pick.below(open.size())]);
      }
      if (candidate < 0) throw std::runtime_error("run_active_learning: pool exhausted");
      const auto idx = static_cast<std::size_t>(candidate);
      is_selected[idx] = true;  // never re-selected, even on failure
      try {
        chosen_response = problem.simulate(pool[idx], pool_u[idx]);
        chosen = candidate;
      } catch (const std::exception&) {
        result.failed_samples.push_back(idx);
      }
    }
    record(chosen);
    const auto idx = static_cast<std::size_t>(chosen);
    result.selected.push_back(idx);
    result.design = result.design.appended(pool[idx], pool_u[idx], chosen_response);
    ++n_new;
  }
}

}  // namespace f2narx
