#include <catch2/catch.hpp>

#include <cmath>
#include <set>
#include <sstream>

#include "f2narx/reliability.hpp"
#include "helpers.hpp"

using namespace f2narx;
using testing_helpers::OscillatorStudy;

namespace {

Trajectory flat(const TimeGrid& grid, double value) {
  return Trajectory(grid, Eigen::VectorXd::Constant(static_cast<Eigen::Index>(grid.size()), value));
}

ProbabilisticPrediction make_pred(const TimeGrid& grid, const Eigen::VectorXd& mean,
                                  const Eigen::VectorXd& variance) {
  return {Trajectory(grid, mean), Trajectory(grid, variance)};
}

/// Small fast synthetic study used for loop-behavior tests.
struct SyntheticProblem {
  TimeGrid grid{0.0, 0.05, 41};

  ReliabilityProblem problem() const {
    ReliabilityProblem p;
    p.grid = grid;
    p.sample_input = [](Rng& rng) {
      Eigen::VectorXd theta(2);
      theta << rng.uniform(0.5, 1.5), rng.uniform(1.0, 3.0);
      return ParamSample(theta, rng.normal_vector(4));
    };
    p.make_excitation = [this](const ParamSample& s) {
      Eigen::VectorXd v(static_cast<Eigen::Index>(grid.size()));
      for (std::size_t j = 0; j < grid.size(); ++j) {
        const double t = grid.time(j);
        v[static_cast<Eigen::Index>(j)] = s.phi()[0] * std::sin(s.theta()[1] * t) +
                                          0.5 * s.phi()[1] * std::cos(2.0 * s.theta()[1] * t);
      }
      return Trajectory(grid, v);
    };
    p.simulate = [this](const ParamSample& s, const Trajectory& u) {
      // Smooth deterministic response: scaled leaky integral of u.
      Eigen::VectorXd y(static_cast<Eigen::Index>(grid.size()));
      double state = 0.0;
      for (std::size_t j = 0; j < grid.size(); ++j) {
        state = 0.9 * state + 0.3 * s.theta()[0] * u[j];
        y[static_cast<Eigen::Index>(j)] = state;
      }
      return Trajectory(grid, y);
    };
    p.initial_value = [](const ParamSample&) { return 0.0; };
    return p;
  }

  ReliabilityConfig config() const {
    ReliabilityConfig cfg;
    cfg.y_th = 0.9;
    cfg.n_pool = 150;
    cfg.n_initial = 8;
    cfg.n_target_new = 4;
    cfg.cov_target = 0.9;
    cfg.pool_growth = 100;
    cfg.max_pool = 400;
    cfg.window_width = 0.25;
    cfg.eps_lambda = 0.999;
    cfg.seed = 5;
    cfg.n_threads = 2;
    return cfg;
  }

  F2NarxConfig surrogate() const {
    F2NarxConfig cfg;
    cfg.gp.restarts = 1;
    cfg.gp.max_iters = 30;
    cfg.sgp.restarts = 1;
    cfg.sgp.max_iters = 25;
    cfg.sgp.n_inducing = 16;
    cfg.n_threads = 2;
    return cfg;
  }
};

}  // namespace

TEST_CASE("first_passage_indicator: double-sided threshold with >=") {
  const TimeGrid grid(0.0, 0.1, 5);
  CHECK(first_passage_indicator(flat(grid, 0.0), 0.14) == 0);
  Eigen::VectorXd dip = Eigen::VectorXd::Zero(5);
  dip[3] = -0.15;
  CHECK(first_passage_indicator(Trajectory(grid, dip), 0.14) == 1);
  Eigen::VectorXd exact = Eigen::VectorXd::Zero(5);
  exact[2] = 0.14;
  CHECK(first_passage_indicator(Trajectory(grid, exact), 0.14) == 1);
}

TEST_CASE("estimate_pf: closed-form CoV and edge cases") {
  const TimeGrid grid(0.0, 0.1, 3);
  SECTION("all failing") {
    const std::vector<Trajectory> all(4, flat(grid, 1.0));
    const PfEstimate est = estimate_pf(all, 0.5);
    CHECK(est.pf == 1.0);
    CHECK(est.cov == 0.0);
  }
  SECTION("no failures reports an infinite CoV") {
    const std::vector<Trajectory> none(4, flat(grid, 0.0));
    const PfEstimate est = estimate_pf(none, 0.5);
    CHECK(est.pf == 0.0);
    CHECK(std::isinf(est.cov));
  }
  SECTION("formula value at pf = 0.01, N = 1e4") {
    const PfEstimate est = estimate_pf_from_counts(100, 10000);
    CHECK(est.pf == Approx(0.01));
    CHECK(est.cov == Approx(std::sqrt(0.99 / (9999.0 * 0.01))).margin(1e-9));
    CHECK(est.cov == Approx(0.0995).margin(1e-4));
  }
  SECTION("CoV decreases with pool size at fixed pf") {
    double previous = std::numeric_limits<double>::infinity();
    for (std::size_t n : {100UL, 1000UL, 10000UL}) {
      const double cov = estimate_pf_from_counts(n / 20, n).cov;
      CHECK(cov < previous);
      previous = cov;
    }
  }
  SECTION("brute-force equality") {
    Rng rng(12);
    const TimeGrid g(0.0, 0.02, 25);
    std::vector<Trajectory> trajs;
    std::size_t count = 0;
    for (int i = 0; i < 500; ++i) {
      const Eigen::VectorXd v = 0.4 * rng.normal_vector(25);
      trajs.emplace_back(g, v);
      bool fails = false;
      for (Eigen::Index j = 0; j < 25; ++j) fails = fails || std::abs(v[j]) >= 0.8;
      count += fails ? 1 : 0;
    }
    CHECK(estimate_pf(trajs, 0.8).pf == static_cast<double>(count) / 500.0);
  }
}

TEST_CASE("u_min_double_sided: spec cases") {
  const TimeGrid grid(0.0, 0.1, 4);
  const double y_th = 0.14, u_e = 10.0;

  SECTION("near-threshold instant dominates the upper side") {
    Eigen::VectorXd mean(4), variance(4);
    mean << 0.0, 0.1, 0.0, 0.0;
    variance << 1e-18, 4e-4, 1e-18, 1e-18;  // sigma 0.02 at the near instant
    const double u = u_min_double_sided(make_pred(grid, mean, variance), y_th, u_e);
    CHECK(u == Approx(2.0).margin(1e-9));  // |0.1 - 0.14| / 0.02
  }

  SECTION("confident exceedance saturates at u_e") {
    Eigen::VectorXd mean(4), variance(4);
    mean << 0.0, 0.2, 0.0, 0.0;
    variance << 1e-18, 1e-4, 1e-18, 1e-18;  // U_upper = 6 at the exceeding instant
    const double u = u_min_double_sided(make_pred(grid, mean, variance), y_th, u_e);
    CHECK(u == u_e);
  }

  SECTION("invariant under mean negation") {
    Rng rng(4);
    Eigen::VectorXd mean = 0.1 * rng.normal_vector(4);
    Eigen::VectorXd variance = (0.02 * rng.normal_vector(4)).cwiseAbs();
    const double a = u_min_double_sided(make_pred(grid, mean, variance), y_th, u_e);
    const double b = u_min_double_sided(make_pred(grid, (-mean).eval(), variance), y_th, u_e);
    CHECK(a == Approx(b).margin(1e-12));
  }

  SECTION("fully deterministic non-failing prediction scores +inf") {
    const double u = u_min_double_sided(
        make_pred(grid, Eigen::VectorXd::Zero(4), Eigen::VectorXd::Zero(4)), y_th, u_e);
    CHECK(std::isinf(u));
  }
}

TEST_CASE("active learning: zero budget reduces to plain surrogate MCS") {
  SyntheticProblem s;
  ReliabilityConfig cfg = s.config();
  cfg.n_target_new = 0;
  cfg.cov_target = 0.99;  // accepted immediately at this pool size
  const ReliabilityResult result = run_active_learning(s.problem(), cfg, s.surrogate());
  CHECK(result.selected.empty());
  CHECK(result.design.size() == cfg.n_initial);
  REQUIRE(result.history.size() == 1);
  CHECK(result.history[0].selected == -1);
  CHECK(result.pf >= 0.0);
  CHECK(result.pf <= 1.0);
}

TEST_CASE("active learning: first selection is the U_min argmin") {
  SyntheticProblem s;
  ReliabilityConfig cfg = s.config();
  cfg.n_target_new = 1;
  const ReliabilityResult result = run_active_learning(s.problem(), cfg, s.surrogate());
  REQUIRE(result.selected.size() == 1);

  // Reproduce the first iteration by hand: same initial design -> same model
  // (training is deterministic given the seed), then score the same pool.
  ReliabilityProblem problem = s.problem();
  Rng master(cfg.seed);
  std::vector<ParamSample> design_params;
  std::vector<Trajectory> design_u, design_y;
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
  const Dataset design(problem.grid, design_params, design_u, design_y);
  const F2NarxModel model = train(design, cfg.window_width, cfg.eps_lambda, s.surrogate());
  double best = std::numeric_limits<double>::infinity();
  std::size_t best_idx = 0;
  for (std::size_t i = 0; i < cfg.n_pool; ++i) {
    const ParamSample member = draw_pool_member(problem, cfg.seed, i);
    const Trajectory u = problem.make_excitation(member);
    const ProbabilisticPrediction pred =
        model.predict_probabilistic(member.theta(), u, problem.initial_value(member));
    const double score = u_min_double_sided(pred, cfg.y_th, cfg.u_e);
    if (score < best) {
      best = score;
      best_idx = i;
    }
  }
  CHECK(result.selected[0] == best_idx);
}

TEST_CASE("active learning: selected samples are never re-selected") {
  SyntheticProblem s;
  ReliabilityConfig cfg = s.config();
  cfg.n_pool = 40;
  cfg.n_target_new = 6;
  const ReliabilityResult result = run_active_learning(s.problem(), cfg, s.surrogate());
  REQUIRE(result.selected.size() == 6);
  const std::set<std::size_t> unique(result.selected.begin(), result.selected.end());
  CHECK(unique.size() == 6);
  for (const auto& rec : result.history) {
    CHECK(rec.pf >= 0.0);
    CHECK(rec.pf <= 1.0);
  }
}

TEST_CASE("active learning: simulator failure skips to the next candidate") {
  SyntheticProblem s;
  ReliabilityConfig cfg = s.config();
  cfg.n_target_new = 1;

  // Learn the would-be argmin, then poison exactly that pool member.
  const ReliabilityResult clean = run_active_learning(s.problem(), cfg, s.surrogate());
  REQUIRE(clean.selected.size() == 1);
  const ParamSample poisoned = draw_pool_member(s.problem(), cfg.seed, clean.selected[0]);

  ReliabilityProblem flaky = s.problem();
  auto inner = flaky.simulate;
  flaky.simulate = [inner, &poisoned](const ParamSample& sample, const Trajectory& u) {
    if ((sample.theta() - poisoned.theta()).cwiseAbs().maxCoeff() < 1e-15)
      throw std::runtime_error("injected simulator failure");
    return inner(sample, u);
  };
  const ReliabilityResult result = run_active_learning(flaky, cfg, s.surrogate());
  REQUIRE(result.failed_samples.size() == 1);
  CHECK(result.failed_samples[0] == clean.selected[0]);
  REQUIRE(result.selected.size() == 1);
  CHECK(result.selected[0] != clean.selected[0]);
}

TEST_CASE("active learning: pool enrichment loop and run log") {
  SyntheticProblem s;
  ReliabilityConfig cfg = s.config();
  cfg.n_target_new = 0;
  // Unreachable CoV: the pool grows 150 -> 300 -> 450 -> 600 and stops at the
  // cap, recording one line per estimate.
  cfg.cov_target = 0.001;
  cfg.pool_growth = 150;
  cfg.max_pool = 600;
  std::ostringstream log;
  const ReliabilityResult result = run_active_learning(s.problem(), cfg, s.surrogate(), &log);
  REQUIRE(result.history.size() == 4);
  CHECK(result.history.back().pool_size == 600);
  CHECK_FALSE(result.cov_met);
  CHECK(result.history[0].cov > result.history.back().cov);
  // One tab-separated line per recorded iteration.
  std::size_t lines = 0;
  std::string line;
  std::istringstream read(log.str());
  while (std::getline(read, line))
    if (!line.empty()) ++lines;
  CHECK(lines == result.history.size());
}

TEST_CASE("active learning: random acquisition draws from the pool") {
  SyntheticProblem s;
  ReliabilityConfig cfg = s.config();
  cfg.acquisition = Acquisition::Random;
  cfg.n_target_new = 3;
  const ReliabilityResult result = run_active_learning(s.problem(), cfg, s.surrogate());
  CHECK(result.selected.size() == 3);
  const std::set<std::size_t> unique(result.selected.begin(), result.selected.end());
  CHECK(unique.size() == 3);
}

TEST_CASE("reliability config validation") {
  ReliabilityConfig cfg;
  cfg.u_e = 1.5;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = ReliabilityConfig{};
  cfg.cov_target = 1.5;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}
