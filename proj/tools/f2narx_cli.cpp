/**
 * @file f2narx_cli.cpp
 * @brief Command-line front end: dataset generation, training, prediction,
 *        evaluation, reliability studies, and the built-in oracle checks.
 *
 * Every run is driven by one JSON config document checked strictly (unknown
 * keys are rejected) and a single seed; all randomness flows from that seed
 * through named substreams, so outputs are byte-for-byte reproducible.
 *
 * Exit codes: 0 success, 2 config/usage error, 3 numerical failure.
 */
#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "f2narx/dataset_io.hpp"
#include "f2narx/excitation.hpp"
#include "f2narx/f2narx.hpp"
#include "f2narx/metrics.hpp"
#include "f2narx/model_io.hpp"
#include "f2narx/reliability.hpp"
#include "f2narx/simulator.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (const char* a : allowed)
      if (key == a) {
        known = true;
        break;
      }
    if (!known) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("key '") + key + "': " + e.what());
  }
}

struct RunConfig {
  std::uint64_t seed = 42;
  int threads = 0;
  f2narx::TimeGrid grid{0.0, 0.004, 3001};

  // excitation
  std::string excitation_type = "white_noise";
  f2narx::SpectralWhiteNoiseSpec white_noise;
  f2narx::CloughPenzienSpec clough_penzien;
  double s0_mean = 1.5e-6, s0_std = 1.5e-6;
  double peak_time_min = 1.0, peak_time_max = 15.0;

  // simulator (bouc_wen)
  double mass_min = 5e4, mass_max = 7e4;
  double stiffness_min = 4e6, stiffness_max = 6e6;
  double y0_min = -0.01, y0_max = 0.01;
  double damping_factor = 0.1;
  f2narx::BoucWenParams bouc_wen_template;

  std::size_t dataset_count = 100;

  // f2narx
  double window_width = 0.08;
  double eps_lambda = 0.9999;
  f2narx::F2NarxConfig surrogate;
  bool cv_enabled = false;
  std::vector<double> cv_window_grid;
  std::vector<double> cv_eps_grid;
  int cv_k_folds = 5;

  f2narx::ReliabilityConfig reliability;
};

void parse_gp_section(const json& j, const std::string& where, f2narx::GpTrainConfig& cfg) {
  check_keys(j, where,
             {"restarts", "max_iters", "noise_init", "normalize_outputs", "n_inducing",
              "optimize_inducing", "kmeans_iters"});
  cfg.restarts = get_or(j, "restarts", cfg.restarts);
  cfg.max_iters = get_or(j, "max_iters", cfg.max_iters);
  cfg.noise_init = get_or(j, "noise_init", cfg.noise_init);
  cfg.normalize_outputs = get_or(j, "normalize_outputs", cfg.normalize_outputs);
  cfg.n_inducing = get_or(j, "n_inducing", cfg.n_inducing);
  cfg.optimize_inducing = get_or(j, "optimize_inducing", cfg.optimize_inducing);
  cfg.kmeans_iters = get_or(j, "kmeans_iters", cfg.kmeans_iters);
}

RunConfig load_config(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config '" + path.string() + "'");
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config parse error: " + std::string(e.what()));
  }
  check_keys(j, "config",
             {"seed", "threads", "grid", "excitation", "simulator", "dataset", "f2narx",
              "reliability"});
  RunConfig cfg;
  cfg.seed = get_or<std::uint64_t>(j, "seed", cfg.seed);
  cfg.threads = get_or(j, "threads", cfg.threads);

  if (j.contains("grid")) {
    const json& g = j["grid"];
    check_keys(g, "grid", {"t0", "dt", "n_t"});
    cfg.grid = f2narx::TimeGrid(get_or(g, "t0", 0.0), get_or(g, "dt", 0.004),
                                get_or<std::size_t>(g, "n_t", 3001));
  }

  if (j.contains("excitation")) {
    const json& e = j["excitation"];
    check_keys(e, "excitation",
               {"type", "intensity", "n_terms", "d_omega", "omega_g", "zeta_g", "omega_f",
                "zeta_f", "eta0", "duration", "shape", "omega_cut", "s0_mean", "s0_std",
                "peak_time_range"});
    cfg.excitation_type = get_or<std::string>(e, "type", cfg.excitation_type);
    if (cfg.excitation_type == "white_noise") {
      cfg.white_noise.intensity = get_or(e, "intensity", cfg.white_noise.intensity);
      cfg.white_noise.n_terms = get_or<Eigen::Index>(e, "n_terms", cfg.white_noise.n_terms);
      cfg.white_noise.d_omega = get_or(e, "d_omega", cfg.white_noise.d_omega);
      cfg.white_noise.validate();
    } else if (cfg.excitation_type == "clough_penzien") {
      auto& cp = cfg.clough_penzien;
      cp.omega_g = get_or(e, "omega_g", cp.omega_g);
      cp.zeta_g = get_or(e, "zeta_g", cp.zeta_g);
      cp.omega_f = get_or(e, "omega_f", cp.omega_f);
      cp.zeta_f = get_or(e, "zeta_f", cp.zeta_f);
      cp.eta0 = get_or(e, "eta0", cp.eta0);
      cp.duration = get_or(e, "duration", cp.duration);
      cp.shape = get_or(e, "shape", cp.shape);
      cp.omega_cut = get_or(e, "omega_cut", cp.omega_cut);
      cp.n_terms = get_or<Eigen::Index>(e, "n_terms", cp.n_terms);
      cfg.s0_mean = get_or(e, "s0_mean", cfg.s0_mean);
      cfg.s0_std = get_or(e, "s0_std", cfg.s0_std);
      if (e.contains("peak_time_range")) {
        const auto range = e["peak_time_range"].get<std::vector<double>>();
        if (range.size() != 2) throw ConfigError("excitation.peak_time_range: expected [lo, hi]");
        cfg.peak_time_min = range[0];
        cfg.peak_time_max = range[1];
      }
    } else {
      throw ConfigError("excitation.type must be 'white_noise' or 'clough_penzien'");
    }
  }

  if (j.contains("simulator")) {
    const json& s = j["simulator"];
    check_keys(s, "simulator",
               {"type", "mass_range", "stiffness_range", "y0_range", "damping_factor", "alpha",
                "beta", "gamma", "amplitude", "exponent", "yield_displacement"});
    if (get_or<std::string>(s, "type", "bouc_wen") != "bouc_wen")
      throw ConfigError("simulator.type: only 'bouc_wen' is available");
    auto read_range = [&](const char* key, double& lo, double& hi) {
      if (!s.contains(key)) return;
      const auto range = s[key].get<std::vector<double>>();
      if (range.size() != 2) throw ConfigError(std::string("simulator.") + key + ": expected [lo, hi]");
      lo = range[0];
      hi = range[1];
    };
    read_range("mass_range", cfg.mass_min, cfg.mass_max);
    read_range("stiffness_range", cfg.stiffness_min, cfg.stiffness_max);
    read_range("y0_range", cfg.y0_min, cfg.y0_max);
    cfg.damping_factor = get_or(s, "damping_factor", cfg.damping_factor);
    auto& bw = cfg.bouc_wen_template;
    bw.alpha = get_or(s, "alpha", bw.alpha);
    bw.beta = get_or(s, "beta", bw.beta);
    bw.gamma = get_or(s, "gamma", bw.gamma);
    bw.hysteresis_amplitude = get_or(s, "amplitude", bw.hysteresis_amplitude);
    bw.exponent = get_or(s, "exponent", bw.exponent);
    bw.yield_displacement = get_or(s, "yield_displacement", bw.yield_displacement);
  }

  if (j.contains("dataset")) {
    check_keys(j["dataset"], "dataset", {"count"});
    cfg.dataset_count = get_or<std::size_t>(j["dataset"], "count", cfg.dataset_count);
  }

  if (j.contains("f2narx")) {
    const json& f = j["f2narx"];
    check_keys(f, "f2narx", {"window_width", "eps_lambda", "clamp_kappa", "gp", "sgp", "cv"});
    cfg.window_width = get_or(f, "window_width", cfg.window_width);
    cfg.eps_lambda = get_or(f, "eps_lambda", cfg.eps_lambda);
    cfg.surrogate.clamp_kappa = get_or(f, "clamp_kappa", cfg.surrogate.clamp_kappa);
    if (f.contains("gp")) parse_gp_section(f["gp"], "f2narx.gp", cfg.surrogate.gp);
    if (f.contains("sgp")) parse_gp_section(f["sgp"], "f2narx.sgp", cfg.surrogate.sgp);
    if (f.contains("cv")) {
      const json& cv = f["cv"];
      check_keys(cv, "f2narx.cv", {"enabled", "window_grid", "eps_grid", "k_folds"});
      cfg.cv_enabled = get_or(cv, "enabled", false);
      cfg.cv_window_grid = get_or(cv, "window_grid", std::vector<double>{});
      cfg.cv_eps_grid = get_or(cv, "eps_grid", std::vector<double>{});
      cfg.cv_k_folds = get_or(cv, "k_folds", 5);
    }
  }

  if (j.contains("reliability")) {
    const json& r = j["reliability"];
    check_keys(r, "reliability",
               {"y_th", "n_pool", "n_initial", "n_target_new", "cov_target", "u_e", "pool_growth",
                "max_pool", "acquisition", "use_true_labels_for_selected"});
    auto& rel = cfg.reliability;
    rel.y_th = get_or(r, "y_th", rel.y_th);
    rel.n_pool = get_or<std::size_t>(r, "n_pool", rel.n_pool);
    rel.n_initial = get_or<std::size_t>(r, "n_initial", rel.n_initial);
    rel.n_target_new = get_or<std::size_t>(r, "n_target_new", rel.n_target_new);
    rel.cov_target = get_or(r, "cov_target", rel.cov_target);
    rel.u_e = get_or(r, "u_e", rel.u_e);
    rel.pool_growth = get_or<std::size_t>(r, "pool_growth", rel.pool_growth);
    rel.max_pool = get_or<std::size_t>(r, "max_pool", rel.max_pool);
    const std::string acq = get_or<std::string>(r, "acquisition", "umin");
    if (acq == "umin")
      rel.acquisition = f2narx::Acquisition::UMin;
    else if (acq == "random")
      rel.acquisition = f2narx::Acquisition::Random;
    else
      throw ConfigError("reliability.acquisition must be 'umin' or 'random'");
    rel.use_true_labels_for_selected =
        get_or(r, "use_true_labels_for_selected", rel.use_true_labels_for_selected);
  }

  cfg.surrogate.seed = cfg.seed;
  cfg.surrogate.n_threads = cfg.threads;
  cfg.reliability.seed = cfg.seed;
  cfg.reliability.n_threads = cfg.threads;
  cfg.reliability.window_width = cfg.window_width;
  cfg.reliability.eps_lambda = cfg.eps_lambda;
  return cfg;
}

/// Ground-truth problem assembled from the config. Theta layouts:
/// white_noise -> [m, k, y0]; clough_penzien -> [m, k, y0, S0, c].
f2narx::ReliabilityProblem make_problem(const RunConfig& cfg) {
  f2narx::ReliabilityProblem problem;
  problem.grid = cfg.grid;
  const bool ground_motion = cfg.excitation_type == "clough_penzien";

  problem.sample_input = [cfg, ground_motion](f2narx::Rng& rng) {
    Eigen::VectorXd theta(ground_motion ? 5 : 3);
    theta[0] = rng.uniform(cfg.mass_min, cfg.mass_max);
    theta[1] = rng.uniform(cfg.stiffness_min, cfg.stiffness_max);
    theta[2] = rng.uniform(cfg.y0_min, cfg.y0_max);
    Eigen::Index n_phi = ground_motion ? cfg.clough_penzien.n_terms : 2 * cfg.white_noise.n_terms;
    Eigen::VectorXd phi(n_phi);
    if (ground_motion) {
      theta[3] = rng.lognormal_from_moments(cfg.s0_mean, cfg.s0_std);
      theta[4] = rng.uniform(cfg.peak_time_min, cfg.peak_time_max);
      for (Eigen::Index i = 0; i < n_phi; ++i) phi[i] = rng.uniform(0.0, 2.0 * M_PI);
    } else {
      phi = rng.normal_vector(n_phi);
    }
    return f2narx::ParamSample(std::move(theta), std::move(phi));
  };

  problem.make_excitation = [cfg, ground_motion](const f2narx::ParamSample& sample) {
    if (ground_motion) {
      f2narx::CloughPenzienSpec spec = cfg.clough_penzien;
      spec.s0 = sample.theta()[3];
      spec.peak_time = sample.theta()[4];
      return f2narx::sample_ground_motion(spec, sample.phi(), cfg.grid);
    }
    return f2narx::sample_white_noise_excitation(cfg.white_noise, sample.phi(), cfg.grid);
  };

  problem.simulate = [cfg](const f2narx::ParamSample& sample, const f2narx::Trajectory& u) {
    f2narx::BoucWenParams p = cfg.bouc_wen_template;
    p.mass = sample.theta()[0];
    p.stiffness = sample.theta()[1];
    p.y0 = sample.theta()[2];
    p.damping = cfg.damping_factor * p.mass * std::sqrt(p.stiffness / p.mass);
    return f2narx::simulate_bouc_wen(p, u);
  };

  problem.initial_value = [](const f2narx::ParamSample& sample) { return sample.theta()[2]; };
  return problem;
}

f2narx::Dataset generate_dataset(const RunConfig& cfg, std::size_t count, const char* stream) {
  const f2narx::ReliabilityProblem problem = make_problem(cfg);
  f2narx::Rng master(cfg.seed);
  std::vector<f2narx::ParamSample> params(count, f2narx::ParamSample({}, {}));
  std::vector<std::optional<f2narx::Trajectory>> us(count), ys(count);
  f2narx::Rng stream_master = master.substream(stream);
  for (std::size_t i = 0; i < count; ++i) {
    f2narx::Rng rec = stream_master.substream("record", i);
    params[i] = problem.sample_input(rec);
  }
  f2narx::parallel_for(count, cfg.threads, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      us[i] = problem.make_excitation(params[i]);
      ys[i] = problem.simulate(params[i], *us[i]);
    }
  });
  std::vector<f2narx::Trajectory> u_list, y_list;
  u_list.reserve(count);
  y_list.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    u_list.push_back(std::move(*us[i]));
    y_list.push_back(std::move(*ys[i]));
  }
  return f2narx::Dataset(cfg.grid, std::move(params), std::move(u_list), std::move(y_list));
}

struct BatchViews {
  Eigen::MatrixXd thetas;
  Eigen::VectorXd y0s;
};

BatchViews batch_views(const f2narx::Dataset& ds) {
  BatchViews v;
  v.thetas.resize(static_cast<Eigen::Index>(ds.size()), ds.theta_dim());
  v.y0s.resize(static_cast<Eigen::Index>(ds.size()));
  for (std::size_t i = 0; i < ds.size(); ++i) {
    v.thetas.row(static_cast<Eigen::Index>(i)) = ds.params()[i].theta().transpose();
    v.y0s[static_cast<Eigen::Index>(i)] = ds.responses()[i][0];
  }
  return v;
}

int run_selfcheck(int threads);

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"F2NARX surrogate modeling and first-passage reliability toolkit"};
  app.require_subcommand(1);

  std::string config_path, dataset_path, model_path, out_path, var_out, csv_out, log_path;
  bool probabilistic = false;
  bool select_hyper = false;
  int threads_override = -1;

  auto* cmd_generate = app.add_subcommand("generate", "Sample an experimental design dataset");
  cmd_generate->add_option("--config", config_path, "JSON config")->required();
  cmd_generate->add_option("--out", out_path, "output dataset file")->required();
  cmd_generate->add_option("--csv-out", csv_out, "also export responses as CSV");

  auto* cmd_train = app.add_subcommand("train", "Train the surrogate on a dataset");
  cmd_train->add_option("--config", config_path, "JSON config")->required();
  cmd_train->add_option("--dataset", dataset_path, "training dataset")->required();
  cmd_train->add_option("--out", out_path, "output model file")->required();
  cmd_train->add_flag("--select-hyperparameters", select_hyper,
                      "run the cross-validation grid from the config first");

  auto* cmd_predict = app.add_subcommand("predict", "Predict responses for a dataset");
  cmd_predict->add_option("--model", model_path, "model file")->required();
  cmd_predict->add_option("--dataset", dataset_path, "input dataset")->required();
  cmd_predict->add_option("--out", out_path, "output dataset (response = predicted mean)")
      ->required();
  cmd_predict->add_flag("--probabilistic", probabilistic, "also compute variances");
  cmd_predict->add_option("--var-out", var_out, "output dataset (response = predicted variance)");
  cmd_predict->add_option("--csv-out", csv_out, "also export predicted means as CSV");
  cmd_predict->add_option("--threads", threads_override, "worker threads (0 = all cores)");

  auto* cmd_evaluate = app.add_subcommand("evaluate", "NMSE table and timing for a test dataset");
  cmd_evaluate->add_option("--model", model_path, "model file")->required();
  cmd_evaluate->add_option("--dataset", dataset_path, "test dataset")->required();
  cmd_evaluate->add_option("--out", out_path, "metrics TSV")->required();
  cmd_evaluate->add_option("--threads", threads_override, "worker threads (0 = all cores)");

  auto* cmd_reliability = app.add_subcommand("reliability", "Active-learning first-passage study");
  cmd_reliability->add_option("--config", config_path, "JSON config")->required();
  cmd_reliability->add_option("--out", out_path, "output directory")->required();

  auto* cmd_selfcheck = app.add_subcommand("selfcheck", "Run the built-in oracle suite");
  cmd_selfcheck->add_option("--threads", threads_override, "worker threads");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (cmd_generate->parsed()) {
      const RunConfig cfg = load_config(config_path);
      if (!f2narx::divides_evenly(cfg.window_width, cfg.grid))
        std::cerr << "warning: window width is not a whole number of steps; it will be rounded\n";
      const f2narx::Dataset ds = generate_dataset(cfg, cfg.dataset_count, "dataset");
      f2narx::save_dataset(ds, out_path);
      if (!csv_out.empty()) f2narx::write_trajectories_csv(ds.responses(), csv_out);
      std::cout << "wrote " << ds.size() << " records to " << out_path << "\n";
    } else if (cmd_train->parsed()) {
      const RunConfig cfg = load_config(config_path);
      const f2narx::Dataset ds = f2narx::load_dataset(dataset_path);
      double width = cfg.window_width;
      double eps = cfg.eps_lambda;
      if (select_hyper) {
        if (!cfg.cv_enabled || cfg.cv_window_grid.empty() || cfg.cv_eps_grid.empty())
          throw ConfigError("--select-hyperparameters needs f2narx.cv with non-empty grids");
        const auto pick = f2narx::select_hyperparameters(ds, cfg.cv_window_grid, cfg.cv_eps_grid,
                                                         cfg.cv_k_folds, cfg.surrogate);
        width = pick.window_width;
        eps = pick.eps_lambda;
        std::cout << "cross-validation picked T = " << width << " s, eps = " << eps << "\n";
      }
      if (!f2narx::divides_evenly(width, ds.grid()))
        std::cerr << "warning: window width is not a whole number of steps; it will be rounded\n";
      const f2narx::F2NarxModel model = f2narx::train(ds, width, eps, cfg.surrogate);
      f2narx::save_model(model, out_path);
      std::cout << "trained in " << model.train_seconds() << " s (m_u = " << model.m_u()
                << ", m_y = " << model.m_y() << ", n_W = " << model.geometry().n_windows
                << "); model written to " << out_path << "\n";
    } else if (cmd_predict->parsed()) {
      const f2narx::F2NarxModel model = f2narx::load_model(model_path);
      const f2narx::Dataset ds = f2narx::load_dataset(dataset_path);
      const BatchViews v = batch_views(ds);
      const int threads = threads_override >= 0 ? threads_override : 1;
      std::vector<f2narx::Trajectory> means;
      std::vector<f2narx::Trajectory> variances;
      const auto t0 = std::chrono::steady_clock::now();
      if (probabilistic) {
        auto preds = model.predict_probabilistic_batch(v.thetas, ds.excitations(), v.y0s, threads);
        means.reserve(preds.size());
        variances.reserve(preds.size());
        for (auto& p : preds) {
          means.push_back(std::move(p.mean));
          variances.push_back(std::move(p.variance));
        }
      } else {
        means = model.predict_mean_batch(v.thetas, ds.excitations(), v.y0s, threads);
      }
      const double seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      f2narx::save_dataset(
          f2narx::Dataset(ds.grid(), ds.params(), ds.excitations(), means), out_path);
      if (!var_out.empty()) {
        if (!probabilistic) throw ConfigError("--var-out requires --probabilistic");
        f2narx::save_dataset(
            f2narx::Dataset(ds.grid(), ds.params(), ds.excitations(), variances), var_out);
      }
      if (!csv_out.empty()) f2narx::write_trajectories_csv(means, csv_out);
      std::cout << "predicted " << ds.size() << " records in " << seconds << " s\n";
    } else if (cmd_evaluate->parsed()) {
      const f2narx::F2NarxModel model = f2narx::load_model(model_path);
      const f2narx::Dataset ds = f2narx::load_dataset(dataset_path);
      const BatchViews v = batch_views(ds);
      const int threads = threads_override >= 0 ? threads_override : 1;
      const auto t0 = std::chrono::steady_clock::now();
      const std::vector<f2narx::Trajectory> means =
          model.predict_mean_batch(v.thetas, ds.excitations(), v.y0s, threads);
      const double predict_seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      std::ofstream os(out_path);
      if (!os) throw std::runtime_error("cannot open '" + out_path + "'");
      os << "record\tnmse\n";
      double total = 0.0;
      for (std::size_t i = 0; i < ds.size(); ++i) {
        const double err = f2narx::nmse(ds.responses()[i], means[i]);
        total += err;
        os << i << '\t' << err << '\n';
      }
      const double mean_error = total / static_cast<double>(ds.size());
      os << "mean\t" << mean_error << '\n';
      os << "train_seconds\t" << model.train_seconds() << '\n';
      os << "predict_seconds\t" << predict_seconds << '\n';
      os << "predict_seconds_per_10k\t"
         << predict_seconds / static_cast<double>(ds.size()) * 1e4 << '\n';
      std::cout << "mean NMSE " << mean_error << " over " << ds.size() << " records ("
                << predict_seconds << " s prediction)\n";
    } else if (cmd_reliability->parsed()) {
      const RunConfig cfg = load_config(config_path);
      fs::create_directories(out_path);
      const f2narx::ReliabilityProblem problem = make_problem(cfg);
      std::ofstream log(fs::path(out_path) / "iterations.tsv");
      log << "n_new\tpf\tcov\tselected\tpool_size\twall_seconds\n";
      const f2narx::ReliabilityResult result =
          f2narx::run_active_learning(problem, cfg.reliability, cfg.surrogate, &log);
      f2narx::save_model(result.model, fs::path(out_path) / "model.f2nx");
      f2narx::save_dataset(result.design, fs::path(out_path) / "design.f2nx");
      std::ofstream summary(fs::path(out_path) / "result.tsv");
      summary << "pf\t" << result.pf << "\ncov\t" << result.cov << "\ncov_met\t" << result.cov_met
              << "\nn_selected\t" << result.selected.size() << "\nn_failed\t"
              << result.failed_samples.size() << '\n';
      std::cout << "P_f = " << result.pf << " (CoV " << result.cov << ") after "
                << result.selected.size() << " added trajectories\n";
    } else if (cmd_selfcheck->parsed()) {
      return run_selfcheck(threads_override >= 0 ? threads_override : 0);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}

namespace {

int run_selfcheck(int threads) {
  using namespace f2narx;
  int failures = 0;
  auto report = [&failures](const char* name, bool ok, double value) {
    std::printf("%-34s %s (%.3e)\n", name, ok ? "PASS" : "FAIL", value);
    if (!ok) ++failures;
  };

  // GP marginal-likelihood gradient vs central finite differences.
  {
    Rng rng(7);
    Eigen::MatrixXd x(24, 3);
    Eigen::VectorXd y(24);
    for (int i = 0; i < 24; ++i) {
      x.row(i) << rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2);
      y[i] = std::sin(x(i, 0)) + 0.25 * x(i, 1) * x(i, 2);
    }
    const double err = gp_gradient_max_rel_error(x, y);
    report("gp gradient vs finite differences", err < 1e-4, err);
  }

  // SGP pinned to the exact GP.
  {
    Rng rng(11);
    Eigen::MatrixXd x(100, 2);
    Eigen::VectorXd y(100);
    for (int i = 0; i < 100; ++i) {
      x.row(i) << rng.uniform(-3, 3), rng.uniform(-3, 3);
      y[i] = std::sin(x(i, 0)) * std::cos(0.5 * x(i, 1));
    }
    GpTrainConfig cfg;
    cfg.restarts = 2;
    cfg.max_iters = 60;
    const GpModel gp = fit_gp(x, y, cfg);
    const SgpModel sgp = pin_sgp_to_gp(gp, x, y);
    Eigen::MatrixXd probe(50, 2);
    for (int i = 0; i < 50; ++i) probe.row(i) << rng.uniform(-3, 3), rng.uniform(-3, 3);
    Eigen::VectorXd m1(50), v1(50), m2(50), v2(50);
    gp.predict_batch(probe, m1, v1);
    sgp.predict_batch(probe, m2, v2);
    const double scale = std::sqrt((y.array() - y.mean()).square().mean());
    const double err = (m1 - m2).cwiseAbs().maxCoeff() / scale;
    report("sgp pinned = exact gp", err < 1e-3, err);
  }

  // UT variance vs Monte-Carlo on a fitted GP (Gaussian input, p = 3).
  {
    Rng rng(3);
    Eigen::MatrixXd x(60, 3);
    Eigen::VectorXd y(60);
    for (int i = 0; i < 60; ++i) {
      x.row(i) << rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2);
      y[i] = std::tanh(x(i, 0)) + 0.4 * x(i, 1) - 0.2 * x(i, 2) * x(i, 2);
    }
    GpTrainConfig cfg;
    cfg.restarts = 2;
    cfg.max_iters = 60;
    const GpModel gp = fit_gp(x, y, cfg);
    Eigen::VectorXd mu(3), sig(3);
    mu << 0.3, -0.4, 0.6;
    sig << 0.04, 0.09, 0.01;
    auto mean_fn = [&gp](const Eigen::VectorXd& p) { return gp.predict(p).first; };
    auto var_fn = [&gp](const Eigen::VectorXd& p) { return gp.predict(p).second; };
    const double ut = ut_variance(mean_fn, var_fn, mu, sig);
    double mc = 0.0;
    const int n_mc = 100000;
    Rng mc_rng(17);
    double m1 = 0.0, m2 = 0.0;
    for (int i = 0; i < n_mc; ++i) {
      Eigen::VectorXd p = mu;
      for (int d = 0; d < 3; ++d) p[d] += std::sqrt(sig[d]) * mc_rng.normal();
      const auto [pm, pv] = gp.predict(p);
      mc += pv;
      m1 += pm;
      m2 += pm * pm;
    }
    mc = mc / n_mc + (m2 / n_mc - (m1 / n_mc) * (m1 / n_mc));
    const double err = std::abs(ut - mc) / mc;
    report("ut variance vs 1e5-sample mcs", err < 0.05, err);
  }

  // RK4 observed convergence order on the oscillator. Single-cosine forcing
  // from rest keeps the velocity single-signed over the window, so the |v|
  // corner in the hysteresis law never activates and the asymptotic order is
  // visible.
  {
    BoucWenParams p;
    p.y0 = 0.0;
    auto forcing = [](double t) { return 2.0 * std::cos(3.0 * t); };
    auto run = [&](std::size_t n_t) {
      return simulate_bouc_wen(p, forcing, TimeGrid(0.0, 0.3 / static_cast<double>(n_t - 1), n_t));
    };
    const Trajectory c1 = run(31), c2 = run(61), c3 = run(121);
    double e12 = 0.0, e23 = 0.0;
    for (std::size_t j = 0; j < c1.size(); ++j) {
      e12 = std::max(e12, std::abs(c1[j] - c2[2 * j]));
      e23 = std::max(e23, std::abs(c2[2 * j] - c3[4 * j]));
    }
    const double order = std::log2(e12 / e23);
    report("rk4 observed order >= 3.5", order >= 3.5, order);
  }

  // PCA round trip at full retention.
  {
    Rng rng(5);
    Eigen::MatrixXd m(80, 12);
    for (Eigen::Index i = 0; i < m.size(); ++i) m(i / 12, i % 12) = rng.normal();
    const PcaProjector pca = fit_pca(m, 1.0);
    const double err = (pca.inverse_project(pca.project(m)) - m).cwiseAbs().maxCoeff();
    report("pca round trip at eps = 1", err < 1e-8, err);
  }

  // Failure-probability estimator vs brute-force counting.
  {
    Rng rng(29);
    TimeGrid grid(0.0, 0.1, 11);
    std::vector<Trajectory> trajs;
    std::size_t expected = 0;
    for (int i = 0; i < 200; ++i) {
      Eigen::VectorXd v = 0.2 * rng.normal_vector(11);
      bool fail = false;
      for (Eigen::Index j = 0; j < v.size(); ++j) fail = fail || std::abs(v[j]) >= 0.3;
      expected += fail ? 1 : 0;
      trajs.emplace_back(grid, v);
    }
    const PfEstimate est = estimate_pf(trajs, 0.3);
    const double diff =
        std::abs(est.pf - static_cast<double>(expected) / 200.0);
    report("estimate_pf vs brute force", diff == 0.0, est.pf);
  }

  (void)threads;
  if (failures > 0) {
    std::printf("%d selfcheck item(s) failed\n", failures);
    return 3;
  }
  std::printf("all selfcheck items passed\n");
  return 0;
}

}  // namespace
