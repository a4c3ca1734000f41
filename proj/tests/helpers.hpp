/**
 * @file helpers.hpp
 * @brief Shared fixtures for the test suites: oscillator problem setup and
 *        dataset synthesis.
 */
#pragma once

#include <optional>
#include <vector>

#include "f2narx/excitation.hpp"
#include "f2narx/parallel.hpp"
#include "f2narx/random.hpp"
#include "f2narx/simulator.hpp"
#include "f2narx/types.hpp"

namespace testing_helpers {

struct OscillatorStudy {
  f2narx::TimeGrid grid{0.0, 0.004, 3001};
  f2narx::SpectralWhiteNoiseSpec excitation;
  double mass_min = 5e4, mass_max = 7e4;
  double stiffness_min = 4e6, stiffness_max = 6e6;
  double y0_min = -0.01, y0_max = 0.01;

  f2narx::ParamSample sample(f2narx::Rng& rng) const {
    Eigen::VectorXd theta(3);
    theta << rng.uniform(mass_min, mass_max), rng.uniform(stiffness_min, stiffness_max),
        rng.uniform(y0_min, y0_max);
    return f2narx::ParamSample(theta, rng.normal_vector(2 * excitation.n_terms));
  }

  f2narx::Trajectory excite(const f2narx::ParamSample& s) const {
    return f2narx::sample_white_noise_excitation(excitation, s.phi(), grid);
  }

  f2narx::BoucWenParams physical_params(const f2narx::ParamSample& s) const {
    f2narx::BoucWenParams p;
    p.mass = s.theta()[0];
    p.stiffness = s.theta()[1];
    p.y0 = s.theta()[2];
    p.damping = f2narx::bouc_wen_default_damping(p.mass, p.stiffness);
    return p;
  }

  f2narx::Trajectory simulate(const f2narx::ParamSample& s, const f2narx::Trajectory& u) const {
    return f2narx::simulate_bouc_wen(physical_params(s), u);
  }

  /// Experimental design of `count` records; parallel over records.
  f2narx::Dataset make_dataset(std::size_t count, std::uint64_t seed, int threads = 2) const {
    f2narx::Rng master(seed);
    std::vector<f2narx::ParamSample> params;
    params.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
      f2narx::Rng rec = master.substream("record", i);
      params.push_back(sample(rec));
    }
    std::vector<std::optional<f2narx::Trajectory>> us(count), ys(count);
    f2narx::parallel_for(count, threads, [&](std::size_t lo, std::size_t hi) {
      for (std::size_t i = lo; i < hi; ++i) {
        us[i] = excite(params[i]);
        ys[i] = simulate(params[i], *us[i]);
      }
    });
    std::vector<f2narx::Trajectory> u_list, y_list;
    u_list.reserve(count);
    y_list.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
      u_list.push_back(std::move(*us[i]));
      y_list.push_back(std::move(*ys[i]));
    }
    return f2narx::Dataset(grid, std::move(params), std::move(u_list), std::move(y_list));
  }
};

}  // namespace testing_helpers
