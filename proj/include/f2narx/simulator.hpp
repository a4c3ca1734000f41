/**
 * @file simulator.hpp
 * @brief Ground-truth response generation: fixed-step RK4 and the Bouc-Wen
 *        hysteretic oscillator.
 */
#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

#include "f2narx/types.hpp"

namespace f2narx {

/**
 * @brief Classical 4th-order Runge-Kutta on the data grid with a continuous
 *        forcing callable.
 *
 * deriv(t, state, forcing_value) -> state derivative; forcing(t) -> scalar.
 * Returns the n_t x dim state history. Throws on a non-finite state with the
 * time at which integration failed.
 */
template <typename Deriv, typename Forcing>
Eigen::MatrixXd integrate_rk4(Deriv&& deriv, Forcing&& forcing, const Eigen::VectorXd& x0,
                              const TimeGrid& grid) {
  const auto dim = x0.size();
  Eigen::MatrixXd history(static_cast<Eigen::Index>(grid.size()), dim);
  Eigen::VectorXd x = x0;
  history.row(0) = x.transpose();
  const double dt = grid.dt();
  Eigen::VectorXd k1(dim), k2(dim), k3(dim), k4(dim);
  for (std::size_t j = 0; j + 1 < grid.size(); ++j) {
    const double t = grid.time(j);
    const double u0 = forcing(t);
    const double u_half = forcing(t + 0.5 * dt);
    const double u1 = forcing(t + dt);
    k1 = deriv(t, x, u0);
    k2 = deriv(t + 0.5 * dt, (x + 0.5 * dt * k1).eval(), u_half);
    k3 = deriv(t + 0.5 * dt, (x + 0.5 * dt * k2).eval(), u_half);
    k4 = deriv(t + dt, (x + dt * k3).eval(), u1);
    x += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!x.allFinite())
      throw std::runtime_error("integrate_rk4: non-finite state at t = " +
                               std::to_string(t + dt));
    history.row(static_cast<Eigen::Index>(j + 1)) = x.transpose();
  }
  return history;
}

/// Forcing sampled on the grid, linearly interpolated at RK4 half-steps.
template <typename Deriv>
Eigen::MatrixXd integrate_rk4(Deriv&& deriv, const Trajectory& forcing, const Eigen::VectorXd& x0,
                              const TimeGrid& grid) {
  if (!(forcing.grid() == grid))
    throw std::invalid_argument("integrate_rk4: forcing grid does not match integration grid");
  const auto& u = forcing.values();
  auto interp = [&grid, &u](double t) {
    const double pos = (t - grid.t0()) / grid.dt();
    const auto lo = static_cast<Eigen::Index>(std::clamp(
        std::floor(pos), 0.0, static_cast<double>(grid.size() - 2)));
    const double w = pos - static_cast<double>(lo);
    return (1.0 - w) * u[lo] + w * u[lo + 1];
  };
  return integrate_rk4(std::forward<Deriv>(deriv), interp, x0, grid);
}

/// Damping rule used throughout the oscillator case study: c = 0.1*m*sqrt(k/m).
inline double bouc_wen_default_damping(double mass, double stiffness) {
  return 0.1 * mass * std::sqrt(stiffness / mass);
}

/// Bouc-Wen SDOF oscillator parameters.
struct BoucWenParams {
  double mass = 6.0e4;       ///< m, kg
  double damping = bouc_wen_default_damping(6.0e4, 5.0e6);  ///< c, N*s/m
  double stiffness = 5.0e6;  ///< k, N/m
  double alpha = 0.5;        ///< post- to pre-yield stiffness ratio
  double beta = 0.5;
  double gamma = 0.5;
  double hysteresis_amplitude = 1.0;  ///< A
  double exponent = 3.0;              ///< n
  double yield_displacement = 0.04;   ///< x_y, m
  double y0 = 0.0;                    ///< initial displacement, m

  void validate() const {
    if (!(mass > 0.0 && stiffness > 0.0 && yield_displacement > 0.0))
      throw std::invalid_argument("bouc-wen: m, k, x_y must be > 0");
    if (!(exponent >= 1.0)) throw std::invalid_argument("bouc-wen: n must be >= 1");
  }
};

namespace detail {

/// State (y, v, z); the forcing input is the mass-normalized excitation u(t).
struct BoucWenDeriv {
  double inv_mass_c;  // c/m
  double inv_mass_k;  // k/m
  double alpha;
  double one_minus_alpha_xy;  // (1-alpha)*x_y
  double beta;
  double gamma;
  double amp;  // A
  double n;
  double inv_xy;

  explicit BoucWenDeriv(const BoucWenParams& p)
      : inv_mass_c(p.damping / p.mass),
        inv_mass_k(p.stiffness / p.mass),
        alpha(p.alpha),
        one_minus_alpha_xy((1.0 - p.alpha) * p.yield_displacement),
        beta(p.beta),
        gamma(p.gamma),
        amp(p.hysteresis_amplitude),
        n(p.exponent),
        inv_xy(1.0 / p.yield_displacement) {}

  Eigen::VectorXd operator()(double /*t*/, const Eigen::VectorXd& x, double u) const {
    const double v = x[1];
    const double z = x[2];
    const double abs_z = std::abs(z);
    const double abs_z_pow_nm1 = std::pow(abs_z, n - 1.0);
    Eigen::VectorXd dx(3);
    dx[0] = v;
    dx[1] = u - inv_mass_c * v - inv_mass_k * (alpha * x[0] + one_minus_alpha_xy * z);
    dx[2] = inv_xy * (amp * v - beta * std::abs(v) * abs_z_pow_nm1 * z - gamma * v * abs_z_pow_nm1 * abs_z);
    return dx;
  }
};

}  // namespace detail

/**
 * @brief Displacement response of the Bouc-Wen oscillator to a sampled
 *        excitation, with initial conditions y(0)=y0, v(0)=0, z(0)=0.
 */
inline Trajectory simulate_bouc_wen(const BoucWenParams& p, const Trajectory& u) {
  p.validate();
  Eigen::VectorXd x0(3);
  x0 << p.y0, 0.0, 0.0;
  const Eigen::MatrixXd history = integrate_rk4(detail::BoucWenDeriv(p), u, x0, u.grid());
  return Trajectory(u.grid(), history.col(0));
}

/// Same oscillator driven by a continuous forcing function (used by oracles).
template <typename Forcing>
Trajectory simulate_bouc_wen(const BoucWenParams& p, Forcing&& forcing, const TimeGrid& grid) {
  p.validate();
  Eigen::VectorXd x0(3);
  x0 << p.y0, 0.0, 0.0;
  const Eigen::MatrixXd history =
      integrate_rk4(detail::BoucWenDeriv(p), std::forward<Forcing>(forcing), x0, grid);
  return Trajectory(grid, history.col(0));
}

}  // namespace f2narx
