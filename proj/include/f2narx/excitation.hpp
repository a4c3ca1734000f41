/**
 * @file excitation.hpp
 * @brief Stochastic excitation synthesis by spectral representation.
 *
 * Two excitation families are provided: band-limited white noise
 *   u(t) = sqrt(2 S dw) * sum_i [phi_i cos(w_i t) + phi_{n+i} sin(w_i t)]
 * and modulated ground acceleration driven by the Clough-Penzien spectrum
 *   a(t) = sqrt(2) * sum_i sqrt(2 A^2(w_i,t) S_a(w_i) dw) cos(w_i t + phi_i),
 * with w_i = i*dw in both cases. The random coefficients/phases are explicit
 * inputs, so each function is a pure map from (spec, phi, grid) to a
 * trajectory and a sample is fully reproducible from its ParamSample.
 */
#pragma once

#include <Eigen/Core>
#include <cmath>
#include <stdexcept>
#include <string>

#include "f2narx/types.hpp"

namespace f2narx {

/// Band-limited white-noise spectral representation.
struct SpectralWhiteNoiseSpec {
  double intensity = 0.05;     ///< S, m^2/s^3
  Eigen::Index n_terms = 500;  ///< cosine terms (same count of sine terms)
  double d_omega = 30.0 * M_PI / 1000.0;  ///< frequency increment, rad/s

  void validate() const {
    if (!(intensity > 0.0)) throw std::invalid_argument("white noise: S must be > 0");
    if (!(d_omega > 0.0)) throw std::invalid_argument("white noise: d_omega must be > 0");
    if (n_terms < 1) throw std::invalid_argument("white noise: need at least one term");
  }
};

/// Clough-Penzien spectrum with time-frequency modulation.
struct CloughPenzienSpec {
  double omega_g = 15.0;  ///< site frequency, rad/s
  double zeta_g = 0.6;    ///< site damping ratio
  double omega_f = 1.5;   ///< high-pass filter frequency, rad/s
  double zeta_f = 0.6;    ///< high-pass filter damping ratio
  double s0 = 1.5e-6;     ///< intensity factor, m^2/s^3
  double eta0 = 0.15;     ///< frequency modulation factor
  double duration = 45.0; ///< T_g, s
  double peak_time = 8.0; ///< c: approximate arrival time of peak acceleration, s
  double shape = 2.0;     ///< r: envelope shape coefficient
  double omega_cut = 50.0 * M_PI;  ///< upper cut-off frequency, rad/s
  Eigen::Index n_terms = 1000;

  void validate() const {
    if (!(omega_g > 0.0 && omega_f > 0.0 && omega_cut > 0.0))
      throw std::invalid_argument("clough-penzien: frequencies must be > 0");
    if (!(zeta_g > 0.0 && zeta_g < 2.0 && zeta_f > 0.0 && zeta_f < 2.0))
      throw std::invalid_argument("clough-penzien: damping ratios must lie in (0, 2)");
    if (!(duration > 0.0)) throw std::invalid_argument("clough-penzien: duration must be > 0");
    if (!(peak_time > 0.0 && peak_time <= duration))
      throw std::invalid_argument("clough-penzien: peak time must lie in (0, T_g]");
    if (!(s0 >= 0.0)) throw std::invalid_argument("clough-penzien: S0 must be >= 0");
    if (n_terms < 1) throw std::invalid_argument("clough-penzien: need at least one term");
  }
};

/**
 * @brief Band-limited white noise sample; phi holds the 2*n_terms standard
 *        Gaussian coefficients (cosines first).
 *
 * The harmonic sums use per-term rotation recurrences instead of per-sample
 * trig calls; drift over a grid is O(n_t * eps), far below sampling noise.
 */
inline Trajectory sample_white_noise_excitation(const SpectralWhiteNoiseSpec& spec,
                                                const Eigen::VectorXd& phi, const TimeGrid& grid) {
  spec.validate();
  if (phi.size() != 2 * spec.n_terms)
    throw std::invalid_argument("sample_white_noise_excitation: phi must have length " +
                                std::to_string(2 * spec.n_terms) + ", got " +
                                std::to_string(phi.size()));
  const double amplitude = std::sqrt(2.0 * spec.intensity * spec.d_omega);
  Eigen::VectorXd values = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(grid.size()));
  for (Eigen::Index i = 1; i <= spec.n_terms; ++i) {
    const double omega = static_cast<double>(i) * spec.d_omega;
    const double a = phi[i - 1];
    const double b = phi[spec.n_terms + i - 1];
    // cos/sin advanced by omega*dt each sample: one complex rotation per term
    // instead of two trig calls per (term, sample) pair.
    double c = std::cos(omega * grid.t0());
    double s = std::sin(omega * grid.t0());
    const double rot_c = std::cos(omega * grid.dt());
    const double rot_s = std::sin(omega * grid.dt());
    for (std::size_t j = 0; j < grid.size(); ++j) {
      values[static_cast<Eigen::Index>(j)] += a * c + b * s;
      const double c_next = c * rot_c - s * rot_s;
      s = s * rot_c + c * rot_s;
      c = c_next;
    }
  }
  return Trajectory(grid, amplitude * values);
}

/// Two-filter Clough-Penzien power spectral density at frequency omega.
inline double clough_penzien_psd(const CloughPenzienSpec& spec, double omega) {
  if (!(omega >= 0.0)) throw std::invalid_argument("clough_penzien_psd: omega must be >= 0");
  const double w2 = omega * omega;
  const double wg2 = spec.omega_g * spec.omega_g;
  const double wf2 = spec.omega_f * spec.omega_f;
  const double site = (wg2 * wg2 + 4.0 * spec.zeta_g * spec.zeta_g * wg2 * w2) /
                      ((wg2 - w2) * (wg2 - w2) + 4.0 * spec.zeta_g * spec.zeta_g * wg2 * w2);
  const double high_pass =
      (w2 * w2) / ((wf2 - w2) * (wf2 - w2) + 4.0 * spec.zeta_f * spec.zeta_f * wf2 * w2);
  return site * high_pass * spec.s0;
}

/// Time-frequency modulation A(omega, t).
inline double modulation(const CloughPenzienSpec& spec, double omega, double t) {
  if (t < 0.0) throw std::invalid_argument("modulation: t must be >= 0");
  const double decay = std::exp(-spec.eta0 * omega * t / (spec.omega_g * spec.duration));
  const double ratio = t / spec.peak_time;
  const double envelope = std::pow(ratio * std::exp(1.0 - ratio), spec.shape);
  return decay * envelope;
}

/**
 * @brief Modulated ground acceleration; phases holds n_terms uniform angles
 *        in [0, 2*pi).
 */
inline Trajectory sample_ground_motion(const CloughPenzienSpec& spec,
                                       const Eigen::VectorXd& phases, const TimeGrid& grid) {
  spec.validate();
  if (phases.size() != spec.n_terms)
    throw std::invalid_argument("sample_ground_motion: expected " + std::to_string(spec.n_terms) +
                                " phases, got " + std::to_string(phases.size()));
  const double d_omega = spec.omega_cut / static_cast<double>(spec.n_terms);
  Eigen::VectorXd psd(spec.n_terms);
  for (Eigen::Index i = 1; i <= spec.n_terms; ++i)
    psd[i - 1] = clough_penzien_psd(spec, static_cast<double>(i) * d_omega);

  Eigen::VectorXd values(static_cast<Eigen::Index>(grid.size()));
  for (std::size_t j = 0; j < grid.size(); ++j) {
    const double t = grid.time(j);
    double acc = 0.0;
    for (Eigen::Index i = 1; i <= spec.n_terms; ++i) {
      const double omega = static_cast<double>(i) * d_omega;
      const double a = modulation(spec, omega, t);
      acc += std::sqrt(2.0 * a * a * psd[i - 1] * d_omega) * std::cos(omega * t + phases[i - 1]);
    }
    values[static_cast<Eigen::Index>(j)] = std::sqrt(2.0) * acc;
  }
  return Trajectory(grid, std::move(values));
}

}  // namespace f2narx
