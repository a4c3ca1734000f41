/**
 * @file types.hpp
 * @brief Domain types: time grids, trajectories, parameter samples, datasets.
 *
 * All values are 64-bit IEEE-754. Every type validates its invariants at
 * construction and is immutable afterwards, so instances can be shared
 * freely across threads.
 */
#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace f2narx {

/// Uniform sampling grid: instant j sits at t0 + j*dt for j in [0, n_t).
class TimeGrid {
 public:
  TimeGrid(double t0, double dt, std::size_t n_t) : t0_(t0), dt_(dt), n_t_(n_t) {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("TimeGrid: dt must be positive and finite");
    if (!std::isfinite(t0)) throw std::invalid_argument("TimeGrid: t0 must be finite");
    if (n_t < 2) throw std::invalid_argument("TimeGrid: need at least 2 instants");
  }

  double t0() const { return t0_; }
  double dt() const { return dt_; }
  std::size_t size() const { return n_t_; }
  double time(std::size_t j) const { return t0_ + static_cast<double>(j) * dt_; }
  double end() const { return time(n_t_ - 1); }

  friend bool operator==(const TimeGrid& a, const TimeGrid& b) {
    return a.t0_ == b.t0_ && a.dt_ == b.dt_ && a.n_t_ == b.n_t_;
  }

 private:
  double t0_;
  double dt_;
  std::size_t n_t_;
};

/// One realization of a uniformly sampled signal.
class Trajectory {
 public:
  Trajectory(TimeGrid grid, Eigen::VectorXd values) : grid_(grid), values_(std::move(values)) {
    if (static_cast<std::size_t>(values_.size()) != grid_.size())
      throw std::invalid_argument("Trajectory: values length " + std::to_string(values_.size()) +
                                  " does not match grid size " + std::to_string(grid_.size()));
    if (!values_.allFinite()) throw std::invalid_argument("Trajectory: non-finite sample");
  }

  const TimeGrid& grid() const { return grid_; }
  const Eigen::VectorXd& values() const { return values_; }
  double operator[](std::size_t j) const { return values_[static_cast<Eigen::Index>(j)]; }
  std::size_t size() const { return grid_.size(); }

 private:
  TimeGrid grid_;
  Eigen::VectorXd values_;
};

/// One joint draw of system parameters theta and excitation randomness phi.
class ParamSample {
 public:
  ParamSample(Eigen::VectorXd theta, Eigen::VectorXd phi)
      : theta_(std::move(theta)), phi_(std::move(phi)) {
    if (!theta_.allFinite() || !phi_.allFinite())
      throw std::invalid_argument("ParamSample: non-finite entry");
  }

  const Eigen::VectorXd& theta() const { return theta_; }
  const Eigen::VectorXd& phi() const { return phi_; }

 private:
  Eigen::VectorXd theta_;
  Eigen::VectorXd phi_;
};

/**
 * @brief Aligned experimental design: parameter samples with their excitation
 *        and response trajectories, all on one common grid.
 */
class Dataset {
 public:
  /// Empty dataset on a placeholder grid.
  Dataset() : grid_(0.0, 1.0, 2) {}

  Dataset(TimeGrid grid, std::vector<ParamSample> params, std::vector<Trajectory> excitations,
          std::vector<Trajectory> responses)
      : grid_(grid),
        params_(std::move(params)),
        excitations_(std::move(excitations)),
        responses_(std::move(responses)) {
    if (params_.size() != excitations_.size() || params_.size() != responses_.size())
      throw std::invalid_argument("Dataset: params/excitations/responses lengths differ");
    for (const auto& t : excitations_)
      if (!(t.grid() == grid_)) throw std::invalid_argument("Dataset: excitation grid mismatch");
    for (const auto& t : responses_)
      if (!(t.grid() == grid_)) throw std::invalid_argument("Dataset: response grid mismatch");
    if (!params_.empty()) {
      const auto n_s = params_.front().theta().size();
      const auto n_phi = params_.front().phi().size();
      for (const auto& p : params_)
        if (p.theta().size() != n_s || p.phi().size() != n_phi)
          throw std::invalid_argument("Dataset: inconsistent parameter dimensions");
    }
  }

  const TimeGrid& grid() const { return grid_; }
  std::size_t size() const { return params_.size(); }
  bool empty() const { return params_.empty(); }
  const std::vector<ParamSample>& params() const { return params_; }
  const std::vector<Trajectory>& excitations() const { return excitations_; }
  const std::vector<Trajectory>& responses() const { return responses_; }

  Eigen::Index theta_dim() const { return params_.empty() ? 0 : params_.front().theta().size(); }
  Eigen::Index phi_dim() const { return params_.empty() ? 0 : params_.front().phi().size(); }

  /// New dataset with one more record appended.
  Dataset appended(ParamSample sample, Trajectory excitation, Trajectory response) const {
    auto params = params_;
    auto exc = excitations_;
    auto res = responses_;
    params.push_back(std::move(sample));
    exc.push_back(std::move(excitation));
    res.push_back(std::move(response));
    return Dataset(grid_, std::move(params), std::move(exc), std::move(res));
  }

  /// New dataset restricted to the given record indices.
  Dataset subset(const std::vector<std::size_t>& indices) const {
    std::vector<ParamSample> params;
    std::vector<Trajectory> exc;
    std::vector<Trajectory> res;
    params.reserve(indices.size());
    exc.reserve(indices.size());
    res.reserve(indices.size());
    for (const std::size_t i : indices) {
      if (i >= size()) throw std::out_of_range("Dataset::subset: index out of range");
      params.push_back(params_[i]);
      exc.push_back(excitations_[i]);
      res.push_back(responses_[i]);
    }
    return Dataset(grid_, std::move(params), std::move(exc), std::move(res));
  }

 private:
  TimeGrid grid_;
  std::vector<ParamSample> params_;
  std::vector<Trajectory> excitations_;
  std::vector<Trajectory> responses_;
};

}  // namespace f2narx
