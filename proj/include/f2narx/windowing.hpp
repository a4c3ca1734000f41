/**
 * @file windowing.hpp
 * @brief Trajectory segmentation into local time windows and assembly of the
 *        autoregressive training matrices.
 *
 * A record of N_t samples drops its initial value (index 0) and splits the
 * remaining N_t - 1 samples into windows of n_T samples. When n_T does not
 * divide N_t - 1, the first floor((N_t-1)/n_T) windows are non-overlapping
 * and one extra window covering the final n_T samples is added, overlapping
 * its predecessor.
 */
#pragma once

#include <Eigen/Core>
#include <cmath>
#include <stdexcept>
#include <string>

#include "f2narx/types.hpp"

namespace f2narx {

/// Window partition of a record; look-back and look-ahead widths are equal.
struct WindowGeometry {
  double width = 0.0;             ///< T, seconds
  Eigen::Index n_per_window = 0;  ///< n_T: samples per window
  Eigen::Index n_windows = 0;     ///< n_W
  std::size_t n_t = 0;            ///< grid length the geometry was built for
  bool overlap_last = false;

  /// 0-based sample index of the first sample of window w (w in [0, n_W)).
  Eigen::Index window_start(Eigen::Index w) const {
    if (overlap_last && w == n_windows - 1)
      return static_cast<Eigen::Index>(n_t) - n_per_window;
    return w * n_per_window + 1;
  }
};

/// True when T maps to a whole number of samples on the grid.
inline bool divides_evenly(double width, const TimeGrid& grid) {
  const double ratio = width / grid.dt();
  return std::abs(ratio - std::round(ratio)) < 1e-9 * std::max(1.0, std::abs(ratio));
}

inline WindowGeometry make_geometry(double width, const TimeGrid& grid) {
  const auto n_samples = static_cast<Eigen::Index>(grid.size()) - 1;  // initial value excluded
  const auto n_per_window = static_cast<Eigen::Index>(std::llround(width / grid.dt()));
  if (n_per_window < 1)
    throw std::invalid_argument("make_geometry: window width " + std::to_string(width) +
                                " s is below one sample step");
  if (n_per_window > n_samples)
    throw std::invalid_argument("make_geometry: window width exceeds the record");
  WindowGeometry geo;
  geo.width = width;
  geo.n_per_window = n_per_window;
  geo.n_t = grid.size();
  if (n_samples % n_per_window == 0) {
    geo.n_windows = n_samples / n_per_window;
    geo.overlap_last = false;
  } else {
    geo.n_windows = n_samples / n_per_window + 1;
    geo.overlap_last = true;
  }
  return geo;
}

/// Local window matrices, record-major and window-minor in the row index.
struct WindowMatrices {
  Eigen::MatrixXd excitation;  ///< (N_ED * n_W) x n_T
  Eigen::MatrixXd response;    ///< (N_ED * n_W) x n_T
};

/// All windows of a single record as the rows of an n_W x n_T matrix.
inline Eigen::MatrixXd segment_record(const Eigen::VectorXd& values, const WindowGeometry& geo) {
  if (static_cast<std::size_t>(values.size()) != geo.n_t)
    throw std::invalid_argument("segment_record: record length does not match geometry");
  Eigen::MatrixXd rows(geo.n_windows, geo.n_per_window);
  for (Eigen::Index w = 0; w < geo.n_windows; ++w)
    rows.row(w) = values.segment(geo.window_start(w), geo.n_per_window).transpose();
  return rows;
}

inline WindowMatrices segment(const Dataset& ds, const WindowGeometry& geo) {
  if (ds.empty()) throw std::invalid_argument("segment: dataset is empty");
  if (geo.n_t != ds.grid().size())
    throw std::invalid_argument("segment: geometry built for a different grid");
  const auto n_records = static_cast<Eigen::Index>(ds.size());
  WindowMatrices out;
  out.excitation.resize(n_records * geo.n_windows, geo.n_per_window);
  out.response.resize(n_records * geo.n_windows, geo.n_per_window);
  for (Eigen::Index i = 0; i < n_records; ++i) {
    out.excitation.middleRows(i * geo.n_windows, geo.n_windows) =
        segment_record(ds.excitations()[static_cast<std::size_t>(i)].values(), geo);
    out.response.middleRows(i * geo.n_windows, geo.n_windows) =
        segment_record(ds.responses()[static_cast<std::size_t>(i)].values(), geo);
  }
  return out;
}

/// Training pair for the first-window mapping: one row per record.
struct FirstWindowData {
  Eigen::MatrixXd inputs;   ///< N_ED x (m_u + 2 + n_s): [xi_u_1 | u(t0) | y(t0) | theta]
  Eigen::MatrixXd targets;  ///< N_ED x m_y: xi_y_1
};

/// Training pair for the recursive mapping: one row per (record, window >= 2).
struct RecursiveData {
  Eigen::MatrixXd inputs;   ///< N_ED*(n_W-1) x (2*m_u + m_y + n_s)
  Eigen::MatrixXd targets;  ///< N_ED*(n_W-1) x m_y
};

/**
 * @brief First-window training data from feature matrices aligned with the
 *        segment() row layout.
 */
inline FirstWindowData assemble_first_window_training(const Dataset& ds, const WindowGeometry& geo,
                                                      const Eigen::MatrixXd& features_u,
                                                      const Eigen::MatrixXd& features_y) {
  const auto n_records = static_cast<Eigen::Index>(ds.size());
  const Eigen::Index expected_rows = n_records * geo.n_windows;
  if (features_u.rows() != expected_rows || features_y.rows() != expected_rows)
    throw std::invalid_argument("assemble_first_window_training: feature rows misaligned");
  const Eigen::Index m_u = features_u.cols();
  const Eigen::Index n_s = ds.theta_dim();
  FirstWindowData out;
  out.inputs.resize(n_records, m_u + 2 + n_s);
  out.targets.resize(n_records, features_y.cols());
  for (Eigen::Index i = 0; i < n_records; ++i) {
    const auto rec = static_cast<std::size_t>(i);
    out.inputs.block(i, 0, 1, m_u) = features_u.row(i * geo.n_windows);
    out.inputs(i, m_u) = ds.excitations()[rec][0];
    out.inputs(i, m_u + 1) = ds.responses()[rec][0];
    out.inputs.block(i, m_u + 2, 1, n_s) = ds.params()[rec].theta().transpose();
    out.targets.row(i) = features_y.row(i * geo.n_windows);
  }
  return out;
}

/**
 * @brief Recursive training data: window j >= 2 of record i yields the row
 *        [xi_u_j | xi_u_{j-1} | xi_y_{j-1} | theta] with target xi_y_j.
 */
inline RecursiveData assemble_recursive_training(const Dataset& ds, const WindowGeometry& geo,
                                                 const Eigen::MatrixXd& features_u,
                                                 const Eigen::MatrixXd& features_y) {
  const auto n_records = static_cast<Eigen::Index>(ds.size());
  const Eigen::Index expected_rows = n_records * geo.n_windows;
  if (features_u.rows() != expected_rows || features_y.rows() != expected_rows)
    throw std::invalid_argument("assemble_recursive_training: feature rows misaligned");
  const Eigen::Index m_u = features_u.cols();
  const Eigen::Index m_y = features_y.cols();
  const Eigen::Index n_s = ds.theta_dim();
  RecursiveData out;
  out.inputs.resize(n_records * (geo.n_windows - 1), 2 * m_u + m_y + n_s);
  out.targets.resize(n_records * (geo.n_windows - 1), m_y);
  Eigen::Index row = 0;
  for (Eigen::Index i = 0; i < n_records; ++i) {
    for (Eigen::Index w = 1; w < geo.n_windows; ++w, ++row) {
      const Eigen::Index current = i * geo.n_windows + w;
      const Eigen::Index previous = current - 1;
      out.inputs.block(row, 0, 1, m_u) = features_u.row(current);
      out.inputs.block(row, m_u, 1, m_u) = features_u.row(previous);
      out.inputs.block(row, 2 * m_u, 1, m_y) = features_y.row(previous);
      out.inputs.block(row, 2 * m_u + m_y, 1, n_s) =
          ds.params()[static_cast<std::size_t>(i)].theta().transpose();
      out.targets.row(row) = features_y.row(current);
    }
  }
  return out;
}

}  // namespace f2narx
