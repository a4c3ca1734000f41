/**
 * @file model_io.hpp
 * @brief Surrogate model persistence ("F2NXMD01", little-endian, f64).
 *
 * The file stores the prediction-sufficient state: window geometry, both
 * projectors, both regressor banks with their factorizations, and every
 * normalization constant. Save/load round-trips are bitwise exact, so a
 * reloaded model reproduces predictions bit-for-bit.
 */
#pragma once

#include <filesystem>
#include <fstream>

#include "f2narx/binary_io.hpp"
#include "f2narx/f2narx.hpp"

namespace f2narx {

inline constexpr char kModelMagic[9] = "F2NXMD01";
inline constexpr std::uint64_t kModelVersion = 1;

namespace io {

inline void write_row_vec(std::ostream& os, const Eigen::RowVectorXd& v) {
  write_u64(os, static_cast<std::uint64_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) write_f64(os, v[i]);
}

inline Eigen::RowVectorXd read_row_vec(std::istream& is) {
  const auto n = static_cast<Eigen::Index>(read_u64(is));
  Eigen::RowVectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = read_f64(is);
  return v;
}

inline void write_col_vec(std::ostream& os, const Eigen::VectorXd& v) {
  write_u64(os, static_cast<std::uint64_t>(v.size()));
  write_vec(os, v);
}

inline Eigen::VectorXd read_col_vec(std::istream& is) {
  const auto n = static_cast<Eigen::Index>(read_u64(is));
  return read_vec(is, n);
}

inline void write_pca(std::ostream& os, const PcaProjector& p) {
  write_row_vec(os, p.mean());
  write_row_vec(os, p.stddev());
  write_matrix(os, p.basis());
  write_col_vec(os, p.eigenvalues());
  write_f64(os, p.eps_lambda());
}

inline PcaProjector read_pca(std::istream& is) {
  Eigen::RowVectorXd mu = read_row_vec(is);
  Eigen::RowVectorXd sigma = read_row_vec(is);
  Eigen::MatrixXd basis = read_matrix(is);
  Eigen::VectorXd lambdas = read_col_vec(is);
  const double eps = read_f64(is);
  return PcaProjector(std::move(mu), std::move(sigma), std::move(basis), std::move(lambdas), eps);
}

inline void write_gp(std::ostream& os, const GpState& s) {
  write_row_vec(os, s.x_norm.mean);
  write_row_vec(os, s.x_norm.scale);
  write_f64(os, s.y_mean);
  write_f64(os, s.y_scale);
  write_f64(os, s.signal_variance);
  write_col_vec(os, s.lengthscales);
  write_f64(os, s.noise_variance);
  write_matrix(os, s.train_scaled);
  write_matrix(os, s.chol);
  write_col_vec(os, s.alpha);
}

inline GpState read_gp(std::istream& is) {
  GpState s;
  s.x_norm.mean = read_row_vec(is);
  s.x_norm.scale = read_row_vec(is);
  s.y_mean = read_f64(is);
  s.y_scale = read_f64(is);
  s.signal_variance = read_f64(is);
  s.lengthscales = read_col_vec(is);
  s.noise_variance = read_f64(is);
  s.train_scaled = read_matrix(is);
  s.chol = read_matrix(is);
  s.alpha = read_col_vec(is);
  return s;
}

inline void write_sgp(std::ostream& os, const SgpState& s) {
  write_row_vec(os, s.x_norm.mean);
  write_row_vec(os, s.x_norm.scale);
  write_f64(os, s.y_mean);
  write_f64(os, s.y_scale);
  write_f64(os, s.signal_variance);
  write_col_vec(os, s.lengthscales);
  write_f64(os, s.noise_variance);
  write_matrix(os, s.inducing);
  write_matrix(os, s.inducing_scaled);
  write_matrix(os, s.chol_kmm);
  write_matrix(os, s.chol_b);
  write_col_vec(os, s.mean_weights);
}

inline SgpState read_sgp(std::istream& is) {
  SgpState s;
  s.x_norm.mean = read_row_vec(is);
  s.x_norm.scale = read_row_vec(is);
  s.y_mean = read_f64(is);
  s.y_scale = read_f64(is);
  s.signal_variance = read_f64(is);
  s.lengthscales = read_col_vec(is);
  s.noise_variance = read_f64(is);
  s.inducing = read_matrix(is);
  s.inducing_scaled = read_matrix(is);
  s.chol_kmm = read_matrix(is);
  s.chol_b = read_matrix(is);
  s.mean_weights = read_col_vec(is);
  return s;
}

}  // namespace io

inline void save_model(const F2NarxModel& model, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("save_model: cannot open '" + path.string() + "' for writing");
  io::write_magic(os, kModelMagic);
  io::write_u64(os, kModelVersion);
  io::write_f64(os, model.grid().t0());
  io::write_f64(os, model.grid().dt());
  io::write_u64(os, model.grid().size());
  const WindowGeometry& geo = model.geometry();
  io::write_f64(os, geo.width);
  io::write_u64(os, static_cast<std::uint64_t>(geo.n_per_window));
  io::write_u64(os, static_cast<std::uint64_t>(geo.n_windows));
  io::write_u64(os, geo.n_t);
  io::write_u64(os, geo.overlap_last ? 1 : 0);
  io::write_u64(os, static_cast<std::uint64_t>(model.theta_dim()));
  io::write_u64(os, model.clamp_kappa() ? 1 : 0);
  io::write_f64(os, model.train_seconds());
  io::write_pca(os, model.pca_u());
  io::write_pca(os, model.pca_y());
  io::write_u64(os, model.f0_bank().size());
  for (const auto& gp : model.f0_bank()) io::write_gp(os, gp.state());
  io::write_u64(os, model.f_bank().size());
  for (const auto& sgp : model.f_bank()) io::write_sgp(os, sgp.state());
  os.flush();
  if (!os) throw std::runtime_error("save_model: write failure on '" + path.string() + "'");
}

inline F2NarxModel load_model(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_model: cannot open '" + path.string() + "'");
  io::expect_magic(is, kModelMagic, "load_model('" + path.string() + "')");
  const std::uint64_t version = io::read_u64(is);
  if (version != kModelVersion)
    throw std::runtime_error("load_model: unsupported version " + std::to_string(version));
  const double t0 = io::read_f64(is);
  const double dt = io::read_f64(is);
  const std::uint64_t n_t = io::read_u64(is);
  TimeGrid grid(t0, dt, static_cast<std::size_t>(n_t));
  WindowGeometry geo;
  geo.width = io::read_f64(is);
  geo.n_per_window = static_cast<Eigen::Index>(io::read_u64(is));
  geo.n_windows = static_cast<Eigen::Index>(io::read_u64(is));
  geo.n_t = static_cast<std::size_t>(io::read_u64(is));
  geo.overlap_last = io::read_u64(is) != 0;
  const auto n_s = static_cast<Eigen::Index>(io::read_u64(is));
  const bool clamp_kappa = io::read_u64(is) != 0;
  const double train_seconds = io::read_f64(is);
  PcaProjector pca_u = io::read_pca(is);
  PcaProjector pca_y = io::read_pca(is);
  const std::uint64_t f0_count = io::read_u64(is);
  std::vector<GpModel> f0_bank;
  f0_bank.reserve(f0_count);
  for (std::uint64_t k = 0; k < f0_count; ++k) f0_bank.emplace_back(io::read_gp(is));
  const std::uint64_t f_count = io::read_u64(is);
  std::vector<SgpModel> f_bank;
  f_bank.reserve(f_count);
  for (std::uint64_t k = 0; k < f_count; ++k) f_bank.emplace_back(io::read_sgp(is));
  return F2NarxModel(grid, geo, std::move(pca_u), std::move(pca_y), std::move(f0_bank),
                     std::move(f_bank), n_s, clamp_kappa, train_seconds);
}

}  // namespace f2narx
