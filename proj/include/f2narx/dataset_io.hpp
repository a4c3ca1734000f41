/**
 * @file dataset_io.hpp
 * @brief Dataset persistence: binary container format and CSV interop.
 *
 * Container layout (little-endian):
 *   magic "F2NXDS01" (8 bytes)
 *   u64 N_ED, u64 n_t, u64 n_s, u64 n_phi
 *   f64 t0, f64 dt
 *   per record: theta (n_s f64), phi (n_phi f64),
 *               excitation (n_t f64), response (n_t f64)
 *
 * Round-trips are bitwise exact.
 */
#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "f2narx/binary_io.hpp"
#include "f2narx/types.hpp"

namespace f2narx {

inline constexpr char kDatasetMagic[9] = "F2NXDS01";

inline void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
  // Dataset invariants (alignment, finiteness) hold by construction; nothing
  // is written unless the stream opens.
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("save_dataset: cannot open '" + path.string() + "' for writing");
  io::write_magic(os, kDatasetMagic);
  io::write_u64(os, ds.size());
  io::write_u64(os, ds.grid().size());
  io::write_u64(os, static_cast<std::uint64_t>(ds.theta_dim()));
  io::write_u64(os, static_cast<std::uint64_t>(ds.phi_dim()));
  io::write_f64(os, ds.grid().t0());
  io::write_f64(os, ds.grid().dt());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    io::write_vec(os, ds.params()[i].theta());
    io::write_vec(os, ds.params()[i].phi());
    io::write_vec(os, ds.excitations()[i].values());
    io::write_vec(os, ds.responses()[i].values());
  }
  os.flush();
  if (!os) throw std::runtime_error("save_dataset: write failure on '" + path.string() + "'");
}

inline Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_dataset: cannot open '" + path.string() + "'");
  io::expect_magic(is, kDatasetMagic, "load_dataset('" + path.string() + "')");
  const std::uint64_t n_records = io::read_u64(is);
  const std::uint64_t n_t = io::read_u64(is);
  const auto n_s = static_cast<Eigen::Index>(io::read_u64(is));
  const auto n_phi = static_cast<Eigen::Index>(io::read_u64(is));
  const double t0 = io::read_f64(is);
  const double dt = io::read_f64(is);

  TimeGrid grid(t0, dt, static_cast<std::size_t>(n_t));
  std::vector<ParamSample> params;
  std::vector<Trajectory> excitations;
  std::vector<Trajectory> responses;
  params.reserve(n_records);
  excitations.reserve(n_records);
  responses.reserve(n_records);
  for (std::uint64_t i = 0; i < n_records; ++i) {
    try {
      Eigen::VectorXd theta = io::read_vec(is, n_s);
      Eigen::VectorXd phi = io::read_vec(is, n_phi);
      Eigen::VectorXd u = io::read_vec(is, static_cast<Eigen::Index>(n_t));
      Eigen::VectorXd y = io::read_vec(is, static_cast<Eigen::Index>(n_t));
      params.emplace_back(std::move(theta), std::move(phi));
      excitations.emplace_back(grid, std::move(u));
      responses.emplace_back(grid, std::move(y));
    } catch (const std::exception& e) {
      throw std::runtime_error("load_dataset('" + path.string() + "'): record " +
                               std::to_string(i) + ": " + e.what());
    }
  }
  return Dataset(grid, std::move(params), std::move(excitations), std::move(responses));
}

/// One trajectory per row; header row holds the time stamps.
inline void write_trajectories_csv(const std::vector<Trajectory>& trajectories,
                                   const std::filesystem::path& path) {
  if (trajectories.empty()) throw std::invalid_argument("write_trajectories_csv: empty list");
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("write_trajectories_csv: cannot open '" + path.string() + "'");
  os.precision(17);
  const TimeGrid& grid = trajectories.front().grid();
  for (std::size_t j = 0; j < grid.size(); ++j) os << (j ? "," : "") << grid.time(j);
  os << '\n';
  for (const auto& t : trajectories) {
    if (!(t.grid() == grid))
      throw std::invalid_argument("write_trajectories_csv: mixed grids");
    for (std::size_t j = 0; j < t.size(); ++j) os << (j ? "," : "") << t[j];
    os << '\n';
  }
  if (!os) throw std::runtime_error("write_trajectories_csv: write failure");
}

inline std::vector<Trajectory> read_trajectories_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("read_trajectories_csv: cannot open '" + path.string() + "'");
  auto parse_row = [](const std::string& line) {
    std::vector<double> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(std::stod(cell));
    return out;
  };
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("read_trajectories_csv: missing header");
  const std::vector<double> stamps = parse_row(line);
  if (stamps.size() < 2) throw std::runtime_error("read_trajectories_csv: header too short");
  TimeGrid grid(stamps.front(), stamps[1] - stamps[0], stamps.size());
  std::vector<Trajectory> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const std::vector<double> row = parse_row(line);
    if (row.size() != stamps.size())
      throw std::runtime_error("read_trajectories_csv: row length does not match header");
    out.emplace_back(grid, Eigen::Map<const Eigen::VectorXd>(row.data(),
                                                             static_cast<Eigen::Index>(row.size())));
  }
  return out;
}

}  // namespace f2narx
