#include <catch2/catch.hpp>

#include "f2narx/random.hpp"
#include "f2narx/windowing.hpp"

using namespace f2narx;

namespace {

Dataset window_fixture(std::size_t n_records, std::size_t n_t, std::uint64_t seed) {
  TimeGrid grid(0.0, 0.004, n_t);
  Rng rng(seed);
  std::vector<ParamSample> params;
  std::vector<Trajectory> us, ys;
  for (std::size_t i = 0; i < n_records; ++i) {
    params.emplace_back(rng.normal_vector(3), rng.normal_vector(4));
    us.emplace_back(grid, rng.normal_vector(static_cast<Eigen::Index>(n_t)));
    ys.emplace_back(grid, rng.normal_vector(static_cast<Eigen::Index>(n_t)));
  }
  return Dataset(grid, std::move(params), std::move(us), std::move(ys));
}

}  // namespace

TEST_CASE("geometry at the oscillator study settings") {
  const WindowGeometry geo = make_geometry(0.08, TimeGrid(0.0, 0.004, 3001));
  CHECK(geo.n_per_window == 20);
  CHECK(geo.n_windows == 150);
  CHECK_FALSE(geo.overlap_last);
}

TEST_CASE("geometry at the ground-motion study settings") {
  const WindowGeometry geo = make_geometry(0.45, TimeGrid(0.0, 0.005, 9001));
  CHECK(geo.n_per_window == 90);
  CHECK(geo.n_windows == 100);
  CHECK_FALSE(geo.overlap_last);
}

TEST_CASE("geometry with a trailing overlap window") {
  // N_t = 11, n_T = 3: windows [1..3] [4..6] [7..9] [8..10].
  const WindowGeometry geo = make_geometry(0.012, TimeGrid(0.0, 0.004, 11));
  CHECK(geo.n_per_window == 3);
  CHECK(geo.n_windows == 4);
  CHECK(geo.overlap_last);
  CHECK(geo.window_start(0) == 1);
  CHECK(geo.window_start(1) == 4);
  CHECK(geo.window_start(2) == 7);
  CHECK(geo.window_start(3) == 8);
}

TEST_CASE("geometry rejects out-of-range widths") {
  const TimeGrid grid(0.0, 0.004, 101);
  CHECK_THROWS_AS(make_geometry(0.001, grid), std::invalid_argument);
  CHECK_THROWS_AS(make_geometry(1.0, grid), std::invalid_argument);
  CHECK(divides_evenly(0.08, grid));
  CHECK_FALSE(divides_evenly(0.081, grid));
}

TEST_CASE("segment: constant record produces constant rows") {
  TimeGrid grid(0.0, 0.004, 21);
  std::vector<ParamSample> params;
  params.emplace_back(Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1));
  std::vector<Trajectory> us{Trajectory(grid, Eigen::VectorXd::Ones(21))};
  std::vector<Trajectory> ys{Trajectory(grid, Eigen::VectorXd::Constant(21, 5.0))};
  const Dataset ds(grid, params, us, ys);
  const WindowGeometry geo = make_geometry(0.02, grid);
  const WindowMatrices wm = segment(ds, geo);
  CHECK((wm.response.array() - 5.0).abs().maxCoeff() == 0.0);
}

TEST_CASE("segment: non-overlapping windows reassemble samples 1..N_t-1") {
  const Dataset ds = window_fixture(3, 41, 7);
  const WindowGeometry geo = make_geometry(0.032, ds.grid());  // n_T = 8, 5 windows
  REQUIRE_FALSE(geo.overlap_last);
  const WindowMatrices wm = segment(ds, geo);
  for (std::size_t rec = 0; rec < ds.size(); ++rec) {
    Eigen::VectorXd rebuilt(40);
    for (Eigen::Index w = 0; w < geo.n_windows; ++w)
      rebuilt.segment(w * geo.n_per_window, geo.n_per_window) =
          wm.response.row(static_cast<Eigen::Index>(rec) * geo.n_windows + w).transpose();
    CHECK((rebuilt - ds.responses()[rec].values().tail(40)).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("segment: last two windows share the overlapped samples") {
  const Dataset ds = window_fixture(1, 11, 9);
  const WindowGeometry geo = make_geometry(0.012, ds.grid());
  const WindowMatrices wm = segment(ds, geo);
  // window 3 covers samples 8..10, window 2 covers 7..9: samples 8, 9 shared.
  CHECK(wm.response(3, 0) == wm.response(2, 1));
  CHECK(wm.response(3, 1) == wm.response(2, 2));
}

TEST_CASE("training assembly: shapes and layout") {
  const Dataset ds = window_fixture(4, 41, 21);
  const WindowGeometry geo = make_geometry(0.032, ds.grid());
  const Eigen::Index rows = static_cast<Eigen::Index>(ds.size()) * geo.n_windows;
  Rng rng(5);
  Eigen::MatrixXd features_u(rows, 2), features_y(rows, 3);
  for (Eigen::Index i = 0; i < rows; ++i) {
    features_u.row(i) = rng.normal_vector(2).transpose();
    features_y.row(i) = rng.normal_vector(3).transpose();
  }

  const FirstWindowData first = assemble_first_window_training(ds, geo, features_u, features_y);
  CHECK(first.inputs.rows() == 4);
  CHECK(first.inputs.cols() == 2 + 2 + 3);  // m_u + 2 + n_s
  CHECK(first.targets.cols() == 3);
  // Row layout: [xi_u_1 | u(t0) | y(t0) | theta].
  CHECK(first.inputs(1, 0) == features_u(geo.n_windows, 0));
  CHECK(first.inputs(1, 2) == ds.excitations()[1][0]);
  CHECK(first.inputs(1, 3) == ds.responses()[1][0]);
  CHECK(first.inputs(1, 4) == ds.params()[1].theta()[0]);

  const RecursiveData rec = assemble_recursive_training(ds, geo, features_u, features_y);
  CHECK(rec.inputs.rows() == 4 * (geo.n_windows - 1));
  CHECK(rec.inputs.cols() == 2 * 2 + 3 + 3);  // 2 m_u + m_y + n_s
  // Row for (record 0, window 2): [xi_u_2 | xi_u_1 | xi_y_1 | theta].
  CHECK(rec.inputs(0, 0) == features_u(1, 0));
  CHECK(rec.inputs(0, 2) == features_u(0, 0));
  CHECK(rec.inputs(0, 4) == features_y(0, 0));
  CHECK(rec.targets(0, 0) == features_y(1, 0));
}

TEST_CASE("training assembly: misaligned features are rejected") {
  const Dataset ds = window_fixture(2, 41, 3);
  const WindowGeometry geo = make_geometry(0.032, ds.grid());
  const Eigen::MatrixXd wrong = Eigen::MatrixXd::Zero(3, 2);
  CHECK_THROWS_AS(assemble_first_window_training(ds, geo, wrong, wrong), std::invalid_argument);
  CHECK_THROWS_AS(assemble_recursive_training(ds, geo, wrong, wrong), std::invalid_argument);
}

TEST_CASE("training-row counts match the construction for randomized sizes") {
  Rng rng(33);
  for (int trial = 0; trial < 25; ++trial) {
    const auto n_records = static_cast<std::size_t>(2 + rng.below(7));
    const auto n_t = static_cast<std::size_t>(11 + rng.below(91));
    const WindowGeometry geo = [&] {
      while (true) {
        const auto n_per = static_cast<Eigen::Index>(1 + rng.below(n_t - 1));
        if (n_per <= static_cast<Eigen::Index>(n_t) - 1)
          return make_geometry(0.004 * static_cast<double>(n_per), TimeGrid(0.0, 0.004, n_t));
      }
    }();
    const Dataset ds = window_fixture(n_records, n_t, 1000 + static_cast<std::uint64_t>(trial));
    const Eigen::Index rows = static_cast<Eigen::Index>(n_records) * geo.n_windows;
    const Eigen::MatrixXd fu = Eigen::MatrixXd::Zero(rows, 2);
    const Eigen::MatrixXd fy = Eigen::MatrixXd::Zero(rows, 2);
    const FirstWindowData first = assemble_first_window_training(ds, geo, fu, fy);
    const RecursiveData rec = assemble_recursive_training(ds, geo, fu, fy);
    // N_ED rows for the first window, N_ED*(n_W - 1) for the recursion.
    CHECK(first.inputs.rows() == static_cast<Eigen::Index>(n_records));
    CHECK(rec.inputs.rows() == static_cast<Eigen::Index>(n_records) * (geo.n_windows - 1));
    // Partition property for the non-overlap case.
    const auto total = static_cast<Eigen::Index>(n_t) - 1;
    if (!geo.overlap_last) CHECK(geo.n_windows * geo.n_per_window == total);
  }
}

TEST_CASE("study-scale recursive row count") {
  // N_ED = 100 at the oscillator geometry: 100 * 149 = 14,900 training pairs.
  const WindowGeometry geo = make_geometry(0.08, TimeGrid(0.0, 0.004, 3001));
  CHECK(100 * (geo.n_windows - 1) == 14900);
}
