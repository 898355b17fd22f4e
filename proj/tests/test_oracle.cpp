#include <doctest.h>

#include <cmath>

#include "flowgrasp/oracle.hpp"

using namespace flowgrasp;

TEST_CASE("flat density yields equal cells") {
  const auto flat = [](const VecXd&) { return 1.0; };
  const GridDensity grid = grid_target(flat, flat, (VecXd(2) << 0.0, 0.0).finished(),
                                       (VecXd(2) << 1.0, 2.0).finished(), {4, 5});
  REQUIRE(grid.cell_count() == 20);
  for (double v : grid.values) CHECK(v == doctest::Approx(1.0 / 20.0).epsilon(1e-12));
  CHECK(grid.cell_width(0) == doctest::Approx(0.25));
  CHECK(grid.cell_width(1) == doctest::Approx(0.4));
}

TEST_CASE("cell indexing and centers round trip") {
  const auto flat = [](const VecXd&) { return 1.0; };
  const GridDensity grid = grid_target(flat, flat, (VecXd(3) << -1.0, 0.0, 2.0).finished(),
                                       (VecXd(3) << 1.0, 1.0, 4.0).finished(), {3, 4, 5});
  for (std::size_t i = 0; i < grid.cell_count(); ++i)
    CHECK(grid.cell_index(grid.cell_center(i)) == static_cast<long>(i));
  CHECK(grid.cell_index((VecXd(3) << 5.0, 0.5, 3.0).finished()) == -1);
  // right edge belongs to the last cell
  CHECK(grid.cell_index((VecXd(3) << 1.0, 1.0, 4.0).finished()) ==
        static_cast<long>(grid.cell_count() - 1));
}

TEST_CASE("quadrature ratios reproduce a linear density") {
  // p(x) ~ x on [0,1]: cell masses at centers 0.125, 0.375, 0.625, 0.875
  const GridDensity grid = grid_target([](const VecXd& x) { return x(0); },
                                       [](const VecXd&) { return 1.0; },
                                       (VecXd(1) << 0.0).finished(),
                                       (VecXd(1) << 1.0).finished(), {4});
  const double total = 0.125 + 0.375 + 0.625 + 0.875;
  CHECK(grid.values[0] == doctest::Approx(0.125 / total).epsilon(1e-12));
  CHECK(grid.values[3] == doctest::Approx(0.875 / total).epsilon(1e-12));
}

TEST_CASE("quadrature converges with resolution") {
  // exact mass of p(x) ~ x^2 on [0, 0.5] within [0,1] is 1/8
  const auto density = [](const VecXd& x) { return x(0) * x(0); };
  const auto flat = [](const VecXd&) { return 1.0; };
  double prev_err = 1.0;
  for (int res : {8, 32, 128}) {
    const GridDensity grid = grid_target(density, flat, (VecXd(1) << 0.0).finished(),
                                         (VecXd(1) << 1.0).finished(), {res});
    double mass = 0.0;
    for (int c = 0; c < res / 2; ++c) mass += grid.values[c];
    const double err = std::abs(mass - 0.125);
    CHECK(err < prev_err);
    prev_err = err;
  }
  CHECK(prev_err < 1e-4);
}

TEST_CASE("degenerate targets are rejected") {
  const auto zero = [](const VecXd&) { return 0.0; };
  const auto flat = [](const VecXd&) { return 1.0; };
  const auto lo = (VecXd(1) << 0.0).finished();
  const auto hi = (VecXd(1) << 1.0).finished();
  CHECK_THROWS_AS(grid_target(zero, flat, lo, hi, {8}), std::invalid_argument);
  CHECK_THROWS_AS(grid_target([](const VecXd&) { return -1.0; }, flat, lo, hi, {8}),
                  std::invalid_argument);
  CHECK_THROWS_AS(grid_target(flat, flat, lo, hi, {8, 8, 8, 8}), std::invalid_argument);
  CHECK_THROWS_AS(grid_target(flat, flat, lo, hi, {0}), std::invalid_argument);
}

TEST_CASE("grid samples pass a chi-squared test") {
  // triangular density p(x) ~ x on [0,1], 8 cells; expected mass (2c+1)/64
  const GridDensity grid = grid_target([](const VecXd& x) { return x(0); },
                                       [](const VecXd&) { return 1.0; },
                                       (VecXd(1) << 0.0).finished(),
                                       (VecXd(1) << 1.0).finished(), {8});
  const int n = 40000;
  const auto samples = rejection_sample(grid, n, 2024);
  std::vector<int> counts(8, 0);
  for (const auto& x : samples) {
    CHECK(x(0) >= 0.0);
    CHECK(x(0) <= 1.0);
    counts[grid.cell_index(x)]++;
  }
  double chi2 = 0.0;
  for (int c = 0; c < 8; ++c) {
    const double expect = n * grid.values[c];
    chi2 += (counts[c] - expect) * (counts[c] - expect) / expect;
  }
  // 7 dof: critical value 24.3 at the 0.1% level
  CHECK(chi2 < 24.3);
}

TEST_CASE("total variation calibration") {
  const auto flat = [](const VecXd&) { return 1.0; };
  const GridDensity grid = grid_target(flat, flat, (VecXd(1) << 0.0).finished(),
                                       (VecXd(1) << 1.0).finished(), {10});

  // self-samples: distance shrinks roughly as 1/sqrt(n)
  const double tv_small = tv_distance(rejection_sample(grid, 500, 7), grid);
  const double tv_large = tv_distance(rejection_sample(grid, 50000, 7), grid);
  CHECK(tv_large < tv_small);
  CHECK(tv_large < 0.02);

  // fully disjoint support: distance 1
  std::vector<VecXd> outside(100, (VecXd(1) << 5.0).finished());
  CHECK(tv_distance(outside, grid) == doctest::Approx(1.0).epsilon(1e-12));

  // half the samples displaced outside: distance ~1/2
  std::vector<VecXd> half;
  const auto in = rejection_sample(grid, 500, 9);
  for (const auto& x : in) half.push_back(x);
  for (int i = 0; i < 500; ++i) half.push_back((VecXd(1) << 5.0).finished());
  CHECK(tv_distance(half, grid) == doctest::Approx(0.5).epsilon(0.05));

  CHECK_THROWS_AS(tv_distance({}, grid), std::invalid_argument);
}

TEST_CASE("finite differences recover polynomial gradients") {
  const auto fn = [](const VecXd& x) {
    return x(0) * x(0) + 3.0 * x(1) - 2.0 * x(0) * x(1);
  };
  const VecXd x = (VecXd(2) << 1.5, -0.5).finished();
  const VecXd g = fd_gradient(fn, x);
  CHECK(g(0) == doctest::Approx(2.0 * 1.5 - 2.0 * (-0.5)).epsilon(1e-8));
  CHECK(g(1) == doctest::Approx(3.0 - 2.0 * 1.5).epsilon(1e-8));
  CHECK_THROWS_AS(fd_gradient(fn, x, 0.0), std::invalid_argument);
}

TEST_CASE("chordal rotation loss") {
  const Quatd id = Quatd::Identity();
  CHECK(chordal_rotation_loss(id, id) == doctest::Approx(0.0));
  // double cover: -q is the same rotation, zero loss
  CHECK(chordal_rotation_loss(id, Quatd(-1.0, 0.0, 0.0, 0.0)) == doctest::Approx(0.0));
  // half-turn about z: d^2 = 2, loss = 2 * 2 * (4 - 2) = 8 (the maximum)
  CHECK(chordal_rotation_loss(id, Quatd(0.0, 0.0, 0.0, 1.0)) ==
        doctest::Approx(8.0).epsilon(1e-12));
  // quarter-turn: d^2 = 2 - sqrt(2)
  const Quatd qz(Eigen::AngleAxisd(M_PI / 2, Vec3d::UnitZ()));
  const double d2 = 2.0 - std::sqrt(2.0);
  CHECK(chordal_rotation_loss(id, qz) == doctest::Approx(2.0 * d2 * (4.0 - d2)).epsilon(1e-12));
}

TEST_CASE("composite pose loss") {
  const Quatd id = Quatd::Identity();
  // perfect reconstruction except the score: alpha1 * ln 2
  CHECK(composite_loss(1.0, 0.5, Vec3d::Zero(), Vec3d::Zero(), id, id) ==
        doctest::Approx(0.85 * std::log(2.0)).epsilon(1e-12));
  // add a 10 cm translation miss
  CHECK(composite_loss(1.0, 0.5, Vec3d(0.1, 0.0, 0.0), Vec3d::Zero(), id, id) ==
        doctest::Approx(0.85 * std::log(2.0) + 0.149 * 0.01).epsilon(1e-12));
  // score clamp keeps the BCE finite
  CHECK(std::isfinite(composite_loss(1.0, 0.0, Vec3d::Zero(), Vec3d::Zero(), id, id)));
  // half-turn rotation adds alpha3 * 8
  CHECK(composite_loss(0.0, 0.5, Vec3d::Zero(), Vec3d::Zero(), id,
                       Quatd(0.0, 0.0, 0.0, 1.0)) ==
        doctest::Approx(0.85 * std::log(2.0) + 0.001 * 8.0).epsilon(1e-12));
}
