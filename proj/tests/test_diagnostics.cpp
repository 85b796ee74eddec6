#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "emdec/emdec.hpp"

using namespace emdec;

namespace {

Eigen::VectorXd random_vec(Eigen::Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = 2.0 * unit_uniform(rng) - 1.0;
  return v;
}

PotentialHistory random_solution(const Discretization& d, std::size_t levels, double dt, std::uint64_t seed) {
  const auto ne = static_cast<Eigen::Index>(d.num_edges());
  return solve_potential_history(d, random_vec(ne, seed), random_vec(ne, seed + 100), levels, dt);
}

std::vector<std::size_t> block_cells(std::size_t nx, std::size_t i0, std::size_t j0, std::size_t w, std::size_t h) {
  std::vector<std::size_t> c;
  for (std::size_t j = j0; j < j0 + h; ++j)
    for (std::size_t i = i0; i < i0 + w; ++i) c.push_back(i + nx * j);
  return c;
}

}  // namespace

TEST(Energy, ZeroScaledAndSingleEntry) {
  auto d = make_discretization(build_rect_grid({4, 4}, {4, 4}));
  FieldState s = zero_state(d.K());
  EXPECT_EQ(energy(0.0, s, d.stars).total, 0.0);

  auto r = init_random_E(d.K(), d.stars, 3);
  r.B = random_vec(static_cast<Eigen::Index>(d.num_faces()), 4);
  FieldState r2 = r;
  r2.E *= 2.0;
  r2.B *= 2.0;
  EXPECT_NEAR(energy(0.0, r2, d.stars).total, 4.0 * energy(0.0, r, d.stars).total, 1e-12);

  std::size_t e = 0;
  while (d.K().on_boundary(1, e)) ++e;
  s.E[static_cast<Eigen::Index>(e)] = 1.0;
  auto u = energy(0.0, s, d.stars);
  EXPECT_DOUBLE_EQ(u.electric, 0.5);
  EXPECT_EQ(u.magnetic, 0.0);
}

TEST(Energy, AveragesHalfSteps) {
  auto d = make_discretization(build_rect_grid({1, 1}, {2, 2}));
  Eigen::VectorXd a = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d.num_edges())), b = a;
  std::size_t e = 0;
  while (d.K().on_boundary(1, e)) ++e;
  a[static_cast<Eigen::Index>(e)] = 1.0;
  b[static_cast<Eigen::Index>(e)] = 3.0;
  // Ebar = 2, eps = 1 on the unit-spacing... here dual/primal = 1.
  EXPECT_DOUBLE_EQ(energy(0, a, b, Eigen::VectorXd::Zero(4), d.stars).electric, 2.0);
}

TEST(Gauss, ZeroAndPointCharge) {
  auto d = make_discretization(build_rect_grid({1, 1}, {3, 3}));
  Eigen::VectorXd D = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d.num_edges()));
  Eigen::VectorXd rho = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d.K().num_cells(0)));
  EXPECT_EQ(gauss_residual(D, rho, d), 0.0);
  std::size_t v = 0;
  while (d.K().on_boundary(0, v)) ++v;
  rho[static_cast<Eigen::Index>(v)] = -0.7;
  EXPECT_DOUBLE_EQ(gauss_residual(D, rho, d), 0.7);
}

TEST(Gauss, GradientFieldHasLaplacianDivergence) {
  // D = eps d0 phi with phi = 1 at one interior vertex of a unit grid:
  // div D there is -4 (outflow through four unit dual faces).
  auto d = make_discretization(build_rect_grid({3, 3}, {3, 3}));
  std::size_t v = 0;
  while (d.K().on_boundary(0, v)) ++v;
  Eigen::VectorXd phi = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d.K().num_cells(0)));
  phi[static_cast<Eigen::Index>(v)] = 1.0;
  const Eigen::VectorXd D = d.stars.eps.cwiseProduct(d.d0 * phi);
  Eigen::VectorXd rho = Eigen::VectorXd::Zero(phi.size());
  rho[static_cast<Eigen::Index>(v)] = -4.0;
  EXPECT_NEAR(gauss_residual(D, rho, d), 1.0, 1e-14);  // neighbours see +1
}

TEST(DivB, ExactForCurlsNonzeroForRandom) {
  auto d = make_discretization(build_rect_grid({1, 1, 1}, {3, 3, 3}));
  const Eigen::VectorXd B = random_vec(static_cast<Eigen::Index>(d.num_faces()), 2);
  EXPECT_GT(divb_residual(B, d), 1e-3);
  const Eigen::VectorXd A = random_vec(static_cast<Eigen::Index>(d.num_edges()), 3);
  EXPECT_LT(divb_residual(d.d1 * A, d), 1e-14);
  auto d2 = make_discretization(build_rect_grid({1, 1}, {3, 3}));
  EXPECT_EQ(divb_residual(random_vec(9, 1), d2), 0.0);
}

TEST(Multisymplectic, AntisymmetricAndLinear) {
  auto d = make_discretization(build_rect_grid({1, 1}, {4, 4}));
  const double dt = 0.5 * cfl_dt(d);
  auto a = random_solution(d, 9, dt, 1);
  EXPECT_LT(el_residual(d, a), 1e-10);
  SpacetimeBlock blk{block_cells(4, 1, 1, 2, 2), 2, 5};
  EXPECT_EQ(multisymplectic_residual(d, a, a, blk), 0.0);
  PotentialHistory zero{dt, std::vector<Eigen::VectorXd>(9, Eigen::VectorXd::Zero(a.A[0].size()))};
  EXPECT_EQ(multisymplectic_residual(d, a, zero, blk), 0.0);
}

TEST(Multisymplectic, RandomPairsAndBlocks) {
  auto d = make_discretization(build_rect_grid({1, 1}, {4, 4}));
  const double dt = 0.5 * cfl_dt(d);
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    auto a = random_solution(d, 9, dt, 10 + 2 * static_cast<std::uint64_t>(trial));
    auto b = random_solution(d, 9, dt, 11 + 2 * static_cast<std::uint64_t>(trial));
    const std::size_t w = 1 + rng() % 3, h = 1 + rng() % 3;
    const std::size_t i0 = rng() % (5 - w), j0 = rng() % (5 - h);
    const std::size_t n0 = rng() % 5, n1 = n0 + 1 + rng() % (8 - n0);
    SpacetimeBlock blk{block_cells(4, i0, j0, w, h), n0, n1};
    EXPECT_LT(multisymplectic_residual(d, a, b, blk), 1e-10) << "trial " << trial;
  }
}

TEST(Multisymplectic, DetectsNonSolutions) {
  auto d = make_discretization(build_rect_grid({1, 1}, {4, 4}));
  const double dt = 0.5 * cfl_dt(d);
  auto a = random_solution(d, 9, dt, 1);
  auto b = random_solution(d, 9, dt, 2);
  SpacetimeBlock blk{block_cells(4, 1, 1, 2, 2), 2, 5};
  b.A[3] += random_vec(b.A[3].size(), 9).cwiseProduct(Eigen::VectorXd(d.eps_inv.cwiseAbs().cwiseSign()));
  EXPECT_THROW(multisymplectic_residual(d, a, b, blk), Error);
  // With the precheck disabled the broken pair violates the formula.
  EXPECT_GT(multisymplectic_residual(d, a, b, blk, 1e300), 1e-6);
}

TEST(Multisymplectic, UnstructuredMesh) {
  auto d = make_discretization(delaunay_mesh(random_points(30, 1, 1, 3)));
  const double dt = 0.5 * cfl_dt(d);
  auto a = random_solution(d, 8, dt, 1), b = random_solution(d, 8, dt, 2);
  SpacetimeBlock blk{{0, 3, 4, 7, 8, 11}, 1, 6};
  EXPECT_LT(multisymplectic_residual(d, a, b, blk), 1e-10);
}

TEST(Spectrum, PureSinusoid) {
  const std::size_t N = 1024;
  const double dt = 0.01, f0 = 7.3;
  std::vector<double> x(N);
  for (std::size_t i = 0; i < N; ++i) x[i] = std::sin(2.0 * std::numbers::pi * f0 * dt * static_cast<double>(i));
  auto s = spectrum(x, dt);
  EXPECT_DOUBLE_EQ(s.bin, 1.0 / (N * dt));
  ASSERT_FALSE(s.peaks.empty());
  const auto top = std::max_element(s.power.begin(), s.power.end()) - s.power.begin();
  EXPECT_LE(std::abs(s.frequency[static_cast<std::size_t>(top)] - f0), s.bin);
  EXPECT_LE(std::abs(s.peaks.front() - f0), s.bin);
}

TEST(Spectrum, TwoSinusoids) {
  const std::size_t N = 2048;
  const double dt = 0.02;
  std::vector<double> x(N);
  for (std::size_t i = 0; i < N; ++i) {
    const double t = dt * static_cast<double>(i);
    x[i] = std::cos(2 * std::numbers::pi * 1.5 * t) + 0.5 * std::sin(2 * std::numbers::pi * 6.25 * t) + 3.0;
  }
  auto s = spectrum(x, dt);
  ASSERT_EQ(s.peaks.size(), 2u);
  EXPECT_LE(std::abs(s.peaks[0] - 1.5), s.bin);
  EXPECT_LE(std::abs(s.peaks[1] - 6.25), s.bin);
}

TEST(Spectrum, Errors) {
  EXPECT_THROW(spectrum(std::vector<double>(15, 1.0), 0.1), Error);
  EXPECT_THROW(spectrum(std::vector<double>(32, 1.0), 0.0), Error);
  EXPECT_TRUE(spectrum(std::vector<double>(32, 1.0), 0.1).peaks.empty());
}

TEST(Drift, FlatOscillationAndRamp) {
  std::vector<double> t, flat, ramp;
  for (int i = 0; i <= 800; ++i) {
    t.push_back(0.01 * i);
    flat.push_back(1.0 + 0.01 * std::sin(40.0 * t.back()));
    ramp.push_back(1.0 + 0.05 * t.back());
  }
  auto a = analyze_drift(t, flat);
  EXPECT_TRUE(a.pass());
  EXPECT_NEAR(a.mean, 1.0, 1e-3);
  EXPECT_LE(a.max_excursion, 0.0201);
  auto b = analyze_drift(t, ramp);
  EXPECT_NEAR(b.slope, 0.05, 1e-12);
  EXPECT_FALSE(b.pass());
  EXPECT_NEAR(b.drift_fraction, 0.05 * 8.0 / 1.2, 1e-12);
  EXPECT_THROW(analyze_drift({0.0}, {1.0}), Error);
}
