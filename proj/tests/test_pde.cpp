#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "gsep/kernels.hpp"
#include "gsep/pde.hpp"
#include "gsep/profile.hpp"

using namespace gsep;

namespace {

double sup_distance(std::span<const double> u, const Profile& rho, int cells) {
  double worst = 0.0;
  for (int i = 0; i < cells; ++i) {
    worst = std::max(worst, std::abs(u[i] - rho(-1.0 + (i + 0.5) * 2.0 / cells)));
  }
  return worst;
}

}  // namespace

TEST_CASE("grid validation") {
  CHECK_NOTHROW(Grid{64, 1.0, 0.1, 0.0}.validate());
  CHECK(Grid{64, 1.0, 0.1, 0.0}.frame_count() == 11);
  CHECK_THROWS(Grid{2, 1.0, 0.1, 0.0}.validate());
  CHECK_THROWS(Grid{64, -1.0, 0.1, 0.0}.validate());
  CHECK_THROWS(Grid{64, 1.0, 0.0, 0.0}.validate());
}

TEST_CASE("cell averages integrate the profile") {
  const auto avg = cell_averages([](double x) { return 0.5 + 0.25 * x; }, 8);
  for (int i = 0; i < 8; ++i) {
    CHECK(avg[i] == doctest::Approx(0.5 + 0.25 * (-1.0 + (i + 0.5) * 0.25)).epsilon(1e-14));
  }
  // A step is averaged exactly on cells it does not cut.
  const auto step = cell_averages([](double x) { return x < 0.0 ? 0.9 : 0.1; }, 4);
  CHECK(step[0] == doctest::Approx(0.9));
  CHECK(step[3] == doctest::Approx(0.1));
}

TEST_CASE("equilibrium constant profile is preserved exactly") {
  const ModelParams p{1.0, 0.3, 0.3, 2};
  const auto field = solve_hydro(p, Grid{64, 0.2, 0.05, 0.0}, parse_profile("constant:0.3", p));
  for (double v : field.values) {
    CHECK(std::abs(v - 0.3) < 1e-15);
  }
  CHECK(field.max_mass_residual < 1e-12);
}

TEST_CASE("hydrodynamic solution relaxes to the stationary profile") {
  const ModelParams p{1.0, 0.2, 0.8, 2};
  const auto st = stationary_profile(p);
  const Grid grid{128, 4.0, 0.5, 0.0};
  const auto field = solve_hydro(p, grid, parse_profile("step:0.9,0.1", p));
  const auto last = field.frame(field.frames() - 1);
  CHECK(sup_distance(last, st.rho, grid.cells) < 2e-3);
  CHECK(field.max_mass_residual < 1e-10);
  CHECK(field.max_clip == 0.0);
  CHECK(field.min_value() >= 0.0);
  CHECK(field.max_value() <= 1.0);
}

TEST_CASE("stationary profile is a discrete steady state up to second order") {
  const ModelParams p{1.0, 0.2, 0.8, 2};
  const auto st = stationary_profile(p);
  std::vector<double> interior;
  for (int cells : {64, 128, 256}) {
    const auto u = cell_averages(st.rho, cells);
    const auto rate = scheme_rate(p, u);
    double worst = 0.0;
    for (int i = 1; i + 1 < cells; ++i) worst = std::max(worst, std::abs(rate[i]));
    interior.push_back(worst);
    // The boundary cells carry an O(dx) flux error divided by dx.
    CHECK(std::abs(rate[0]) < 0.2);
    CHECK(std::abs(rate[cells - 1]) < 0.2);
  }
  CHECK(interior[0] / interior[1] > 3.0);
  CHECK(interior[1] / interior[2] > 3.0);
}

TEST_CASE("stored rates are the scheme right-hand side of each frame") {
  const ModelParams p{0.5, 0.2, 0.8, 2};
  const auto field = solve_hydro(p, Grid{32, 0.1, 0.05, 0.0}, parse_profile("cosine", p));
  REQUIRE(field.has_rates());
  for (int k = 0; k < field.frames(); ++k) {
    const auto expected = scheme_rate(p, field.frame(k));
    for (int i = 0; i < field.cells; ++i) {
      CHECK(field.rate(k)[i] == expected[i]);
    }
  }
}

TEST_CASE("time step above the stability bound is rejected") {
  const ModelParams p{1.0, 0.2, 0.8, 2};
  CHECK_THROWS_AS(solve_hydro(p, Grid{64, 0.1, 0.01, 0.01}, parse_profile("constant:0.5", p)), CflError);
  CHECK_THROWS_AS(HydroStepper(p, std::vector<double>(64, 0.5), 1.0), CflError);
  CHECK_THROWS_AS(solve_hydro(p, Grid{8, 0.1, 0.01, 0.0}, std::vector<double>(8, 1.5)), std::invalid_argument);
}

TEST_CASE("zero tilt reproduces the untilted solver bit for bit") {
  const ModelParams p{1.0, 0.3, 0.7, 2};
  const Grid grid{64, 0.2, 0.02, 0.0};
  const auto rho0 = compatible_profile(p, 0.2);
  const auto a = solve_hydro(p, grid, rho0);
  const auto b = solve_tilted(p, grid, rho0, TiltFunction::zero());
  const auto c = solve_tilted(p, grid, rho0, TiltField::zeros(grid.cells, a.times));
  CHECK(a.values == b.values);
  CHECK(a.values == c.values);
}

TEST_CASE("stepper and solver agree") {
  const ModelParams p{0.5, 0.25, 0.6, 2};
  const Grid grid{48, 0.05, 0.05, 0.0};
  const auto rho0 = parse_profile("cosine:0.5,0.3", p);
  const auto field = solve_hydro(p, grid, rho0);
  HydroStepper stepper(p, cell_averages(rho0, grid.cells), field.dt);
  for (long s = 0; s < field.steps; ++s) stepper.step();
  const auto last = field.frame(field.frames() - 1);
  for (int i = 0; i < grid.cells; ++i) {
    CHECK(stepper.state()[i] == last[i]);
  }
  CHECK(stepper.time() == doctest::Approx(0.05));
}

TEST_CASE("boundary flux matches the reservoir exchange balance") {
  // (1-u) rho e^m - u (1-rho) e^-m
  CHECK(kernels::boundary_flux(0.3, 0.3, 0.0) == doctest::Approx(0.0));
  CHECK(kernels::boundary_flux(0.3, 0.5, 0.0) == doctest::Approx(-0.2));
  CHECK(kernels::boundary_flux(0.3, 0.5, 0.4) == doctest::Approx(0.5 * 0.3 * std::exp(0.4) - 0.5 * 0.7 * std::exp(-0.4)));
}

TEST_CASE("tilt vanishes along the untilted trajectory") {
  const ModelParams p{1.0, 0.2, 0.8, 2};
  const auto field = solve_hydro(p, Grid{128, 0.2, 0.02, 0.0}, compatible_profile(p, 0.2));
  for (int k = 0; k < field.frames(); ++k) {
    const auto sol = solve_elliptic_H(p, field.frame(k), field.rate(k));
    for (double h : sol.h) CHECK(std::abs(h) < 1e-10);
    CHECK(std::abs(sol.h_left) < 1e-10);
    CHECK(std::abs(sol.h_right) < 1e-10);
  }
}

TEST_CASE("elliptic solve recovers the driving tilt with second-order error") {
  const ModelParams p{1.0, 0.3, 0.7, 2};
  const auto rho0 = compatible_profile(p, 0.2);
  const auto tilt = ramped_tilt(1.0, 0.1, 0.1, 1.0, 0.5);
  std::vector<double> errors;
  for (int cells : {64, 128, 256}) {
    const auto field = solve_tilted(p, Grid{cells, 0.3, 0.1, 0.0}, rho0, tilt);
    double worst = 0.0;
    for (int k = 0; k < field.frames(); ++k) {
      const auto sol = solve_elliptic_H(p, field.frame(k), field.rate(k));
      for (int i = 0; i < cells; ++i) {
        worst = std::max(worst, std::abs(sol.h[i] - tilt(field.times[k], field.center(i))));
      }
      CHECK(sol.residual < 1e-10);
    }
    errors.push_back(worst);
  }
  CHECK(errors[0] / errors[1] > 3.0);
  CHECK(errors[1] / errors[2] > 3.0);
}

TEST_CASE("elliptic solve rejects degenerate densities") {
  const ModelParams p{0.0, 0.5, 0.5, 2};
  std::vector<double> u(16, 0.5);
  u[3] = 0.0;
  CHECK_THROWS_AS(solve_elliptic_H(p, u, std::vector<double>(16, 0.0)), SchemeError);
}

TEST_CASE("tilt field interpolation") {
  const auto h = TiltField::sample(linear_tilt(1.0), 4, {0.0, 1.0});
  std::vector<double> cells(4);
  double hl = 0.0;
  double hr = 0.0;
  h.interpolate(0.5, cells, hl, hr);
  CHECK(cells[0] == doctest::Approx(0.5 * -0.75));
  CHECK(hl == doctest::Approx(-0.5));
  CHECK(hr == doctest::Approx(0.5));
  CHECK(h.max_abs() == doctest::Approx(1.0));
}

TEST_CASE("L1 distance and time derivative") {
  const ModelParams p{0.0, 0.4, 0.6, 2};
  const Grid grid{32, 0.2, 0.001, 0.001};
  const auto a = solve_hydro(p, grid, parse_profile("constant:0.2", p));
  const auto b = solve_hydro(p, grid, parse_profile("constant:0.7", p));
  CHECK(l1_distance(a, b, 0) == doctest::Approx(1.0));
  CHECK(l1_distance(a, b, 3) == l1_distance(b, a, 3));
  CHECK_THROWS(l1_distance(a, b, 999));
  const auto d = centered_time_derivative(a);
  // With one forward Euler step per frame the centred difference is the mean
  // of the rates at the two frames it spans.
  REQUIRE(a.steps == a.frames() - 1);
  for (int i = 0; i < a.cells; ++i) {
    CHECK(d[50 * a.cells + i] == doctest::Approx(0.5 * (a.rate(49)[i] + a.rate(50)[i])).epsilon(1e-10));
  }
}
