#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "gsep/kernels.hpp"
#include "gsep/pde.hpp"
#include "gsep/profile.hpp"
#include "gsep/rate.hpp"

using namespace gsep;

namespace {

const ModelParams kParams{1.0, 0.3, 0.7, 2};

DensityField static_field(int cells, const std::vector<double>& times, const Profile& rho) {
  DensityField f;
  f.cells = cells;
  f.times = times;
  for (std::size_t k = 0; k < times.size(); ++k) {
    for (int i = 0; i < cells; ++i) f.values.push_back(rho(-1.0 + (i + 0.5) * 2.0 / cells));
  }
  f.rates.assign(f.values.size(), 0.0);
  return f;
}

DensityField tilted_field(int cells, double amp = 1.0) {
  const auto tilt = ramped_tilt(amp, 0.1, 0.1, 1.0, 0.5);
  return solve_tilted(kParams, Grid{cells, 0.5, 0.01, 0.0}, compatible_profile(kParams, 0.2), tilt);
}

double legendre_cosh(double rho, double x) {
  // sup_a { a x - 8 rho (1-rho) (cosh a - 1) }
  const double c = 8.0 * rho * (1.0 - rho);
  const double a = std::asinh(x / c);
  return a * x - c * (std::cosh(a) - 1.0);
}

}  // namespace

TEST_CASE("energy of a static linear profile") {
  // u = (x+2)/4 on [-1,1] for unit time: Q = int (1/16) / (u(1-u)) dx = ln(3) / 2.
  std::vector<double> times;
  for (int k = 0; k <= 10; ++k) times.push_back(0.1 * k);
  const auto field = static_field(1024, times, [](double x) { return 0.25 * (x + 2.0); });
  const auto traj = TrajectoryData::from_field(kParams, field);
  CHECK(energy_Q(traj) == doctest::Approx(0.5 * std::log(3.0)).epsilon(1e-5));
}

TEST_CASE("degenerate trajectories have infinite energy and rate") {
  DensityField f;
  f.cells = 64;
  f.times = {0.0, 0.1, 0.2};
  for (int k = 0; k < 3; ++k) {
    for (int i = 0; i < 64; ++i) f.values.push_back(i % 2 == 0 ? 0.0 : 0.5);
  }
  const auto traj = TrajectoryData::from_field(kParams, f);
  CHECK(std::isinf(energy_Q(traj)));
  const auto r = explicit_rate(traj).rate;
  CHECK(r.infinite());
  CHECK_FALSE(r.reason.empty());
  CHECK(decomposition_rate(traj).rate.infinite());
  CHECK(variational_rate(traj).rate.infinite());
}

TEST_CASE("all methods vanish on the hydrodynamic trajectory") {
  const ModelParams p{1.0, 0.2, 0.8, 2};
  const auto field = solve_hydro(p, Grid{128, 0.5, 0.01, 0.0}, compatible_profile(p, 0.2));
  const auto traj = TrajectoryData::from_field(p, field);
  const auto ex = explicit_rate(traj);
  CHECK(std::abs(ex.rate.total) < 1e-12);
  CHECK(ex.h.max_abs() < 1e-10);
  CHECK(std::abs(variational_rate(traj).rate.total) < 1e-12);
  const auto dec = decomposition_rate(traj);
  CHECK(std::abs(dec.rate.total) < 1e-12);
  CHECK(std::abs(smooth_decomposition_rate(traj).rate.total) < 1e-12);
  // Mass balance makes the two boundary drives cancel.
  for (std::size_t k = 0; k < dec.trace.x.size(); ++k) {
    CHECK(std::abs(dec.trace.x[k] + dec.trace.y[k]) < 1e-10);
  }
}

TEST_CASE("four methods agree on a tilted trajectory") {
  const auto field = tilted_field(128);
  const auto traj = TrajectoryData::from_field(kParams, field);
  const auto ex = explicit_rate(traj);
  const auto var = variational_rate(traj);
  const auto dec = decomposition_rate(traj);
  const auto smooth = smooth_decomposition_rate(traj);
  const double ref = ex.rate.total;
  CHECK(ref > 0.1);
  CHECK(var.rate.total == doctest::Approx(ref).epsilon(1e-9));
  CHECK(dec.rate.total == doctest::Approx(ref).epsilon(1e-9));
  CHECK(smooth.rate.total == doctest::Approx(ref).epsilon(1e-9));
  CHECK(var.rate.converged);
  CHECK(var.rate.final_gradient < 1e-7);
  CHECK(dec.rate.bulk + dec.rate.left_boundary + dec.rate.right_boundary == doctest::Approx(ref).epsilon(1e-8));
  CHECK(ex.rate.bulk + ex.rate.left_boundary + ex.rate.right_boundary == doctest::Approx(ref).epsilon(1e-10));
  for (std::size_t i = 1; i < var.history.size(); ++i) {
    CHECK(var.history[i] >= var.history[i - 1] - 1e-14);
  }
}

TEST_CASE("the rate is the supremum of J over tilts") {
  const auto field = tilted_field(64);
  const auto traj = TrajectoryData::from_field(kParams, field);
  const auto ex = explicit_rate(traj);
  CHECK(eval_J_H(traj, ex.h) == doctest::Approx(ex.rate.total).epsilon(1e-10));
  for (double amp : {0.0, 0.5, 0.9, 1.1, 2.0}) {
    CHECK(eval_J_H(traj, ramped_tilt(amp, 0.1, 0.1, 1.0, 0.5)) <= ex.rate.total + 1e-12);
  }
  CHECK(eval_J_H(traj, TiltFunction::zero()) == 0.0);
}

TEST_CASE("small tilts cost quadratically") {
  const auto rate_for = [](double amp) {
    return explicit_rate(TrajectoryData::from_field(kParams, tilted_field(64, amp))).rate.total;
  };
  const double ratio = rate_for(0.2) / rate_for(0.1);
  CHECK(ratio == doctest::Approx(4.0).epsilon(0.05));
}

TEST_CASE("the rate is additive over time windows") {
  const auto traj = TrajectoryData::from_field(kParams, tilted_field(64));
  const double whole = explicit_rate(traj).rate.total;
  const double a = explicit_rate(traj.restricted(0.0, 0.25)).rate.total;
  const double b = explicit_rate(traj.restricted(0.25, 0.5)).rate.total;
  CHECK(a + b == doctest::Approx(whole).epsilon(1e-10));
  CHECK_THROWS(traj.restricted(0.0, 0.123));
  CHECK_THROWS(traj.restricted(0.3, 0.2));
}

TEST_CASE("boundary drive of the decomposition in reduced form") {
  // g = 4 { c + r - alpha - S <M / sigma> } with M = c - cum + drive and c = S <cum / sigma>.
  const auto field = tilted_field(64);
  const auto traj = TrajectoryData::from_field(kParams, field);
  const auto dec = decomposition_rate(traj);
  for (int k = 0; k < traj.frames(); k += 7) {
    const auto links = link_coefficients(kParams, traj.frame(k), traj.rate(k));
    double inv_sigma = 0.0;
    double cum_sigma = 0.0;
    for (std::size_t f = 0; f < links.weight.size(); ++f) {
      inv_sigma += links.weight[f] / links.mobility[f];
      cum_sigma += links.weight[f] * links.cumulative[f] / links.mobility[f];
    }
    const double s = 1.0 / inv_sigma;
    const double c = s * cum_sigma;
    double m_sigma = 0.0;
    for (std::size_t f = 0; f < links.weight.size(); ++f) {
      m_sigma += links.weight[f] * (c - links.cumulative[f] + links.drive[f]) / links.mobility[f];
    }
    const double g = 4.0 * (c + traj.frame(k)[0] - kParams.alpha - s * m_sigma);
    CHECK(dec.trace.x[k] == doctest::Approx(g).epsilon(1e-10).scale(1.0));
  }
}

TEST_CASE("boundary problem") {
  const ModelParams p{0.0, 0.3, 0.6, 2};
  SUBCASE("vanishes at zero drive") {
    const auto sol = solve_phi(p, 0.4, 0.5, 0.0, 0.0, 0.7);
    CHECK(std::abs(sol.value) < 1e-14);
    CHECK(std::abs(sol.alpha) < 1e-12);
    CHECK(std::abs(sol.beta) < 1e-12);
  }
  SUBCASE("separates into Legendre transforms without coupling") {
    const auto sol = solve_phi(p, p.alpha, p.beta, 0.7, -0.3, 0.0);
    CHECK(sol.value == doctest::Approx(legendre_cosh(p.alpha, 0.7) + legendre_cosh(p.beta, -0.3)).epsilon(1e-12));
  }
  SUBCASE("dominates every trial pair") {
    const double r = 0.2;
    const double s = 0.9;
    const double x = 1.3;
    const double y = -2.1;
    const double sw = 0.4;
    const auto sol = solve_phi(p, r, s, x, y, sw);
    for (double a = -3.0; a <= 3.0; a += 0.25) {
      for (double b = -3.0; b <= 3.0; b += 0.25) {
        const double v = a * x + b * y - 4.0 * sw * (a - b) * (a - b) - kernels::psi(p.alpha, r, a) -
                         kernels::psi(p.beta, s, b);
        CHECK(v <= sol.value + 1e-12);
      }
    }
  }
}

TEST_CASE("centred differences stand in for stored rates") {
  auto field = tilted_field(64);
  const double with_rates = explicit_rate(TrajectoryData::from_field(kParams, field)).rate.total;
  field.rates.clear();
  const auto traj = TrajectoryData::from_field(kParams, field);
  CHECK(explicit_rate(traj).rate.total == doctest::Approx(with_rates).epsilon(0.02));
  CHECK(decomposition_rate(traj).rate.total == doctest::Approx(explicit_rate(traj).rate.total).epsilon(1e-9));
}

TEST_CASE("method names") {
  CHECK(parse_rate_method("variational") == RateMethod::variational);
  CHECK(parse_rate_method("smooth") == RateMethod::smooth_decomposition);
  CHECK(parse_rate_method(to_string(RateMethod::explicit_formula)) == RateMethod::explicit_formula);
  CHECK_THROWS(parse_rate_method("guess"));
}
