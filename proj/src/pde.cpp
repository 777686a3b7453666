#include "gsep/pde.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>

#include "gsep/kernels.hpp"

namespace gsep {

int Grid::frame_count() const { return static_cast<int>(std::llround(horizon / frame_dt)) + 1; }

void Grid::validate() const {
  if (cells < 3) {
    throw std::invalid_argument("grid needs at least 3 cells");
  }
  if (!(horizon > 0.0) || !(frame_dt > 0.0)) {
    throw std::invalid_argument("grid horizon and frame spacing must be positive");
  }
  const double frames = horizon / frame_dt;
  if (std::abs(frames - std::round(frames)) > 1e-9 * std::max(1.0, frames)) {
    throw std::invalid_argument("horizon must be a multiple of the frame spacing");
  }
  if (dt < 0.0) {
    throw std::invalid_argument("time step must be non-negative");
  }
}

double DensityField::min_value() const { return *std::min_element(values.begin(), values.end()); }
double DensityField::max_value() const { return *std::max_element(values.begin(), values.end()); }

TiltField TiltField::sample(const TiltFunction& h, int cells, const std::vector<double>& times) {
  TiltField out = zeros(cells, times);
  const double dx = 2.0 / cells;
  for (std::size_t k = 0; k < times.size(); ++k) {
    for (int i = 0; i < cells; ++i) {
      out.values[k * cells + i] = h(times[k], -1.0 + (i + 0.5) * dx);
    }
    out.left[k] = h(times[k], -1.0);
    out.right[k] = h(times[k], 1.0);
  }
  return out;
}

TiltField TiltField::zeros(int cells, const std::vector<double>& times) {
  TiltField out;
  out.cells = cells;
  out.times = times;
  out.values.assign(times.size() * cells, 0.0);
  out.left.assign(times.size(), 0.0);
  out.right.assign(times.size(), 0.0);
  return out;
}

void TiltField::interpolate(double t, std::span<double> cell_values, double& h_left,
                            double& h_right) const {
  if (times.empty()) {
    throw std::invalid_argument("empty tilt field");
  }
  std::size_t j = 0;
  double w = 0.0;
  if (t <= times.front()) {
    j = 0;
  } else if (t >= times.back()) {
    j = times.size() - 1;
  } else {
    j = static_cast<std::size_t>(std::upper_bound(times.begin(), times.end(), t) - times.begin()) - 1;
    w = (t - times[j]) / (times[j + 1] - times[j]);
  }
  const std::size_t j1 = std::min(j + 1, times.size() - 1);
  for (int i = 0; i < cells; ++i) {
    cell_values[i] = (1.0 - w) * values[j * cells + i] + w * values[j1 * cells + i];
  }
  h_left = (1.0 - w) * left[j] + w * left[j1];
  h_right = (1.0 - w) * right[j] + w * right[j1];
}

double TiltField::max_abs() const {
  double m = 0.0;
  for (double v : values) m = std::max(m, std::abs(v));
  for (double v : left) m = std::max(m, std::abs(v));
  for (double v : right) m = std::max(m, std::abs(v));
  return m;
}

std::vector<double> cell_averages(const Profile& rho, int cells) {
  static constexpr double kNodes[4] = {-0.8611363115940526, -0.3399810435848563, 0.3399810435848563,
                                       0.8611363115940526};
  static constexpr double kWeights[4] = {0.3478548451374538, 0.6521451548625461, 0.6521451548625461,
                                         0.3478548451374538};
  const double dx = 2.0 / cells;
  std::vector<double> out(cells);
  for (int i = 0; i < cells; ++i) {
    const double c = -1.0 + (i + 0.5) * dx;
    double s = 0.0;
    for (int q = 0; q < 4; ++q) {
      s += kWeights[q] * rho(c + 0.5 * dx * kNodes[q]);
    }
    out[i] = 0.5 * s;
    if (!(out[i] >= 0.0 && out[i] <= 1.0)) {
      throw std::invalid_argument("initial profile leaves [0,1]");
    }
  }
  return out;
}

namespace {

double max_diffusivity(const ModelParams& p) { return std::max(p.diffusivity(0.0), p.diffusivity(1.0)); }

double max_mobility(const ModelParams& p) {
  double m = 0.0;
  for (int i = 0; i <= 1000; ++i) {
    m = std::max(m, p.mobility(i / 1000.0));
  }
  return m * 1.01;
}

// Fills the M+1 face fluxes; h empty means no tilt.
void face_fluxes(const ModelParams& p, std::span<const double> u, std::span<const double> h,
                 double h_left, double h_right, std::vector<double>& flux) {
  const int m = static_cast<int>(u.size());
  const double inv_dx = m / 2.0;
  flux.resize(m + 1);
  flux[0] = -kernels::boundary_flux(p.alpha, u[0], h_left);
  flux[m] = kernels::boundary_flux(p.beta, u[m - 1], h_right);
  double pa_prev = p.flux_potential(u[0]);
  for (int f = 1; f < m; ++f) {
    const double pa = p.flux_potential(u[f]);
    double j = (pa - pa_prev) * inv_dx;
    if (!h.empty()) {
      const double ubar = 0.5 * (u[f - 1] + u[f]);
      j -= 2.0 * p.mobility(ubar) * (h[f] - h[f - 1]) * inv_dx;
    }
    flux[f] = j;
    pa_prev = pa;
  }
}

using TiltSampler = std::function<void(double, std::span<double>, double&, double&)>;

struct StepPlan {
  double dt;
  int substeps;
};

StepPlan plan_steps(const Grid& grid, double dt_max) {
  const int substeps = std::max(1, static_cast<int>(std::ceil(grid.frame_dt / dt_max - 1e-12)));
  if (grid.dt > 0.0) {
    if (grid.dt > dt_max * (1.0 + 1e-12)) {
      throw CflError("time step " + std::to_string(grid.dt) + " violates the stability bound " +
                     std::to_string(dt_max));
    }
    const double n = grid.frame_dt / grid.dt;
    if (std::abs(n - std::round(n)) > 1e-9 * n) {
      throw std::invalid_argument("frame spacing must be a multiple of the time step");
    }
    return {grid.dt, static_cast<int>(std::llround(n))};
  }
  return {grid.frame_dt / substeps, substeps};
}

double stable_step(const ModelParams& p, double dx, double max_grad) {
  double dt_max = kCflSafety * dx * dx / max_diffusivity(p);
  const double drift = 2.0 * max_mobility(p) * max_grad;
  if (drift > 0.0) {
    dt_max = std::min(dt_max, kCflSafety * dx / drift);
  }
  return dt_max;
}

void check_initial(std::span<const double> u, int cells) {
  if (static_cast<int>(u.size()) != cells) {
    throw std::invalid_argument("initial profile does not match the grid");
  }
  for (double v : u) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw std::invalid_argument("initial profile leaves [0,1]");
    }
  }
}

// One explicit Euler step from the face fluxes; updates the diagnostics.
void advance(std::vector<double>& u, std::vector<double>& next, const std::vector<double>& flux, double dt,
             bool abort_on_exit, StepDiagnostics& diag) {
  const int m = static_cast<int>(u.size());
  const double dx = 2.0 / m;
  const double lam = dt / dx;
  long double mass_change = 0.0L;
  double clip = 0.0;
  for (int i = 0; i < m; ++i) {
    double v = u[i] + lam * (flux[i + 1] - flux[i]);
    if (v < 0.0 || v > 1.0) {
      const double c = v < 0.0 ? -v : v - 1.0;
      clip = std::max(clip, c);
      if (abort_on_exit && c > 1e-12) {
        throw SchemeError("tilted scheme left [0,1] by " + std::to_string(c) +
                          "; the step is unstable for this tilt");
      }
      v = std::clamp(v, 0.0, 1.0);
    }
    mass_change += v - u[i];
    next[i] = v;
  }
  const double inflow = flux[m] - flux[0];
  const double residual = std::abs(static_cast<double>(mass_change) * dx / dt - inflow);
  diag.max_mass_residual = std::max(diag.max_mass_residual, residual);
  diag.max_clip = std::max(diag.max_clip, clip);
  ++diag.steps;
  u.swap(next);
}

DensityField integrate(const ModelParams& p, const Grid& grid, std::vector<double> u,
                       const TiltSampler& tilt, double max_grad, bool abort_on_exit) {
  p.validate();
  grid.validate();
  const int m = grid.cells;
  check_initial(u, m);
  const double dx = grid.dx();
  const double dt_max = stable_step(p, dx, max_grad);
  const double drift = 2.0 * max_mobility(p) * max_grad;
  const auto plan = plan_steps(grid, dt_max);

  DensityField out;
  out.cells = m;
  out.dt = plan.dt;
  out.cfl_diffusive = plan.dt * max_diffusivity(p) / (dx * dx);
  out.cfl_advective = plan.dt * drift / dx;
  const int frames = grid.frame_count();
  out.times.resize(frames);
  out.values.resize(static_cast<std::size_t>(frames) * m);
  out.rates.resize(static_cast<std::size_t>(frames) * m);

  std::vector<double> h(tilt ? m : 0);
  std::vector<double> flux;
  std::vector<double> next(m);
  double h_left = 0.0;
  double h_right = 0.0;
  StepDiagnostics diag;
  const auto fluxes_at = [&](double t) {
    if (tilt) {
      tilt(t, h, h_left, h_right);
    }
    face_fluxes(p, u, h, h_left, h_right, flux);
  };
  const auto store = [&](int k, double t) {
    out.times[k] = t;
    std::copy(u.begin(), u.end(), out.values.begin() + static_cast<std::ptrdiff_t>(k) * m);
    for (int i = 0; i < m; ++i) {
      out.rates[static_cast<std::size_t>(k) * m + i] = (flux[i + 1] - flux[i]) / dx;
    }
  };

  fluxes_at(0.0);
  store(0, 0.0);
  for (int k = 1; k < frames; ++k) {
    const double t_frame = (k - 1) * grid.frame_dt;
    for (int s = 0; s < plan.substeps; ++s) {
      if (s > 0) {
        fluxes_at(t_frame + s * plan.dt);
      }
      advance(u, next, flux, plan.dt, abort_on_exit, diag);
    }
    const double t = k * grid.frame_dt;
    fluxes_at(t);
    store(k, t);
  }
  out.steps = diag.steps;
  out.max_mass_residual = diag.max_mass_residual;
  out.max_clip = diag.max_clip;
  return out;
}

}  // namespace

std::vector<double> scheme_rate(const ModelParams& p, std::span<const double> u,
                                std::span<const double> h, double h_left, double h_right) {
  std::vector<double> flux;
  face_fluxes(p, u, h, h_left, h_right, flux);
  const double dx = 2.0 / static_cast<double>(u.size());
  std::vector<double> out(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    out[i] = (flux[i + 1] - flux[i]) / dx;
  }
  return out;
}

HydroStepper::HydroStepper(const ModelParams& p, std::vector<double> initial, double dt)
    : p_(p), u_(std::move(initial)) {
  p_.validate();
  const int m = static_cast<int>(u_.size());
  if (m < 3) {
    throw std::invalid_argument("grid needs at least 3 cells");
  }
  check_initial(u_, m);
  const double dt_max = stable_step(p_, 2.0 / m, 0.0);
  if (dt < 0.0) {
    throw std::invalid_argument("time step must be non-negative");
  }
  if (dt > dt_max * (1.0 + 1e-12)) {
    throw CflError("time step " + std::to_string(dt) + " violates the stability bound " + std::to_string(dt_max));
  }
  dt_ = dt > 0.0 ? dt : dt_max;
  next_.resize(m);
}

void HydroStepper::step() {
  face_fluxes(p_, u_, {}, 0.0, 0.0, flux_);
  advance(u_, next_, flux_, dt_, false, diag_);
  t_ += dt_;
}

DensityField solve_hydro(const ModelParams& p, const Grid& grid, const Profile& rho0) {
  return solve_hydro(p, grid, cell_averages(rho0, grid.cells));
}

DensityField solve_hydro(const ModelParams& p, const Grid& grid, std::vector<double> initial) {
  return integrate(p, grid, std::move(initial), nullptr, 0.0, false);
}

DensityField solve_tilted(const ModelParams& p, const Grid& grid, const Profile& rho0,
                          const TiltFunction& h) {
  if (h.is_zero()) {
    return solve_hydro(p, grid, rho0);
  }
  const int m = grid.cells;
  const double dx = grid.dx();
  double grad = h.grad_bound;
  if (!std::isfinite(grad)) {
    // Bound the discrete gradient by sampling the stored frames.
    const int frames = grid.frame_count();
    grad = 0.0;
    for (int k = 0; k < frames; ++k) {
      const double t = k * grid.frame_dt;
      for (int i = 0; i + 1 < m; ++i) {
        grad = std::max(grad, std::abs(h(t, -1.0 + (i + 1.5) * dx) - h(t, -1.0 + (i + 0.5) * dx)) / dx);
      }
    }
    grad *= 1.05;
  }
  TiltSampler sampler = [&h, dx](double t, std::span<double> cells, double& hl, double& hr) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      cells[i] = h(t, -1.0 + (static_cast<double>(i) + 0.5) * dx);
    }
    hl = h(t, -1.0);
    hr = h(t, 1.0);
  };
  return integrate(p, grid, cell_averages(rho0, m), sampler, grad, true);
}

DensityField solve_tilted(const ModelParams& p, const Grid& grid, const Profile& rho0,
                          const TiltField& h) {
  if (h.cells != grid.cells) {
    throw std::invalid_argument("tilt field does not match the grid");
  }
  const double dx = grid.dx();
  double grad = 0.0;
  for (int k = 0; k < h.frames(); ++k) {
    for (int i = 0; i + 1 < h.cells; ++i) {
      grad = std::max(grad, std::abs(h.at(k, i + 1) - h.at(k, i)) / dx);
    }
  }
  TiltSampler sampler = [&h](double t, std::span<double> cells, double& hl, double& hr) {
    h.interpolate(t, cells, hl, hr);
  };
  return integrate(p, grid, cell_averages(rho0, grid.cells), sampler, grad, true);
}

LinkCoefficients link_coefficients(const ModelParams& p, std::span<const double> u,
                                   std::span<const double> dudt) {
  const int m = static_cast<int>(u.size());
  if (m < 3 || static_cast<int>(dudt.size()) != m) {
    throw std::invalid_argument("link data needs matching profiles with at least 3 cells");
  }
  const double dx = 2.0 / m;
  LinkCoefficients c;
  c.weight.assign(m + 1, dx);
  c.weight[0] = c.weight[m] = 0.5 * dx;
  c.mobility.resize(m + 1);
  c.drive.resize(m + 1);
  c.cumulative.assign(m + 1, 0.0);
  for (int i = 0; i < m; ++i) {
    c.cumulative[i + 1] = c.cumulative[i] + dx * dudt[i];
  }
  for (int f = 1; f < m; ++f) {
    c.mobility[f] = std::max(p.mobility(0.5 * (u[f - 1] + u[f])), kMobilityFloor);
    c.drive[f] = (p.flux_potential(u[f]) - p.flux_potential(u[f - 1])) / dx;
  }
  c.mobility[0] = std::max(p.mobility(u[0]), kMobilityFloor);
  c.mobility[m] = std::max(p.mobility(u[m - 1]), kMobilityFloor);
  c.drive[0] = c.drive[1] - dx * dudt[0];
  c.drive[m] = c.drive[m - 1] + dx * dudt[m - 1];
  return c;
}

EllipticSolution solve_elliptic_H(const ModelParams& p, std::span<const double> u,
                                  std::span<const double> dudt) {
  const int m = static_cast<int>(u.size());
  if (m < 3 || static_cast<int>(dudt.size()) != m) {
    throw std::invalid_argument("elliptic solve needs matching profiles with at least 3 cells");
  }
  for (double v : u) {
    if (!(v > kDegenerateDensity && v < 1.0 - kDegenerateDensity)) {
      throw SchemeError("density too close to 0 or 1 for the elliptic problem (value " +
                        std::to_string(v) + ")");
    }
  }
  const double dx = 2.0 / m;
  const auto links = link_coefficients(p, u, dudt);
  const auto& cum = links.cumulative;

  // Total flux on link f is j0 + cum_f, so H_x = ga_f - j0 gb_f.
  std::vector<double> ga(m + 1);
  std::vector<double> gb(m + 1);
  double a_tot = 0.0;
  double b_tot = 0.0;
  for (int f = 0; f <= m; ++f) {
    ga[f] = (links.drive[f] - cum[f]) / (2.0 * links.mobility[f]);
    gb[f] = 1.0 / (2.0 * links.mobility[f]);
    a_tot += links.weight[f] * ga[f];
    b_tot += links.weight[f] * gb[f];
  }

  const double u_l = u[0];
  const double u_r = u[m - 1];
  const double total_source = cum[m];
  const auto residual = [&](double h0, double* slope) {
    const double j0 = -kernels::boundary_flux(p.alpha, u_l, h0);
    const double hr = h0 + a_tot - j0 * b_tot;
    if (slope) {
      const double dj0 = -kernels::boundary_flux_slope(p.alpha, u_l, h0);
      *slope = dj0 - kernels::boundary_flux_slope(p.beta, u_r, hr) * (1.0 - dj0 * b_tot);
    }
    return j0 + total_source - kernels::boundary_flux(p.beta, u_r, hr);
  };

  // r is strictly decreasing in h0; bracket the root.
  double lo = -1.0;
  double hi = 1.0;
  int expansions = 0;
  while (!(residual(lo, nullptr) > 0.0) && expansions < 60) {
    lo *= 2.0;
    ++expansions;
  }
  while (!(residual(hi, nullptr) < 0.0) && expansions < 120) {
    hi *= 2.0;
    ++expansions;
  }
  if (!(residual(lo, nullptr) > 0.0) || !(residual(hi, nullptr) < 0.0)) {
    throw SchemeError("could not bracket the boundary value of H in [" + std::to_string(lo) + ", " +
                      std::to_string(hi) + "]");
  }
  double h0 = std::clamp(0.0, lo, hi);
  double r = 0.0;
  int it = 0;
  for (; it < 200; ++it) {
    double slope = 0.0;
    r = residual(h0, &slope);
    if (r == 0.0) break;
    if (r > 0.0) {
      lo = h0;
    } else {
      hi = h0;
    }
    double next = h0 - r / slope;
    if (!(next > lo && next < hi) || !std::isfinite(next)) {
      next = 0.5 * (lo + hi);
    }
    if (std::abs(next - h0) < 1e-15 * std::max(1.0, std::abs(h0)) || hi - lo < 1e-15) {
      h0 = next;
      r = residual(h0, nullptr);
      break;
    }
    h0 = next;
  }
  if (it == 200) {
    throw SchemeError("elliptic boundary iteration did not converge; bracket [" + std::to_string(lo) +
                      ", " + std::to_string(hi) + "]");
  }

  EllipticSolution sol;
  sol.iterations = it;
  sol.residual = r;
  const double j0 = -kernels::boundary_flux(p.alpha, u_l, h0);
  sol.flux.resize(m + 1);
  for (int f = 0; f <= m; ++f) {
    sol.flux[f] = j0 + cum[f];
  }
  sol.gradient.resize(m + 1);
  for (int f = 0; f <= m; ++f) {
    sol.gradient[f] = ga[f] - j0 * gb[f];
  }
  sol.h.resize(m);
  sol.h_left = h0;
  sol.h[0] = h0 + 0.5 * dx * sol.gradient[0];
  for (int i = 1; i < m; ++i) {
    sol.h[i] = sol.h[i - 1] + dx * sol.gradient[i];
  }
  sol.h_right = sol.h[m - 1] + 0.5 * dx * sol.gradient[m];
  return sol;
}

double l1_distance(const DensityField& u, const DensityField& v, int k) {
  if (u.cells != v.cells || u.frames() != v.frames()) {
    throw std::invalid_argument("l1_distance needs fields on the same grid");
  }
  if (k < 0 || k >= u.frames()) {
    throw std::out_of_range("frame index out of range");
  }
  double s = 0.0;
  const auto a = u.frame(k);
  const auto b = v.frame(k);
  for (int i = 0; i < u.cells; ++i) {
    s += std::abs(a[i] - b[i]);
  }
  return s * u.dx();
}

std::vector<double> centered_time_derivative(const DensityField& u) {
  const int frames = u.frames();
  const int m = u.cells;
  if (frames < 2) {
    throw std::invalid_argument("need at least two frames for a time derivative");
  }
  std::vector<double> out(static_cast<std::size_t>(frames) * m);
  for (int k = 0; k < frames; ++k) {
    const int k0 = std::max(k - 1, 0);
    const int k1 = std::min(k + 1, frames - 1);
    const double dt = u.times[k1] - u.times[k0];
    for (int i = 0; i < m; ++i) {
      double d = (u.at(k1, i) - u.at(k0, i)) / dt;
      if (frames >= 3 && (k == 0 || k == frames - 1)) {
        // Second-order one-sided difference at the ends.
        const double h = u.times[1] - u.times[0];
        d = (k == 0) ? (-3.0 * u.at(0, i) + 4.0 * u.at(1, i) - u.at(2, i)) / (2.0 * h)
                     : (3.0 * u.at(k, i) - 4.0 * u.at(k - 1, i) + u.at(k - 2, i)) / (2.0 * h);
      }
      out[static_cast<std::size_t>(k) * m + i] = d;
    }
  }
  return out;
}

}  // namespace gsep
