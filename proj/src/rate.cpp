#include "gsep/rate.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "gsep/kernels.hpp"

namespace gsep {

namespace {

constexpr double kTimeMatch = 1e-9;

int frame_at(const std::vector<double>& times, double t) {
  for (std::size_t k = 0; k < times.size(); ++k) {
    if (std::abs(times[k] - t) <= kTimeMatch * std::max(1.0, std::abs(t))) {
      return static_cast<int>(k);
    }
  }
  throw std::invalid_argument("window end " + std::to_string(t) + " is not a stored frame time");
}

RateBreakdown infinite_rate(RateMethod m, double eps, std::string reason) {
  RateBreakdown r;
  r.method = m;
  r.total = kInfiniteRate;
  r.bulk = kInfiniteRate;
  r.epsilon = eps;
  r.reason = std::move(reason);
  return r;
}

// Returns a reason string when the rate methods cannot be applied.
std::string degeneracy_reason(const TrajectoryData& traj) {
  const double eps = traj.interior_margin();
  if (!(eps > kDegenerateDensity)) {
    return "trajectory reaches within " + std::to_string(kDegenerateDensity) +
           " of {0,1} (margin " + std::to_string(eps) + ")";
  }
  return {};
}

// J_H restricted to one time slice, given nodal H = (H_L, H_0..H_{M-1}, H_R).
struct SliceTerms {
  double value = 0.0;
  double bulk = 0.0;   // sum w sigma G^2
  double left = 0.0;   // c_alpha(u_0, H_L)
  double right = 0.0;  // c_beta(u_{M-1}, H_R)
};

SliceTerms slice_functional(const ModelParams& p, std::span<const double> u,
                            std::span<const double> dudt, const LinkCoefficients& links,
                            std::span<const double> nodes) {
  const int m = static_cast<int>(u.size());
  const double dx = 2.0 / m;
  SliceTerms s;
  double linear = 0.0;
  for (int i = 0; i < m; ++i) {
    linear += dx * dudt[i] * nodes[i + 1];
  }
  double cross = 0.0;
  for (int f = 0; f <= m; ++f) {
    const double dh = nodes[f + 1] - nodes[f];
    cross += links.drive[f] * dh;
    s.bulk += links.mobility[f] * dh * dh / links.weight[f];
  }
  const double hl = nodes[0];
  const double hr = nodes[m + 1];
  s.value = linear + cross - s.bulk - kernels::boundary_term(p.alpha, u[0], hl) -
            kernels::boundary_term(p.beta, u[m - 1], hr);
  s.left = kernels::boundary_cost(p.alpha, u[0], hl);
  s.right = kernels::boundary_cost(p.beta, u[m - 1], hr);
  return s;
}

// Gradient and (negated) tridiagonal Hessian of the slice functional.
void slice_derivatives(const ModelParams& p, std::span<const double> u,
                       std::span<const double> dudt, const LinkCoefficients& links,
                       std::span<const double> nodes, std::vector<double>& grad,
                       std::vector<double>& diag, std::vector<double>& off) {
  const int m = static_cast<int>(u.size());
  const int n = m + 2;
  const double dx = 2.0 / m;
  grad.assign(n, 0.0);
  diag.assign(n, 0.0);
  off.assign(n - 1, 0.0);
  for (int i = 0; i < m; ++i) {
    grad[i + 1] = dx * dudt[i];
  }
  for (int f = 0; f <= m; ++f) {
    const double k = 2.0 * links.mobility[f] / links.weight[f];
    const double flux = links.drive[f] - k * (nodes[f + 1] - nodes[f]);
    grad[f] += -flux;
    grad[f + 1] += flux;
    diag[f] += k;
    diag[f + 1] += k;
    off[f] = -k;
  }
  grad[0] -= kernels::boundary_term_slope(p.alpha, u[0], nodes[0]);
  grad[n - 1] -= kernels::boundary_term_slope(p.beta, u[m - 1], nodes[n - 1]);
  diag[0] += kernels::boundary_term_curvature(p.alpha, u[0], nodes[0]);
  diag[n - 1] += kernels::boundary_term_curvature(p.beta, u[m - 1], nodes[n - 1]);
}

// Solves the symmetric positive definite tridiagonal system A d = b.
std::vector<double> solve_tridiagonal(const std::vector<double>& diag, const std::vector<double>& off,
                                      const std::vector<double>& rhs) {
  const std::size_t n = diag.size();
  std::vector<double> c(n, 0.0);
  std::vector<double> d(n, 0.0);
  double denom = diag[0];
  c[0] = n > 1 ? off[0] / denom : 0.0;
  d[0] = rhs[0] / denom;
  for (std::size_t i = 1; i < n; ++i) {
    denom = diag[i] - off[i - 1] * c[i - 1];
    c[i] = i + 1 < n ? off[i] / denom : 0.0;
    d[i] = (rhs[i] - off[i - 1] * d[i - 1]) / denom;
  }
  for (std::size_t i = n - 1; i-- > 0;) {
    d[i] -= c[i] * d[i + 1];
  }
  return d;
}

// Scaled sup norm: interior entries are per unit length.
double gradient_norm(const std::vector<double>& grad, double dx) {
  double g = std::max(std::abs(grad.front()), std::abs(grad.back()));
  for (std::size_t i = 1; i + 1 < grad.size(); ++i) {
    g = std::max(g, std::abs(grad[i]) / dx);
  }
  return g;
}

std::vector<double> nodes_of(const TiltField& h, int k) {
  std::vector<double> nodes(h.cells + 2);
  nodes[0] = h.left[k];
  const auto f = h.frame(k);
  std::copy(f.begin(), f.end(), nodes.begin() + 1);
  nodes[h.cells + 1] = h.right[k];
  return nodes;
}

void store_nodes(TiltField& h, int k, const std::vector<double>& nodes) {
  h.left[k] = nodes.front();
  h.right[k] = nodes.back();
  std::copy(nodes.begin() + 1, nodes.end() - 1, h.values.begin() + static_cast<std::ptrdiff_t>(k) * h.cells);
}

// Quantities of the bulk/boundary decomposition at one time.
struct SliceDecomposition {
  double s_weight = 0.0;  // 1 / <1/sigma>
  double bulk = 0.0;      // density of I^(1) (times 4 removed)
  double x = 0.0;
  double y = 0.0;
  double r = 0.0;
  double s = 0.0;
};

SliceDecomposition decompose_slice(const ModelParams& p, std::span<const double> u,
                                   std::span<const double> dudt, const LinkCoefficients& links,
                                   bool smooth_variant) {
  const int m = static_cast<int>(u.size());
  const double dx = 2.0 / m;
  double inv_sigma = 0.0;
  double cum_over_sigma = 0.0;
  for (int f = 0; f <= m; ++f) {
    inv_sigma += links.weight[f] / links.mobility[f];
    cum_over_sigma += links.weight[f] * links.cumulative[f] / links.mobility[f];
  }
  const double sw = 1.0 / inv_sigma;
  // P_f = c - cum_f with c chosen so that <P / sigma> = 0.
  const double c = cum_over_sigma * sw;
  double m_sq = 0.0;
  double m_over_sigma = 0.0;
  double m_mean = 0.0;
  double drive_mean = 0.0;
  double drive_over_sigma = 0.0;
  for (int f = 0; f <= m; ++f) {
    const double pf = c - links.cumulative[f];
    const double mf = pf + links.drive[f];
    const double w = links.weight[f];
    m_sq += w * mf * mf / links.mobility[f];
    m_over_sigma += w * mf / links.mobility[f];
    m_mean += w * mf;
    drive_mean += w * links.drive[f];
    drive_over_sigma += w * links.drive[f] / links.mobility[f];
  }
  SliceDecomposition d;
  d.s_weight = sw;
  d.r = u[0];
  d.s = u[m - 1];
  if (!smooth_variant) {
    double p_one = 0.0;
    double p_x = 0.0;
    for (int i = 0; i < m; ++i) {
      const double xi = -1.0 + (i + 0.5) * dx;
      p_one += dx * dudt[i];
      p_x += dx * xi * dudt[i];
    }
    d.bulk = m_sq - m_over_sigma * m_over_sigma * sw;
    d.x = 2.0 * (p_one - p_x - drive_mean + 2.0 * (d.r - p.alpha) + m_mean - 2.0 * m_over_sigma * sw);
    d.y = 2.0 * (p_one + p_x + drive_mean + 2.0 * (d.s - p.beta) - m_mean + 2.0 * m_over_sigma * sw);
  } else {
    // Xi rises from 0 to 1 with slope S / sigma on each link; cells sit at
    // the far end of their left link.
    double xi = 0.0;
    double dudt_xi = 0.0;
    double dudt_total = 0.0;
    double drive_dxi = 0.0;
    for (int f = 0; f <= m; ++f) {
      const double slope = sw / links.mobility[f];
      xi += links.weight[f] * slope;
      drive_dxi += links.weight[f] * links.drive[f] * slope;
      if (f < m) {
        dudt_xi += dx * dudt[f] * xi;
        dudt_total += dx * dudt[f];
      }
    }
    d.bulk = m_sq - drive_over_sigma * drive_over_sigma * sw;
    d.x = 4.0 * ((dudt_total - dudt_xi) - drive_dxi + d.r - p.alpha);
    d.y = 4.0 * (dudt_xi + drive_dxi + d.s - p.beta);
  }
  return d;
}

DecompositionResult decomposition_common(const TrajectoryData& traj, bool smooth_variant) {
  const RateMethod method =
      smooth_variant ? RateMethod::smooth_decomposition : RateMethod::decomposition;
  DecompositionResult out;
  const double eps = traj.interior_margin();
  if (auto reason = degeneracy_reason(traj); !reason.empty()) {
    out.rate = infinite_rate(method, eps, reason);
    return out;
  }
  const auto& p = traj.params;
  const auto tw = traj.time_weights();
  RateBreakdown r;
  r.method = method;
  r.epsilon = eps;
  double first = 0.0;
  double second = 0.0;
  int worst_iterations = 0;
  for (int k = traj.first_frame; k <= traj.last_frame; ++k) {
    const auto u = traj.frame(k);
    const auto dudt = traj.rate(k);
    const auto links = link_coefficients(p, u, dudt);
    const auto d = decompose_slice(p, u, dudt, links, smooth_variant);
    const auto phi = solve_phi(p, d.r, d.s, d.x, d.y, d.s_weight);
    worst_iterations = std::max(worst_iterations, phi.iterations);
    out.trace.times.push_back(traj.times[k]);
    out.trace.x.push_back(d.x);
    out.trace.y.push_back(d.y);
    out.trace.alpha.push_back(phi.alpha);
    out.trace.beta.push_back(phi.beta);
    out.trace.phi.push_back(phi.value);
    const double w = tw[k];
    first += 0.25 * w * d.bulk;
    second += 0.25 * w * phi.value;
    const double gap = phi.alpha - phi.beta;
    r.bulk += 0.25 * w * d.bulk + w * d.s_weight * gap * gap;
    r.left_boundary += w * kernels::boundary_cost(p.alpha, d.r, phi.alpha);
    r.right_boundary += w * kernels::boundary_cost(p.beta, d.s, phi.beta);
  }
  r.total = first + second;
  r.iterations = worst_iterations;
  out.rate = r;
  out.first = first;
  out.second = second;
  return out;
}

}  // namespace

TrajectoryData TrajectoryData::from_field(const ModelParams& p, const DensityField& field,
                                          std::optional<std::pair<double, double>> window) {
  p.validate();
  if (field.frames() < 2 || field.cells < 3) {
    throw std::invalid_argument("trajectory needs at least two frames and three cells");
  }
  TrajectoryData t;
  t.params = p;
  t.cells = field.cells;
  t.times = field.times;
  t.u = field.values;
  t.dudt = field.has_rates() ? field.rates : centered_time_derivative(field);
  t.first_frame = 0;
  t.last_frame = field.frames() - 1;
  if (window) {
    return t.restricted(window->first, window->second);
  }
  return t;
}

TrajectoryData TrajectoryData::restricted(double start, double end) const {
  if (!(end > start)) {
    throw std::invalid_argument("empty evaluation window");
  }
  TrajectoryData t = *this;
  t.first_frame = frame_at(times, start);
  t.last_frame = frame_at(times, end);
  return t;
}

double TrajectoryData::interior_margin() const {
  double eps = 0.5;
  for (int k = first_frame; k <= last_frame; ++k) {
    for (double v : frame(k)) {
      eps = std::min(eps, std::min(v, 1.0 - v));
    }
  }
  return eps;
}

std::vector<double> TrajectoryData::time_weights() const {
  std::vector<double> w(times.size(), 0.0);
  for (int k = first_frame; k < last_frame; ++k) {
    const double h = times[k + 1] - times[k];
    w[k] += 0.5 * h;
    w[k + 1] += 0.5 * h;
  }
  return w;
}

std::string to_string(RateMethod m) {
  switch (m) {
    case RateMethod::variational:
      return "variational";
    case RateMethod::decomposition:
      return "decomposition";
    case RateMethod::explicit_formula:
      return "explicit";
    case RateMethod::smooth_decomposition:
      return "smooth_decomposition";
  }
  return "unknown";
}

RateMethod parse_rate_method(const std::string& name) {
  if (name == "variational") return RateMethod::variational;
  if (name == "decomposition") return RateMethod::decomposition;
  if (name == "explicit") return RateMethod::explicit_formula;
  if (name == "smooth_decomposition" || name == "smooth") return RateMethod::smooth_decomposition;
  throw std::invalid_argument("unknown rate method '" + name + "'");
}

double energy_Q(const TrajectoryData& traj) {
  const int m = traj.cells;
  const double dx = traj.dx();
  const auto tw = traj.time_weights();
  long bad = 0;
  long total_links = 0;
  double q = 0.0;
  for (int k = traj.first_frame; k <= traj.last_frame; ++k) {
    const auto u = traj.frame(k);
    double slice = 0.0;
    const auto add = [&](double value, double grad, double weight) {
      ++total_links;
      double chi = ModelParams::compressibility(value);
      if (!(chi > kDegenerateDensity * (1.0 - kDegenerateDensity))) {
        if (std::abs(grad) <= 1e-8) {
          return;
        }
        ++bad;
        chi = kDegenerateDensity * (1.0 - kDegenerateDensity);
      }
      slice += weight * grad * grad / chi;
    };
    for (int f = 1; f < m; ++f) {
      add(0.5 * (u[f - 1] + u[f]), (u[f] - u[f - 1]) / dx, dx);
    }
    // Half links: linear extrapolation to their midpoints.
    const double gl = 1.75 * (u[1] - u[0]) / dx - 0.75 * (u[2] - u[1]) / dx;
    const double gr = 1.75 * (u[m - 1] - u[m - 2]) / dx - 0.75 * (u[m - 2] - u[m - 3]) / dx;
    add(std::clamp(1.25 * u[0] - 0.25 * u[1], 0.0, 1.0), gl, 0.5 * dx);
    add(std::clamp(1.25 * u[m - 1] - 0.25 * u[m - 2], 0.0, 1.0), gr, 0.5 * dx);
    q += tw[k] * slice;
  }
  if (bad > 0.001 * static_cast<double>(total_links)) {
    return kInfiniteRate;
  }
  return q;
}

double eval_J_H(const TrajectoryData& traj, const TiltField& h) {
  if (h.cells != traj.cells || h.frames() != traj.frames()) {
    throw std::invalid_argument("tilt field does not match the trajectory frames");
  }
  const auto tw = traj.time_weights();
  double total = 0.0;
  for (int k = traj.first_frame; k <= traj.last_frame; ++k) {
    const auto u = traj.frame(k);
    const auto dudt = traj.rate(k);
    const auto links = link_coefficients(traj.params, u, dudt);
    const auto nodes = nodes_of(h, k);
    total += tw[k] * slice_functional(traj.params, u, dudt, links, nodes).value;
  }
  return total;
}

double eval_J_H(const TrajectoryData& traj, const TiltFunction& h) {
  return eval_J_H(traj, TiltField::sample(h, traj.cells, traj.times));
}

VariationalResult variational_rate(const TrajectoryData& traj, const VariationalOptions& opt) {
  VariationalResult out;
  out.h = TiltField::zeros(traj.cells, traj.times);
  const double eps = traj.interior_margin();
  if (auto reason = degeneracy_reason(traj); !reason.empty()) {
    out.rate = infinite_rate(RateMethod::variational, eps, reason);
    return out;
  }
  const auto& p = traj.params;
  const int m = traj.cells;
  const double dx = traj.dx();
  const auto tw = traj.time_weights();
  const int first = traj.first_frame;
  const int count = traj.last_frame - first + 1;

  std::vector<LinkCoefficients> links(count);
  std::vector<std::vector<double>> nodes(count, std::vector<double>(m + 2, 0.0));
  std::vector<double> values(count, 0.0);
  std::vector<bool> done(count, false);
  std::vector<double> last_gradient(count, 0.0);
  for (int j = 0; j < count; ++j) {
    links[j] = link_coefficients(p, traj.frame(first + j), traj.rate(first + j));
  }
  const auto global_value = [&]() {
    double s = 0.0;
    for (int j = 0; j < count; ++j) s += tw[first + j] * values[j];
    return s;
  };
  out.history.push_back(global_value());

  std::vector<double> grad;
  std::vector<double> diag;
  std::vector<double> off;
  std::vector<double> trial(m + 2);
  int iteration = 0;
  double worst = 0.0;
  bool converged = false;
  while (true) {
    worst = 0.0;
    for (int j = 0; j < count; ++j) {
      if (done[j]) continue;
      const auto u = traj.frame(first + j);
      const auto dudt = traj.rate(first + j);
      slice_derivatives(p, u, dudt, links[j], nodes[j], grad, diag, off);
      const double g = gradient_norm(grad, dx);
      last_gradient[j] = g;
      if (g < opt.tolerance) {
        done[j] = true;
        continue;
      }
      worst = std::max(worst, g);
      if (iteration >= opt.max_iterations) continue;
      const auto step = solve_tridiagonal(diag, off, grad);
      double slope = 0.0;
      for (std::size_t i = 0; i < step.size(); ++i) slope += step[i] * grad[i];
      double t = 1.0;
      bool accepted = false;
      for (int ls = 0; ls < 60; ++ls) {
        for (int i = 0; i < m + 2; ++i) trial[i] = nodes[j][i] + t * step[i];
        const double v = slice_functional(p, u, dudt, links[j], trial).value;
        if (v >= values[j] + 1e-4 * t * slope) {
          values[j] = v;
          nodes[j] = trial;
          accepted = true;
          break;
        }
        t *= 0.5;
      }
      if (!accepted) {
        // No ascent is possible at working precision.
        done[j] = true;
      }
    }
    if (worst == 0.0) {
      converged = true;
      break;
    }
    if (iteration >= opt.max_iterations) {
      break;
    }
    ++iteration;
    out.history.push_back(global_value());
  }

  RateBreakdown r;
  r.method = RateMethod::variational;
  r.epsilon = eps;
  r.iterations = iteration;
  r.final_gradient = *std::max_element(last_gradient.begin(), last_gradient.end());
  r.converged = converged;
  for (int j = 0; j < count; ++j) {
    const int k = first + j;
    const auto terms = slice_functional(p, traj.frame(k), traj.rate(k), links[j], nodes[j]);
    r.bulk += tw[k] * terms.bulk;
    r.left_boundary += tw[k] * terms.left;
    r.right_boundary += tw[k] * terms.right;
    r.total += tw[k] * terms.value;
    store_nodes(out.h, k, nodes[j]);
  }
  out.rate = r;
  return out;
}

ExplicitResult explicit_rate(const TrajectoryData& traj) {
  ExplicitResult out;
  out.h = TiltField::zeros(traj.cells, traj.times);
  const double eps = traj.interior_margin();
  if (auto reason = degeneracy_reason(traj); !reason.empty()) {
    out.rate = infinite_rate(RateMethod::explicit_formula, eps, reason);
    return out;
  }
  const auto& p = traj.params;
  const auto tw = traj.time_weights();
  RateBreakdown r;
  r.method = RateMethod::explicit_formula;
  r.epsilon = eps;
  for (int k = traj.first_frame; k <= traj.last_frame; ++k) {
    const auto u = traj.frame(k);
    const auto dudt = traj.rate(k);
    const auto sol = solve_elliptic_H(p, u, dudt);
    const auto links = link_coefficients(p, u, dudt);
    double bulk = 0.0;
    for (int f = 0; f <= traj.cells; ++f) {
      bulk += links.weight[f] * links.mobility[f] * sol.gradient[f] * sol.gradient[f];
    }
    r.bulk += tw[k] * bulk;
    r.left_boundary += tw[k] * kernels::boundary_cost(p.alpha, u[0], sol.h_left);
    r.right_boundary += tw[k] * kernels::boundary_cost(p.beta, u[traj.cells - 1], sol.h_right);
    r.iterations = std::max(r.iterations, sol.iterations);
    out.max_residual = std::max(out.max_residual, std::abs(sol.residual));
    out.h.left[k] = sol.h_left;
    out.h.right[k] = sol.h_right;
    std::copy(sol.h.begin(), sol.h.end(),
              out.h.values.begin() + static_cast<std::ptrdiff_t>(k) * traj.cells);
  }
  r.total = r.bulk + r.left_boundary + r.right_boundary;
  r.final_gradient = out.max_residual;
  out.rate = r;
  return out;
}

DecompositionResult decomposition_rate(const TrajectoryData& traj) {
  return decomposition_common(traj, false);
}

DecompositionResult smooth_decomposition_rate(const TrajectoryData& traj) {
  return decomposition_common(traj, true);
}

PhiSolution solve_phi(const ModelParams& p, double r, double s, double x, double y, double s_weight) {
  const auto objective = [&](double a, double b) {
    const double gap = a - b;
    return a * x + b * y - 4.0 * s_weight * gap * gap - kernels::psi(p.alpha, r, a) -
           kernels::psi(p.beta, s, b);
  };
  const auto grad_a = [&](double a, double b) {
    return x - 8.0 * s_weight * (a - b) - kernels::psi_slope(p.alpha, r, a);
  };
  const auto grad_b = [&](double a, double b) {
    return y + 8.0 * s_weight * (a - b) - kernels::psi_slope(p.beta, s, b);
  };

  PhiSolution sol;
  double a = 0.0;
  double b = 0.0;
  double value = objective(a, b);
  bool ok = false;
  for (int it = 0; it < 200; ++it) {
    const double ga = grad_a(a, b);
    const double gb = grad_b(a, b);
    const double scale = 1.0 + std::abs(x) + std::abs(y);
    if (std::max(std::abs(ga), std::abs(gb)) <= 1e-13 * scale) {
      ok = true;
      sol.iterations = it;
      break;
    }
    // Negated Hessian [[haa, -8S], [-8S, hbb]] is positive definite.
    const double haa = 8.0 * s_weight + kernels::psi_curvature(p.alpha, r, a);
    const double hbb = 8.0 * s_weight + kernels::psi_curvature(p.beta, s, b);
    const double hab = -8.0 * s_weight;
    const double det = haa * hbb - hab * hab;
    const double da = (hbb * ga - hab * gb) / det;
    const double db = (haa * gb - hab * ga) / det;
    double t = 1.0;
    bool improved = false;
    for (int ls = 0; ls < 80; ++ls) {
      const double v = objective(a + t * da, b + t * db);
      if (v > value || (v == value && t < 1e-3)) {
        a += t * da;
        b += t * db;
        value = v;
        improved = true;
        break;
      }
      t *= 0.5;
    }
    if (!improved) {
      // Stalled at working precision: accept if the gradient is small.
      ok = std::max(std::abs(ga), std::abs(gb)) <= 1e-8 * scale;
      sol.iterations = it;
      break;
    }
  }

  if (!ok) {
    // Nested bisection: for fixed alpha the beta-gradient is decreasing in
    // beta, and the reduced alpha-gradient is decreasing in alpha.
    const auto bisect = [](auto f, double lo, double hi) {
      while (f(lo) < 0.0) lo = 2.0 * lo - 1.0;
      while (f(hi) > 0.0) hi = 2.0 * hi + 1.0;
      for (int i = 0; i < 200 && hi - lo > 1e-14 * std::max(1.0, std::abs(lo)); ++i) {
        const double mid = 0.5 * (lo + hi);
        (f(mid) > 0.0 ? lo : hi) = mid;
      }
      return 0.5 * (lo + hi);
    };
    const auto best_b = [&](double aa) { return bisect([&](double bb) { return grad_b(aa, bb); }, -1.0, 1.0); };
    a = bisect([&](double aa) { return grad_a(aa, best_b(aa)); }, -1.0, 1.0);
    b = best_b(a);
    value = objective(a, b);
    sol.used_bisection = true;
  }
  sol.alpha = a;
  sol.beta = b;
  sol.value = std::max(value, 0.0);
  return sol;
}

}  // namespace gsep
