#pragma once

// Large-deviation cost of a smooth density trajectory, computed four ways:
// a concave maximisation over tilt fields, the bulk/boundary decomposition
// with its two-variable boundary problem, the variant built on the
// weight Xi, and the closed form through the elliptic equation for H.
//
// All four share one spatial discretisation per time frame. Cells carry u and
// du/dt; links join neighbouring cells (width dx) and the walls to the first
// and last cell centres (width dx/2). A tilt H lives on the cell centres plus
// its two wall traces.

#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gsep/model.hpp"
#include "gsep/pde.hpp"

namespace gsep {

struct TrajectoryData {
  ModelParams params;
  int cells = 0;
  std::vector<double> times;
  std::vector<double> u;     // frame-major, frames x cells
  std::vector<double> dudt;  // same layout
  int first_frame = 0;       // evaluation window, inclusive frame indices
  int last_frame = 0;

  // Uses the solver's du/dt when present, centred differences otherwise.
  // The window defaults to the whole trajectory.
  static TrajectoryData from_field(const ModelParams& p, const DensityField& field,
                                   std::optional<std::pair<double, double>> window = std::nullopt);

  TrajectoryData restricted(double start, double end) const;

  int frames() const { return static_cast<int>(times.size()); }
  double dx() const { return 2.0 / cells; }
  std::span<const double> frame(int k) const {
    return {u.data() + static_cast<std::size_t>(k) * cells, static_cast<std::size_t>(cells)};
  }
  std::span<const double> rate(int k) const {
    return {dudt.data() + static_cast<std::size_t>(k) * cells, static_cast<std::size_t>(cells)};
  }
  // min over the window of min(u, 1-u).
  double interior_margin() const;
  // Trapezoid weights of the window frames (zero outside).
  std::vector<double> time_weights() const;
};

enum class RateMethod { variational, decomposition, explicit_formula, smooth_decomposition };

std::string to_string(RateMethod m);
RateMethod parse_rate_method(const std::string& name);

struct RateBreakdown {
  RateMethod method = RateMethod::explicit_formula;
  double bulk = 0.0;
  double left_boundary = 0.0;
  double right_boundary = 0.0;
  double total = 0.0;
  bool converged = true;
  int iterations = 0;
  double final_gradient = 0.0;
  double epsilon = 0.0;  // interior margin of the trajectory
  std::string reason;    // set when total is +infinity

  bool infinite() const { return std::isinf(total); }
};

inline constexpr double kInfiniteRate = std::numeric_limits<double>::infinity();

// Space-time integral of (du/dx)^2 / chi(u). Returns +infinity when the
// trajectory touches {0,1} with a non-vanishing gradient on more than 0.1% of
// the grid.
double energy_Q(const TrajectoryData& traj);

// The functional J_H evaluated on the window for a tilt sampled on the
// trajectory's frames.
double eval_J_H(const TrajectoryData& traj, const TiltField& h);
double eval_J_H(const TrajectoryData& traj, const TiltFunction& h);

struct VariationalOptions {
  double tolerance = 1e-7;  // sup norm of the discrete gradient
  int max_iterations = 100;
};

struct VariationalResult {
  RateBreakdown rate;
  TiltField h;
  std::vector<double> history;  // J_H after each accepted step
};

VariationalResult variational_rate(const TrajectoryData& traj, const VariationalOptions& opt = {});

struct ExplicitResult {
  RateBreakdown rate;
  TiltField h;
  double max_residual = 0.0;  // worst boundary residual of the elliptic solves
};

ExplicitResult explicit_rate(const TrajectoryData& traj);

// Per-frame data of the boundary problem sup_{a,b} {a x + b y - Upsilon}.
struct BoundaryProblemTrace {
  std::vector<double> times;
  std::vector<double> x;      // g(t) or a(t)
  std::vector<double> y;      // h(t) or b(t)
  std::vector<double> alpha;  // optimisers
  std::vector<double> beta;
  std::vector<double> phi;
};

struct DecompositionResult {
  RateBreakdown rate;
  double first = 0.0;   // I^(1) or I^(a)
  double second = 0.0;  // I^(2) or I^(b)
  BoundaryProblemTrace trace;
};

DecompositionResult decomposition_rate(const TrajectoryData& traj);
DecompositionResult smooth_decomposition_rate(const TrajectoryData& traj);

// Phi(r,s,x,y) = sup_{a,b} { a x + b y - 4 S (a-b)^2 - Psi(r,s,a,b) }.
struct PhiSolution {
  double value = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  int iterations = 0;
  bool used_bisection = false;
};

PhiSolution solve_phi(const ModelParams& p, double r, double s, double x, double y, double s_weight);

}  // namespace gsep
