#pragma once

// Conservative finite-volume solvers for the hydrodynamic equation
//   du/dt = d/dx (D(u) du/dx),  D(u) du/dx = u - alpha at -1, = beta - u at +1,
// its tilted version with flux D(u) u_x - 2 sigma(u) H_x and exponential Robin
// conditions, and the pointwise-in-time inverse problem for H.

#include <span>
#include <stdexcept>
#include <vector>

#include "gsep/model.hpp"
#include "gsep/profile.hpp"

namespace gsep {

class CflError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class SchemeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kCflSafety = 0.4;

struct Grid {
  int cells = 256;        // M
  double horizon = 1.0;   // T
  double frame_dt = 0.01; // spacing of stored frames
  double dt = 0.0;        // time step; 0 picks the largest stable one

  double dx() const { return 2.0 / cells; }
  double center(int i) const { return -1.0 + (i + 0.5) * dx(); }
  int frame_count() const;  // number of stored frames including t = 0
  void validate() const;
};

// Space-time cell field u[k][i] at frame times t_k. `rates` optionally holds
// the scheme's du/dt at each frame (same layout as values).
struct DensityField {
  int cells = 0;
  std::vector<double> times;
  std::vector<double> values;
  std::vector<double> rates;

  // Solver diagnostics.
  double dt = 0.0;
  long steps = 0;
  double max_mass_residual = 0.0;  // per step, |d/dt mass - boundary inflow|
  double max_clip = 0.0;           // per step, largest excursion clipped back into [0,1]
  double cfl_diffusive = 0.0;      // dt max D / dx^2
  double cfl_advective = 0.0;      // dt max |2 sigma H_x| / dx

  int frames() const { return static_cast<int>(times.size()); }
  double dx() const { return 2.0 / cells; }
  double center(int i) const { return -1.0 + (i + 0.5) * dx(); }
  std::span<const double> frame(int k) const {
    return {values.data() + static_cast<std::size_t>(k) * cells, static_cast<std::size_t>(cells)};
  }
  std::span<const double> rate(int k) const {
    return {rates.data() + static_cast<std::size_t>(k) * cells, static_cast<std::size_t>(cells)};
  }
  bool has_rates() const { return rates.size() == values.size(); }
  double at(int k, int i) const { return values[static_cast<std::size_t>(k) * cells + i]; }
  double min_value() const;
  double max_value() const;
};

// Tilt sampled at cell centres plus its boundary traces H(t,-1), H(t,1).
struct TiltField {
  int cells = 0;
  std::vector<double> times;
  std::vector<double> values;
  std::vector<double> left;
  std::vector<double> right;

  int frames() const { return static_cast<int>(times.size()); }
  std::span<const double> frame(int k) const {
    return {values.data() + static_cast<std::size_t>(k) * cells, static_cast<std::size_t>(cells)};
  }
  double at(int k, int i) const { return values[static_cast<std::size_t>(k) * cells + i]; }

  static TiltField sample(const TiltFunction& h, int cells, const std::vector<double>& times);
  static TiltField zeros(int cells, const std::vector<double>& times);
  // Linear interpolation in time between frames.
  void interpolate(double t, std::span<double> cell_values, double& h_left, double& h_right) const;
  double max_abs() const;
};

struct StepDiagnostics {
  long steps = 0;
  double max_mass_residual = 0.0;
  double max_clip = 0.0;
};

// Step-by-step access to the untilted scheme, for comparisons that need
// every time step. A zero dt picks the largest stable step.
class HydroStepper {
 public:
  HydroStepper(const ModelParams& p, std::vector<double> initial, double dt = 0.0);

  void step();
  double time() const { return t_; }
  double dt() const { return dt_; }
  std::span<const double> state() const { return u_; }
  const StepDiagnostics& diagnostics() const { return diag_; }

 private:
  ModelParams p_;
  std::vector<double> u_;
  std::vector<double> next_;
  std::vector<double> flux_;
  double dt_ = 0.0;
  double t_ = 0.0;
  StepDiagnostics diag_;
};

// Cell averages of a profile (4-point Gauss rule per cell).
std::vector<double> cell_averages(const Profile& rho, int cells);

DensityField solve_hydro(const ModelParams& p, const Grid& grid, const Profile& rho0);
DensityField solve_hydro(const ModelParams& p, const Grid& grid, std::vector<double> initial);

DensityField solve_tilted(const ModelParams& p, const Grid& grid, const Profile& rho0,
                          const TiltFunction& h);
DensityField solve_tilted(const ModelParams& p, const Grid& grid, const Profile& rho0,
                          const TiltField& h);

// Scheme right-hand side du/dt for one profile (tilt optional).
std::vector<double> scheme_rate(const ModelParams& p, std::span<const double> u,
                                std::span<const double> h = {}, double h_left = 0.0,
                                double h_right = 0.0);

// Solution of the elliptic problem for H at one time.
struct EllipticSolution {
  std::vector<double> h;          // cell centres
  double h_left = 0.0;            // H(-1)
  double h_right = 0.0;           // H(1)
  std::vector<double> flux;       // total flux D u_x - 2 sigma H_x at the M+1 faces
  std::vector<double> gradient;   // H_x on the M+1 links (half links at both ends)
  double residual = 0.0;
  int iterations = 0;
};

// Throws SchemeError when u is within this distance of {0,1}.
inline constexpr double kDegenerateDensity = 1e-6;
inline constexpr double kMobilityFloor = 1e-10;

// Per-link data of one time slice shared by the elliptic solve and the rate
// functionals. Link f = 0..M: f = 0 joins the left wall to cell 0, f = M joins
// cell M-1 to the right wall, the others join cells f-1 and f. The drive on a
// half link is the neighbouring interior drive corrected by the boundary
// cell's accumulation, so a trajectory of the untilted scheme is matched
// exactly by a vanishing tilt.
struct LinkCoefficients {
  std::vector<double> weight;      // dx/2 on the half links, dx otherwise
  std::vector<double> mobility;    // sigma on each link
  std::vector<double> drive;       // D(u) du/dx on each link
  std::vector<double> cumulative;  // dx * sum_{i<f} du_i/dt
};

LinkCoefficients link_coefficients(const ModelParams& p, std::span<const double> u,
                                   std::span<const double> dudt);

EllipticSolution solve_elliptic_H(const ModelParams& p, std::span<const double> u,
                                  std::span<const double> dudt);

// dx sum |u - v| at frame k.
double l1_distance(const DensityField& u, const DensityField& v, int k);

// d/dt of the stored frames by centred differences (one-sided at the ends).
std::vector<double> centered_time_derivative(const DensityField& u);

}  // namespace gsep
