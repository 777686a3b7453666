#pragma once

// Initial density profiles on [-1,1] and space-time tilt fields.

#include <functional>
#include <string>
#include <vector>

#include "gsep/model.hpp"

namespace gsep {

using Profile = std::function<double(double)>;

// Parses "constant:c", "step:c1,c2", "cosine[:mean,amp]", "stationary",
// "compatible[:amp]" or "file:path.csv"; stationary and compatible need the
// model parameters.
Profile parse_profile(const std::string& spec, const ModelParams& p);

// Piecewise-linear interpolation of (x, value) samples.
Profile tabulated_profile(std::vector<double> xs, std::vector<double> values);

// Reads a two-column CSV (x,value) with an optional header line.
Profile read_profile_csv(const std::string& path);

// Stationary solution of the hydrodynamic equation: P_a(rho) is affine with
// slope J = rho(-1) - alpha = beta - rho(1). Solved by shooting on rho(-1).
struct StationaryProfile {
  double left = 0.0;
  double right = 0.0;
  double current = 0.0;
  Profile rho;
};
StationaryProfile stationary_profile(const ModelParams& p);

// Stationary profile plus amp (1-x^2)^3 cos(pi x / 2): smooth and satisfies
// both Robin conditions of the hydrodynamic equation.
Profile compatible_profile(const ModelParams& p, double amp);

// Smooth space-time tilt H(t,x), vanishing for t <= activation.
struct TiltFunction {
  std::function<double(double, double)> value;
  double activation = 0.0;
  double value_bound = 0.0;  // >= sup |H|
  double grad_bound = 0.0;   // >= sup |dH/dx|
  std::vector<double> breakpoints;  // times where H is only C^1

  double operator()(double t, double x) const { return value ? value(t, x) : 0.0; }
  bool is_zero() const { return !value; }

  static TiltFunction zero() { return {}; }
};

// Cubic smoothstep from 0 at t0 to 1 at t0 + ramp; C^1 in time.
double smooth_ramp(double t, double t0, double ramp);

// amp * ramp(t) * (slope x + bend cos(pi x / 2)). Bounds are exact.
TiltFunction ramped_tilt(double amp, double t0, double ramp, double slope, double bend);

// amp * t * x, the linear-response probe.
TiltFunction linear_tilt(double amp);

// Parses "zero", "ramped:amp,t0,ramp,slope,bend" or "linear:amp".
TiltFunction parse_tilt(const std::string& spec);

}  // namespace gsep
