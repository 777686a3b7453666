#include "gsep/profile.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace gsep {

namespace {

std::vector<double> parse_numbers(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) {
      continue;
    }
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw std::invalid_argument("cannot parse number '" + item + "'");
    }
  }
  return out;
}

std::pair<std::string, std::vector<double>> split_spec(const std::string& spec) {
  const auto colon = spec.find(':');
  if (colon == std::string::npos) {
    return {spec, {}};
  }
  return {spec.substr(0, colon), parse_numbers(spec.substr(colon + 1))};
}

void require_unit_interval(double v, const std::string& what) {
  if (!(v >= 0.0 && v <= 1.0)) {
    throw std::invalid_argument(what + " must lie in [0,1]");
  }
}

}  // namespace

Profile tabulated_profile(std::vector<double> xs, std::vector<double> values) {
  if (xs.size() != values.size() || xs.size() < 2) {
    throw std::invalid_argument("tabulated profile needs at least two (x,value) samples");
  }
  for (std::size_t i = 1; i < xs.size(); ++i) {
    if (!(xs[i] > xs[i - 1])) {
      throw std::invalid_argument("tabulated profile abscissae must be increasing");
    }
  }
  for (double v : values) {
    require_unit_interval(v, "profile value");
  }
  return [xs = std::move(xs), values = std::move(values)](double x) {
    if (x <= xs.front()) {
      return values.front();
    }
    if (x >= xs.back()) {
      return values.back();
    }
    const auto it = std::upper_bound(xs.begin(), xs.end(), x);
    const auto j = static_cast<std::size_t>(it - xs.begin());
    const double w = (x - xs[j - 1]) / (xs[j] - xs[j - 1]);
    return (1.0 - w) * values[j - 1] + w * values[j];
  };
}

Profile read_profile_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open profile file " + path);
  }
  std::vector<double> xs;
  std::vector<double> vs;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') {
      continue;
    }
    const auto nums = [&]() -> std::vector<double> {
      try {
        return parse_numbers(line);
      } catch (const std::invalid_argument&) {
        return {};
      }
    }();
    if (nums.size() < 2) {
      if (xs.empty()) {
        continue;  // header
      }
      throw std::runtime_error("malformed profile line: " + line);
    }
    xs.push_back(nums[0]);
    vs.push_back(nums[1]);
  }
  return tabulated_profile(std::move(xs), std::move(vs));
}

StationaryProfile stationary_profile(const ModelParams& p) {
  const auto right_of = [&](double left) {
    const double j = left - p.alpha;
    return std::pair{p.flux_potential_inverse(p.flux_potential(left) + 2.0 * j), j};
  };
  double lo = 0.0;
  double hi = 1.0;
  for (int it = 0; it < 200 && hi - lo > 1e-16; ++it) {
    const double mid = 0.5 * (lo + hi);
    const auto [right, j] = right_of(mid);
    if (right + j - p.beta < 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  StationaryProfile out;
  out.left = 0.5 * (lo + hi);
  const auto [right, j] = right_of(out.left);
  out.right = right;
  out.current = j;
  const double base = p.flux_potential(out.left);
  out.rho = [p, base, j](double x) { return p.flux_potential_inverse(base + j * (x + 1.0)); };
  return out;
}

Profile compatible_profile(const ModelParams& p, double amp) {
  const auto st = stationary_profile(p);
  Profile rho = [base = st.rho, amp](double x) {
    const double w = 1.0 - x * x;
    return base(x) + amp * w * w * w * std::cos(0.5 * std::numbers::pi * x);
  };
  for (int i = 0; i <= 200; ++i) {
    const double x = -1.0 + 0.01 * i;
    if (!(rho(x) > 0.0 && rho(x) < 1.0)) {
      throw std::invalid_argument("compatible profile amplitude leaves (0,1)");
    }
  }
  return rho;
}

Profile parse_profile(const std::string& spec, const ModelParams& p) {
  if (spec.rfind("file:", 0) == 0) {
    return read_profile_csv(spec.substr(5));
  }
  const auto [name, args] = split_spec(spec);
  if (name == "constant") {
    if (args.size() != 1) {
      throw std::invalid_argument("constant profile takes one value: constant:c");
    }
    require_unit_interval(args[0], "constant profile");
    return [c = args[0]](double) { return c; };
  }
  if (name == "step") {
    if (args.size() != 2) {
      throw std::invalid_argument("step profile takes two values: step:c1,c2");
    }
    require_unit_interval(args[0], "step profile");
    require_unit_interval(args[1], "step profile");
    return [l = args[0], r = args[1]](double x) { return x < 0.0 ? l : r; };
  }
  if (name == "cosine") {
    const double mean = args.size() > 0 ? args[0] : 0.5;
    const double amp = args.size() > 1 ? args[1] : 0.25;
    require_unit_interval(mean - std::abs(amp), "cosine profile");
    require_unit_interval(mean + std::abs(amp), "cosine profile");
    return [mean, amp](double x) { return mean + amp * std::cos(std::numbers::pi * x); };
  }
  if (name == "stationary") {
    return stationary_profile(p).rho;
  }
  if (name == "compatible") {
    return compatible_profile(p, args.empty() ? 0.2 : args[0]);
  }
  throw std::invalid_argument("unknown profile '" + spec + "'");
}

double smooth_ramp(double t, double t0, double ramp) {
  if (t <= t0) {
    return 0.0;
  }
  if (t >= t0 + ramp) {
    return 1.0;
  }
  const double s = (t - t0) / ramp;
  return s * s * (3.0 - 2.0 * s);
}

TiltFunction ramped_tilt(double amp, double t0, double ramp, double slope, double bend) {
  if (!(ramp > 0.0) || t0 < 0.0) {
    throw std::invalid_argument("ramped tilt needs t0 >= 0 and ramp > 0");
  }
  TiltFunction h;
  h.value = [=](double t, double x) {
    return amp * smooth_ramp(t, t0, ramp) * (slope * x + bend * std::cos(0.5 * std::numbers::pi * x));
  };
  h.activation = t0;
  // |slope x + bend cos| <= |slope| + |bend|, |d/dx| <= |slope| + pi/2 |bend|.
  h.value_bound = std::abs(amp) * (std::abs(slope) + std::abs(bend));
  h.grad_bound = std::abs(amp) * (std::abs(slope) + 0.5 * std::numbers::pi * std::abs(bend));
  h.breakpoints = {t0, t0 + ramp};
  return h;
}

TiltFunction linear_tilt(double amp) {
  TiltFunction h;
  h.value = [amp](double t, double x) { return amp * t * x; };
  h.activation = 0.0;
  h.value_bound = std::numeric_limits<double>::infinity();
  h.grad_bound = std::numeric_limits<double>::infinity();
  return h;
}

TiltFunction parse_tilt(const std::string& spec) {
  const auto [name, args] = split_spec(spec);
  if (name == "zero") {
    return TiltFunction::zero();
  }
  if (name == "ramped") {
    if (args.size() != 5) {
      throw std::invalid_argument("ramped tilt takes amp,t0,ramp,slope,bend");
    }
    return ramped_tilt(args[0], args[1], args[2], args[3], args[4]);
  }
  if (name == "linear") {
    if (args.size() != 1) {
      throw std::invalid_argument("linear tilt takes one amplitude");
    }
    return linear_tilt(args[0]);
  }
  throw std::invalid_argument("unknown tilt '" + spec + "'");
}

}  // namespace gsep
