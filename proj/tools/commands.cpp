#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <optional>
#include <stdexcept>

#include "gsep/io.hpp"
#include "gsep/profile.hpp"
#include "gsep/rate.hpp"
#include "gsep/sim.hpp"
#include "gsep/verify.hpp"

namespace gsep::cli {

namespace fs = std::filesystem;

namespace {

void write_manifest(const fs::path& dir, const std::string& command, const RunConfig& c) {
  write_json(dir / "manifest.json", Json{{"command", command},
                                         {"version", version_string()},
                                         {"timestamp", timestamp_utc()},
                                         {"seed", c.seed},
                                         {"threads", c.threads}});
}

int finish_report(const RunConfig& c, const ExperimentReport& report, const fs::path& dir) {
  write_report(dir, report, c.seed);
  std::cout << report.to_json().dump(2) << '\n';
  for (const auto& r : report.criteria()) {
    std::cerr << (r.passed ? "PASS " : "FAIL ") << r.id << ": " << r.metric << " = " << r.value << '\n';
  }
  std::cerr << "report written to " << dir.string() << '\n';
  return report.passed() ? kExitOk : kExitCriteria;
}

Json field_sidecar(const RunConfig& c, const DensityField& f, bool tilted) {
  Json j{{"params", to_json(c.params)}, {"grid", to_json(c.grid)}, {"profile", c.profile}};
  if (tilted) j["tilt"] = c.tilt;
  j["diagnostics"] = field_diagnostics(f);
  return j;
}

int write_field(const RunConfig& c, const DensityField& f, const std::string& stem, bool tilted) {
  const fs::path dir(c.output_dir);
  write_field_csv(dir / (stem + ".csv"), f);
  write_json(dir / (stem + ".json"), field_sidecar(c, f, tilted));
  write_manifest(dir, stem, c);
  std::cout << Json{{"field", (dir / (stem + ".csv")).string()},
                    {"frames", f.frames()},
                    {"cells", f.cells},
                    {"min", f.min_value()},
                    {"max", f.max_value()},
                    {"max_mass_residual", f.max_mass_residual}}
                   .dump(2)
            << '\n';
  return kExitOk;
}

}  // namespace

void RunConfig::validate() const {
  params.validate();
  if (!(grid.horizon > 0.0)) {
    throw std::invalid_argument("horizon must be positive");
  }
  grid.validate();
  if (threads < 1) {
    throw std::invalid_argument("threads must be at least 1");
  }
  if (replicas < 1) {
    throw std::invalid_argument("replicas must be at least 1");
  }
  if (!window.empty() && (window.size() != 2 || !(window[0] < window[1]))) {
    throw std::invalid_argument("window must be two increasing times");
  }
}

int run_simulate(const RunConfig& c) {
  c.validate();
  SimConfig cfg;
  cfg.params = c.params;
  cfg.horizon = c.grid.horizon;
  cfg.seed = c.seed;
  cfg.replica_count = c.replicas;
  cfg.profile_boxes = c.boxes;
  cfg.threads = c.threads;
  const int snaps = static_cast<int>(std::floor(c.grid.horizon / c.snapshot_dt + 1e-9));
  for (int k = 0; k <= snaps; ++k) {
    cfg.snapshot_times.push_back(std::min(k * c.snapshot_dt, c.grid.horizon));
  }
  const TiltFunction tilt = parse_tilt(c.tilt);
  const ReplicaSummary s = run_replicas(cfg, parse_profile(c.profile, c.params), TiltSchedule::from(tilt));
  const fs::path dir(c.output_dir);
  const BoxLayout layout = BoxLayout::make(c.params.lattice_size(), cfg.boxes());
  write_profile_csv(dir / "profile.csv", s, layout, c.params.n_sites);
  Json summary{{"params", to_json(c.params)},
               {"profile", c.profile},
               {"tilt", c.tilt},
               {"horizon", c.grid.horizon},
               {"replicas", s.replicas},
               {"total_events", s.total_events},
               {"log_rn_mean", s.log_rn_mean},
               {"log_rn_stderr", s.log_rn_stderr},
               {"log_rn", s.log_rn}};
  write_json(dir / "simulation.json", summary);
  write_manifest(dir, "simulate", c);
  summary.erase("log_rn");
  std::cout << summary.dump(2) << '\n';
  return kExitOk;
}

int run_solve_pde(const RunConfig& c) {
  c.validate();
  return write_field(c, solve_hydro(c.params, c.grid, parse_profile(c.profile, c.params)), "hydro", false);
}

int run_solve_tilted(const RunConfig& c) {
  c.validate();
  const auto field = solve_tilted(c.params, c.grid, parse_profile(c.profile, c.params), parse_tilt(c.tilt));
  return write_field(c, field, "tilted", true);
}

int run_rate(const RunConfig& c) {
  if (c.trajectory.empty()) {
    throw std::invalid_argument("rate needs --trajectory");
  }
  ModelParams p = c.params;
  fs::path sidecar = fs::path(c.trajectory).replace_extension(".json");
  if (!c.params_given && fs::exists(sidecar)) {
    const Json j = read_json(sidecar);
    if (j.contains("params")) p = params_from_json(j["params"]);
  }
  p.validate();
  const DensityField field = read_field_csv(c.trajectory);
  std::optional<std::pair<double, double>> window;
  if (!c.window.empty()) {
    if (c.window.size() != 2 || !(c.window[0] < c.window[1])) {
      throw std::invalid_argument("window must be two increasing times");
    }
    window = std::make_pair(c.window[0], c.window[1]);
  }
  const TrajectoryData traj = TrajectoryData::from_field(p, field, window);

  std::vector<RateMethod> methods;
  if (c.method == "all") {
    methods = {RateMethod::variational, RateMethod::decomposition, RateMethod::smooth_decomposition,
               RateMethod::explicit_formula};
  } else {
    methods = {parse_rate_method(c.method)};
  }
  Json out{{"trajectory", c.trajectory}, {"params", to_json(p)}, {"energy_Q", energy_Q(traj)}};
  Json rates = Json::object();
  std::vector<double> totals;
  for (RateMethod m : methods) {
    RateBreakdown r;
    switch (m) {
      case RateMethod::variational: r = variational_rate(traj).rate; break;
      case RateMethod::decomposition: r = decomposition_rate(traj).rate; break;
      case RateMethod::smooth_decomposition: r = smooth_decomposition_rate(traj).rate; break;
      case RateMethod::explicit_formula: r = explicit_rate(traj).rate; break;
    }
    rates[to_string(m)] = to_json(r);
    totals.push_back(r.total);
  }
  out["rates"] = rates;
  int code = kExitOk;
  if (totals.size() > 1) {
    const double reference = totals.back();
    double worst = 0.0;
    for (std::size_t i = 0; i < totals.size(); ++i) {
      for (std::size_t j = i + 1; j < totals.size(); ++j) {
        worst = std::max(worst, std::abs(totals[i] - totals[j]) / std::abs(reference));
      }
    }
    const auto& spec = criterion_spec("consistency");
    const bool agree = std::isfinite(worst) && worst <= spec.threshold;
    out["max_relative_difference"] = std::isfinite(worst) ? Json(worst) : Json("inf");
    out["agree"] = agree;
    if (!agree && reference != 0.0) code = kExitCriteria;
  }
  const fs::path dir(c.output_dir);
  write_json(dir / "rates.json", out);
  std::cout << out.dump(2) << '\n';
  return code;
}

int run_entropy(const RunConfig& c) {
  c.validate();
  EntropyInputs in;
  in.reference.params = c.params;
  in.reference.profile = c.profile;
  in.reference.tilt = c.tilt;
  in.reference.horizon = c.grid.horizon;
  in.reference.frame_dt = c.grid.frame_dt;
  in.replicas = c.replicas;
  in.seed = c.seed;
  in.threads = c.threads;
  in.pde_cells = c.grid.cells;
  const fs::path dir = make_run_dir(c.output_dir, "entropy", c.seed);
  return finish_report(c, entropy_identity(in, dir), dir);
}

int run_converge(const RunConfig& c) {
  c.validate();
  HydroConvergenceInputs in;
  in.params = c.params;
  in.profile = c.profile;
  in.sizes = c.sizes;
  in.replicas = c.replicas;
  in.horizon = c.grid.horizon;
  in.seed = c.seed;
  in.threads = c.threads;
  in.boxes = c.boxes;
  in.pde_cells = c.grid.cells;
  in.snapshot_dt = c.snapshot_dt;
  const fs::path dir = make_run_dir(c.output_dir, "converge", c.seed);
  return finish_report(c, hydro_convergence(in, dir), dir);
}

int run_contract(const RunConfig& c) {
  c.validate();
  const fs::path dir = make_run_dir(c.output_dir, "contract", c.seed);
  return finish_report(c, contraction_check(c.params, c.profile, c.profile_b, c.grid.cells, c.grid.horizon, dir),
                       dir);
}

int run_equilibrium(const RunConfig& c) {
  if (c.sweep) {
    const fs::path dir = make_run_dir(c.output_dir, "equilibrium", c.seed);
    return finish_report(c, reversibility_sweep({2, 3, 4, 5}, {0.3, 0.5}, {-0.4, 0.0, 1.0}), dir);
  }
  ModelParams p = c.params;
  if (c.rho >= 0.0) {
    p.alpha = c.rho;
    p.beta = c.rho;
  }
  p.validate();
  const fs::path dir = make_run_dir(c.output_dir, "equilibrium", c.seed);
  const ExperimentReport report = equilibrium_check(p);
  std::cout << "stationarity residual " << report.metric("stationarity_residual") << '\n';
  return finish_report(c, report, dir);
}

}  // namespace gsep::cli
