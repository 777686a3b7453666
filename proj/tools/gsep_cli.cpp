#include <functional>
#include <iostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "commands.hpp"
#include "gsep/io.hpp"

namespace {

using gsep::cli::RunConfig;

struct Subcommand {
  CLI::App* app;
  RunConfig config;
  std::function<int(const RunConfig&)> run;
  std::vector<CLI::Option*> model_options;
};

void add_common(Subcommand& s) {
  RunConfig& c = s.config;
  CLI::App* app = s.app;
  s.model_options = {
      app->add_option("--a", c.params.a, "interaction strength (> -1/2)")->capture_default_str(),
      app->add_option("--alpha", c.params.alpha, "left reservoir density")->capture_default_str(),
      app->add_option("--beta", c.params.beta, "right reservoir density")->capture_default_str(),
      app->add_option("--n", c.params.n_sites, "scale N (lattice of 2N-1 sites)")->capture_default_str(),
  };
  app->add_option("--output-dir", c.output_dir, "artifact root")->capture_default_str();
  app->add_option("--seed", c.seed, "master seed")->capture_default_str();
  app->add_option("--threads", c.threads, "worker threads")->capture_default_str();
}

void add_grid(Subcommand& s) {
  RunConfig& c = s.config;
  s.app->add_option("--cells", c.grid.cells, "PDE cells")->capture_default_str();
  s.app->add_option("--horizon", c.grid.horizon, "time horizon T")->capture_default_str();
  s.app->add_option("--frame-dt", c.grid.frame_dt, "spacing of stored frames")->capture_default_str();
  s.app->add_option("--dt", c.grid.dt, "time step (0 picks the stable one)")->capture_default_str();
}

void add_profile(Subcommand& s) {
  s.app->add_option("--profile", s.config.profile, "initial profile spec")->capture_default_str();
}

void add_tilt(Subcommand& s) {
  s.app->add_option("--tilt", s.config.tilt, "tilt spec: zero, ramped:amp,t0,ramp,slope,bend, linear:amp")
      ->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Boundary-driven gradient exclusion process: simulation, PDE solvers and rate functionals"};
  app.set_version_flag("--version", gsep::version_string());
  app.set_config("--config", "", "TOML configuration file; flags override its values");
  app.require_subcommand(1);

  std::vector<Subcommand> subs;
  subs.reserve(8);
  const auto make = [&](const std::string& name, const std::string& help, auto run) -> Subcommand& {
    subs.push_back(Subcommand{app.add_subcommand(name, help), RunConfig{}, run, {}});
    return subs.back();
  };

  {
    auto& s = make("simulate", "simulate replicas of the particle system", gsep::cli::run_simulate);
    s.config.grid.horizon = 0.5;
    add_common(s);
    add_profile(s);
    add_tilt(s);
    s.app->add_option("--horizon", s.config.grid.horizon, "time horizon T")->capture_default_str();
    s.app->add_option("--replicas", s.config.replicas, "independent replicas")->capture_default_str();
    s.app->add_option("--boxes", s.config.boxes, "box count of stored profiles (0 = every site)")
        ->capture_default_str();
    s.app->add_option("--snapshot-dt", s.config.snapshot_dt, "spacing of stored profiles")->capture_default_str();
  }
  {
    auto& s = make("solve-pde", "solve the hydrodynamic equation", gsep::cli::run_solve_pde);
    add_common(s);
    add_grid(s);
    add_profile(s);
  }
  {
    auto& s = make("solve-tilted", "solve the tilted hydrodynamic equation", gsep::cli::run_solve_tilted);
    s.config.params = {1.0, 0.3, 0.7, 64};
    s.config.profile = "compatible:0.2";
    s.config.tilt = "ramped:1,0.1,0.1,1,0.5";
    s.config.grid = {512, 0.5, 0.01, 0.0};
    add_common(s);
    add_grid(s);
    add_profile(s);
    add_tilt(s);
  }
  {
    auto& s = make("rate", "rate functional of a stored trajectory", gsep::cli::run_rate);
    add_common(s);
    s.app->add_option("--trajectory", s.config.trajectory, "trajectory CSV (t,x,u)")->required();
    s.app->add_option("--method", s.config.method, "all, variational, decomposition, smooth, explicit")
        ->capture_default_str()
        ->check(CLI::IsMember({"all", "variational", "decomposition", "smooth", "smooth_decomposition",
                               "explicit"}));
    s.app->add_option("--window", s.config.window, "evaluation window: start end")->expected(2);
  }
  {
    auto& s = make("entropy", "relative entropy of tilted paths against the rate", gsep::cli::run_entropy);
    s.config.params = {1.0, 0.3, 0.7, 128};
    s.config.profile = "compatible:0.2";
    s.config.tilt = "ramped:1,0.1,0.1,1,0.5";
    s.config.grid = {512, 0.5, 0.01, 0.0};
    s.config.replicas = 200;
    add_common(s);
    add_grid(s);
    add_profile(s);
    add_tilt(s);
    s.app->add_option("--replicas", s.config.replicas, "independent replicas")->capture_default_str();
  }
  {
    auto& s = make("converge", "hydrodynamic convergence of replica averages", gsep::cli::run_converge);
    s.config.params = {1.0, 0.2, 0.8, 64};
    s.config.profile = "step:0.9,0.1";
    s.config.grid = {1024, 0.5, 0.1, 0.0};
    s.config.sizes = {64, 128, 256};
    s.config.replicas = 100;
    s.config.boxes = 31;
    add_common(s);
    add_profile(s);
    s.app->add_option("--sizes", s.config.sizes, "increasing list of N")->capture_default_str();
    s.app->add_option("--replicas", s.config.replicas, "replicas per N")->capture_default_str();
    s.app->add_option("--horizon", s.config.grid.horizon, "time horizon T")->capture_default_str();
    s.app->add_option("--boxes", s.config.boxes, "boxes of the profile comparison")->capture_default_str();
    s.app->add_option("--cells", s.config.grid.cells, "PDE cells")->capture_default_str();
    s.app->add_option("--snapshot-dt", s.config.snapshot_dt, "spacing of compared times")->capture_default_str();
  }
  {
    auto& s = make("contract", "L1 contraction of two hydrodynamic solutions", gsep::cli::run_contract);
    s.config.params = {1.0, 0.2, 0.8, 64};
    s.config.profile = "constant:0";
    s.config.profile_b = "constant:1";
    s.config.grid = {200, 5.0, 0.01, 0.0};
    add_common(s);
    s.app->add_option("--profile-a", s.config.profile, "first initial profile")->capture_default_str();
    s.app->add_option("--profile-b", s.config.profile_b, "second initial profile")->capture_default_str();
    s.app->add_option("--cells", s.config.grid.cells, "PDE cells")->capture_default_str();
    s.app->add_option("--horizon", s.config.grid.horizon, "time horizon T")->capture_default_str();
  }
  {
    auto& s = make("equilibrium", "reversibility of the product measure", gsep::cli::run_equilibrium);
    s.config.params.n_sites = 3;
    add_common(s);
    s.app->add_option("--rho", s.config.rho, "common reservoir density");
    s.app->add_flag("--sweep", s.config.sweep, "run the full grid of sizes, densities and interactions");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? gsep::cli::kExitOk : gsep::cli::kExitUsage;
  }

  for (auto& s : subs) {
    if (!s.app->parsed()) continue;
    for (auto* opt : s.model_options) {
      s.config.params_given = s.config.params_given || opt->count() > 0;
    }
    try {
      return s.run(s.config);
    } catch (const std::invalid_argument& e) {
      std::cerr << "error: " << e.what() << '\n';
      return gsep::cli::kExitUsage;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << '\n';
      return gsep::cli::kExitCriteria;
    }
  }
  return gsep::cli::kExitUsage;
}
