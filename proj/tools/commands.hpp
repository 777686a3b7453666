#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gsep/model.hpp"
#include "gsep/pde.hpp"

namespace gsep::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitCriteria = 1;
inline constexpr int kExitUsage = 2;

// Options shared by every subcommand plus the subcommand-specific ones.
// Each subcommand owns one instance with its own defaults.
struct RunConfig {
  ModelParams params{0.0, 0.5, 0.5, 64};
  std::string output_dir = "run";
  std::uint64_t seed = 1;
  int threads = 1;

  Grid grid{256, 1.0, 0.01, 0.0};
  std::string profile = "stationary";
  std::string profile_b = "constant:1";
  std::string tilt = "zero";
  int replicas = 1;
  int boxes = 0;
  double snapshot_dt = 0.1;
  std::vector<int> sizes;
  double rho = -1.0;
  bool sweep = false;
  std::string trajectory;
  std::string method = "all";
  std::vector<double> window;
  bool params_given = false;  // model flags set explicitly

  // Throws std::invalid_argument on an invalid configuration.
  void validate() const;
};

int run_simulate(const RunConfig& c);
int run_solve_pde(const RunConfig& c);
int run_solve_tilted(const RunConfig& c);
int run_rate(const RunConfig& c);
int run_entropy(const RunConfig& c);
int run_converge(const RunConfig& c);
int run_contract(const RunConfig& c);
int run_equilibrium(const RunConfig& c);

}  // namespace gsep::cli
