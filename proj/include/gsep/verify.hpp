#pragma once

// Experiments tying the modules together, each producing a report whose
// pass/fail verdicts come from one versioned criteria table.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gsep/io.hpp"
#include "gsep/model.hpp"
#include "gsep/pde.hpp"
#include "gsep/profile.hpp"

namespace gsep {

enum class Comparison { less, less_equal, greater, greater_equal, is_true };

struct CriterionSpec {
  std::string id;
  std::string metric;
  Comparison cmp;
  double threshold;
  std::string description;
};

inline constexpr const char* kCriteriaTableVersion = "1.0";

const std::vector<CriterionSpec>& criteria_table();
const CriterionSpec& criterion_spec(const std::string& id);

struct CriterionResult {
  std::string id;
  std::string metric;
  double value = 0.0;
  double threshold = 0.0;
  bool passed = false;
  std::string description;
};

class ExperimentReport {
 public:
  ExperimentReport() = default;
  ExperimentReport(std::string name, Json inputs);

  const std::string& name() const { return name_; }
  const std::string& inputs_digest() const { return digest_; }
  const Json& inputs() const { return inputs_; }

  // Each metric may be recorded once.
  void add_metric(const std::string& key, double value);
  double metric(const std::string& key) const;
  bool has_metric(const std::string& key) const;
  const std::vector<std::pair<std::string, double>>& metrics() const { return metrics_; }

  // Evaluates a table criterion against its recorded metric.
  const CriterionResult& evaluate(const std::string& criterion_id);
  const std::vector<CriterionResult>& criteria() const { return criteria_; }
  bool passed() const;

  double runtime_seconds = 0.0;

  // The report proper carries no timing, so reruns compare byte for byte.
  Json to_json() const;

 private:
  std::string name_;
  Json inputs_;
  std::string digest_;
  std::vector<std::pair<std::string, double>> metrics_;
  std::vector<CriterionResult> criteria_;
};

// Creates <root>/<name>-<timestamp>-s<seed>.
std::filesystem::path make_run_dir(const std::filesystem::path& root, const std::string& name,
                                   std::uint64_t seed);
// report.json plus manifest.json (version, timestamp, runtime, seed).
void write_report(const std::filesystem::path& dir, const ExperimentReport& report, std::uint64_t seed);

// The manufactured problem shared by the rate and entropy experiments.
struct ReferenceProblem {
  ModelParams params{1.0, 0.3, 0.7, 128};
  std::string profile = "compatible:0.2";
  std::string tilt = "ramped:1,0.1,0.1,1,0.5";
  double horizon = 0.5;
  double frame_dt = 0.01;
};

ExperimentReport gradient_identity_check(std::uint64_t seed, int random_configs = 1000);

ExperimentReport equilibrium_check(const ModelParams& p);
ExperimentReport reversibility_sweep(const std::vector<int>& sizes, const std::vector<double>& densities,
                                     const std::vector<double>& interactions);

struct HydroConvergenceInputs {
  ModelParams params{1.0, 0.2, 0.8, 64};
  std::string profile = "step:0.9,0.1";
  std::vector<int> sizes{64, 128, 256};
  int replicas = 100;
  double horizon = 0.5;
  std::uint64_t seed = 1;
  int threads = 1;
  int boxes = 31;
  int pde_cells = 1024;
  double snapshot_dt = 0.1;
};

ExperimentReport hydro_convergence(const HydroConvergenceInputs& in,
                                   const std::optional<std::filesystem::path>& run_dir = std::nullopt);

ExperimentReport zero_rate_check(const ModelParams& p, const std::string& profile, const Grid& grid);

ExperimentReport consistency_check(const ReferenceProblem& ref, int cells,
                                   const std::optional<std::filesystem::path>& run_dir = std::nullopt);

ExperimentReport additivity_check(const ReferenceProblem& ref, int cells);

struct EntropyInputs {
  ReferenceProblem reference;
  int replicas = 200;
  std::uint64_t seed = 1;
  int threads = 1;
  int pde_cells = 512;
};

ExperimentReport entropy_identity(const EntropyInputs& in,
                                  const std::optional<std::filesystem::path>& run_dir = std::nullopt);

ExperimentReport contraction_check(const ModelParams& p, const std::string& profile_a,
                                   const std::string& profile_b, int cells, double horizon,
                                   const std::optional<std::filesystem::path>& run_dir = std::nullopt);

ExperimentReport max_principle_check(const ModelParams& p, const std::string& profile, const Grid& grid);

// Worst per-step mass-balance residual over the PDE runs of other reports.
ExperimentReport mass_balance_summary(const std::vector<const ExperimentReport*>& reports);

}  // namespace gsep
