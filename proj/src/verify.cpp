#include "gsep/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "gsep/rate.hpp"
#include "gsep/sim.hpp"

namespace gsep {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

Json number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

const char* comparison_symbol(Comparison c) {
  switch (c) {
    case Comparison::less: return "<";
    case Comparison::less_equal: return "<=";
    case Comparison::greater: return ">";
    case Comparison::greater_equal: return ">=";
    case Comparison::is_true: return "true";
  }
  return "?";
}

bool compare(Comparison c, double value, double threshold) {
  switch (c) {
    case Comparison::less: return value < threshold;
    case Comparison::less_equal: return value <= threshold;
    case Comparison::greater: return value > threshold;
    case Comparison::greater_equal: return value >= threshold;
    case Comparison::is_true: return value != 0.0 && !std::isnan(value);
  }
  return false;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::ofstream open_csv(const std::filesystem::path& path) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write " + path.string());
  }
  return out;
}

Json rate_inputs(const ReferenceProblem& ref) {
  return Json{{"params", to_json(ref.params)},
              {"profile", ref.profile},
              {"tilt", ref.tilt},
              {"horizon", ref.horizon},
              {"frame_dt", ref.frame_dt}};
}

DensityField reference_trajectory(const ReferenceProblem& ref, int cells) {
  Grid grid{cells, ref.horizon, ref.frame_dt, 0.0};
  return solve_tilted(ref.params, grid, parse_profile(ref.profile, ref.params), parse_tilt(ref.tilt));
}

struct AllRates {
  RateBreakdown variational;
  RateBreakdown decomposition;
  RateBreakdown smooth;
  ExplicitResult explicit_result;
};

AllRates all_rates(const TrajectoryData& traj) {
  AllRates r;
  r.variational = variational_rate(traj).rate;
  r.decomposition = decomposition_rate(traj).rate;
  r.smooth = smooth_decomposition_rate(traj).rate;
  r.explicit_result = explicit_rate(traj);
  return r;
}

void add_generator_metrics(const ModelParams& p, double& residual, double& balance, double& min_rate) {
  const GeneratorMatrix q = build_generator_matrix(p);
  const int n = q.size();
  std::vector<double> nu(n);
  for (int s = 0; s < n; ++s) {
    nu[s] = product_measure_weight(p.n_sites, p.alpha, static_cast<std::uint64_t>(s));
  }
  for (int j = 0; j < n; ++j) {
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
      acc += nu[i] * q(i, j);
    }
    residual = std::max(residual, std::abs(acc));
  }
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      balance = std::max(balance, std::abs(nu[i] * q(i, j) - nu[j] * q(j, i)));
      if (q(i, j) != 0.0 || q(j, i) != 0.0) {
        min_rate = std::min({min_rate, q(i, j), q(j, i)});
      }
    }
  }
}

}  // namespace

const std::vector<CriterionSpec>& criteria_table() {
  static const std::vector<CriterionSpec> table = {
      {"gradient_identity", "max_abs_difference", Comparison::less_equal, 1e-14,
       "the two current formulas agree on every pattern"},
      {"stationarity", "stationarity_residual", Comparison::less, 1e-12,
       "the product measure is annihilated by the generator"},
      {"detailed_balance", "detailed_balance_defect", Comparison::less, 1e-12,
       "the product measure satisfies detailed balance pairwise"},
      {"positive_rates", "min_transition_rate", Comparison::greater, 0.0,
       "every allowed transition has a positive rate"},
      {"hydro_monotone", "error_decreasing", Comparison::is_true, 0.0,
       "replica-averaged L1 error decreases strictly in N"},
      {"hydro_error", "error_largest_n", Comparison::less, 0.05,
       "L1 error at the largest N"},
      {"zero_rate_total", "max_total", Comparison::less_equal, 1e-3,
       "all rate methods vanish on the hydrodynamic trajectory"},
      {"zero_rate_tilt", "explicit_h_sup", Comparison::less_equal, 1e-4,
       "the recovered tilt vanishes on the hydrodynamic trajectory"},
      {"consistency", "max_relative_difference", Comparison::less_equal, 0.01,
       "the four rate methods agree pairwise"},
      {"consistency_reference", "reference_total", Comparison::greater_equal, 0.01,
       "the reference rate is not negligible"},
      {"roundtrip", "roundtrip_error", Comparison::less_equal, 1e-4,
       "the elliptic solve recovers the driving tilt"},
      {"entropy_identity", "entropy_excess", Comparison::less_equal, 0.0,
       "gap between per-site relative entropy and rate within 2 stderr + 10%"},
      {"contraction_step", "max_step_increase", Comparison::less_equal, 1e-8,
       "the L1 distance never increases by more than the slack"},
      {"contraction_decay", "final_ratio", Comparison::less, 0.1,
       "final distance below 10% of the initial one"},
      {"max_principle", "max_clip", Comparison::less, 1e-10,
       "no step leaves [0,1] by more than round-off"},
      {"interior_bound", "interior_margin", Comparison::greater, 0.0,
       "min(u,1-u) is positive after the initial layer"},
      {"mass_balance", "max_mass_residual", Comparison::less, 1e-10,
       "per-step mass balance holds in every PDE run"},
      {"additivity", "additivity_relative_gap", Comparison::less_equal, 0.005,
       "the rate is additive over a split time window"},
  };
  return table;
}

const CriterionSpec& criterion_spec(const std::string& id) {
  for (const auto& c : criteria_table()) {
    if (c.id == id) return c;
  }
  throw std::out_of_range("unknown criterion " + id);
}

ExperimentReport::ExperimentReport(std::string name, Json inputs)
    : name_(std::move(name)), inputs_(std::move(inputs)), digest_(digest(inputs_)) {}

void ExperimentReport::add_metric(const std::string& key, double value) {
  if (has_metric(key)) {
    throw std::logic_error("metric " + key + " recorded twice in " + name_);
  }
  metrics_.emplace_back(key, value);
}

bool ExperimentReport::has_metric(const std::string& key) const {
  return std::any_of(metrics_.begin(), metrics_.end(), [&](const auto& m) { return m.first == key; });
}

double ExperimentReport::metric(const std::string& key) const {
  for (const auto& [k, v] : metrics_) {
    if (k == key) return v;
  }
  throw std::out_of_range("metric " + key + " missing from " + name_);
}

const CriterionResult& ExperimentReport::evaluate(const std::string& criterion_id) {
  const CriterionSpec& spec = criterion_spec(criterion_id);
  for (const auto& c : criteria_) {
    if (c.id == criterion_id) {
      throw std::logic_error("criterion " + criterion_id + " evaluated twice in " + name_);
    }
  }
  CriterionResult r;
  r.id = spec.id;
  r.metric = spec.metric;
  r.value = metric(spec.metric);
  r.threshold = spec.threshold;
  r.passed = compare(spec.cmp, r.value, spec.threshold);
  r.description = spec.description;
  criteria_.push_back(r);
  return criteria_.back();
}

bool ExperimentReport::passed() const {
  return std::all_of(criteria_.begin(), criteria_.end(), [](const auto& c) { return c.passed; });
}

Json ExperimentReport::to_json() const {
  Json metrics = Json::object();
  for (const auto& [k, v] : metrics_) {
    metrics[k] = number(v);
  }
  Json criteria = Json::array();
  for (const auto& c : criteria_) {
    const auto& spec = criterion_spec(c.id);
    criteria.push_back(Json{{"id", c.id},
                            {"metric", c.metric},
                            {"value", number(c.value)},
                            {"comparison", comparison_symbol(spec.cmp)},
                            {"threshold", c.threshold},
                            {"passed", c.passed}});
  }
  return Json{{"name", name_},
              {"criteria_table_version", kCriteriaTableVersion},
              {"inputs_digest", digest_},
              {"inputs", inputs_},
              {"metrics", metrics},
              {"criteria", criteria},
              {"passed", passed()}};
}

std::filesystem::path make_run_dir(const std::filesystem::path& root, const std::string& name,
                                   std::uint64_t seed) {
  auto dir = root / (name + "-" + timestamp_utc() + "-s" + std::to_string(seed));
  std::filesystem::create_directories(dir);
  return dir;
}

void write_report(const std::filesystem::path& dir, const ExperimentReport& report, std::uint64_t seed) {
  write_json(dir / "report.json", report.to_json());
  write_json(dir / "manifest.json", Json{{"name", report.name()},
                                         {"version", version_string()},
                                         {"timestamp", timestamp_utc()},
                                         {"runtime_seconds", report.runtime_seconds},
                                         {"seed", seed},
                                         {"inputs_digest", report.inputs_digest()}});
}

ExperimentReport gradient_identity_check(std::uint64_t seed, int random_configs) {
  const auto start = Clock::now();
  const std::vector<double> interactions{-0.4, 0.0, 0.37, 1.0};
  ExperimentReport report("gradient_identity",
                          Json{{"seed", seed}, {"random_configs", random_configs}, {"interactions", interactions}});
  double worst = 0.0;
  long checked = 0;
  for (double a : interactions) {
    // Every occupancy of the four sites around the bond (-1,0) on a 5-site lattice.
    ModelParams local{a, 0.5, 0.5, 3};
    for (int code = 0; code < 32; ++code) {
      const Config eta = Config::from_code(3, static_cast<std::uint64_t>(code));
      worst = std::max(worst, std::abs(instantaneous_current(local, eta, -1) - gradient_form_current(local, eta, -1)));
      worst = std::max(worst, std::abs(instantaneous_current(local, eta, 0) - gradient_form_current(local, eta, 0)));
      checked += 2;
    }
    ModelParams global{a, 0.3, 0.7, 64};
    Rng rng(replica_seed(seed, static_cast<std::uint64_t>(checked)));
    for (int c = 0; c < random_configs / static_cast<int>(interactions.size()) + 1; ++c) {
      Config eta(global.n_sites);
      for (int i = 0; i < eta.size(); ++i) {
        eta.set_index(i, rng.uniform() < 0.5 ? 1 : 0);
      }
      for (int x = global.first_site() + 1; x <= global.last_site() - 2; ++x) {
        worst = std::max(worst, std::abs(instantaneous_current(global, eta, x) - gradient_form_current(global, eta, x)));
        ++checked;
      }
    }
  }
  report.add_metric("max_abs_difference", worst);
  report.add_metric("bonds_checked", static_cast<double>(checked));
  report.evaluate("gradient_identity");
  report.runtime_seconds = seconds_since(start);
  return report;
}

ExperimentReport equilibrium_check(const ModelParams& p) {
  if (p.alpha != p.beta) {
    throw ModelError("equilibrium check needs equal reservoir densities");
  }
  const auto start = Clock::now();
  ExperimentReport report("equilibrium", Json{{"params", to_json(p)}});
  double residual = 0.0;
  double balance = 0.0;
  double min_rate = std::numeric_limits<double>::infinity();
  add_generator_metrics(p, residual, balance, min_rate);
  report.add_metric("stationarity_residual", residual);
  report.add_metric("detailed_balance_defect", balance);
  report.add_metric("min_transition_rate", min_rate);
  report.evaluate("stationarity");
  report.evaluate("detailed_balance");
  report.evaluate("positive_rates");
  report.runtime_seconds = seconds_since(start);
  return report;
}

ExperimentReport reversibility_sweep(const std::vector<int>& sizes, const std::vector<double>& densities,
                                     const std::vector<double>& interactions) {
  const auto start = Clock::now();
  ExperimentReport report("reversibility_sweep",
                          Json{{"sizes", sizes}, {"densities", densities}, {"interactions", interactions}});
  double residual = 0.0;
  double balance = 0.0;
  double min_rate = std::numeric_limits<double>::infinity();
  int cases = 0;
  for (int n : sizes) {
    for (double c : densities) {
      for (double a : interactions) {
        add_generator_metrics(ModelParams{a, c, c, n}, residual, balance, min_rate);
        ++cases;
      }
    }
  }
  report.add_metric("stationarity_residual", residual);
  report.add_metric("detailed_balance_defect", balance);
  report.add_metric("min_transition_rate", min_rate);
  report.add_metric("cases", cases);
  report.evaluate("stationarity");
  report.evaluate("detailed_balance");
  report.evaluate("positive_rates");
  report.runtime_seconds = seconds_since(start);
  return report;
}

ExperimentReport hydro_convergence(const HydroConvergenceInputs& in,
                                   const std::optional<std::filesystem::path>& run_dir) {
  if (in.sizes.empty() || !std::is_sorted(in.sizes.begin(), in.sizes.end()) ||
      std::adjacent_find(in.sizes.begin(), in.sizes.end()) != in.sizes.end()) {
    throw std::invalid_argument("lattice sizes must be strictly increasing");
  }
  const auto start = Clock::now();
  ExperimentReport report("hydro_convergence", Json{{"params", to_json(in.params)},
                                                    {"profile", in.profile},
                                                    {"sizes", in.sizes},
                                                    {"replicas", in.replicas},
                                                    {"horizon", in.horizon},
                                                    {"seed", in.seed},
                                                    {"boxes", in.boxes},
                                                    {"pde_cells", in.pde_cells},
                                                    {"snapshot_dt", in.snapshot_dt}});
  const Profile rho0 = parse_profile(in.profile, in.params);
  Grid grid{in.pde_cells, in.horizon, in.snapshot_dt, 0.0};
  const DensityField pde = solve_hydro(in.params, grid, rho0);
  const double dx = pde.dx();

  // Exact integral of the piecewise-constant PDE field over [lo, hi].
  const auto pde_mean = [&](int k, double lo, double hi) {
    double s = 0.0;
    const int i0 = std::max(0, static_cast<int>(std::floor((lo + 1.0) / dx)));
    const int i1 = std::min(pde.cells - 1, static_cast<int>(std::floor((hi + 1.0) / dx)));
    for (int i = i0; i <= i1; ++i) {
      const double a = std::max(lo, -1.0 + i * dx);
      const double b = std::min(hi, -1.0 + (i + 1) * dx);
      if (b > a) s += pde.at(k, i) * (b - a);
    }
    return s / (hi - lo);
  };

  std::optional<std::ofstream> errors_csv;
  if (run_dir) {
    errors_csv = open_csv(*run_dir / "errors.csv");
    *errors_csv << "n,t,l1_error\n";
  }
  std::vector<double> errors;
  for (std::size_t idx = 0; idx < in.sizes.size(); ++idx) {
    const int n = in.sizes[idx];
    SimConfig cfg;
    cfg.params = in.params;
    cfg.params.n_sites = n;
    cfg.horizon = in.horizon;
    cfg.seed = replica_seed(in.seed, static_cast<std::uint64_t>(n));
    cfg.replica_count = in.replicas;
    cfg.profile_boxes = in.boxes;
    cfg.threads = in.threads;
    for (int k = 0; k < pde.frames(); ++k) {
      cfg.snapshot_times.push_back(pde.times[k]);
    }
    const ReplicaSummary summary = run_replicas(cfg, rho0, TiltSchedule{});
    const BoxLayout layout = BoxLayout::make(cfg.params.lattice_size(), cfg.boxes());
    double total = 0.0;
    int counted = 0;
    for (int k = 0; k < pde.frames(); ++k) {
      double err = 0.0;
      for (int b = 0; b < layout.count(); ++b) {
        const auto [lo, hi] = layout.interval(b, n);
        err += std::abs(summary.mean[k][b] - pde_mean(k, lo, hi)) * (hi - lo);
      }
      if (errors_csv) {
        *errors_csv << n << ',' << fmt(pde.times[k]) << ',' << fmt(err) << '\n';
      }
      if (k == 0) {
        report.add_metric("initial_error_n" + std::to_string(n), err);
      } else {
        total += err;
        ++counted;
      }
    }
    const double e = total / counted;
    errors.push_back(e);
    report.add_metric("error_n" + std::to_string(n), e);
    report.add_metric("events_n" + std::to_string(n), static_cast<double>(summary.total_events));
    if (run_dir) {
      write_profile_csv(*run_dir / ("profile_n" + std::to_string(n) + ".csv"), summary, layout, n);
    }
  }
  bool decreasing = true;
  for (std::size_t i = 1; i < errors.size(); ++i) {
    decreasing = decreasing && errors[i] < errors[i - 1];
  }
  report.add_metric("error_decreasing", decreasing ? 1.0 : 0.0);
  report.add_metric("error_largest_n", errors.back());
  report.add_metric("max_mass_residual", pde.max_mass_residual);
  report.evaluate("hydro_monotone");
  report.evaluate("hydro_error");
  if (run_dir) {
    write_field_csv(*run_dir / "hydro.csv", pde);
  }
  report.runtime_seconds = seconds_since(start);
  return report;
}

ExperimentReport zero_rate_check(const ModelParams& p, const std::string& profile, const Grid& grid) {
  const auto start = Clock::now();
  ExperimentReport report("zero_rate", Json{{"params", to_json(p)}, {"profile", profile}, {"grid", to_json(grid)}});
  const DensityField field = solve_hydro(p, grid, parse_profile(profile, p));
  const TrajectoryData traj = TrajectoryData::from_field(p, field);
  const AllRates r = all_rates(traj);
  report.add_metric("total_variational", r.variational.total);
  report.add_metric("total_decomposition", r.decomposition.total);
  report.add_metric("total_smooth_decomposition", r.smooth.total);
  report.add_metric("total_explicit", r.explicit_result.rate.total);
  report.add_metric("max_total", std::max({std::abs(r.variational.total), std::abs(r.decomposition.total),
                                           std::abs(r.smooth.total), std::abs(r.explicit_result.rate.total)}));
  report.add_metric("explicit_h_sup", r.explicit_result.h.max_abs());
  report.add_metric("max_mass_residual", field.max_mass_residual);
  report.evaluate("zero_rate_total");
  report.evaluate("zero_rate_tilt");
  report.runtime_seconds = seconds_since(start);
  return report;
}

ExperimentReport consistency_check(const ReferenceProblem& ref, int cells,
                                   const std::optional<std::filesystem::path>& run_dir) {
  const auto start = Clock::now();
  Json inputs = rate_inputs(ref);
  inputs["cells"] = cells;
  ExperimentReport report("consistency", inputs);
  const DensityField field = reference_trajectory(ref, cells);
  const TrajectoryData traj = TrajectoryData::from_field(ref.params, field);
  const AllRates r = all_rates(traj);
  const double reference = r.explicit_result.rate.total;
  const std::vector<double> totals{r.variational.total, r.decomposition.total, r.smooth.total, reference};
  double worst = 0.0;
  for (std::size_t i = 0; i < totals.size(); ++i) {
    for (std::size_t j = i + 1; j < totals.size(); ++j) {
      worst = std::max(worst, std::abs(totals[i] - totals[j]) / std::abs(reference));
    }
  }
  const TiltField exact = TiltField::sample(parse_tilt(ref.tilt), cells, field.times);
  const TiltField& recovered = r.explicit_result.h;
  double roundtrip = 0.0;
  double trace_error = 0.0;
  for (int k = 0; k < exact.frames(); ++k) {
    for (int i = 0; i < cells; ++i) {
      roundtrip = std::max(roundtrip, std::abs(recovered.at(k, i) - exact.at(k, i)));
    }
    trace_error = std::max({trace_error, std::abs(recovered.left[k] - exact.left[k]),
                            std::abs(recovered.right[k] - exact.right[k])});
  }
  report.add_metric("total_variational", r.variational.total);
  report.add_metric("total_decomposition", r.decomposition.total);
  report.add_metric("total_smooth_decomposition", r.smooth.total);
  report.add_metric("reference_total", reference);
  report.add_metric("max_relative_difference", worst);
  report.add_metric("roundtrip_error", roundtrip);
  report.add_metric("roundtrip_trace_error", trace_error);
  report.add_metric("interior_margin", traj.interior_margin());
  report.add_metric("max_mass_residual", field.max_mass_residual);
  report.evaluate("consistency");
  report.evaluate("consistency_reference");
  report.evaluate("roundtrip");
  if (run_dir) {
    write_field_csv(*run_dir / "tilted.csv", field);
    write_json(*run_dir / "rates.json", Json{{"variational", to_json(r.variational)},
                                             {"decomposition", to_json(r.decomposition)},
                                             {"smooth_decomposition", to_json(r.smooth)},
                                             {"explicit", to_json(r.explicit_result.rate)}});
  }
  report.runtime_seconds = seconds_since(start);
  return report;
}

ExperimentReport additivity_check(const ReferenceProblem& ref, int cells) {
  const auto start = Clock::now();
  Json inputs = rate_inputs(ref);
  inputs["cells"] = cells;
  ExperimentReport report("additivity", inputs);
  const DensityField field = reference_trajectory(ref, cells);
  const TrajectoryData traj = TrajectoryData::from_field(ref.params, field);
  const double mid = 0.5 * ref.horizon;
  const double whole = explicit_rate(traj).rate.total;
  const double first = explicit_rate(traj.restricted(0.0, mid)).rate.total;
  const double second = explicit_rate(traj.restricted(mid, ref.horizon)).rate.total;
  report.add_metric("total_whole", whole);
  report.add_metric("total_first_half", first);
  report.add_metric("total_second_half", second);
  report.add_metric("additivity_relative_gap", std::abs(whole - first - second) / std::abs(whole));
  report.add_metric("max_mass_residual", field.max_mass_residual);
  report.evaluate("additivity");
  report.runtime_seconds = seconds_since(start);
  return report;
}

ExperimentReport entropy_identity(const EntropyInputs& in, const std::optional<std::filesystem::path>& run_dir) {
  const auto start = Clock::now();
  const ReferenceProblem& ref = in.reference;
  Json inputs = rate_inputs(ref);
  inputs["replicas"] = in.replicas;
  inputs["seed"] = in.seed;
  inputs["pde_cells"] = in.pde_cells;
  ExperimentReport report("entropy_identity", inputs);
  const TiltFunction tilt = parse_tilt(ref.tilt);

  SimConfig cfg;
  cfg.params = ref.params;
  cfg.horizon = ref.horizon;
  cfg.seed = in.seed;
  cfg.replica_count = in.replicas;
  cfg.profile_boxes = 1;
  cfg.threads = in.threads;
  const ReplicaSummary summary =
      run_replicas(cfg, parse_profile(ref.profile, ref.params), TiltSchedule::from(tilt));
  const double n = ref.params.n_sites;
  const double mean = summary.log_rn_mean / n;
  const double se = summary.log_rn_stderr / n;

  const DensityField field = reference_trajectory(ref, in.pde_cells);
  const double rate = explicit_rate(TrajectoryData::from_field(ref.params, field)).rate.total;
  const double gap = std::abs(mean - rate);
  const double allowance = 2.0 * se + 0.1 * rate;
  report.add_metric("mean_log_rn_per_site", mean);
  report.add_metric("stderr_per_site", se);
  report.add_metric("explicit_total", rate);
  report.add_metric("gap", gap);
  report.add_metric("relative_gap", gap / rate);
  report.add_metric("allowance", allowance);
  report.add_metric("entropy_excess", gap - allowance);
  report.add_metric("total_events", static_cast<double>(summary.total_events));
  report.add_metric("max_mass_residual", field.max_mass_residual);
  report.evaluate("entropy_identity");
  if (run_dir) {
    auto out = open_csv(*run_dir / "log_rn.csv");
    out << "replica,log_rn\n";
    for (std::size_t r = 0; r < summary.log_rn.size(); ++r) {
      out << r << ',' << fmt(summary.log_rn[r]) << '\n';
    }
  }
  report.runtime_seconds = seconds_since(start);
  return report;
}

ExperimentReport contraction_check(const ModelParams& p, const std::string& profile_a,
                                   const std::string& profile_b, int cells, double horizon,
                                   const std::optional<std::filesystem::path>& run_dir) {
  if (!(horizon > 0.0)) {
    throw std::invalid_argument("horizon must be positive");
  }
  const auto start = Clock::now();
  ExperimentReport report("contraction", Json{{"params", to_json(p)},
                                              {"profile_a", profile_a},
                                              {"profile_b", profile_b},
                                              {"cells", cells},
                                              {"horizon", horizon}});
  auto ua = cell_averages(parse_profile(profile_a, p), cells);
  auto ub = cell_averages(parse_profile(profile_b, p), cells);
  const double dt_max = HydroStepper(p, ua).dt();
  const long steps = static_cast<long>(std::ceil(horizon / dt_max));
  const double dt = horizon / static_cast<double>(steps);
  HydroStepper a(p, std::move(ua), dt);
  HydroStepper b(p, std::move(ub), dt);
  const double dx = 2.0 / cells;
  const auto distance = [&] {
    double s = 0.0;
    const auto x = a.state();
    const auto y = b.state();
    for (int i = 0; i < cells; ++i) s += std::abs(x[i] - y[i]);
    return s * dx;
  };

  std::optional<std::ofstream> csv;
  if (run_dir) {
    csv = open_csv(*run_dir / "distance.csv");
    *csv << "t,l1_distance\n";
  }
  const long record_every = std::max(1L, steps / 1000);
  const double initial = distance();
  double previous = initial;
  double max_increase = 0.0;
  double squared_integral = 0.0;
  const long tail_start = steps - steps / 5;
  double tail_distance = initial;
  if (csv) *csv << fmt(0.0) << ',' << fmt(initial) << '\n';
  for (long s = 1; s <= steps; ++s) {
    a.step();
    b.step();
    const double d = distance();
    max_increase = std::max(max_increase, d - previous);
    squared_integral += 0.5 * dt * (previous * previous + d * d);
    previous = d;
    if (s == tail_start) tail_distance = d;
    if (csv && (s % record_every == 0 || s == steps)) *csv << fmt(s * dt) << ',' << fmt(d) << '\n';
  }
  const double final_distance = previous;
  // Exponential tail fitted on the last fifth of the run.
  double decay = 0.0;
  double tail = 0.0;
  if (final_distance > 0.0 && tail_distance > final_distance) {
    decay = std::log(tail_distance / final_distance) / ((steps - tail_start) * dt);
    tail = final_distance * final_distance / (2.0 * decay);
  } else if (final_distance > 0.0) {
    tail = std::numeric_limits<double>::infinity();
  }
  report.add_metric("initial_distance", initial);
  report.add_metric("final_distance", final_distance);
  report.add_metric("final_ratio", initial > 0.0 ? final_distance / initial : 0.0);
  report.add_metric("max_step_increase", max_increase);
  report.add_metric("decay_rate", decay);
  report.add_metric("squared_distance_integral_truncated", squared_integral);
  report.add_metric("squared_distance_integral", squared_integral + tail);
  report.add_metric("steps", static_cast<double>(steps));
  report.add_metric("max_mass_residual",
                    std::max(a.diagnostics().max_mass_residual, b.diagnostics().max_mass_residual));
  report.evaluate("contraction_step");
  report.evaluate("contraction_decay");
  report.runtime_seconds = seconds_since(start);
  return report;
}

ExperimentReport max_principle_check(const ModelParams& p, const std::string& profile, const Grid& grid) {
  const auto start = Clock::now();
  ExperimentReport report("max_principle",
                          Json{{"params", to_json(p)}, {"profile", profile}, {"grid", to_json(grid)}});
  const DensityField field = solve_hydro(p, grid, parse_profile(profile, p));
  double margin = std::numeric_limits<double>::infinity();
  for (int k = 0; k < field.frames(); ++k) {
    if (field.times[k] < 0.05 * grid.horizon - 1e-12) continue;
    for (double v : field.frame(k)) {
      margin = std::min(margin, std::min(v, 1.0 - v));
    }
  }
  report.add_metric("max_clip", field.max_clip);
  report.add_metric("interior_margin", margin);
  report.add_metric("min_value", field.min_value());
  report.add_metric("max_value", field.max_value());
  report.add_metric("max_mass_residual", field.max_mass_residual);
  report.evaluate("max_principle");
  report.evaluate("interior_bound");
  report.runtime_seconds = seconds_since(start);
  return report;
}

ExperimentReport mass_balance_summary(const std::vector<const ExperimentReport*>& reports) {
  Json sources = Json::array();
  double worst = 0.0;
  int runs = 0;
  for (const auto* r : reports) {
    if (r != nullptr && r->has_metric("max_mass_residual")) {
      sources.push_back(r->name());
      worst = std::max(worst, r->metric("max_mass_residual"));
      ++runs;
    }
  }
  ExperimentReport report("mass_balance", Json{{"sources", sources}});
  report.add_metric("max_mass_residual", runs > 0 ? worst : std::numeric_limits<double>::quiet_NaN());
  report.add_metric("runs", runs);
  report.evaluate("mass_balance");
  return report;
}

}  // namespace gsep
