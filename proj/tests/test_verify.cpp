#include <doctest.h>

#include <cmath>
#include <numbers>
#include <filesystem>
#include <set>

#include "gsep/sim.hpp"
#include "gsep/verify.hpp"

using namespace gsep;

TEST_CASE("criteria table has unique ids") {
  std::set<std::string> ids;
  for (const auto& c : criteria_table()) {
    CHECK(ids.insert(c.id).second);
    CHECK_FALSE(c.metric.empty());
  }
  CHECK(criterion_spec("hydro_error").threshold == 0.05);
  CHECK_THROWS_AS(criterion_spec("nonexistent"), std::out_of_range);
}

TEST_CASE("reports hold each metric once") {
  ExperimentReport r("demo", Json{{"seed", 3}});
  r.add_metric("max_clip", 1e-12);
  CHECK_THROWS_AS(r.add_metric("max_clip", 0.0), std::logic_error);
  CHECK_THROWS_AS(r.evaluate("interior_bound"), std::out_of_range);
  CHECK(r.evaluate("max_principle").passed);
  CHECK_THROWS_AS(r.evaluate("max_principle"), std::logic_error);
  r.add_metric("interior_margin", 0.0);
  CHECK_FALSE(r.evaluate("interior_bound").passed);
  CHECK_FALSE(r.passed());
  const Json j = r.to_json();
  CHECK(j["name"] == "demo");
  CHECK(j["criteria"].size() == 2);
  CHECK(j["inputs_digest"] == digest(Json{{"seed", 3}}));
  CHECK_FALSE(j.contains("runtime_seconds"));
}

TEST_CASE("gradient identity check") {
  const auto r = gradient_identity_check(5, 200);
  CHECK(r.passed());
  CHECK(r.metric("max_abs_difference") <= 1e-14);
}

TEST_CASE("equilibrium examples") {
  const auto walk = equilibrium_check(ModelParams{0.0, 0.5, 0.5, 2});
  CHECK(walk.metric("stationarity_residual") < 1e-14);
  CHECK(equilibrium_check(ModelParams{1.0, 0.3, 0.3, 4}).passed());
  const auto near = equilibrium_check(ModelParams{-0.4, 0.3, 0.3, 3});
  CHECK(near.passed());
  CHECK(near.metric("min_transition_rate") > 0.0);
  CHECK_THROWS_AS(equilibrium_check(ModelParams{0.0, 0.3, 0.4, 2}), ModelError);
}

TEST_CASE("contraction of identical profiles stays at zero distance") {
  const auto r = contraction_check(ModelParams{1.0, 0.2, 0.8, 2}, "constant:0.4", "constant:0.4", 32, 0.1);
  CHECK(r.metric("initial_distance") == 0.0);
  CHECK(r.metric("final_distance") == 0.0);
  CHECK(r.metric("max_step_increase") == 0.0);
}

TEST_CASE("contraction of extreme initial data") {
  const auto r = contraction_check(ModelParams{1.0, 0.2, 0.8, 2}, "constant:0", "constant:1", 64, 2.0);
  CHECK(r.metric("initial_distance") == doctest::Approx(2.0));
  CHECK(r.metric("max_step_increase") <= 1e-8);
  CHECK(r.metric("final_ratio") < 0.5);
  CHECK(r.metric("decay_rate") > 0.0);
  CHECK(std::isfinite(r.metric("squared_distance_integral")));
}

TEST_CASE("hydrodynamic convergence from equilibrium stays near zero") {
  HydroConvergenceInputs in;
  in.params = {0.0, 0.5, 0.5, 16};
  in.profile = "constant:0.5";
  in.sizes = {16, 32};
  in.replicas = 20;
  in.horizon = 0.2;
  in.boxes = 7;
  in.pde_cells = 64;
  const auto r = hydro_convergence(in);
  // Sites are independent Bernoulli(1/2), so each box mean has variance
  // 1 / (4 size replicas) and its expected absolute deviation is sqrt(2/pi) sd.
  for (int n : in.sizes) {
    const auto layout = BoxLayout::make(2 * n - 1, in.boxes);
    double expected = 0.0;
    for (int b = 0; b < layout.count(); ++b) {
      const double sd = 0.5 / std::sqrt(static_cast<double>(layout.size[b]) * in.replicas);
      expected += std::sqrt(2.0 / std::numbers::pi) * sd * layout.size[b] / n;
    }
    CAPTURE(n);
    CHECK(r.metric("error_n" + std::to_string(n)) < 2.0 * expected);
    CHECK(r.metric("error_n" + std::to_string(n)) > 0.25 * expected);
  }
  CHECK(r.has_metric("error_decreasing"));
  in.sizes = {32, 16};
  CHECK_THROWS(hydro_convergence(in));
}

TEST_CASE("reports are reproducible") {
  ReferenceProblem ref;
  const auto a = additivity_check(ref, 64);
  const auto b = additivity_check(ref, 64);
  CHECK(a.to_json() == b.to_json());
  CHECK(a.passed());
}

TEST_CASE("mass balance summary needs at least one run") {
  CHECK_FALSE(mass_balance_summary({}).passed());
  const auto m = max_principle_check(ModelParams{1.0, 0.2, 0.8, 2}, "compatible:0.2", Grid{64, 0.2, 0.02, 0.0});
  const auto s = mass_balance_summary({&m});
  CHECK(s.passed());
  CHECK(s.metric("runs") == 1.0);
}

TEST_CASE("run directories and report files") {
  const auto root = std::filesystem::temp_directory_path() / "gsep_verify_test";
  const auto dir = make_run_dir(root, "demo", 9);
  CHECK(dir.filename().string().rfind("demo-", 0) == 0);
  CHECK(dir.filename().string().ends_with("-s9"));
  const auto r = gradient_identity_check(1, 10);
  write_report(dir, r, 9);
  CHECK(read_json(dir / "report.json") == r.to_json());
  CHECK(read_json(dir / "manifest.json").contains("timestamp"));
  std::filesystem::remove_all(root);
}
