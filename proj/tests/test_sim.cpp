#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

#include "gsep/sim.hpp"

using namespace gsep;

namespace {

// Rates of the time-homogeneous tilted chain with tilt g(x) on a small
// lattice, built directly from the move definitions.
std::vector<std::vector<double>> tilted_rates(const ModelParams& p, const std::function<double(double)>& g) {
  const int n = p.n_sites;
  const int states = 1 << p.lattice_size();
  std::vector<std::vector<double>> q(states, std::vector<double>(states, 0.0));
  for (int s = 0; s < states; ++s) {
    const Config eta = Config::from_code(n, static_cast<std::uint64_t>(s));
    for (int x = p.first_site(); x < p.last_site(); ++x) {
      if (eta(x) == eta(x + 1)) continue;
      const double tilt = (eta(x) - eta(x + 1)) * (g((x + 1.0) / n) - g(static_cast<double>(x) / n));
      q[s][apply_exchange(eta, x).code()] += n * n * bulk_exchange_rate(p, eta, x) * std::exp(tilt);
    }
    const auto [rl, rr] = boundary_flip_rates(p, eta);
    const int xl = p.first_site();
    const int xr = p.last_site();
    q[s][apply_flip(eta, xl).code()] += n * rl * std::exp((1 - 2 * eta(xl)) * g(static_cast<double>(xl) / n));
    q[s][apply_flip(eta, xr).code()] += n * rr * std::exp((1 - 2 * eta(xr)) * g(static_cast<double>(xr) / n));
  }
  return q;
}

std::vector<double> stationary_distribution(const std::vector<std::vector<double>>& q) {
  const std::size_t n = q.size();
  double lambda = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double out = 0.0;
    for (std::size_t j = 0; j < n; ++j) out += q[i][j];
    lambda = std::max(lambda, out);
  }
  lambda *= 1.1;
  std::vector<double> pi(n, 1.0 / n);
  std::vector<double> next(n);
  for (int it = 0; it < 20000; ++it) {
    for (std::size_t j = 0; j < n; ++j) {
      double out = 0.0;
      for (std::size_t k = 0; k < n; ++k) out += q[j][k];
      next[j] = pi[j] * (1.0 - out / lambda);
    }
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) next[j] += pi[i] * q[i][j] / lambda;
    }
    pi.swap(next);
  }
  return pi;
}

Config replay(const Config& start, const PathRecord& rec) {
  Config eta = start;
  for (const auto& ev : rec.events) {
    eta = ev.kind == EventKind::exchange ? apply_exchange(eta, ev.index) : apply_flip(eta, ev.index);
  }
  return eta;
}

// Fraction of [0, horizon] spent in each state.
void accumulate_occupancy(const Config& start, const PathRecord& rec, double horizon, std::vector<double>& time) {
  Config eta = start;
  double t = 0.0;
  for (std::size_t k = 0; k < rec.events.size(); ++k) {
    time[eta.code()] += rec.jump_times[k] - t;
    t = rec.jump_times[k];
    const auto& ev = rec.events[k];
    eta = ev.kind == EventKind::exchange ? apply_exchange(eta, ev.index) : apply_flip(eta, ev.index);
  }
  time[eta.code()] += horizon - t;
}

}  // namespace

TEST_CASE("random streams") {
  Rng a(7);
  Rng b(7);
  for (int i = 0; i < 100; ++i) {
    const double u = a.uniform();
    CHECK(u == b.uniform());
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
  Rng c(3);
  double mean = 0.0;
  for (int i = 0; i < 20000; ++i) mean += c.exponential(2.0);
  CHECK(mean / 20000 == doctest::Approx(0.5).epsilon(0.03));
  std::set<std::uint64_t> seeds;
  for (std::uint64_t i = 0; i < 1000; ++i) seeds.insert(replica_seed(42, i));
  CHECK(seeds.size() == 1000);
}

TEST_CASE("box layout") {
  const auto layout = BoxLayout::make(511, 31);
  CHECK(layout.count() == 31);
  int total = 0;
  for (int b = 0; b < layout.count(); ++b) total += layout.size[b];
  CHECK(total == 511);
  CHECK(layout.size[0] == 16);
  CHECK(layout.size[30] == 511 - 30 * 16);
  // Site x owns [x - 1/2, x + 1/2] / N and the outermost sites sit at +-(N-1)/N.
  CHECK(layout.interval(0, 256).first == doctest::Approx(-1.0 + 0.5 / 256));
  CHECK(layout.interval(30, 256).second == doctest::Approx(1.0 - 0.5 / 256));
  CHECK(layout.interval(0, 256).second == doctest::Approx(layout.interval(1, 256).first));
  CHECK_THROWS(BoxLayout::make(10, 11));
}

TEST_CASE("configuration validation") {
  SimConfig cfg;
  cfg.params = {0.0, 0.5, 0.5, 4};
  CHECK_NOTHROW(cfg.validate());
  cfg.params.alpha = 0.0;
  CHECK_NOTHROW(cfg.validate());
  cfg.params.alpha = 1.2;
  CHECK_THROWS(cfg.validate());
  cfg.params.alpha = 0.5;
  cfg.horizon = 0.0;
  CHECK_THROWS(cfg.validate());
  cfg.horizon = 1.0;
  cfg.snapshot_times = {0.5, 0.2};
  CHECK_THROWS(cfg.validate());
}

TEST_CASE("recorded events replay to the final configuration") {
  SimConfig cfg;
  cfg.params = {1.0, 0.2, 0.8, 8};
  cfg.horizon = 0.5;
  cfg.record_events = true;
  cfg.check_invariants = true;
  Rng rng(11);
  const Config start = sample_product_measure(cfg.params, [](double) { return 0.5; }, rng);
  const auto rec = run_untilted(cfg, start, rng);
  CHECK(rec.event_count == static_cast<long>(rec.events.size()));
  CHECK(rec.event_count > 100);
  CHECK(replay(start, rec) == rec.final_config);
  for (std::size_t k = 1; k < rec.jump_times.size(); ++k) CHECK(rec.jump_times[k] >= rec.jump_times[k - 1]);
  CHECK(rec.log_rn == 0.0);
}

TEST_CASE("runs are deterministic in the seed") {
  SimConfig cfg;
  cfg.params = {0.5, 0.3, 0.7, 16};
  cfg.horizon = 0.2;
  cfg.seed = 99;
  cfg.replica_count = 4;
  cfg.profile_boxes = 4;
  cfg.snapshot_times = {0.0, 0.1, 0.2};
  const auto rho0 = [](double x) { return 0.5 + 0.3 * x; };
  const auto schedule = TiltSchedule::from(ramped_tilt(1.0, 0.05, 0.05, 1.0, 0.5));
  const auto a = run_replicas(cfg, rho0, schedule);
  cfg.threads = 3;
  const auto b = run_replicas(cfg, rho0, schedule);
  CHECK(a.mean == b.mean);
  CHECK(a.log_rn == b.log_rn);
  CHECK(a.total_events == b.total_events);
  cfg.seed = 100;
  const auto c = run_replicas(cfg, rho0, schedule);
  CHECK(a.log_rn != c.log_rn);
}

TEST_CASE("snapshots and pairings") {
  SimConfig cfg;
  cfg.params = {0.0, 0.5, 0.5, 4};
  cfg.horizon = 0.3;
  cfg.profile_boxes = 7;
  cfg.snapshot_times = {0.0, 0.3};
  Rng rng(5);
  Config full(4);
  for (int i = 0; i < full.size(); ++i) full.set_index(i, 1);
  const auto rec = run_untilted(cfg, full, rng);
  CHECK(profile_extract(rec, 0.0) == std::vector<double>(7, 1.0));
  CHECK(profile_extract(rec, 0.3).size() == 7);
  CHECK_THROWS_AS(profile_extract(rec, 0.15), std::out_of_range);
  CHECK(empirical_pairing(full, cfg.params, [](double) { return 1.0; }) == doctest::Approx(7.0 / 4.0));
  CHECK(empirical_pairing(full, cfg.params, [](double x) { return x; }) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(box_profile(full, BoxLayout::make(7, 2)) == std::vector<double>{1.0, 1.0});
}

TEST_CASE("equilibrium density is preserved on average") {
  SimConfig cfg;
  cfg.params = {1.0, 0.4, 0.4, 32};
  cfg.horizon = 0.2;
  cfg.replica_count = 100;
  cfg.profile_boxes = 1;
  cfg.snapshot_times = {0.2};
  const auto s = run_replicas(cfg, [](double) { return 0.4; }, TiltSchedule{});
  CHECK(std::abs(s.mean[0][0] - 0.4) < 4.0 * s.stderr_[0][0] + 1e-3);
}

TEST_CASE("occupation times match the stationary law of the generator") {
  for (double amp : {0.0, 1.0}) {
    CAPTURE(amp);
    SimConfig cfg;
    cfg.params = {1.0, 0.2, 0.7, 2};
    cfg.horizon = 100.0;
    cfg.record_events = true;
    const TiltFunction tilt = ramped_tilt(amp, 0.0, 1e-9, 1.0, 0.0);
    const auto schedule = amp == 0.0 ? TiltSchedule{} : TiltSchedule::from(tilt);
    const auto q = tilted_rates(cfg.params, [amp](double x) { return amp * x; });
    const auto pi = stationary_distribution(q);

    std::vector<double> time(q.size(), 0.0);
    std::vector<double> entropy;
    const int replicas = 20;
    for (int r = 0; r < replicas; ++r) {
      Rng rng(replica_seed(1234, r));
      const Config start = Config::from_code(2, static_cast<std::uint64_t>(r % 8));
      const auto rec = run_tilted(cfg, start, schedule, rng);
      accumulate_occupancy(start, rec, cfg.horizon, time);
      entropy.push_back(rec.log_rn / cfg.horizon);
    }
    for (std::size_t s = 0; s < q.size(); ++s) {
      CHECK(std::abs(time[s] / (replicas * cfg.horizon) - pi[s]) < 0.01);
    }

    // Relative entropy per unit time of the tilted chain against the original.
    const auto q0 = tilted_rates(cfg.params, [](double) { return 0.0; });
    double rate = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
      for (std::size_t j = 0; j < q.size(); ++j) {
        if (q[i][j] > 0.0) rate += pi[i] * (q[i][j] * std::log(q[i][j] / q0[i][j]) - q[i][j] + q0[i][j]);
      }
    }
    double mean = 0.0;
    for (double e : entropy) mean += e;
    mean /= replicas;
    double var = 0.0;
    for (double e : entropy) var += (e - mean) * (e - mean);
    const double se = std::sqrt(var / (replicas - 1) / replicas);
    CHECK(std::abs(mean - rate) <= 4.0 * se + 1e-12);
  }
}

TEST_CASE("a tilt beyond its declared bound is reported") {
  SimConfig cfg;
  cfg.params = {0.0, 0.5, 0.5, 8};
  cfg.horizon = 0.5;
  auto schedule = TiltSchedule::from(ramped_tilt(2.0, 0.0, 0.01, 1.0, 0.0));
  schedule.grad_bound = 0.1;
  Rng rng(1);
  Config eta(8);
  for (int i = 0; i < eta.size(); i += 2) eta.set_index(i, 1);
  CHECK_THROWS_AS(run_tilted(cfg, eta, schedule, rng), MajorantError);
  CHECK_THROWS_AS(run_tilted(cfg, eta, TiltSchedule::from(linear_tilt(1.0)), rng), MajorantError);
}
