#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "gsep/model.hpp"

using namespace gsep;

TEST_CASE("parameter validation") {
  CHECK_NOTHROW(ModelParams{0.0, 0.5, 0.5, 2}.validate());
  CHECK_NOTHROW(ModelParams{-0.49, 0.1, 0.9, 3}.validate());
  CHECK_THROWS_AS(ModelParams({-0.5, 0.5, 0.5, 2}).validate(), ModelError);
  CHECK_THROWS_AS(ModelParams({0.0, 0.0, 0.5, 2}).validate(), ModelError);
  CHECK_THROWS_AS(ModelParams({0.0, 0.5, 1.0, 2}).validate(), ModelError);
  CHECK_THROWS_AS(ModelParams({0.0, 0.5, 0.5, 1}).validate(), ModelError);
}

TEST_CASE("lattice geometry") {
  const ModelParams p{0.0, 0.5, 0.5, 4};
  CHECK(p.lattice_size() == 7);
  CHECK(p.bond_count() == 6);
  CHECK(p.first_site() == -3);
  CHECK(p.last_site() == 3);
}

TEST_CASE("transport coefficients") {
  const ModelParams p{1.0, 0.5, 0.5, 2};
  CHECK(p.diffusivity(0.25) == doctest::Approx(1.5));
  CHECK(ModelParams::compressibility(0.25) == doctest::Approx(0.1875));
  CHECK(p.mobility(0.25) == doctest::Approx(0.28125));
  CHECK(p.flux_potential(0.5) == doctest::Approx(0.75));
  for (double a : {-0.45, 0.0, 0.3, 2.0}) {
    const ModelParams q{a, 0.5, 0.5, 2};
    for (double z = 0.0; z <= 1.0; z += 0.05) {
      CHECK(q.flux_potential_inverse(q.flux_potential(z)) == doctest::Approx(z).epsilon(1e-12));
    }
  }
}

TEST_CASE("configuration storage") {
  Config eta(40);
  CHECK(eta.size() == 79);
  eta.set(-39, 1);
  eta.set(0, 1);
  eta.set(39, 1);
  CHECK(eta(-39) == 1);
  CHECK(eta(0) == 1);
  CHECK(eta(39) == 1);
  CHECK(eta(1) == 0);
  CHECK(eta.particle_count() == 3);
  const auto v = eta.to_vector();
  CHECK(Config::from_vector(40, v) == eta);
  const Config small = Config::from_code(3, 0b10110);
  CHECK(small.code() == 0b10110u);
  CHECK(small(-2) == 0);
  CHECK(small(-1) == 1);
  CHECK(small(2) == 1);
}

TEST_CASE("exchange rates use the reservoir densities beyond the ends") {
  const ModelParams p{1.0, 0.3, 0.7, 3};
  const Config eta = Config::from_vector(3, {1, 0, 1, 1, 0});
  CHECK(bulk_exchange_rate(p, eta, -2) == doctest::Approx(1.0 + 0.3 + 1.0));
  CHECK(bulk_exchange_rate(p, eta, -1) == doctest::Approx(1.0 + 1.0 + 1.0));
  CHECK(bulk_exchange_rate(p, eta, 0) == doctest::Approx(1.0 + 0.0 + 0.0));
  CHECK(bulk_exchange_rate(p, eta, 1) == doctest::Approx(1.0 + 1.0 + 0.7));
  CHECK_THROWS_AS(bulk_exchange_rate(p, eta, 2), ModelError);
  const auto [rl, rr] = boundary_flip_rates(p, eta);
  CHECK(rl == doctest::Approx(0.7));
  CHECK(rr == doctest::Approx(0.7));
  const auto rates = transition_rates(p, eta);
  CHECK(rates.exchange.size() == 4);
  CHECK(rates.exchange[3] == doctest::Approx(2.7));
}

TEST_CASE("gradient identity over every local pattern") {
  for (double a : {-0.4, 0.0, 0.5, 1.0, 3.0}) {
    const ModelParams p{a, 0.5, 0.5, 3};
    for (std::uint64_t code = 0; code < 32; ++code) {
      const Config eta = Config::from_code(3, code);
      for (int x : {-1, 0}) {
        CHECK(std::abs(instantaneous_current(p, eta, x) - gradient_form_current(p, eta, x)) <= 1e-14);
      }
    }
    CHECK_THROWS_AS(instantaneous_current(p, Config(3), -2), ModelError);
  }
}

TEST_CASE("exchange and flip moves") {
  const Config eta = Config::from_vector(3, {1, 0, 0, 1, 1});
  const Config moved = apply_exchange(eta, -2);
  CHECK(moved.to_vector() == std::vector<int>{0, 1, 0, 1, 1});
  CHECK(moved.particle_count() == eta.particle_count());
  CHECK(apply_flip(eta, 2).to_vector() == std::vector<int>{1, 0, 0, 1, 0});
  CHECK_THROWS_AS(apply_flip(eta, 0), ModelError);
  CHECK_THROWS_AS(apply_exchange(eta, 2), ModelError);
}

TEST_CASE("generator rows sum to zero and off-diagonals are non-negative") {
  const ModelParams p{0.7, 0.2, 0.9, 3};
  const GeneratorMatrix q = build_generator_matrix(p);
  CHECK(q.size() == 32);
  for (int i = 0; i < q.size(); ++i) {
    double row = 0.0;
    for (int j = 0; j < q.size(); ++j) {
      row += q(i, j);
      if (i != j) CHECK(q(i, j) >= 0.0);
    }
    CHECK(std::abs(row) < 1e-12);
  }
  // Entry for moving the particle of 00100 one step left, at speed N^2.
  const int from = static_cast<int>(Config::from_vector(3, {0, 0, 1, 0, 0}).code());
  const int to = static_cast<int>(Config::from_vector(3, {0, 1, 0, 0, 0}).code());
  CHECK(q(from, to) == doctest::Approx(9.0 * (1.0 + 0.7 * (0.0 + 0.0))));
  CHECK_THROWS_AS(build_generator_matrix(ModelParams{0.0, 0.5, 0.5, kMaxGeneratorSites + 1}), ModelError);
}

TEST_CASE("product measure annihilated by the generator at equal densities") {
  const ModelParams p{0.0, 0.5, 0.5, 2};
  const GeneratorMatrix q = build_generator_matrix(p);
  for (int j = 0; j < q.size(); ++j) {
    double acc = 0.0;
    for (int i = 0; i < q.size(); ++i) {
      acc += product_measure_weight(2, 0.5, static_cast<std::uint64_t>(i)) * q(i, j);
    }
    CHECK(std::abs(acc) < 1e-14);
  }
}

TEST_CASE("product measure weights sum to one") {
  double total = 0.0;
  for (std::uint64_t s = 0; s < 128; ++s) {
    total += product_measure_weight(4, 0.3, s);
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(product_measure_weight(2, 0.3, 0b101) == doctest::Approx(0.3 * 0.7 * 0.3));
}
