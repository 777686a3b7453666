#include "gsep/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <string>
#include <tuple>

namespace gsep {

void ModelParams::validate() const {
  if (!(a > -0.5)) {
    throw ModelError("interaction strength must satisfy a > -1/2, got " + std::to_string(a));
  }
  if (!(alpha > 0.0 && alpha < 1.0) || !(beta > 0.0 && beta < 1.0)) {
    throw ModelError("reservoir densities must lie in (0,1)");
  }
  if (n_sites < 2) {
    throw ModelError("scale N must be at least 2, got " + std::to_string(n_sites));
  }
}

double ModelParams::flux_potential_inverse(double p) const {
  if (a == 0.0) {
    return p;
  }
  // a z^2 + z - p = 0, root continuous at a -> 0.
  const double disc = 1.0 + 4.0 * a * p;
  return 2.0 * p / (1.0 + std::sqrt(std::max(disc, 0.0)));
}

Config::Config(int n_sites) : n_sites_(n_sites), words_((2 * n_sites - 1 + 63) / 64, 0) {
  if (n_sites < 1) {
    throw ModelError("Config needs N >= 1");
  }
}

int Config::particle_count() const {
  int total = 0;
  for (auto w : words_) {
    total += std::popcount(w);
  }
  return total;
}

std::vector<int> Config::to_vector() const {
  std::vector<int> out(size());
  for (int i = 0; i < size(); ++i) {
    out[i] = at_index(i);
  }
  return out;
}

Config Config::from_vector(int n_sites, const std::vector<int>& occupancy) {
  Config c(n_sites);
  if (static_cast<int>(occupancy.size()) != c.size()) {
    throw ModelError("occupancy vector has wrong length");
  }
  for (int i = 0; i < c.size(); ++i) {
    if (occupancy[i] != 0 && occupancy[i] != 1) {
      throw ModelError("occupancy entries must be 0 or 1");
    }
    c.set_index(i, occupancy[i]);
  }
  return c;
}

std::uint64_t Config::code() const {
  if (size() > 63) {
    throw ModelError("Config::code supports at most 63 sites");
  }
  return words_.empty() ? 0 : words_[0];
}

Config Config::from_code(int n_sites, std::uint64_t code) {
  Config c(n_sites);
  if (c.size() > 63) {
    throw ModelError("Config::from_code supports at most 63 sites");
  }
  c.words_[0] = code & ((std::uint64_t{1} << c.size()) - 1);
  return c;
}

namespace {

void check_bond(const ModelParams& p, int x) {
  if (x < p.first_site() || x > p.last_site() - 1) {
    throw ModelError("bond index " + std::to_string(x) + " outside the lattice");
  }
}

void check_interior_bond(const ModelParams& p, int x) {
  check_bond(p, x);
  if (x - 1 < p.first_site() || x + 2 > p.last_site()) {
    throw ModelError("current is only defined on bonds away from the reservoirs");
  }
}

}  // namespace

double bulk_exchange_rate(const ModelParams& p, const Config& eta, int x) {
  check_bond(p, x);
  const double left = (x - 1 >= p.first_site()) ? eta(x - 1) : p.alpha;
  const double right = (x + 2 <= p.last_site()) ? eta(x + 2) : p.beta;
  return 1.0 + p.a * (left + right);
}

std::pair<double, double> boundary_flip_rates(const ModelParams& p, const Config& eta) {
  const int l = eta(p.first_site());
  const int r = eta(p.last_site());
  const double rl = l ? 1.0 - p.alpha : p.alpha;
  const double rr = r ? 1.0 - p.beta : p.beta;
  return {rl, rr};
}

TransitionRates transition_rates(const ModelParams& p, const Config& eta) {
  TransitionRates out;
  out.exchange.resize(p.bond_count());
  for (int x = p.first_site(); x < p.last_site(); ++x) {
    out.exchange[x + p.n_sites - 1] = bulk_exchange_rate(p, eta, x);
  }
  std::tie(out.flip_left, out.flip_right) = boundary_flip_rates(p, eta);
  return out;
}

double instantaneous_current(const ModelParams& p, const Config& eta, int x) {
  check_interior_bond(p, x);
  return bulk_exchange_rate(p, eta, x) * (eta(x) - eta(x + 1));
}

double gradient_form_current(const ModelParams& p, const Config& eta, int x) {
  check_interior_bond(p, x);
  // f1 = eta(0) eta(1), f2 = eta(0) eta(2), tau_y shifts by y.
  const auto f1 = [&](int y) { return eta(y) * eta(y + 1); };
  const auto f2 = [&](int y) { return eta(y) * eta(y + 2); };
  return (eta(x) - eta(x + 1)) + p.a * (f1(x - 1) - f1(x + 1)) + p.a * (f2(x) - f2(x - 1));
}

Config apply_exchange(const Config& eta, int x) {
  const int n = eta.n_sites();
  if (x < -n + 1 || x > n - 2) {
    throw ModelError("exchange bond outside the lattice");
  }
  Config out = eta;
  const int i = x + n - 1;
  const int u = eta.at_index(i);
  const int v = eta.at_index(i + 1);
  out.set_index(i, v);
  out.set_index(i + 1, u);
  return out;
}

Config apply_flip(const Config& eta, int x) {
  const int n = eta.n_sites();
  if (x != -n + 1 && x != n - 1) {
    throw ModelError("only the boundary sites -N+1 and N-1 can flip");
  }
  Config out = eta;
  out.flip_index(x + n - 1);
  return out;
}

GeneratorMatrix build_generator_matrix(const ModelParams& p) {
  p.validate();
  if (p.n_sites > kMaxGeneratorSites) {
    throw ModelError("generator matrix limited to N <= " + std::to_string(kMaxGeneratorSites));
  }
  const int n = p.n_sites;
  const int states = 1 << p.lattice_size();
  const double bulk_speed = static_cast<double>(n) * n;
  const double boundary_speed = n;
  GeneratorMatrix q(states);
  for (int s = 0; s < states; ++s) {
    const Config eta = Config::from_code(n, static_cast<std::uint64_t>(s));
    double out_rate = 0.0;
    for (int x = p.first_site(); x < p.last_site(); ++x) {
      if (eta(x) == eta(x + 1)) {
        continue;
      }
      const double rate = bulk_speed * bulk_exchange_rate(p, eta, x);
      const auto target = static_cast<int>(apply_exchange(eta, x).code());
      q(s, target) += rate;
      out_rate += rate;
    }
    const auto [rl, rr] = boundary_flip_rates(p, eta);
    const auto left = static_cast<int>(apply_flip(eta, p.first_site()).code());
    const auto right = static_cast<int>(apply_flip(eta, p.last_site()).code());
    q(s, left) += boundary_speed * rl;
    q(s, right) += boundary_speed * rr;
    out_rate += boundary_speed * (rl + rr);
    q(s, s) -= out_rate;
  }
  return q;
}

double product_measure_weight(int n_sites, double c, std::uint64_t code) {
  const int sites = 2 * n_sites - 1;
  const int k = std::popcount(code);
  return std::pow(c, k) * std::pow(1.0 - c, sites - k);
}

}  // namespace gsep
