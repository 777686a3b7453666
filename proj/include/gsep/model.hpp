#pragma once

// Lattice model: a gradient symmetric exclusion process on
// {-N+1, ..., N-1} in mild contact with two density reservoirs.

#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

namespace gsep {

class ModelError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct ModelParams {
  double a = 0.0;      // interaction strength, a > -1/2
  double alpha = 0.5;  // left reservoir density
  double beta = 0.5;   // right reservoir density
  int n_sites = 2;     // scale N; the lattice has 2N-1 sites

  // Throws ModelError when the invariants do not hold.
  void validate() const;

  double diffusivity(double rho) const { return 1.0 + 2.0 * a * rho; }
  static double compressibility(double rho) { return rho * (1.0 - rho); }
  double mobility(double rho) const { return compressibility(rho) * diffusivity(rho); }
  // Antiderivative of the diffusivity, P_a(z) = z + a z^2.
  double flux_potential(double z) const { return z + a * z * z; }
  // Inverse of flux_potential on [0,1] (monotone there since a > -1/2).
  double flux_potential_inverse(double p) const;

  int lattice_size() const { return 2 * n_sites - 1; }
  int bond_count() const { return 2 * n_sites - 2; }
  int first_site() const { return -n_sites + 1; }
  int last_site() const { return n_sites - 1; }
};

// Occupancy vector over the lattice, stored as a packed bit vector with the
// site x living at bit x + N - 1.
class Config {
 public:
  Config() = default;
  explicit Config(int n_sites);

  int n_sites() const { return n_sites_; }
  int size() const { return 2 * n_sites_ - 1; }

  // Site accessors take lattice coordinates x in {-N+1, ..., N-1}.
  int operator()(int x) const { return at_index(x + n_sites_ - 1); }
  void set(int x, int value) { set_index(x + n_sites_ - 1, value); }

  // Raw accessors take the storage offset i = x + N - 1.
  int at_index(int i) const { return static_cast<int>((words_[i >> 6] >> (i & 63)) & 1u); }
  void set_index(int i, int value) {
    const std::uint64_t mask = std::uint64_t{1} << (i & 63);
    if (value) {
      words_[i >> 6] |= mask;
    } else {
      words_[i >> 6] &= ~mask;
    }
  }
  void flip_index(int i) { words_[i >> 6] ^= std::uint64_t{1} << (i & 63); }

  int particle_count() const;
  std::vector<int> to_vector() const;
  static Config from_vector(int n_sites, const std::vector<int>& occupancy);

  // Encodes the configuration as an integer, site -N+1 in the lowest bit.
  // Only valid for lattices of at most 63 sites.
  std::uint64_t code() const;
  static Config from_code(int n_sites, std::uint64_t code);

  bool operator==(const Config& other) const = default;

 private:
  int n_sites_ = 0;
  std::vector<std::uint64_t> words_;
};

// Jump and flip rates before the N^2 / N time acceleration.
struct TransitionRates {
  std::vector<double> exchange;  // bond x at entry x + N - 1
  double flip_left = 0.0;
  double flip_right = 0.0;
};

// Rate r_{x,x+1}; at the two extreme bonds the missing neighbours are
// replaced by the reservoir densities.
double bulk_exchange_rate(const ModelParams& p, const Config& eta, int x);

// (r_L, r_R).
std::pair<double, double> boundary_flip_rates(const ModelParams& p, const Config& eta);

TransitionRates transition_rates(const ModelParams& p, const Config& eta);

// j_{x,x+1} = r_{x,x+1} (eta(x) - eta(x+1)); only for bonds whose four-site
// neighbourhood lies inside the lattice.
double instantaneous_current(const ModelParams& p, const Config& eta, int x);

// The same current written as a lattice divergence of local functions.
double gradient_form_current(const ModelParams& p, const Config& eta, int x);

Config apply_exchange(const Config& eta, int x);
// Only the two boundary sites can flip.
Config apply_flip(const Config& eta, int x);

// Dense generator of the accelerated chain on all 2^(2N-1) configurations,
// states indexed by Config::code().
class GeneratorMatrix {
 public:
  GeneratorMatrix(int n_states) : n_(n_states), data_(static_cast<std::size_t>(n_states) * n_states, 0.0) {}
  int size() const { return n_; }
  double& operator()(int i, int j) { return data_[static_cast<std::size_t>(i) * n_ + j]; }
  double operator()(int i, int j) const { return data_[static_cast<std::size_t>(i) * n_ + j]; }

 private:
  int n_;
  std::vector<double> data_;
};

inline constexpr int kMaxGeneratorSites = 6;

GeneratorMatrix build_generator_matrix(const ModelParams& p);

// Bernoulli product measure with constant density c, evaluated on a state code.
double product_measure_weight(int n_sites, double c, std::uint64_t code);

}  // namespace gsep
