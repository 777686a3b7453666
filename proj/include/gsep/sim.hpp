#pragma once

// Exact continuous-time simulation of the accelerated exclusion process and
// of its tilted, time-inhomogeneous version.

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <vector>

#include "gsep/model.hpp"
#include "gsep/profile.hpp"

namespace gsep {

class MajorantError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Random stream of one replica. Uniforms carry 53 random bits.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  // Uniform on (0,1], safe for logarithms.
  double uniform_open() { return static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53; }
  double exponential(double rate) { return -std::log(uniform_open()) / rate; }

 private:
  std::mt19937_64 engine_;
};

// Seed of replica `index` derived from the master seed.
std::uint64_t replica_seed(std::uint64_t master, std::uint64_t index);

// Contiguous boxes of sites: `count` boxes of equal size, the last one
// absorbing the remainder.
struct BoxLayout {
  std::vector<int> start;  // storage offset of the first site of each box
  std::vector<int> size;

  static BoxLayout make(int lattice_size, int count);
  int count() const { return static_cast<int>(start.size()); }
  // Macroscopic interval covered by box b on a scale-N lattice.
  std::pair<double, double> interval(int b, int n_sites) const;
};

struct SimConfig {
  ModelParams params;
  double horizon = 1.0;
  std::uint64_t seed = 1;
  int replica_count = 1;
  int profile_boxes = 0;  // 0 stores full configurations
  std::vector<double> snapshot_times;
  bool record_events = false;    // keep jump_times and events
  bool check_invariants = false; // assert particle conservation per event
  int threads = 1;

  void validate() const;
  int boxes() const { return profile_boxes > 0 ? profile_boxes : params.lattice_size(); }
};

struct TiltSchedule {
  TiltFunction tilt;
  double sup_norm_bound = 0.0;  // >= sup |G|
  double grad_bound = 0.0;      // >= sup |dG/dx|
  int table_panels = 512;  // time panels of the tabulated rate integrals

  static TiltSchedule from(const TiltFunction& h);
  bool is_zero() const { return tilt.is_zero(); }
};

enum class EventKind : std::uint8_t { exchange, flip };

struct Event {
  EventKind kind;
  int index;  // left site of the bond, or the flipped site
};

struct PathRecord {
  std::vector<double> jump_times;
  std::vector<Event> events;
  long event_count = 0;
  long proposals = 0;  // majorant proposals, tilted runs only
  double log_rn = 0.0;
  double log_rn_jumps = 0.0;
  double log_rn_compensator = 0.0;
  std::vector<double> snapshot_times;
  std::vector<std::vector<double>> snapshots;  // box averages
  Config final_config;
};

// Independent Bernoulli(rho0(x/N)) occupancies.
Config sample_product_measure(const ModelParams& p, const Profile& rho0, Rng& rng);

PathRecord run_untilted(const SimConfig& cfg, const Config& eta0, Rng& rng);
PathRecord run_tilted(const SimConfig& cfg, const Config& eta0, const TiltSchedule& tilt, Rng& rng);

// (1/N) sum_x eta(x) f(x/N).
double empirical_pairing(const Config& eta, const ModelParams& p, const std::function<double(double)>& f);

// Box averages of a configuration.
std::vector<double> box_profile(const Config& eta, const BoxLayout& layout);

// The stored box profile at snapshot time t.
const std::vector<double>& profile_extract(const PathRecord& record, double t);

struct ReplicaSummary {
  std::vector<double> snapshot_times;
  std::vector<std::vector<double>> mean;    // [snapshot][box]
  std::vector<std::vector<double>> stderr_; // [snapshot][box]
  std::vector<double> log_rn;               // one per replica
  double log_rn_mean = 0.0;
  double log_rn_stderr = 0.0;
  long total_events = 0;
  int replicas = 0;
};

// Runs cfg.replica_count replicas, each starting from a sample of rho0 drawn
// with its own stream. A zero tilt runs the untilted dynamics.
ReplicaSummary run_replicas(const SimConfig& cfg, const Profile& rho0, const TiltSchedule& tilt);

}  // namespace gsep
