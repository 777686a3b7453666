#include "gsep/sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

namespace gsep {

namespace {

// Fenwick tree over non-negative weights with prefix-sum search.
class Fenwick {
 public:
  // The tree is padded to a power of two so the search needs no bounds test.
  explicit Fenwick(int n) : n_(n), values_(n, 0.0) {
    top_ = 1;
    while (top_ < n_) top_ *= 2;
    tree_.assign(top_ + 1, 0.0);
  }

  void set(int i, double v) {
    const double delta = v - values_[i];
    if (delta == 0.0) return;
    values_[i] = v;
    for (int j = i + 1; j <= top_; j += j & -j) tree_[j] += delta;
    if (++updates_ >= kRebuildInterval) rebuild();
  }

  double value(int i) const { return values_[i]; }
  double total() const { return tree_[top_]; }

  // Index whose cumulative interval contains target.
  int find(double target) const {
    int pos = 0;
    for (int step = top_ >> 1; step > 0; step >>= 1) {
      const double w = tree_[pos + step];
      const bool right = w <= target;
      pos += right ? step : 0;
      target -= right ? w : 0.0;
    }
    // Round-off can land on a zero weight; move to the nearest positive one.
    int i = std::min(pos, n_ - 1);
    while (i > 0 && values_[i] == 0.0) --i;
    while (i < n_ - 1 && values_[i] == 0.0) ++i;
    return i;
  }

  void rebuild() {
    std::fill(tree_.begin(), tree_.end(), 0.0);
    for (int j = 1; j <= top_; ++j) {
      if (j <= n_) tree_[j] += values_[j - 1];
      const int parent = j + (j & -j);
      if (parent <= top_) tree_[parent] += tree_[j];
    }
    updates_ = 0;
  }

 private:
  static constexpr long kRebuildInterval = 1L << 16;
  int n_;
  int top_ = 1;
  long updates_ = 0;
  std::vector<double> tree_;
  std::vector<double> values_;
};

// Time integral of e^{s g(t)} - 1 for a continuous g, tabulated on panels
// with an 8-point Gauss rule and read back by cubic Hermite interpolation.
class ExcessIntegral {
 public:
  ExcessIntegral() = default;

  ExcessIntegral(const std::function<double(double)>& g, double horizon, const std::vector<double>& breaks,
                 int panels) {
    std::vector<double> grid{0.0, horizon};
    for (double b : breaks) {
      if (b > 0.0 && b < horizon) grid.push_back(b);
    }
    std::sort(grid.begin(), grid.end());
    // Refine each piece uniformly so the total is about `panels`.
    for (std::size_t p = 0; p + 1 < grid.size(); ++p) {
      const double a = grid[p];
      const double b = grid[p + 1];
      const int pieces = std::max(1, static_cast<int>(std::ceil(panels * (b - a) / horizon)));
      for (int q = 0; q < pieces; ++q) {
        nodes_.push_back(a + (b - a) * q / pieces);
      }
    }
    nodes_.push_back(horizon);
    for (int sign = 0; sign < 2; ++sign) {
      const double s = sign == 0 ? 1.0 : -1.0;
      auto& values = sign == 0 ? plus_ : minus_;
      auto& slopes = sign == 0 ? plus_slope_ : minus_slope_;
      values.assign(nodes_.size(), 0.0);
      slopes.resize(nodes_.size());
      for (std::size_t k = 0; k < nodes_.size(); ++k) {
        slopes[k] = std::expm1(s * g(nodes_[k]));
        if (k > 0) {
          const double a = nodes_[k - 1];
          const double b = nodes_[k];
          double acc = 0.0;
          for (int q = 0; q < 8; ++q) {
            const double t = 0.5 * (a + b) + 0.5 * (b - a) * kNodes[q];
            acc += kWeights[q] * std::expm1(s * g(t));
          }
          values[k] = values[k - 1] + 0.5 * (b - a) * acc;
        }
      }
    }
  }

  // Integral over [0,t] of e^{s g} - 1, s = +1 or -1.
  double at(double t, int sign) const {
    const auto& values = sign > 0 ? plus_ : minus_;
    const auto& slopes = sign > 0 ? plus_slope_ : minus_slope_;
    if (t <= 0.0) return 0.0;
    if (t >= nodes_.back()) return values.back();
    const std::size_t k =
        static_cast<std::size_t>(std::upper_bound(nodes_.begin(), nodes_.end(), t) - nodes_.begin()) - 1;
    const double h = nodes_[k + 1] - nodes_[k];
    const double s = (t - nodes_[k]) / h;
    const double h00 = 2 * s * s * s - 3 * s * s + 1;
    const double h10 = s * s * s - 2 * s * s + s;
    const double h01 = -2 * s * s * s + 3 * s * s;
    const double h11 = s * s * s - s * s;
    return h00 * values[k] + h10 * h * slopes[k] + h01 * values[k + 1] + h11 * h * slopes[k + 1];
  }

 private:
  static constexpr double kNodes[8] = {-0.9602898564975363, -0.7966664774136267, -0.5255324099163290,
                                       -0.1834346424956498, 0.1834346424956498,  0.5255324099163290,
                                       0.7966664774136267,  0.9602898564975363};
  static constexpr double kWeights[8] = {0.1012285362903763, 0.2223810344533745, 0.3137066458778873,
                                         0.3626837833783620, 0.3626837833783620, 0.3137066458778873,
                                         0.2223810344533745, 0.1012285362903763};
  std::vector<double> nodes_;
  std::vector<double> plus_, minus_, plus_slope_, minus_slope_;
};

// Excess-rate integrals of every bond and of both boundary channels.
struct TiltTables {
  std::vector<ExcessIntegral> bonds;
  ExcessIntegral left;
  ExcessIntegral right;

  TiltTables(const ModelParams& p, const TiltSchedule& tilt, double horizon) {
    const auto& h = tilt.tilt;
    const double n = p.n_sites;
    const auto& breaks = h.breakpoints;
    const int panels = tilt.table_panels;
    bonds.reserve(p.bond_count());
    for (int b = 0; b < p.bond_count(); ++b) {
      const int x = b + p.first_site();
      bonds.emplace_back([&h, x, n](double t) { return h(t, (x + 1) / n) - h(t, x / n); }, horizon, breaks,
                         panels);
    }
    const double xl = p.first_site() / n;
    const double xr = p.last_site() / n;
    left = ExcessIntegral([&h, xl](double t) { return h(t, xl); }, horizon, breaks, panels);
    right = ExcessIntegral([&h, xr](double t) { return h(t, xr); }, horizon, breaks, panels);
  }
};

struct Snapshotter {
  const SimConfig& cfg;
  BoxLayout layout;
  std::size_t next = 0;

  Snapshotter(const SimConfig& c) : cfg(c), layout(BoxLayout::make(c.params.lattice_size(), c.boxes())) {}

  // Records every pending snapshot time strictly before t.
  template <class State>
  void advance(double t, const State& state, PathRecord& rec) {
    while (next < cfg.snapshot_times.size() && cfg.snapshot_times[next] < t) {
      rec.snapshot_times.push_back(cfg.snapshot_times[next]);
      rec.snapshots.push_back(box_profile(state.config(), layout));
      ++next;
    }
  }
};

// The event loop shared by the untilted and tilted runs.
class Simulator {
 public:
  Simulator(const SimConfig& cfg, const Config& eta0, const TiltSchedule* tilt, const TiltTables* tables)
      : cfg_(cfg), p_(cfg.params), tilt_(tilt), tables_(tables), bonds_(p_.bond_count()),
        n2_(static_cast<double>(p_.n_sites) * p_.n_sites), n1_(p_.n_sites) {
    if (eta0.n_sites() != p_.n_sites) {
      throw std::invalid_argument("initial configuration does not match N");
    }
    // occ_[i + 1] holds site i; the two pads hold the reservoir densities so
    // that the extreme bonds read them in place of missing neighbours.
    const int size = p_.lattice_size();
    occ_.assign(size + 2, 0.0);
    occ_[0] = p_.alpha;
    occ_[size + 1] = p_.beta;
    for (int i = 0; i < size; ++i) occ_[i + 1] = eta0.at_index(i);
    for (int b = 0; b < p_.bond_count(); ++b) {
      bonds_.set(b, active_rate(b));
    }
    if (tilt_) {
      prepare_tilt();
    }
  }

  PathRecord run(Rng& rng) {
    PathRecord rec;
    Snapshotter snaps(cfg_);
    const double horizon = cfg_.horizon;
    particles_ = count_particles();
    double t = 0.0;
    while (true) {
      const bool tilted = tilt_ && t >= activation_;
      const double kb = tilted ? k_bulk_ : 1.0;
      const double kf = tilted ? k_flip_ : 1.0;
      const double rl = site(0) ? 1.0 - p_.alpha : p_.alpha;
      const double rr = site(last_) ? 1.0 - p_.beta : p_.beta;
      const double bulk = n2_ * kb * std::max(bonds_.total(), 0.0);
      const double left = n1_ * kf * rl;
      const double right = n1_ * kf * rr;
      const double total = bulk + left + right;
      const double dt = total > 0.0 ? rng.exponential(total) : std::numeric_limits<double>::infinity();
      // The majorant changes at the activation time; restart the clock there.
      if (tilt_ && !tilted && t + dt >= activation_ && activation_ < horizon) {
        snaps.advance(activation_, *this, rec);
        t = activation_;
        continue;
      }
      if (t + dt > horizon) {
        break;
      }
      t += dt;
      snaps.advance(t, *this, rec);
      double pick = rng.uniform() * total;
      Event ev{};
      double exponent = 0.0;
      if (pick < bulk && bulk > 0.0) {
        const int b = bonds_.find(pick / (n2_ * kb));
        const int x = b + p_.first_site();
        ev = {EventKind::exchange, x};
        if (tilted) {
          const int s = site(b) - site(b + 1);
          exponent = s * bond_tilt(b, t);
        }
      } else {
        pick -= bulk;
        const int x = pick < left ? p_.first_site() : p_.last_site();
        ev = {EventKind::flip, x};
        if (tilted) {
          exponent = (1 - 2 * site(x - p_.first_site())) * site_tilt(x, t);
        }
      }
      if (tilt_) {
        ++rec.proposals;
        if (tilted) {
          const double bound = ev.kind == EventKind::exchange ? log_k_bulk_ : log_k_flip_;
          if (exponent > bound * (1.0 + 1e-12) + 1e-12) {
            throw MajorantError("tilt exceeds the declared bound at t=" + std::to_string(t) +
                                " (exponent " + std::to_string(exponent) + " > " + std::to_string(bound) + ")");
          }
          if (rng.uniform() >= std::exp(exponent - bound)) {
            continue;
          }
          rec.log_rn_jumps += exponent;
        }
      }
      apply(ev, t);
      ++rec.event_count;
      if (cfg_.record_events) {
        rec.jump_times.push_back(t);
        rec.events.push_back(ev);
      }
    }
    snaps.advance(std::numeric_limits<double>::infinity(), *this, rec);
    if (tilt_) {
      for (int b = 0; b < p_.bond_count(); ++b) flush_bond(b, horizon);
      flush_boundary(horizon);
      rec.log_rn_compensator = compensator_;
      rec.log_rn = rec.log_rn_jumps - compensator_;
    }
    rec.final_config = config();
    return rec;
  }

 public:
  Config config() const {
    Config eta(p_.n_sites);
    for (int i = 0; i <= last_; ++i) eta.set_index(i, site(i));
    return eta;
  }

 private:
  double active_rate(int b) const {
    // Bond b joins storage sites b and b + 1.
    const double* o = occ_.data() + b + 1;
    return o[0] != o[1] ? 1.0 + p_.a * (o[-1] + o[2]) : 0.0;
  }

  int site(int i) const { return occ_[i + 1] != 0.0; }

  int count_particles() const {
    int c = 0;
    for (int i = 0; i <= last_; ++i) c += site(i);
    return c;
  }

  double bond_tilt(int b, double t) const {
    const int x = b + p_.first_site();
    const double n = p_.n_sites;
    return tilt_->tilt(t, (x + 1) / n) - tilt_->tilt(t, x / n);
  }
  double site_tilt(int x, double t) const { return tilt_->tilt(t, static_cast<double>(x) / p_.n_sites); }

  void prepare_tilt() {
    activation_ = tilt_->tilt.activation;
    log_k_bulk_ = tilt_->grad_bound / p_.n_sites;
    log_k_flip_ = tilt_->sup_norm_bound;
    if (!std::isfinite(log_k_bulk_) || !std::isfinite(log_k_flip_)) {
      throw MajorantError("thinning needs finite bounds on the tilt and its gradient");
    }
    k_bulk_ = std::exp(log_k_bulk_);
    k_flip_ = std::exp(log_k_flip_);
    last_flush_.assign(p_.bond_count(), 0.0);
    boundary_flush_ = 0.0;
  }

  // Adds the excess tilted rate of bond b over [last flush, t].
  void flush_bond(int b, double t) {
    const double r = bonds_.value(b);
    if (r > 0.0) {
      const int s = site(b) - site(b + 1);
      const auto& table = tables_->bonds[b];
      compensator_ += n2_ * r * (table.at(t, s) - table.at(last_flush_[b], s));
    }
    last_flush_[b] = t;
  }

  void flush_boundary(double t) {
    const double t0 = boundary_flush_;
    const int l = site(0);
    const int r = site(last_);
    // Creation is weighted by e^{G}, annihilation by e^{-G}.
    const double left_rate = l ? 1.0 - p_.alpha : p_.alpha;
    const double right_rate = r ? 1.0 - p_.beta : p_.beta;
    const int ls = l ? -1 : 1;
    const int rs = r ? -1 : 1;
    compensator_ += n1_ * left_rate * (tables_->left.at(t, ls) - tables_->left.at(t0, ls));
    compensator_ += n1_ * right_rate * (tables_->right.at(t, rs) - tables_->right.at(t0, rs));
    boundary_flush_ = t;
  }

  void apply(const Event& ev, double t) {
    const int lo_site = ev.kind == EventKind::exchange ? ev.index : ev.index;
    const int hi_site = ev.kind == EventKind::exchange ? ev.index + 1 : ev.index;
    // Bond y reads sites y-1..y+2.
    const int b_lo = std::max(lo_site - 2, p_.first_site()) - p_.first_site();
    const int b_hi = std::min(hi_site + 1, p_.last_site() - 1) - p_.first_site();
    const bool touches_boundary = lo_site == p_.first_site() || hi_site == p_.last_site();
    if (tilt_) {
      for (int b = b_lo; b <= b_hi; ++b) flush_bond(b, t);
      if (touches_boundary) flush_boundary(t);
    }
    const int before = particles_;
    if (ev.kind == EventKind::exchange) {
      const int i = ev.index - p_.first_site();
      std::swap(occ_[i + 1], occ_[i + 2]);
    } else {
      const int i = ev.index - p_.first_site();
      particles_ += site(i) ? -1 : 1;
      occ_[i + 1] = 1.0 - occ_[i + 1];
    }
    if (cfg_.check_invariants) {
      const int now = count_particles();
      const int expected = ev.kind == EventKind::exchange ? before : particles_;
      if (now != expected || (ev.kind == EventKind::flip && std::abs(now - before) != 1)) {
        throw std::logic_error("particle conservation violated at t=" + std::to_string(t));
      }
    }
    for (int b = b_lo; b <= b_hi; ++b) bonds_.set(b, active_rate(b));
  }

  const SimConfig& cfg_;
  const ModelParams& p_;
  std::vector<double> occ_;
  int last_ = p_.lattice_size() - 1;
  const TiltSchedule* tilt_;
  const TiltTables* tables_;
  Fenwick bonds_;
  double n2_;
  double n1_;
  int particles_ = 0;

  double activation_ = 0.0;
  double log_k_bulk_ = 0.0;
  double log_k_flip_ = 0.0;
  double k_bulk_ = 1.0;
  double k_flip_ = 1.0;
  std::vector<double> last_flush_;
  double boundary_flush_ = 0.0;
  double compensator_ = 0.0;
};

}  // namespace

std::uint64_t replica_seed(std::uint64_t master, std::uint64_t index) {
  // SplitMix64 applied to master + (index + 1) * golden gamma.
  std::uint64_t z = master + (index + 1) * 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

BoxLayout BoxLayout::make(int lattice_size, int count) {
  if (count < 1 || count > lattice_size) {
    throw std::invalid_argument("box count must lie in [1, lattice size]");
  }
  BoxLayout out;
  const int size = lattice_size / count;
  for (int b = 0; b < count; ++b) {
    out.start.push_back(b * size);
    out.size.push_back(b + 1 < count ? size : lattice_size - b * size);
  }
  return out;
}

std::pair<double, double> BoxLayout::interval(int b, int n_sites) const {
  // Site i (storage offset) sits at x = i - N + 1 and owns [x - 1/2, x + 1/2] / N,
  // clipped to [-1, 1].
  const double n = n_sites;
  const double lo = (start[b] - n_sites + 1 - 0.5) / n;
  const double hi = (start[b] + size[b] - 1 - n_sites + 1 + 0.5) / n;
  return {std::max(lo, -1.0), std::min(hi, 1.0)};
}

void SimConfig::validate() const {
  if (!(params.a > -0.5)) {
    throw ModelError("interaction strength must satisfy a > -1/2");
  }
  if (!(params.alpha >= 0.0 && params.alpha <= 1.0) || !(params.beta >= 0.0 && params.beta <= 1.0)) {
    throw ModelError("reservoir densities must lie in [0,1]");
  }
  if (params.n_sites < 2) {
    throw ModelError("scale N must be at least 2");
  }
  if (!(horizon > 0.0)) {
    throw std::invalid_argument("horizon must be positive");
  }
  if (replica_count < 1) {
    throw std::invalid_argument("replica count must be at least 1");
  }
  if (profile_boxes < 0 || profile_boxes > params.lattice_size()) {
    throw std::invalid_argument("profile boxes must lie in [0, 2N-1]");
  }
  if (!std::is_sorted(snapshot_times.begin(), snapshot_times.end())) {
    throw std::invalid_argument("snapshot times must be sorted");
  }
  for (double t : snapshot_times) {
    if (t < 0.0 || t > horizon) {
      throw std::invalid_argument("snapshot time outside [0, horizon]");
    }
  }
  if (threads < 1) {
    throw std::invalid_argument("thread count must be at least 1");
  }
}

TiltSchedule TiltSchedule::from(const TiltFunction& h) {
  TiltSchedule s;
  s.tilt = h;
  s.sup_norm_bound = h.value_bound;
  s.grad_bound = h.grad_bound;
  return s;
}

Config sample_product_measure(const ModelParams& p, const Profile& rho0, Rng& rng) {
  Config eta(p.n_sites);
  for (int x = p.first_site(); x <= p.last_site(); ++x) {
    const double rho = rho0(static_cast<double>(x) / p.n_sites);
    if (!(rho >= 0.0 && rho <= 1.0)) {
      throw std::invalid_argument("profile value outside [0,1] at x=" + std::to_string(x));
    }
    eta.set(x, rng.uniform() < rho ? 1 : 0);
  }
  return eta;
}

PathRecord run_untilted(const SimConfig& cfg, const Config& eta0, Rng& rng) {
  cfg.validate();
  Simulator sim(cfg, eta0, nullptr, nullptr);
  return sim.run(rng);
}

PathRecord run_tilted(const SimConfig& cfg, const Config& eta0, const TiltSchedule& tilt, Rng& rng) {
  if (tilt.is_zero()) {
    return run_untilted(cfg, eta0, rng);
  }
  cfg.validate();
  const TiltTables tables(cfg.params, tilt, cfg.horizon);
  Simulator sim(cfg, eta0, &tilt, &tables);
  return sim.run(rng);
}

double empirical_pairing(const Config& eta, const ModelParams& p, const std::function<double(double)>& f) {
  double s = 0.0;
  for (int x = p.first_site(); x <= p.last_site(); ++x) {
    if (eta(x)) s += f(static_cast<double>(x) / p.n_sites);
  }
  return s / p.n_sites;
}

std::vector<double> box_profile(const Config& eta, const BoxLayout& layout) {
  std::vector<double> out(layout.count());
  for (int b = 0; b < layout.count(); ++b) {
    int c = 0;
    for (int i = layout.start[b]; i < layout.start[b] + layout.size[b]; ++i) c += eta.at_index(i);
    out[b] = static_cast<double>(c) / layout.size[b];
  }
  return out;
}

const std::vector<double>& profile_extract(const PathRecord& record, double t) {
  for (std::size_t k = 0; k < record.snapshot_times.size(); ++k) {
    if (std::abs(record.snapshot_times[k] - t) <= 1e-12 * std::max(1.0, std::abs(t))) {
      return record.snapshots[k];
    }
  }
  throw std::out_of_range("no snapshot at t=" + std::to_string(t));
}

ReplicaSummary run_replicas(const SimConfig& cfg, const Profile& rho0, const TiltSchedule& tilt) {
  cfg.validate();
  const int r = cfg.replica_count;
  std::vector<PathRecord> records(r);
  std::unique_ptr<TiltTables> tables;
  if (!tilt.is_zero()) {
    tables = std::make_unique<TiltTables>(cfg.params, tilt, cfg.horizon);
  }
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  const auto worker = [&]() {
    while (true) {
      const int i = next.fetch_add(1);
      if (i >= r) return;
      try {
        Rng rng(replica_seed(cfg.seed, static_cast<std::uint64_t>(i)));
        const Config eta0 = sample_product_measure(cfg.params, rho0, rng);
        Simulator sim(cfg, eta0, tables ? &tilt : nullptr, tables.get());
        PathRecord rec = sim.run(rng);
        rec.jump_times.clear();
        rec.events.clear();
        records[i] = std::move(rec);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = r;
        return;
      }
    }
  };
  const int threads = std::min(cfg.threads, r);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  ReplicaSummary s;
  s.replicas = r;
  s.snapshot_times = records[0].snapshot_times;
  const std::size_t snaps = s.snapshot_times.size();
  const std::size_t boxes = snaps ? records[0].snapshots[0].size() : 0;
  s.mean.assign(snaps, std::vector<double>(boxes, 0.0));
  s.stderr_.assign(snaps, std::vector<double>(boxes, 0.0));
  for (std::size_t k = 0; k < snaps; ++k) {
    for (std::size_t b = 0; b < boxes; ++b) {
      double sum = 0.0;
      double sq = 0.0;
      for (const auto& rec : records) {
        const double v = rec.snapshots[k][b];
        sum += v;
        sq += v * v;
      }
      const double mean = sum / r;
      s.mean[k][b] = mean;
      const double var = r > 1 ? std::max(sq - r * mean * mean, 0.0) / (r - 1) : 0.0;
      s.stderr_[k][b] = std::sqrt(var / r);
    }
  }
  double sum = 0.0;
  double sq = 0.0;
  for (const auto& rec : records) {
    s.log_rn.push_back(rec.log_rn);
    s.total_events += rec.event_count;
    sum += rec.log_rn;
    sq += rec.log_rn * rec.log_rn;
  }
  s.log_rn_mean = sum / r;
  const double var = r > 1 ? std::max(sq - r * s.log_rn_mean * s.log_rn_mean, 0.0) / (r - 1) : 0.0;
  s.log_rn_stderr = std::sqrt(var / r);
  return s;
}

}  // namespace gsep
