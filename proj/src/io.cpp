#include "gsep/io.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "gsep/version.hpp"

namespace gsep {

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write " + path.string());
  }
  return out;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string version_string() { return kVersionString; }

Json to_json(const ModelParams& p) {
  return Json{{"a", p.a}, {"alpha", p.alpha}, {"beta", p.beta}, {"n_sites", p.n_sites}};
}

ModelParams params_from_json(const Json& j) {
  ModelParams p;
  p.a = j.value("a", p.a);
  p.alpha = j.value("alpha", p.alpha);
  p.beta = j.value("beta", p.beta);
  p.n_sites = j.value("n_sites", p.n_sites);
  return p;
}

Json to_json(const Grid& g) {
  return Json{{"cells", g.cells}, {"horizon", g.horizon}, {"frame_dt", g.frame_dt}, {"dt", g.dt}};
}

Json to_json(const RateBreakdown& r) {
  const auto num = [](double v) -> Json {
    if (std::isinf(v)) return "inf";
    return v;
  };
  Json j{{"method", to_string(r.method)},
         {"bulk", num(r.bulk)},
         {"left", num(r.left_boundary)},
         {"right", num(r.right_boundary)},
         {"total", num(r.total)},
         {"converged", r.converged},
         {"iterations", r.iterations},
         {"final_gradient", r.final_gradient},
         {"epsilon", r.epsilon}};
  if (!r.reason.empty()) {
    j["reason"] = r.reason;
  }
  return j;
}

Json field_diagnostics(const DensityField& f) {
  return Json{{"cells", f.cells},
              {"frames", f.frames()},
              {"dt", f.dt},
              {"steps", f.steps},
              {"max_mass_residual", f.max_mass_residual},
              {"max_clip", f.max_clip},
              {"cfl_diffusive", f.cfl_diffusive},
              {"cfl_advective", f.cfl_advective}};
}

void write_field_csv(const std::filesystem::path& path, const DensityField& f) {
  auto out = open_out(path);
  out << "t,x,u\n";
  for (int k = 0; k < f.frames(); ++k) {
    const std::string t = fmt(f.times[k]);
    for (int i = 0; i < f.cells; ++i) {
      out << t << ',' << fmt(f.center(i)) << ',' << fmt(f.at(k, i)) << '\n';
    }
  }
}

DensityField read_field_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open " + path.string());
  }
  std::string line;
  std::vector<double> ts;
  std::vector<double> xs;
  std::vector<double> us;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    double t = 0.0;
    double x = 0.0;
    double u = 0.0;
    if (std::sscanf(line.c_str(), "%lf,%lf,%lf", &t, &x, &u) != 3) {
      if (ts.empty() && line_no == 1) continue;  // header
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": expected t,x,u");
    }
    ts.push_back(t);
    xs.push_back(x);
    us.push_back(u);
  }
  if (ts.empty()) {
    throw std::runtime_error(path.string() + " holds no data");
  }
  int cells = 0;
  while (cells < static_cast<int>(ts.size()) && ts[cells] == ts[0]) ++cells;
  if (cells < 3 || ts.size() % cells != 0) {
    throw std::runtime_error(path.string() + ": frames must share one grid of at least 3 cells");
  }
  DensityField f;
  f.cells = cells;
  f.values = us;
  const double dx = 2.0 / cells;
  for (std::size_t r = 0; r < ts.size(); ++r) {
    const int i = static_cast<int>(r % cells);
    if (i == 0) {
      f.times.push_back(ts[r]);
    } else if (ts[r] != f.times.back()) {
      throw std::runtime_error(path.string() + ": frame at t=" + fmt(f.times.back()) + " is incomplete");
    }
    if (std::abs(xs[r] - (-1.0 + (i + 0.5) * dx)) > 1e-9) {
      throw std::runtime_error(path.string() + ": x values must be the cell centres of a uniform grid");
    }
  }
  for (std::size_t k = 1; k < f.times.size(); ++k) {
    if (!(f.times[k] > f.times[k - 1])) {
      throw std::runtime_error(path.string() + ": frame times must increase");
    }
  }
  return f;
}

void write_profile_csv(const std::filesystem::path& path, const ReplicaSummary& s, const BoxLayout& layout,
                       int n_sites) {
  auto out = open_out(path);
  out << "t,box_center,mean_density,stderr\n";
  for (std::size_t k = 0; k < s.snapshot_times.size(); ++k) {
    for (int b = 0; b < layout.count(); ++b) {
      const auto [lo, hi] = layout.interval(b, n_sites);
      out << fmt(s.snapshot_times[k]) << ',' << fmt(0.5 * (lo + hi)) << ',' << fmt(s.mean[k][b]) << ','
          << fmt(s.stderr_[k][b]) << '\n';
    }
  }
}

void write_json(const std::filesystem::path& path, const Json& j) {
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

Json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open " + path.string());
  }
  return Json::parse(in);
}

std::string digest(const Json& j) {
  const std::string text = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string timestamp_utc() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
  return buf;
}

}  // namespace gsep
