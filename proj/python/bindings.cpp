#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/numpy.h>

#include "gsep/io.hpp"
#include "gsep/model.hpp"
#include "gsep/pde.hpp"
#include "gsep/profile.hpp"
#include "gsep/rate.hpp"
#include "gsep/sim.hpp"
#include "gsep/verify.hpp"

namespace py = pybind11;

namespace {

py::array_t<double> field_values(const gsep::DensityField& f) {
  py::array_t<double> out({f.frames(), f.cells});
  std::copy(f.values.begin(), f.values.end(), out.mutable_data());
  return out;
}

py::dict rate_dict(const gsep::RateBreakdown& r) {
  py::dict d;
  d["method"] = gsep::to_string(r.method);
  d["bulk"] = r.bulk;
  d["left"] = r.left_boundary;
  d["right"] = r.right_boundary;
  d["total"] = r.total;
  d["converged"] = r.converged;
  d["iterations"] = r.iterations;
  d["epsilon"] = r.epsilon;
  if (!r.reason.empty()) d["reason"] = r.reason;
  return d;
}

gsep::ModelParams make_params(double a, double alpha, double beta, int n) {
  gsep::ModelParams p{a, alpha, beta, n};
  p.validate();
  return p;
}

}  // namespace

PYBIND11_MODULE(_gsep, m) {
  m.doc() = "Boundary-driven gradient exclusion process: simulation, PDE solvers and rate functionals";
  m.attr("__version__") = gsep::version_string();

  py::register_exception<gsep::ModelError>(m, "ModelError", PyExc_ValueError);
  py::register_exception<gsep::CflError>(m, "CflError", PyExc_ValueError);
  py::register_exception<gsep::SchemeError>(m, "SchemeError", PyExc_RuntimeError);

  py::class_<gsep::ModelParams>(m, "ModelParams")
      .def(py::init(&make_params), py::arg("a") = 0.0, py::arg("alpha") = 0.5, py::arg("beta") = 0.5,
           py::arg("n_sites") = 2)
      .def_readwrite("a", &gsep::ModelParams::a)
      .def_readwrite("alpha", &gsep::ModelParams::alpha)
      .def_readwrite("beta", &gsep::ModelParams::beta)
      .def_readwrite("n_sites", &gsep::ModelParams::n_sites)
      .def("validate", &gsep::ModelParams::validate)
      .def("diffusivity", &gsep::ModelParams::diffusivity)
      .def("mobility", &gsep::ModelParams::mobility)
      .def("lattice_size", &gsep::ModelParams::lattice_size);

  py::class_<gsep::Grid>(m, "Grid")
      .def(py::init([](int cells, double horizon, double frame_dt, double dt) {
             gsep::Grid g{cells, horizon, frame_dt, dt};
             g.validate();
             return g;
           }),
           py::arg("cells") = 256, py::arg("horizon") = 1.0, py::arg("frame_dt") = 0.01, py::arg("dt") = 0.0)
      .def_readwrite("cells", &gsep::Grid::cells)
      .def_readwrite("horizon", &gsep::Grid::horizon)
      .def_readwrite("frame_dt", &gsep::Grid::frame_dt)
      .def_readwrite("dt", &gsep::Grid::dt);

  py::class_<gsep::DensityField>(m, "DensityField")
      .def_readonly("cells", &gsep::DensityField::cells)
      .def_readonly("times", &gsep::DensityField::times)
      .def_readonly("max_mass_residual", &gsep::DensityField::max_mass_residual)
      .def_readonly("max_clip", &gsep::DensityField::max_clip)
      .def_property_readonly("values", &field_values)
      .def("centers", [](const gsep::DensityField& f) {
        std::vector<double> xs(f.cells);
        for (int i = 0; i < f.cells; ++i) xs[i] = f.center(i);
        return xs;
      });

  m.def("bulk_exchange_rate",
        [](const gsep::ModelParams& p, const std::vector<int>& eta, int x) {
          return gsep::bulk_exchange_rate(p, gsep::Config::from_vector(p.n_sites, eta), x);
        },
        py::arg("params"), py::arg("eta"), py::arg("x"));
  m.def("instantaneous_current",
        [](const gsep::ModelParams& p, const std::vector<int>& eta, int x) {
          return gsep::instantaneous_current(p, gsep::Config::from_vector(p.n_sites, eta), x);
        },
        py::arg("params"), py::arg("eta"), py::arg("x"));
  m.def("gradient_form_current",
        [](const gsep::ModelParams& p, const std::vector<int>& eta, int x) {
          return gsep::gradient_form_current(p, gsep::Config::from_vector(p.n_sites, eta), x);
        },
        py::arg("params"), py::arg("eta"), py::arg("x"));

  m.def("stationary_profile",
        [](const gsep::ModelParams& p, const std::vector<double>& xs) {
          const auto s = gsep::stationary_profile(p);
          std::vector<double> out;
          out.reserve(xs.size());
          for (double x : xs) out.push_back(s.rho(x));
          return py::make_tuple(s.left, s.right, s.current, out);
        },
        py::arg("params"), py::arg("xs"));

  m.def("solve_hydro",
        [](const gsep::ModelParams& p, const gsep::Grid& g, const std::string& profile) {
          return gsep::solve_hydro(p, g, gsep::parse_profile(profile, p));
        },
        py::arg("params"), py::arg("grid"), py::arg("profile"));
  m.def("solve_tilted",
        [](const gsep::ModelParams& p, const gsep::Grid& g, const std::string& profile, const std::string& tilt) {
          return gsep::solve_tilted(p, g, gsep::parse_profile(profile, p), gsep::parse_tilt(tilt));
        },
        py::arg("params"), py::arg("grid"), py::arg("profile"), py::arg("tilt"));

  m.def("rate",
        [](const gsep::ModelParams& p, const gsep::DensityField& f, const std::string& method) {
          const auto traj = gsep::TrajectoryData::from_field(p, f);
          switch (gsep::parse_rate_method(method)) {
            case gsep::RateMethod::variational: return rate_dict(gsep::variational_rate(traj).rate);
            case gsep::RateMethod::decomposition: return rate_dict(gsep::decomposition_rate(traj).rate);
            case gsep::RateMethod::smooth_decomposition:
              return rate_dict(gsep::smooth_decomposition_rate(traj).rate);
            case gsep::RateMethod::explicit_formula: break;
          }
          return rate_dict(gsep::explicit_rate(traj).rate);
        },
        py::arg("params"), py::arg("field"), py::arg("method") = "explicit");

  m.def("simulate",
        [](const gsep::ModelParams& p, const std::string& profile, double horizon, int replicas,
           std::uint64_t seed, int boxes, const std::vector<double>& snapshot_times, const std::string& tilt,
           int threads) {
          gsep::SimConfig cfg;
          cfg.params = p;
          cfg.horizon = horizon;
          cfg.seed = seed;
          cfg.replica_count = replicas;
          cfg.profile_boxes = boxes;
          cfg.snapshot_times = snapshot_times;
          cfg.threads = threads;
          gsep::ReplicaSummary s;
          {
            py::gil_scoped_release release;
            s = gsep::run_replicas(cfg, gsep::parse_profile(profile, p),
                                   gsep::TiltSchedule::from(gsep::parse_tilt(tilt)));
          }
          py::dict d;
          d["snapshot_times"] = s.snapshot_times;
          d["mean"] = s.mean;
          d["stderr"] = s.stderr_;
          d["log_rn"] = s.log_rn;
          d["log_rn_mean"] = s.log_rn_mean;
          d["log_rn_stderr"] = s.log_rn_stderr;
          d["total_events"] = s.total_events;
          return d;
        },
        py::arg("params"), py::arg("profile"), py::arg("horizon"), py::arg("replicas") = 1,
        py::arg("seed") = 1, py::arg("boxes") = 0, py::arg("snapshot_times") = std::vector<double>{},
        py::arg("tilt") = "zero", py::arg("threads") = 1);

  m.def("equilibrium_check",
        [](const gsep::ModelParams& p) { return gsep::equilibrium_check(p).to_json().dump(); },
        py::arg("params"), "JSON report of the reversibility check");
}
