#include "trialsim/calibration.hpp"
#include "trialsim/io/batch_store.hpp"
#include "trialsim/io/config.hpp"
#include "trialsim/io/serialize.hpp"
#include "trialsim/metrics.hpp"
#include "trialsim/version.hpp"

#include <pybind11/functional.h>
#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace trialsim;

namespace {

struct Design {
    std::string name;
    ValidatedSpec spec;
};

std::vector<Design> designs_of(std::vector<io::DesignConfig> configs) {
    std::vector<Design> out;
    for (auto& c : configs) out.push_back({c.name, std::move(c.spec)});
    return out;
}

py::dict arm_dict(const ArmResult& a, const std::string& name) {
    py::dict d;
    d["arm"] = name;
    d["n"] = a.n;
    d["sum_ys"] = a.sum_ys;
    d["raw_estimate"] = a.raw_estimate;
    d["posterior_estimate"] = a.posterior_estimate;
    d["posterior_mad_sd"] = a.posterior_mad_sd;
    d["status"] = std::string(to_string(a.status));
    d["status_look"] = a.status_look;
    d["active_at_end"] = a.active_at_end;
    return d;
}

}  // namespace

PYBIND11_MODULE(_trialsim, m) {
    m.doc() = "Bayesian adaptive trial simulation engine";

    py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
    py::register_exception<io::ConfigError>(m, "ConfigError", PyExc_ValueError);

    py::class_<Design>(m, "Design")
        .def_readonly("name", &Design::name)
        .def_property_readonly("arms", [](const Design& d) { return d.spec.spec().arms; })
        .def_property_readonly("true_ys", [](const Design& d) { return d.spec.true_ys(); })
        .def_property_readonly("fingerprint", [](const Design& d) { return io::fingerprint(d.spec); })
        .def("with_superiority",
             [](const Design& d, double x) { return Design{d.name, with_symmetric_thresholds(d.spec, x)}; },
             py::arg("superiority"), "Copy with superiority x and inferiority 1 - x at every look.")
        .def("to_json", [](const Design& d) { return io::spec_to_json(d.spec).dump(2); })
        .def("__repr__", [](const Design& d) { return "<Design " + d.name + ">"; });

    py::class_<TrialResult>(m, "TrialResult")
        .def_property_readonly("status", [](const TrialResult& r) { return std::string(to_string(r.final_status)); })
        .def_readonly("superior_arm", &TrialResult::superior_arm)
        .def_readonly("final_look", &TrialResult::final_look)
        .def_readonly("n_total", &TrialResult::n_total)
        .def_readonly("final_control", &TrialResult::final_control)
        .def_property_readonly("arms",
                               [](const TrialResult& r) {
                                   py::list out;
                                   for (std::size_t a = 0; a < r.arms.size(); ++a) {
                                       out.append(arm_dict(r.arms[a], std::to_string(a)));
                                   }
                                   return out;
                               })
        .def(py::self == py::self);

    m.def("load_config", [](const std::filesystem::path& path) { return designs_of(io::parse_config(path)); },
          py::arg("path"), "Designs defined in a YAML config file.");
    m.def("parse_config",
          [](const std::string& text) { return designs_of(io::parse_config_string(text)); }, py::arg("text"));

    m.def(
        "simulate",
        [](const Design& d, std::uint64_t n_rep, std::uint64_t seed, int workers) {
            py::gil_scoped_release release;
            return io::run_batch(d.spec, n_rep, seed, workers, std::nullopt, d.name);
        },
        py::arg("design"), py::arg("n_rep"), py::arg("seed") = 4131, py::arg("workers") = 0,
        "Simulates trials on streams 0..n_rep-1 of one seed.");

    m.def(
        "summarize",
        [](const std::vector<TrialResult>& results, const Design& d, const std::string& select, int n_boot,
           std::uint64_t boot_seed) {
            SummaryOptions o;
            o.select = SelectionStrategy::parse(select);
            o.n_boot = n_boot;
            o.boot_seed = boot_seed;
            const auto s = summarize_batch(results, d.spec, o);
            py::dict out;
            for (std::size_t i = 0; i < s.names.size(); ++i) {
                out[py::str(s.names[i])] = s.values[i].estimate ? py::cast(*s.values[i].estimate) : py::none();
            }
            return out;
        },
        py::arg("results"), py::arg("design"), py::arg("select") = "none", py::arg("n_boot") = 0,
        py::arg("boot_seed") = 0, "Performance metrics by name; None where undefined.");

    m.def(
        "calibrate",
        [](const std::function<double(double)>& f, double target, double lo, double hi, double tol, int dir,
           int iter_max) {
            CalibrationSettings s;
            s.target = target;
            s.range_lo = lo;
            s.range_hi = hi;
            s.tol = tol;
            s.dir = dir;
            s.iter_max = iter_max;
            const auto out = calibrate(f, s);
            py::dict d;
            d["success"] = out.success;
            d["best_x"] = out.best_x;
            d["best_y"] = out.best_y;
            std::vector<std::pair<double, double>> evals;
            for (const auto& e : out.evaluations) evals.emplace_back(e.x, e.y);
            d["evaluations"] = evals;
            return d;
        },
        py::arg("f"), py::arg("target"), py::arg("lo"), py::arg("hi"), py::arg("tol") = 0.001, py::arg("dir") = 0,
        py::arg("iter_max") = 25, "Finds x in [lo, hi] with f(x) within tol of target.");

    m.def("sqrt_control_prob", &sqrt_control_prob, py::arg("n_noncontrol_active"));
    m.def("beta_params_from_mean_var", &beta_params_from_mean_var, py::arg("mean"), py::arg("var"));
    m.def("pooled_prior_effective_n", &pooled_prior_effective_n, py::arg("prior_sd"), py::arg("pooled_rate"));
    m.def(
        "idp",
        [](const std::vector<double>& counts, const std::vector<double>& ys, bool highest_is_best) {
            return idp(counts, ys, highest_is_best);
        },
        py::arg("selection_counts"), py::arg("true_ys"), py::arg("highest_is_best") = false);
    m.def("version", [] { return std::string(kEngineVersion); });
}
