// Python module _rbnlab: configs, experiment runs, fBM sampling and the regime table.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "rbn/fbm.hpp"
#include "rbn/sde.hpp"
#include "rbn/xlab.hpp"

namespace py = pybind11;
using namespace rbn;

namespace {

xlab::Json from_py(const py::object& obj) {
    return xlab::Json::parse(py::module_::import("json").attr("dumps")(obj).cast<std::string>());
}

py::object to_py(const xlab::Json& j) {
    return py::module_::import("json").attr("loads")(j.dump());
}

}  // namespace

PYBIND11_MODULE(_rbnlab, m) {
    m.doc() = "Regularization-by-noise numerical laboratory";

    py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
    py::register_exception<NumericalFailure>(m, "NumericalFailure", PyExc_RuntimeError);
    py::register_exception<RegimeRefusal>(m, "RegimeRefusal", PyExc_RuntimeError);
    // Attach the machine-readable reason tag; intentionally leaked, lives as long as the interpreter.
    static const py::handle refusal_type = py::object(m.attr("RegimeRefusal")).release();
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const RegimeRefusal& e) {
            py::object exc = py::reinterpret_borrow<py::object>(refusal_type)(e.what());
            exc.attr("reason") = e.reason();
            PyErr_SetObject(refusal_type.ptr(), exc.ptr());
        }
    });

    m.def("version", &xlab::software_version);
    m.def("kinds", [] {
        std::vector<std::string> out;
        for (const auto k : xlab::all_kinds()) out.push_back(xlab::to_string(k));
        return out;
    });
    m.def("default_config", [](const std::string& kind) {
        return to_py(xlab::to_json(xlab::default_config(xlab::parse_kind(kind))));
    }, py::arg("kind"));
    m.def("config_hash", [](const py::object& cfg) {
        return xlab::config_hash(xlab::parse_config(from_py(cfg)));
    }, py::arg("config"));
    m.def("run_experiment", [](const py::object& cfg, const std::string& out, unsigned threads) {
        auto c = xlab::parse_config(from_py(cfg));
        c.out = out;
        c.threads = threads;
        xlab::ExperimentReport rep;
        {
            py::gil_scoped_release release;
            rep = xlab::run_experiment(c);
        }
        return to_py(rep.to_json());
    }, py::arg("config"), py::arg("out"), py::arg("threads") = 0,
       "Runs an experiment and returns its report as a dict.");

    m.def("classify_regime", [](double h, std::size_t d, double p) {
        const auto r = sde::classify_regime(h, d, p);
        return py::make_tuple(sde::to_string(r.verdict), r.margin);
    }, py::arg("h"), py::arg("d"), py::arg("p"), "Returns (verdict, margin).");

    m.def("sample_fbm", [](double h, std::size_t n_steps, double horizon, std::size_t n_paths,
                           std::size_t dim, std::uint64_t seed) {
        const fbm::TimeGrid grid(horizon, n_steps);
        std::vector<fbm::FbmPath> paths;
        {
            py::gil_scoped_release release;
            paths = fbm::sample_fbm(fbm::HurstParameter(h), grid, n_paths, dim, seed);
        }
        py::array_t<double> out({n_paths, grid.size(), dim});
        auto* dst = out.mutable_data();
        for (const auto& p : paths) dst = std::copy(p.values.begin(), p.values.end(), dst);
        return out;
    }, py::arg("h"), py::arg("n_steps"), py::arg("horizon") = 1.0, py::arg("n_paths") = 1,
       py::arg("dim") = 1, py::arg("seed") = 1,
       "Array of shape (n_paths, n_steps + 1, dim); identical for any thread count.");

    m.def("fbm_covariance", [](double h, double s, double t) {
        return fbm::fbm_covariance(fbm::HurstParameter(h), s, t);
    }, py::arg("h"), py::arg("s"), py::arg("t"));

    m.def("set_thread_count", &set_thread_count, py::arg("n"));
}
