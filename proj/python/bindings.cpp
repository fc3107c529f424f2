#include "twr/harness.hpp"

#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

namespace py = pybind11;
using namespace twr;

namespace {

py::dict audit_dict(const AuditReport& r) {
    py::dict d;
    for (const auto& [name, c] : r.entries()) d[py::str(name)] = py::make_tuple(c.pass, c.residual);
    return d;
}

ChannelSet make_channels(const CMatrix& h1r, const CMatrix& h2r, const CMatrix& hr1, const CMatrix& hr2,
                         double sigma2_r, double sigma2_1, double sigma2_2) {
    ChannelSet ch{h1r, h2r, hr1, hr2, sigma2_r, sigma2_1, sigma2_2};
    ch.validate();
    return ch;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Power allocation for MIMO decode-and-forward two-way relaying";

    py::register_exception<InvalidInput>(m, "InvalidInput", PyExc_ValueError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

    py::enum_<SubcaseLabel>(m, "Subcase")
        .value("I_1", SubcaseLabel::I_1)
        .value("I_2", SubcaseLabel::I_2)
        .value("II_1", SubcaseLabel::II_1)
        .value("II_2", SubcaseLabel::II_2)
        .value("II_3", SubcaseLabel::II_3)
        .value("II_4", SubcaseLabel::II_4);

    py::class_<PowerLimits>(m, "PowerLimits")
        .def(py::init<double, double, double>(), py::arg("p1max"), py::arg("p2max"), py::arg("prmax"))
        .def_readwrite("p1max", &PowerLimits::p1max)
        .def_readwrite("p2max", &PowerLimits::p2max)
        .def_readwrite("prmax", &PowerLimits::prmax);

    py::class_<ChannelSet>(m, "ChannelSet")
        .def(py::init(&make_channels), py::arg("h1r"), py::arg("h2r"), py::arg("hr1"), py::arg("hr2"),
             py::arg("sigma2_r") = 1.0, py::arg("sigma2_1") = 1.0, py::arg("sigma2_2") = 1.0)
        .def_readonly("h1r", &ChannelSet::h1r)
        .def_readonly("h2r", &ChannelSet::h2r)
        .def_readonly("hr1", &ChannelSet::hr1)
        .def_readonly("hr2", &ChannelSet::hr2);

    m.def(
        "generate_channels",
        [](int n1, int n2, int nr, double v1, double v2, bool reciprocal, bool identical_sources, std::uint64_t seed) {
            ChannelSpec s;
            s.n1 = n1;
            s.n2 = n2;
            s.nr = nr;
            s.v1 = v1;
            s.v2 = v2;
            s.reciprocal = reciprocal;
            s.identical_sources = identical_sources;
            s.seed = seed;
            return generate_channels(s);
        },
        py::arg("n1"), py::arg("n2"), py::arg("nr"), py::arg("v1") = 1.0, py::arg("v2") = 1.0,
        py::arg("reciprocal") = false, py::arg("identical_sources") = false, py::arg("seed") = 0);

    py::class_<NetSolution>(m, "Solution")
        .def_property_readonly("subcase", [](const NetSolution& s) { return s.subcase.label; })
        .def_property_readonly("subcase_name", [](const NetSolution& s) { return subcase_name(s.subcase.label); })
        .def_property_readonly("route", [](const NetSolution& s) { return route_name(s.route); })
        .def_property_readonly("status", [](const NetSolution& s) { return status_name(s.status); })
        .def_property_readonly("r_tw", [](const NetSolution& s) { return s.rates.r_tw; })
        .def_property_readonly("r_ma", [](const NetSolution& s) { return s.rates.r_ma; })
        .def_property_readonly("r_bc_sum", [](const NetSolution& s) { return s.rates.bc_sum(); })
        .def_property_readonly("p1", [](const NetSolution& s) { return s.powers.p1; })
        .def_property_readonly("p2", [](const NetSolution& s) { return s.powers.p2; })
        .def_property_readonly("pr", [](const NetSolution& s) { return s.powers.pr; })
        .def_property_readonly("total_power", [](const NetSolution& s) { return s.powers.total(); })
        .def_property_readonly("d1", [](const NetSolution& s) { return s.d.d1; })
        .def_property_readonly("d2", [](const NetSolution& s) { return s.d.d2; })
        .def_property_readonly("b1", [](const NetSolution& s) { return s.relay.b1; })
        .def_property_readonly("b2", [](const NetSolution& s) { return s.relay.b2; })
        .def_readonly("bisection_iters", &NetSolution::bisection_iters)
        .def_readonly("bracket_width", &NetSolution::bracket_width)
        .def_readonly("exit_gap", &NetSolution::exit_gap)
        .def_property_readonly("trace_csv", [](const NetSolution& s) {
            std::ostringstream out;
            write_trace_csv(out, s);
            return out.str();
        });

    m.def(
        "network_optimize",
        [](const ChannelSet& ch, const PowerLimits& lim, double eps, bool one_shot) {
            NetOptions o;
            o.eps = eps;
            o.allow_one_shot = one_shot;
            return network_optimize(ch, lim, o);
        },
        py::arg("channels"), py::arg("limits"), py::arg("eps") = 1e-6, py::arg("one_shot") = true);

    m.def("bisection_bound", &bisection_bound, py::arg("width"), py::arg("eps"));

    m.def(
        "audit",
        [](const ChannelSet& ch, const PowerLimits& lim, const NetSolution& s) {
            const AuditReport r = check_necessary(ch, lim, s);
            return py::make_tuple(r.all_pass(), audit_dict(r));
        },
        py::arg("channels"), py::arg("limits"), py::arg("solution"),
        "Returns (all_pass, {check: (pass, residual)}) over the applicable checks.");

    m.def(
        "scalar_oracle",
        [](const ChannelSet& ch, const PowerLimits& lim, int steps) {
            const OracleResult o = scalar_oracle(ch, lim, steps);
            py::dict d;
            d["p1"] = o.p1;
            d["p2"] = o.p2;
            d["q1"] = o.q1;
            d["q2"] = o.q2;
            d["r_tw"] = o.r_tw;
            d["total_power"] = o.total_power;
            d["modulus"] = o.modulus;
            return d;
        },
        py::arg("channels"), py::arg("limits"), py::arg("steps") = 200);

    m.def(
        "run_sweep_csv",
        [](const std::string& config_text, int jobs) {
            std::istringstream in(config_text);
            const RunConfig cfg = parse_config(in);
            std::vector<SweepCell> cells;
            {
                py::gil_scoped_release release;
                cells = run_sweep(cfg, jobs);
            }
            std::ostringstream out;
            write_sweep_csv(out, cfg, cells);
            return out.str();
        },
        py::arg("config_text"), py::arg("jobs") = 1, "Runs a sweep described by config text; returns the CSV.");
}
