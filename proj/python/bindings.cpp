// Python bindings for the main operations: config runs, selftest, compare,
// closed-form integrand elements and the exact-diagonalization oracle.

#include <pybind11/complex.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <filesystem>
#include <tuple>

#include "fkpf/acceptance.hpp"
#include "fkpf/harness.hpp"
#include "fkpf/integrand.hpp"
#include "fkpf/oracle.hpp"
#include "fkpf/semigroup.hpp"

namespace py = pybind11;
using namespace fkpf;

namespace {

using Atom = std::tuple<double, cplx, std::vector<cplx>>;

OneBosonVector to_vec(const std::vector<cplx>& v) {
    return OneBosonVector(Eigen::Map<const VecC>(v.data(), static_cast<Eigen::Index>(v.size())));
}

IntegrandInputs inputs(double t, cplx S, const std::vector<double>& omega, const std::vector<Atom>& atoms) {
    const OneBosonSpace space(omega);
    NelsonVector K(omega.size());
    for (const auto& [s, c, v] : atoms) {
        if (v.size() != omega.size()) throw DimensionMismatch("atom vector length vs mode count");
        K.add(s, c, to_vec(v));
    }
    return IntegrandInputs(t, S, std::move(K), space);
}

py::dict row_dict(const ResultRow& r) {
    py::dict d;
    d["experiment"] = r.experiment;
    d["quantity"] = r.quantity;
    d["param"] = r.param;
    d["x"] = r.x;
    d["y"] = r.y;
    d["t"] = r.t;
    d["value"] = cplx(r.re, r.im);
    d["stderr"] = r.stderr_;
    d["n"] = r.n;
    d["seed"] = r.seed;
    d["config_hash"] = r.config_hash;
    return d;
}

py::dict criterion_dict(const CriterionResult& c) {
    py::dict d;
    d["id"] = c.id;
    d["name"] = c.name;
    d["passed"] = c.pass;
    d["detail"] = c.detail;
    d["seconds"] = c.seconds;
    return d;
}

py::dict run_dict(const ExperimentConfig& cfg, const RunResult& r) {
    py::list rows, crit;
    for (const auto& row : r.rows) rows.append(row_dict(row));
    for (const auto& c : r.criteria) crit.append(criterion_dict(c));
    py::dict d;
    d["hash"] = cfg.hash;
    d["rows"] = rows;
    d["criteria"] = crit;
    d["files"] = r.files;
    d["manifest"] = r.manifest;
    d["ok"] = r.ok;
    d["csv"] = csv_string(r.rows);
    return d;
}

py::dict run_config(const ExperimentConfig& cfg, const std::string& out_dir, unsigned workers, bool write_files) {
    RunOptions o;
    o.out_dir = out_dir;
    o.workers = workers;
    o.write_files = write_files;
    RunResult r;
    {
        py::gil_scoped_release nogil;
        r = run_experiment(cfg, o);
    }
    return run_dict(cfg, r);
}

}  // namespace

PYBIND11_MODULE(_fkpf, m) {
    m.doc() = "Feynman-Kac Monte Carlo engine and exact-diagonalization oracle";

    // Translators run newest first, so the base class goes first.
    py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<SchemaError>(m, "SchemaError", PyExc_ValueError);
    py::register_exception<IOError>(m, "IOError", PyExc_OSError);
    py::register_exception<ResourceLimit>(m, "ResourceLimit", PyExc_MemoryError);

    m.def("version", &version_string);

    m.def(
        "run",
        [](const std::string& path, const std::string& out_dir, unsigned workers, bool write_files) {
            return run_config(load_config(path), out_dir, workers, write_files);
        },
        py::arg("config"), py::arg("out_dir") = "", py::arg("workers") = 0u, py::arg("write_files") = true,
        "Run the experiment in a JSON config file.");
    m.def(
        "run_text",
        [](const std::string& text, const std::string& base_dir, const std::string& out_dir, unsigned workers,
           bool write_files) { return run_config(parse_config(text, base_dir), out_dir, workers, write_files); },
        py::arg("text"), py::arg("base_dir") = ".", py::arg("out_dir") = "", py::arg("workers") = 0u,
        py::arg("write_files") = false, "Run an experiment given as JSON text.");
    m.def(
        "config_hash", [](const std::string& text, const std::string& base_dir) { return parse_config(text, base_dir).hash; },
        py::arg("text"), py::arg("base_dir") = ".");

    m.def(
        "selftest",
        [](std::vector<int> only, std::uint64_t seed, unsigned workers) {
            AcceptanceOptions o;
            o.only = std::move(only);
            o.seed = seed;
            o.workers = workers;
            std::vector<CriterionResult> res;
            {
                py::gil_scoped_release nogil;
                res = run_acceptance(o);
            }
            py::list out;
            for (const auto& c : res) out.append(criterion_dict(c));
            return out;
        },
        py::arg("only") = std::vector<int>{}, py::arg("seed") = AcceptanceOptions{}.seed, py::arg("workers") = 0u);

    m.def(
        "compare",
        [](const std::string& a, const std::string& b, const std::string& tol) {
            const auto rep = compare_files(a, b, tol);
            py::list rows;
            for (const auto& v : rep.rows) {
                py::dict d;
                d["key"] = v.key;
                d["passed"] = v.pass;
                d["missing"] = v.missing;
                d["abs_diff"] = v.abs_diff;
                d["z"] = v.z;
                d["reason"] = v.reason;
                rows.append(d);
            }
            py::dict d;
            d["passed"] = rep.pass;
            d["rows"] = rows;
            return d;
        },
        py::arg("a"), py::arg("b"), py::arg("tolspec"));

    m.def(
        "w_kernel",
        [](double t, cplx S, const std::vector<double>& omega, const std::vector<Atom>& atoms, const std::vector<cplx>& u,
           const std::vector<cplx>& g) { return w_kernel_matrix_element(inputs(t, S, omega, atoms), to_vec(u), to_vec(g)); },
        py::arg("t"), py::arg("S"), py::arg("omega"), py::arg("atoms"), py::arg("u"), py::arg("g"),
        "Kernel integrand element <e(u), W e(g)>; atoms are (time, weight, vector).");
    m.def(
        "w_star",
        [](double t, cplx S, const std::vector<double>& omega, const std::vector<Atom>& atoms, const std::vector<cplx>& u,
           const std::vector<cplx>& g) { return w_star_matrix_element(inputs(t, S, omega, atoms), to_vec(u), to_vec(g)); },
        py::arg("t"), py::arg("S"), py::arg("omega"), py::arg("atoms"), py::arg("u"), py::arg("g"));
    m.def(
        "gmm_element",
        [](double t, cplx S, const std::vector<double>& omega, const std::vector<Atom>& atoms, const std::vector<cplx>& u,
           const std::vector<cplx>& g, int cutoff) {
            const auto inp = inputs(t, S, omega, atoms);
            return gmm_matrix_element(inp, NumberBasisSpace(inp.space, cutoff), to_vec(u), to_vec(g));
        },
        py::arg("t"), py::arg("S"), py::arg("omega"), py::arg("atoms"), py::arg("u"), py::arg("g"), py::arg("cutoff"),
        "Same element evaluated in the truncated number basis.");

    m.def(
        "heat_kernel",
        [](double t, const std::vector<double>& x, const std::vector<double>& y) { return heat_kernel(t, x, y); },
        py::arg("t"), py::arg("x"), py::arg("y"));

    m.def(
        "spectrum",
        [](const std::string& text, const std::string& base_dir, std::size_t count) {
            const auto cfg = parse_config(text, base_dir);
            if (!cfg.oracle.enabled) throw SchemaError("spectrum needs an oracle section");
            const NumberBasisSpace ns(OneBosonSpace(cfg.omega), cfg.oracle.cutoff);
            std::vector<double> out;
            {
                py::gil_scoped_release nogil;
                const auto op = build_pauli_fierz(cfg.oracle.grid, cfg.domain, cfg.coeffs, ns);
                const auto sp = decompose(op);
                for (Eigen::Index i = 0; i < sp.eigenvalues.size() && out.size() < count; ++i)
                    out.push_back(sp.eigenvalues[i]);
            }
            return out;
        },
        py::arg("text"), py::arg("base_dir") = ".", py::arg("count") = 10,
        "Lowest eigenvalues of the discretized operator described by a config's oracle section.");
}
