#include "fkpf/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "fkpf/acceptance.hpp"
#include "fkpf/parallel.hpp"

#ifndef FKPF_VERSION
#define FKPF_VERSION "0.0.0"
#endif

namespace fkpf {

using json = nlohmann::json;
namespace fs = std::filesystem;

std::string version_string() { return FKPF_VERSION; }

std::string to_string(ExperimentKind k) {
    switch (k) {
        case ExperimentKind::Semigroup: return "semigroup";
        case ExperimentKind::Kernel: return "kernel";
        case ExperimentKind::Diamagnetic: return "diamagnetic";
        case ExperimentKind::PenaltySweep: return "penalty-sweep";
        case ExperimentKind::MollifyConverge: return "mollify-converge";
        case ExperimentKind::Selftest: return "selftest";
    }
    return "?";
}

namespace {

// ---------------------------------------------------------------- schema reader

// Object view that records which keys were read; finish() rejects the rest.
class Obj {
public:
    Obj(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) fail("expected an object");
    }

    [[noreturn]] void fail(const std::string& what) const { throw SchemaError(path_ + ": " + what); }

    bool has(const std::string& k) const { return j_.contains(k); }

    const json& raw(const std::string& k) {
        used_.insert(k);
        if (!j_.contains(k)) fail("missing required key '" + k + "'");
        return j_.at(k);
    }

    Obj sub(const std::string& k) { return Obj(raw(k), path_ + "." + k); }

    double number(const std::string& k) {
        const json& v = raw(k);
        if (!v.is_number()) fail("'" + k + "' must be a number");
        return v.get<double>();
    }
    double number(const std::string& k, double dflt) { return has(k) ? number(k) : dflt; }

    std::int64_t integer(const std::string& k) {
        const json& v = raw(k);
        if (!v.is_number_integer()) fail("'" + k + "' must be an integer");
        return v.get<std::int64_t>();
    }
    std::int64_t integer(const std::string& k, std::int64_t dflt) { return has(k) ? integer(k) : dflt; }

    std::uint64_t unsigned_integer(const std::string& k, std::uint64_t dflt) {
        if (!has(k)) return dflt;
        const json& v = raw(k);
        if (!v.is_number_unsigned()) fail("'" + k + "' must be a nonnegative integer");
        return v.get<std::uint64_t>();
    }

    bool boolean(const std::string& k, bool dflt) {
        if (!has(k)) return dflt;
        const json& v = raw(k);
        if (!v.is_boolean()) fail("'" + k + "' must be true or false");
        return v.get<bool>();
    }

    std::string string(const std::string& k) {
        const json& v = raw(k);
        if (!v.is_string()) fail("'" + k + "' must be a string");
        return v.get<std::string>();
    }
    std::string string(const std::string& k, const std::string& dflt) { return has(k) ? string(k) : dflt; }

    std::vector<double> numbers(const std::string& k) {
        const json& v = raw(k);
        if (v.is_number()) return {v.get<double>()};
        if (!v.is_array()) fail("'" + k + "' must be a number or an array of numbers");
        std::vector<double> out;
        for (const auto& e : v) {
            if (!e.is_number()) fail("'" + k + "' must contain numbers only");
            out.push_back(e.get<double>());
        }
        return out;
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!used_.count(it.key())) fail("unknown key '" + it.key() + "'");
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> used_;
};

cplx parse_complex(const json& v, const std::string& where) {
    if (v.is_number()) return {v.get<double>(), 0.0};
    if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number())
        return {v[0].get<double>(), v[1].get<double>()};
    throw SchemaError(where + ": expected a number or a [re, im] pair");
}

OneBosonVector parse_field(const json& v, const std::string& where, std::size_t modes) {
    if (!v.is_array()) throw SchemaError(where + ": expected an array of amplitudes");
    if (v.size() != modes)
        throw SchemaError(where + ": has " + std::to_string(v.size()) + " amplitudes for " + std::to_string(modes) +
                          " modes");
    VecC a(static_cast<Eigen::Index>(modes));
    for (std::size_t m = 0; m < modes; ++m) a[static_cast<Eigen::Index>(m)] = parse_complex(v[m], where);
    return OneBosonVector(a);
}

std::vector<double> parse_point(const json& v, const std::string& where, int dim) {
    std::vector<double> p;
    if (v.is_number())
        p = {v.get<double>()};
    else if (v.is_array())
        for (const auto& e : v) {
            if (!e.is_number()) throw SchemaError(where + ": coordinates must be numbers");
            p.push_back(e.get<double>());
        }
    else
        throw SchemaError(where + ": expected a point");
    if (static_cast<int>(p.size()) != dim)
        throw SchemaError(where + ": point has " + std::to_string(p.size()) + " coordinates, dim is " +
                          std::to_string(dim));
    return p;
}

Domain parse_domain(Obj o, int dim) {
    const std::string kind = o.string("kind");
    Domain d = Domain::all_space(dim);
    if (kind == "all_space") {
        d = Domain::all_space(dim);
    } else if (kind == "interval") {
        if (dim != 1) o.fail("interval domains need dim = 1");
        const double lo = o.number("lo"), hi = o.number("hi");
        if (!(lo < hi)) o.fail("interval needs lo < hi");
        d = Domain::interval(lo, hi);
    } else if (kind == "box") {
        auto lo = o.numbers("lo"), hi = o.numbers("hi");
        if (static_cast<int>(lo.size()) != dim || static_cast<int>(hi.size()) != dim) o.fail("box corners must have dim entries");
        d = Domain::box(lo, hi);
    } else if (kind == "ball") {
        auto c = o.numbers("center");
        if (static_cast<int>(c.size()) != dim) o.fail("ball center must have dim entries");
        const double r = o.number("radius");
        if (!(r > 0.0)) o.fail("ball radius must be positive");
        d = Domain::ball(c, r);
    } else if (kind == "half_space") {
        auto n = o.numbers("normal");
        if (static_cast<int>(n.size()) != dim) o.fail("half-space normal must have dim entries");
        d = Domain::half_space(n, o.number("offset"));
    } else {
        o.fail("unknown domain kind '" + kind + "'");
    }
    const double margin = o.number("margin", 0.0);
    if (margin < 0.0) o.fail("margin must be nonnegative");
    if (margin > 0.0) d = d.with_margin(margin);
    o.finish();
    return d;
}

std::vector<double> profile_or_ones(Obj& o, std::size_t modes) {
    if (!o.has("profile")) return std::vector<double>(modes, 1.0);
    auto p = o.numbers("profile");
    if (p.size() != modes) o.fail("profile must have one entry per mode");
    return p;
}

Coefficients parse_builtin(Obj o, const std::string& name, int dim, std::size_t modes) {
    Coefficients c;
    if (name == "zero") {
        c = Coefficients::zero(dim, modes);
    } else if (name == "constant_A") {
        auto a = o.numbers("a");
        if (static_cast<int>(a.size()) != dim) o.fail("constant_A needs dim components");
        c = builtin::constant_A(a, modes);
    } else if (name == "constant_V") {
        c = builtin::constant_V(dim, modes, o.number("c"));
    } else if (name == "bump_coupling") {
        c = builtin::bump_coupling(dim, profile_or_ones(o, modes), o.number("g"), o.number("radius", 1.0));
    } else if (name == "smooth_trig") {
        if (dim != 1) o.fail("smooth_trig is one-dimensional");
        c = builtin::smooth_trig(profile_or_ones(o, modes), o.number("a_amp"), o.number("g"));
    } else if (name == "constant_G") {
        c = builtin::constant_G(dim, profile_or_ones(o, modes), o.number("g"));
    } else if (name == "singular_A") {
        // A_j(x) = amp |x|^p on every axis, optionally with a bump coupling.
        const double p = o.number("exponent", -0.25), amp = o.number("amp", 1.0);
        if (!(p > -0.5)) o.fail("singular_A needs exponent > -1/2 (locally square integrable)");
        const double g = o.number("g", 0.0), radius = o.number("radius", 1.0);
        c = g != 0.0 ? builtin::bump_coupling(dim, profile_or_ones(o, modes), g, radius) : Coefficients::zero(dim, modes);
        c.A = [p, amp](std::span<const double> x, std::span<double> out) {
            double r2 = 0.0;
            for (double v : x) r2 += v * v;
            const double v = amp * std::pow(std::sqrt(r2), p);
            for (auto& e : out) e = v;
        };
        c.divA = nullptr;
        c.smoothness = Smoothness::Singular;
        std::ostringstream os;
        os.precision(17);
        os << "singular_A(p=" << p << ",amp=" << amp << ",g=" << g << ")";
        c.name = os.str();
    } else {
        o.fail("unknown builtin coefficients '" + name + "'");
    }
    if (o.has("potential")) {
        Obj v = o.sub("potential");
        const double k0 = v.number("constant", 0.0), k2 = v.number("harmonic", 0.0);
        v.finish();
        auto base = c.V;
        c.V = [base, k0, k2](std::span<const double> x) {
            double r2 = 0.0;
            for (double e : x) r2 += e * e;
            return (base ? base(x) : 0.0) + k0 + k2 * r2;
        };
        std::ostringstream os;
        os.precision(17);
        os << c.name << "+V(" << k0 << "," << k2 << ")";
        c.name = os.str();
    }
    o.finish();
    return c;
}

std::string file_digest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IOError("cannot read '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return fnv1a_hex(ss.str());
}

GridSpec parse_grid(Obj o, int dim) {
    GridSpec g;
    g.dim = dim;
    g.lo = o.numbers("lo");
    g.hi = o.numbers("hi");
    for (double p : o.numbers("points")) {
        if (p != std::floor(p)) o.fail("grid points must be integers");
        g.points.push_back(static_cast<int>(p));
    }
    if (g.points.size() == 1 && dim > 1) g.points.assign(static_cast<std::size_t>(dim), g.points[0]);
    if (static_cast<int>(g.lo.size()) != dim || static_cast<int>(g.hi.size()) != dim ||
        static_cast<int>(g.points.size()) != dim)
        o.fail("grid lo, hi and points need dim entries");
    o.finish();
    try {
        g.validate();
    } catch (const InvalidArgument& e) {
        throw SchemaError(std::string("oracle.grid: ") + e.what());
    }
    return g;
}

void parse_mc(Obj o, MCConfig& mc) {
    mc.samples = static_cast<std::size_t>(o.unsigned_integer("samples", mc.samples));
    mc.steps = static_cast<int>(o.integer("steps", mc.steps));
    mc.seed = o.unsigned_integer("seed", mc.seed);
    mc.antithetic = o.boolean("antithetic", false);
    mc.block = static_cast<std::size_t>(o.unsigned_integer("block", mc.block));
    const std::string bridge = o.string("bridge", "exact");
    if (bridge == "exact")
        mc.bridge = BridgeMethod::Exact;
    else if (bridge == "euler")
        mc.bridge = BridgeMethod::Euler;
    else
        o.fail("bridge must be 'exact' or 'euler'");
    if (o.has("gating")) {
        Obj g = o.sub("gating");
        const std::string kind = g.string("kind", "indicator");
        if (kind == "indicator")
            mc.gating.kind = GatingKind::Indicator;
        else if (kind == "penalty")
            mc.gating.kind = GatingKind::Penalty;
        else if (kind == "confined")
            mc.gating.kind = GatingKind::Confined;
        else
            g.fail("gating kind must be indicator, penalty or confined");
        const std::string corr = g.string("correction", "none");
        if (corr == "none")
            mc.gating.correction = ExitCorrection::None;
        else if (corr == "weighted")
            mc.gating.correction = ExitCorrection::Weighted;
        else if (corr == "sampled")
            mc.gating.correction = ExitCorrection::Sampled;
        else
            g.fail("correction must be none, weighted or sampled");
        mc.gating.kappa = g.number("kappa", 1.0);
        mc.gating.n_cap = g.number("n_cap", std::numeric_limits<double>::infinity());
        mc.gating.shell_term = g.boolean("shell", false);
        g.finish();
    }
    o.finish();
    try {
        mc.validate();
    } catch (const InvalidArgument& e) {
        throw SchemaError(std::string("mc: ") + e.what());
    }
}

// Canonical copy of the config: output section and worker settings removed,
// table files replaced by their content digest.
json canonical_json(json j, const std::string& table_digest) {
    j.erase("output");
    if (j.contains("mc") && j["mc"].is_object()) j["mc"].erase("workers");
    if (!table_digest.empty()) j["coefficients"]["table"] = table_digest;
    return j;
}

}  // namespace

Model ExperimentConfig::model() const { return Model{coeffs, OneBosonSpace(omega), domain}; }

ExperimentConfig parse_config(const std::string& text, const std::string& base_dir) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw SchemaError(std::string("config is not valid JSON: ") + e.what());
    }
    Obj o(root, "config");
    ExperimentConfig c;
    json canon;
    const std::string kind = o.string("experiment");
    if (kind == "semigroup")
        c.kind = ExperimentKind::Semigroup;
    else if (kind == "kernel")
        c.kind = ExperimentKind::Kernel;
    else if (kind == "diamagnetic")
        c.kind = ExperimentKind::Diamagnetic;
    else if (kind == "penalty-sweep")
        c.kind = ExperimentKind::PenaltySweep;
    else if (kind == "mollify-converge")
        c.kind = ExperimentKind::MollifyConverge;
    else if (kind == "selftest")
        c.kind = ExperimentKind::Selftest;
    else
        o.fail("unknown experiment kind '" + kind + "'");
    c.name = o.string("name", kind);
    for (char ch : c.name)
        if (!(std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '-' || ch == '.'))
            o.fail("name may contain letters, digits, '_', '-' and '.' only");

    if (o.has("mc")) {
        Obj mc = o.sub("mc");
        // Excluded from the hash; FKPF_WORKERS takes precedence.
        c.mc.workers = static_cast<unsigned>(mc.unsigned_integer("workers", 0));
        parse_mc(std::move(mc), c.mc);
    }

    if (c.kind == ExperimentKind::Selftest) {
        if (o.has("selftest")) {
            Obj s = o.sub("selftest");
            for (double id : s.numbers("only")) {
                if (id != std::floor(id) || id < 1 || id > kCriterionCount) s.fail("criterion ids run from 1 to 14");
                c.only.push_back(static_cast<int>(id));
            }
            s.finish();
        }
    } else {
        c.dim = static_cast<int>(o.integer("dim", 1));
        if (c.dim < 1 || c.dim > 3) o.fail("dim must be 1, 2 or 3");
        if (o.has("modes")) {
            Obj m = o.sub("modes");
            c.omega = m.numbers("omega");
            m.finish();
        }
        if (c.omega.empty()) o.fail("modes.omega must not be empty");
        for (double w : c.omega)
            if (!(w > 0.0)) o.fail("dispersion values must be positive");
        c.domain = o.has("domain") ? parse_domain(o.sub("domain"), c.dim) : Domain::all_space(c.dim);

        std::string digest;
        if (o.has("coefficients")) {
            Obj co = o.sub("coefficients");
            if (co.has("table")) {
                fs::path p(co.string("table"));
                if (p.is_relative()) p = fs::path(base_dir) / p;
                digest = file_digest(p.string());
                try {
                    c.table = CoefficientTable::load(p.string());
                } catch (const IOError&) {
                    throw;
                } catch (const Error& e) {
                    throw SchemaError("coefficients.table: " + std::string(e.what()));
                }
                if (c.table->dim() != c.dim || c.table->modes() != c.omega.size())
                    co.fail("table dimension or mode count does not match the config");
                c.coeffs = c.table->as_coefficients(p.filename().string());
                co.finish();
            } else {
                const std::string name = co.string("builtin", "zero");
                c.coeffs = parse_builtin(std::move(co), name, c.dim, c.omega.size());
            }
        } else {
            c.coeffs = Coefficients::zero(c.dim, c.omega.size());
        }

        if (o.has("oracle")) {
            Obj orc = o.sub("oracle");
            c.oracle.enabled = true;
            c.oracle.grid = parse_grid(orc.sub("grid"), c.dim);
            c.oracle.cutoff = static_cast<int>(orc.integer("cutoff", 6));
            if (c.oracle.cutoff < 0) orc.fail("cutoff must be nonnegative");
            orc.finish();
        }
        if (o.has("t")) {
            c.times = o.numbers("t");
            for (double t : c.times)
                if (!(t > 0.0)) o.fail("times must be positive");
        }
        const std::size_t M = c.omega.size();
        c.u = o.has("u") ? parse_field(o.raw("u"), "config.u", M) : OneBosonVector::zero(M);
        c.g = o.has("g") ? parse_field(o.raw("g"), "config.g", M) : OneBosonVector::zero(M);

        if (o.has("points")) {
            const json& p = o.raw("points");
            if (!p.is_array()) o.fail("points must be an array");
            for (std::size_t i = 0; i < p.size(); ++i)
                c.points.push_back(parse_point(p[i], "config.points[" + std::to_string(i) + "]", c.dim));
        }
        if (o.has("pairs")) {
            const json& p = o.raw("pairs");
            if (!p.is_array()) o.fail("pairs must be an array");
            for (std::size_t i = 0; i < p.size(); ++i) {
                Obj pr(p[i], "config.pairs[" + std::to_string(i) + "]");
                auto x = parse_point(pr.raw("x"), "config.pairs.x", c.dim);
                auto y = parse_point(pr.raw("y"), "config.pairs.y", c.dim);
                pr.finish();
                c.pairs.emplace_back(std::move(x), std::move(y));
            }
        }
        if (o.has("grid")) {
            if (c.dim != 1) o.fail("grid sweeps are one-dimensional");
            Obj gr = o.sub("grid");
            auto axis = [](Obj a) {
                const double lo = a.number("lo"), hi = a.number("hi");
                const auto n = a.integer("count");
                if (n < 1) a.fail("count must be positive");
                a.finish();
                std::vector<double> v;
                for (std::int64_t i = 0; i < n; ++i) v.push_back(n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1));
                return v;
            };
            const auto xs = axis(gr.sub("x"));
            const auto ys = axis(gr.sub("y"));
            gr.finish();
            for (double x : xs)
                for (double y : ys) c.pairs.emplace_back(std::vector<double>{x}, std::vector<double>{y});
        }
        if (o.has("state")) {
            Obj s = o.sub("state");
            c.state.kind = s.string("kind", "gaussian");
            if (c.state.kind != "gaussian" && c.state.kind != "indicator") s.fail("state kind must be gaussian or indicator");
            c.state.center = s.has("center") ? s.numbers("center") : std::vector<double>(static_cast<std::size_t>(c.dim), 0.0);
            if (static_cast<int>(c.state.center.size()) != c.dim) s.fail("center needs dim entries");
            c.state.width = s.number("width", 1.0);
            if (!(c.state.width > 0.0)) s.fail("width must be positive");
            c.state.amplitude = s.has("amplitude") ? parse_complex(s.raw("amplitude"), "config.state.amplitude") : cplx(1.0);
            s.finish();
        } else {
            c.state.center.assign(static_cast<std::size_t>(c.dim), 0.0);
        }
        if (o.has("penalty")) {
            Obj p = o.sub("penalty");
            c.kappa = p.number("kappa", 1.0);
            if (!(c.kappa > 0.0)) p.fail("kappa must be positive");
            c.n_caps = p.numbers("n_caps");
            for (double n : c.n_caps)
                if (!(n > 0.0)) p.fail("n_caps must be positive");
            p.finish();
        }
        if (o.has("diamagnetic")) {
            Obj d = o.sub("diamagnetic");
            c.trials = static_cast<std::size_t>(d.unsigned_integer("trials", 100));
            c.energies = d.numbers("E");
            d.finish();
        }
        if (o.has("mollify")) {
            Obj m = o.sub("mollify");
            c.n_list = m.numbers("n_list");
            c.energies = m.numbers("E");
            if (m.has("resolutions"))
                for (double r : m.numbers("resolutions")) {
                    if (r != std::floor(r) || r < 8) m.fail("resolutions must be integers >= 8");
                    c.resolutions.push_back(static_cast<int>(r));
                }
            m.finish();
        }
        for (double E : c.energies)
            if (!(E > 0.0)) o.fail("resolvent energies must be positive");

        // Per-kind requirements.
        auto need = [&](bool cond, const std::string& what) {
            if (!cond) o.fail(to_string(c.kind) + " experiments need " + what);
        };
        switch (c.kind) {
            case ExperimentKind::Semigroup:
                need(!c.times.empty(), "t");
                need(!c.points.empty(), "points");
                for (const auto& x : c.points)
                    if (!c.domain.contains(x)) o.fail("evaluation points must lie in the domain");
                break;
            case ExperimentKind::Kernel:
                need(!c.times.empty(), "t");
                need(!c.pairs.empty(), "pairs or grid");
                break;
            case ExperimentKind::PenaltySweep:
                need(!c.times.empty(), "t");
                need(!c.pairs.empty(), "pairs or grid");
                need(!c.n_caps.empty(), "penalty.n_caps");
                break;
            case ExperimentKind::Diamagnetic:
                need(c.oracle.enabled, "an oracle section");
                need(!c.energies.empty(), "diamagnetic.E");
                break;
            case ExperimentKind::MollifyConverge:
                need(c.oracle.enabled || c.table.has_value(), "an oracle grid or a coefficient table");
                need(!c.n_list.empty(), "mollify.n_list");
                need(c.energies.size() == 1, "exactly one mollify.E");
                break;
            case ExperimentKind::Selftest:
                break;
        }
        for (const auto& [x, y] : c.pairs)
            if (!c.domain.contains(x) || !c.domain.contains(y)) o.fail("kernel points must lie in the domain");
        if (c.oracle.enabled && c.dim > 2) o.fail("the oracle supports dim <= 2");

        canon = canonical_json(root, digest);
    }

    if (o.has("output")) {
        Obj out = o.sub("output");
        c.output.dir = out.string("dir", c.output.dir);
        c.output.csv = out.string("csv", c.output.csv);
        c.output.manifest = out.string("manifest", c.output.manifest);
        c.output.paths = static_cast<std::size_t>(out.unsigned_integer("paths", 0));
        c.output.paths_file = out.string("paths_file", c.output.paths_file);
        c.output.operator_dump = out.boolean("operator", false);
        c.output.operator_file = out.string("operator_file", c.output.operator_file);
        c.output.eigenvalues = static_cast<std::size_t>(out.unsigned_integer("eigenvalues", 0));
        c.output.eigenvalues_file = out.string("eigenvalues_file", c.output.eigenvalues_file);
        out.finish();
        if ((c.output.operator_dump || c.output.eigenvalues) && !c.oracle.enabled)
            throw SchemaError("config.output: operator and eigenvalue dumps need an oracle section");
    }
    if (fs::path(c.output.dir).is_relative()) c.output.dir = (fs::path(base_dir) / c.output.dir).lexically_normal().string();
    o.finish();

    if (c.kind == ExperimentKind::Selftest) canon = canonical_json(root, "");
    c.canonical = canon.dump();
    c.hash = fnv1a_hex(c.canonical);
    return c;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IOError("cannot read config '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    const fs::path p(path);
    return parse_config(ss.str(), p.has_parent_path() ? p.parent_path().string() : ".");
}

// ---------------------------------------------------------------- CSV

std::string format_point(const std::vector<double>& x) {
    std::string s;
    char buf[40];
    for (std::size_t k = 0; k < x.size(); ++k) {
        std::snprintf(buf, sizeof buf, "%.17g", x[k]);
        if (k) s += ';';
        s += buf;
    }
    return s;
}

std::string ResultRow::key() const {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", t);
    return experiment + "|" + quantity + "|" + param + "|" + x + "|" + y + "|" + buf;
}

void write_csv(std::ostream& os, const std::vector<ResultRow>& rows) {
    os << kCsvHeader << "\n";
    char buf[256];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%zu,%llu,", r.t, r.re, r.im, r.stderr_, r.n,
                      static_cast<unsigned long long>(r.seed));
        os << r.experiment << ',' << r.quantity << ',' << r.param << ',' << r.x << ',' << r.y << ',' << buf
           << r.config_hash << "\n";
    }
}

std::string csv_string(const std::vector<ResultRow>& rows) {
    std::ostringstream os;
    write_csv(os, rows);
    return os.str();
}

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

double parse_double(const std::string& s, const std::string& where) {
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    double v = 0.0;
    const char* end = s.data() + s.size();
    const auto [ptr, ec] = std::from_chars(s.data(), end, v);
    // Subnormals report out-of-range but still parse to the nearest value.
    if (s.empty() || ptr != end || (ec != std::errc() && !(ec == std::errc::result_out_of_range && std::abs(v) < 1.0)))
        throw InvalidArgument(where + ": not a number: '" + s + "'");
    return v;
}

}  // namespace

std::vector<ResultRow> read_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw InvalidArgument("empty CSV input");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kCsvHeader) throw InvalidArgument("unexpected CSV header: '" + line + "'");
    std::vector<ResultRow> rows;
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto f = split(line, ',');
        const std::string where = "CSV line " + std::to_string(lineno);
        if (f.size() != 12) throw InvalidArgument(where + ": expected 12 fields, got " + std::to_string(f.size()));
        ResultRow r;
        r.experiment = f[0];
        r.quantity = f[1];
        r.param = f[2];
        r.x = f[3];
        r.y = f[4];
        r.t = parse_double(f[5], where);
        r.re = parse_double(f[6], where);
        r.im = parse_double(f[7], where);
        r.stderr_ = parse_double(f[8], where);
        r.n = static_cast<std::size_t>(parse_double(f[9], where));
        r.seed = std::stoull(f[10]);
        r.config_hash = f[11];
        rows.push_back(std::move(r));
    }
    return rows;
}

std::vector<ResultRow> read_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IOError("cannot read '" + path + "'");
    return read_csv(in);
}

// ---------------------------------------------------------------- compare

ToleranceSpec ToleranceSpec::parse(const std::string& text) {
    ToleranceSpec spec;
    bool any = false;
    for (std::string entry : split(text, ';')) {
        entry.erase(std::remove_if(entry.begin(), entry.end(), [](unsigned char c) { return std::isspace(c); }), entry.end());
        if (entry.empty()) continue;
        ToleranceRule rule;
        std::string target;
        const auto colon = entry.find(':');
        if (colon != std::string::npos) {
            target = entry.substr(0, colon);
            entry = entry.substr(colon + 1);
            if (target.empty()) throw InvalidArgument("tolerance spec: empty experiment name");
        }
        for (const auto& kv : split(entry, ',')) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) throw InvalidArgument("tolerance spec: expected key=value, got '" + kv + "'");
            const std::string k = kv.substr(0, eq);
            const double v = parse_double(kv.substr(eq + 1), "tolerance spec");
            if (!(v >= 0.0)) throw InvalidArgument("tolerance spec: values must be nonnegative");
            if (k == "z")
                rule.z = v;
            else if (k == "abs")
                rule.abs = v;
            else if (k == "rel")
                rule.rel = v;
            else
                throw InvalidArgument("tolerance spec: unknown key '" + k + "' (use z, abs, rel)");
        }
        if (target.empty())
            spec.fallback = rule;
        else
            spec.per_experiment[target] = rule;
        any = true;
    }
    if (!any) throw InvalidArgument("tolerance spec is empty");
    return spec;
}

const ToleranceRule& ToleranceSpec::rule_for(const std::string& experiment) const {
    const auto it = per_experiment.find(experiment);
    return it == per_experiment.end() ? fallback : it->second;
}

CompareReport compare_rows(const std::vector<ResultRow>& a, const std::vector<ResultRow>& b, const ToleranceSpec& spec) {
    std::map<std::string, const ResultRow*> ma, mb;
    for (const auto& r : a)
        if (!ma.emplace(r.key(), &r).second) throw InvalidArgument("duplicate row key in first input: " + r.key());
    for (const auto& r : b)
        if (!mb.emplace(r.key(), &r).second) throw InvalidArgument("duplicate row key in second input: " + r.key());
    std::set<std::string> keys;
    for (const auto& [k, _] : ma) keys.insert(k);
    for (const auto& [k, _] : mb) keys.insert(k);

    CompareReport rep;
    for (const auto& k : keys) {
        RowVerdict v{k, false, false, 0.0, 0.0, ""};
        const auto ia = ma.find(k), ib = mb.find(k);
        if (ia == ma.end() || ib == mb.end()) {
            v.missing = true;
            v.reason = ia == ma.end() ? "missing in first" : "missing in second";
            rep.rows.push_back(v);
            rep.pass = false;
            continue;
        }
        const ResultRow& ra = *ia->second;
        const ResultRow& rb = *ib->second;
        const cplx va(ra.re, ra.im), vb(rb.re, rb.im);
        v.abs_diff = std::abs(va - vb);
        const double s = std::hypot(ra.stderr_, rb.stderr_);
        v.z = s > 0.0 ? v.abs_diff / s : (v.abs_diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
        const ToleranceRule& rule = spec.rule_for(ra.experiment);
        std::string why;
        if (rule.abs && v.abs_diff <= *rule.abs) why = "abs";
        if (why.empty() && rule.rel && v.abs_diff <= *rule.rel * std::max(std::abs(va), std::abs(vb))) why = "rel";
        if (why.empty() && rule.z && v.z <= *rule.z) why = "z";
        if (!rule.abs && !rule.rel && !rule.z && v.abs_diff == 0.0) why = "exact";
        v.pass = !why.empty() && !std::isnan(v.abs_diff);
        v.reason = v.pass ? why : "outside tolerance";
        rep.pass = rep.pass && v.pass;
        rep.rows.push_back(v);
    }
    return rep;
}

CompareReport compare_files(const std::string& a, const std::string& b, const std::string& tolspec) {
    const ToleranceSpec spec = ToleranceSpec::parse(tolspec);
    return compare_rows(read_csv_file(a), read_csv_file(b), spec);
}

void CompareReport::write(std::ostream& os) const {
    char buf[128];
    std::size_t failed = 0;
    for (const auto& r : rows) {
        if (r.missing)
            std::snprintf(buf, sizeof buf, "FAIL  %s", r.reason.c_str());
        else
            std::snprintf(buf, sizeof buf, "%s  |d|=%.3e z=%.3f (%s)", r.pass ? "PASS" : "FAIL", r.abs_diff, r.z,
                          r.reason.c_str());
        os << buf << "  " << r.key << "\n";
        failed += r.pass ? 0 : 1;
    }
    os << (pass ? "PASS" : "FAIL") << ": " << rows.size() - failed << "/" << rows.size() << " rows within tolerance\n";
}

// ---------------------------------------------------------------- experiments

namespace {

struct Emitter {
    const ExperimentConfig& cfg;
    std::vector<ResultRow> rows;

    ResultRow base(const std::string& quantity, const std::string& param) const {
        ResultRow r;
        r.experiment = cfg.name;
        r.quantity = quantity;
        r.param = param;
        r.config_hash = cfg.hash;
        return r;
    }
    void estimate(const std::string& q, const std::string& param, const std::vector<double>& x,
                  const std::vector<double>& y, double t, const Estimate& e) {
        ResultRow r = base(q, param);
        r.x = format_point(x);
        r.y = format_point(y);
        r.t = t;
        r.re = e.value.real();
        r.im = e.value.imag();
        r.stderr_ = e.std_error;
        r.n = e.n_effective;
        r.seed = e.seed;
        rows.push_back(std::move(r));
    }
    void exact(const std::string& q, const std::string& param, const std::string& x, const std::string& y, double t,
               cplx v, std::size_t n = 0, std::uint64_t seed = 0) {
        ResultRow r = base(q, param);
        r.x = x;
        r.y = y;
        r.t = t;
        r.re = v.real();
        r.im = v.imag();
        r.n = n;
        r.seed = seed;
        rows.push_back(std::move(r));
    }
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

StateSpec make_state(const ExperimentConfig& c) {
    if (c.state.kind == "indicator") return StateSpec::indicator(c.domain, c.g);
    return StateSpec::gaussian(c.state.center, c.state.width, c.state.amplitude, c.g);
}

struct OracleSetup {
    DiscreteOperator H;
    NumberBasisSpace ns;
    VecC eu, eg;
};

OracleSetup build_oracle(const ExperimentConfig& c) {
    NumberBasisSpace ns(OneBosonSpace(c.omega), c.oracle.cutoff);
    DiscreteOperator H = build_pauli_fierz(c.oracle.grid, c.domain, c.coeffs, ns);
    VecC eu = embed_expvec(ns, c.u).vec, eg = embed_expvec(ns, c.g).vec;
    return OracleSetup{std::move(H), std::move(ns), std::move(eu), std::move(eg)};
}

// Active-site index of a point that coincides with a grid site.
std::size_t site_of(const DiscreteOperator& op, const std::vector<double>& x) {
    const GridSpec& g = op.grid;
    std::vector<int> mi(static_cast<std::size_t>(g.dim));
    for (int j = 0; j < g.dim; ++j) {
        const double h = g.spacing(j);
        const double q = (x[static_cast<std::size_t>(j)] - g.lo[static_cast<std::size_t>(j)]) / h - 1.0;
        const double r = std::round(q);
        if (std::abs(q - r) > 1e-6 || r < 0 || r >= g.points[static_cast<std::size_t>(j)])
            throw SchemaError("oracle comparison point " + format_point(x) + " is not a grid site");
        mi[static_cast<std::size_t>(j)] = static_cast<int>(r);
    }
    const std::size_t flat = g.flat_index(mi);
    const auto it = std::lower_bound(op.sites.begin(), op.sites.end(), flat);
    if (it == op.sites.end() || *it != flat) throw SchemaError("oracle comparison point " + format_point(x) + " is outside the domain");
    return static_cast<std::size_t>(it - op.sites.begin());
}

cplx fiber_element(const OracleSetup& o, const VecC& psi, std::size_t site) {
    const auto F = static_cast<Eigen::Index>(o.ns.dimension());
    return o.eu.dot(psi.segment(static_cast<Eigen::Index>(site) * F, F));
}

void dump_oracle_files(const ExperimentConfig& c, const OracleSetup& o, const std::string& dir,
                       std::vector<std::string>& files) {
    if (c.output.operator_dump) {
        const std::string p = (fs::path(dir) / c.output.operator_file).string();
        std::ofstream os(p);
        if (!os) throw IOError("cannot write '" + p + "'");
        write_operator_triplets(os, o.H);
        files.push_back(p);
    }
    if (c.output.eigenvalues) {
        if (o.H.dimension() > 6000) throw ResourceLimit("eigenvalue report needs operator dimension <= 6000");
        const Spectral sp = decompose(o.H);
        const auto k = std::min<Eigen::Index>(sp.eigenvalues.size(), static_cast<Eigen::Index>(c.output.eigenvalues));
        const std::string p = (fs::path(dir) / c.output.eigenvalues_file).string();
        std::ofstream os(p);
        if (!os) throw IOError("cannot write '" + p + "'");
        write_eigenvalue_csv(os, sp.eigenvalues.head(k));
        files.push_back(p);
    }
}

void dump_paths(const ExperimentConfig& c, double t, const std::vector<double>& start, const std::vector<double>* end,
                const std::string& dir, std::vector<std::string>& files) {
    if (!c.output.paths) return;
    const std::string p = (fs::path(dir) / c.output.paths_file).string();
    std::ofstream os(p);
    if (!os) throw IOError("cannot write '" + p + "'");
    for (std::size_t i = 0; i < c.output.paths; ++i) {
        // Bridges run y -> x, as in the kernel estimator.
        const SampledPath path = end ? draw_path(c.mc, i, t, *end, start, true) : draw_path(c.mc, i, t, start, {}, false);
        write_path_csv(os, i, path, i == 0);
    }
    files.push_back(p);
}

void run_semigroup(const ExperimentConfig& c, Emitter& em, const std::string& dir, std::vector<std::string>& files) {
    const Model m = c.model();
    const StateSpec psi = make_state(c);
    for (double t : c.times)
        for (const auto& x : c.points)
            em.estimate("Tt", "", x, {}, t, estimate_Tt_element(x, c.u, psi, t, m, c.mc));
    dump_paths(c, c.times.front(), c.points.front(), nullptr, dir, files);
    if (!c.oracle.enabled) return;
    const OracleSetup o = build_oracle(c);
    const auto F = static_cast<Eigen::Index>(o.ns.dimension());
    VecC v0 = VecC::Zero(static_cast<Eigen::Index>(o.H.dimension()));
    for (std::size_t k = 0; k < o.H.site_count(); ++k)
        v0.segment(static_cast<Eigen::Index>(k) * F, F) = psi.profile(o.H.site_coords(k)) * o.eg;
    for (double t : c.times) {
        const VecC vt = semigroup_apply(o.H, t, v0);
        for (const auto& x : c.points) em.exact("Tt_oracle", "cutoff=" + std::to_string(c.oracle.cutoff), format_point(x), "", t, fiber_element(o, vt, site_of(o.H, x)));
    }
    dump_oracle_files(c, o, dir, files);
}

void run_kernel(const ExperimentConfig& c, Emitter& em, const std::string& dir, std::vector<std::string>& files) {
    const Model m = c.model();
    for (double t : c.times)
        for (const auto& [x, y] : c.pairs)
            em.estimate("kernel", "", x, y, t, estimate_kernel_element(x, y, c.u, c.g, t, m, c.mc));
    dump_paths(c, c.times.front(), c.pairs.front().first, &c.pairs.front().second, dir, files);
    if (!c.oracle.enabled) return;
    const OracleSetup o = build_oracle(c);
    const auto F = static_cast<Eigen::Index>(o.ns.dimension());
    double cell = 1.0;
    for (int j = 0; j < c.oracle.grid.dim; ++j) cell *= c.oracle.grid.spacing(j);
    for (const auto& [x, y] : c.pairs) {
        VecC v0 = VecC::Zero(static_cast<Eigen::Index>(o.H.dimension()));
        v0.segment(static_cast<Eigen::Index>(site_of(o.H, y)) * F, F) = o.eg / cell;
        for (double t : c.times)
            em.exact("kernel_oracle", "cutoff=" + std::to_string(c.oracle.cutoff), format_point(x), format_point(y), t,
                     fiber_element(o, semigroup_apply(o.H, t, v0), site_of(o.H, x)));
    }
    dump_oracle_files(c, o, dir, files);
}

void run_penalty_sweep(const ExperimentConfig& c, Emitter& em, const std::string& dir, std::vector<std::string>& files) {
    const Model m = c.model();
    std::vector<double> caps = c.n_caps;
    std::sort(caps.begin(), caps.end());
    for (double t : c.times)
        for (const auto& [x, y] : c.pairs) {
            MCConfig ind = c.mc;
            ind.gating = Gating::indicator(c.mc.gating.correction);
            em.estimate("indicator", "", x, y, t, estimate_kernel_element(x, y, c.u, c.g, t, m, ind));
            MCConfig conf = c.mc;
            conf.gating = Gating::confined(c.kappa);
            conf.gating.correction = c.mc.gating.correction;
            em.estimate("confined", fmt("kappa=%.17g", c.kappa), x, y, t, estimate_kernel_element(x, y, c.u, c.g, t, m, conf));
            for (double cap : caps)
                em.estimate("penalized", fmt("kappa=%.17g", c.kappa) + fmt(";ncap=%.17g", cap), x, y, t,
                            estimate_penalized_element(x, y, c.u, c.g, t, m, c.mc, c.kappa, cap));
            // Common random numbers: the same paths under increasing caps.
            std::size_t violations = 0;
            const std::size_t probe = std::min<std::size_t>(c.mc.samples, 4096);
            for (std::size_t i = 0; i < probe; ++i) {
                const SampledPath p = draw_path(c.mc, i, t, y, x, true);
                double prev = std::numeric_limits<double>::infinity();
                for (double cap : caps) {
                    const double w = gate_weight(p, c.domain, Gating::penalty(c.kappa, cap), nullptr);
                    if (w > prev) ++violations;
                    prev = w;
                }
            }
            em.exact("monotonicity_violations", "paths=" + std::to_string(probe), format_point(x), format_point(y), t,
                     static_cast<double>(violations), probe, c.mc.seed);
        }
    dump_paths(c, c.times.front(), c.pairs.front().first, &c.pairs.front().second, dir, files);
}

void run_diamagnetic(const ExperimentConfig& c, Emitter& em, const std::string& dir, std::vector<std::string>& files) {
    const OracleSetup o = build_oracle(c);
    const DiscreteOperator S = build_schrodinger(c.oracle.grid, c.domain, c.coeffs.V, c.coeffs.U);
    for (double E : c.energies) {
        const Resolvent HR(o.H, E), SR(S, E);
        double worst = -std::numeric_limits<double>::infinity();
        std::size_t fails = 0;
        for (std::size_t trial = 0; trial < c.trials; ++trial) {
            PathStream rng(c.mc.seed, trial);
            VecC phi(static_cast<Eigen::Index>(o.H.dimension()));
            for (auto& z : phi) z = rng.uniform();
            const auto rep = diamagnetic_check(HR, SR, o.H, phi);
            worst = std::max(worst, rep.max_violation);
            fails += rep.ok ? 0 : 1;
        }
        const std::string param = fmt("E=%.17g", E);
        em.exact("max_violation", param, "", "", 0.0, worst, c.trials, c.mc.seed);
        em.exact("failed_trials", param, "", "", 0.0, static_cast<double>(fails), c.trials, c.mc.seed);
    }
    dump_oracle_files(c, o, dir, files);
}

void run_mollify(const ExperimentConfig& c, Emitter& em) {
    const NumberBasisSpace ns(OneBosonSpace(c.omega), c.oracle.enabled ? c.oracle.cutoff : 4);
    const double E = c.energies.front();
    auto study = [&](const CoefficientTable& table, const GridSpec& grid, const std::string& label) {
        VecC phi(static_cast<Eigen::Index>(grid.site_count() * ns.dimension()));
        PathStream rng(c.mc.seed, 0);
        for (auto& z : phi) z = cplx(rng.normal(), rng.normal());
        const auto rows = resolvent_convergence_study(table, grid, c.domain, ns, c.n_list, E, phi);
        for (const auto& r : rows) {
            const std::string param = label + fmt(";n=%.17g", r.n);
            em.exact("resolvent_difference", param, "", "", 0.0, r.resolvent_difference, 0, c.mc.seed);
            em.exact("l2_distance_A", param, "", "", 0.0, r.l2_distance_A);
            em.exact("l2_distance_G", param, "", "", 0.0, r.l2_distance_G);
        }
    };
    if (c.table) {
        GridSpec g;
        g.dim = c.table->dim();
        for (int j = 0; j < g.dim; ++j) {
            const double h = c.table->spacing(j);
            g.lo.push_back(c.table->lo()[static_cast<std::size_t>(j)] - h);
            g.hi.push_back(c.table->hi()[static_cast<std::size_t>(j)] + h);
            g.points.push_back(c.table->resolution()[static_cast<std::size_t>(j)]);
        }
        study(*c.table, g, "points=" + std::to_string(g.points[0]));
        return;
    }
    std::vector<int> res = c.resolutions;
    if (res.empty()) res.push_back(c.oracle.grid.points[0]);
    for (int r : res) {
        GridSpec g = c.oracle.grid;
        g.points.assign(static_cast<std::size_t>(g.dim), r);
        study(sample_on_sites(c.coeffs, g), g, "points=" + std::to_string(r));
    }
}

std::string timestamp_free_manifest(const ExperimentConfig& c, const RunResult& r, unsigned workers) {
    json m;
    m["config"] = json::parse(c.canonical);
    m["config_hash"] = c.hash;
    m["experiment"] = to_string(c.kind);
    m["name"] = c.name;
    m["seed"] = c.mc.seed;
    m["version"] = version_string();
    m["workers"] = workers;
    m["timing"] = {{"seconds", r.seconds}};
    m["outputs"] = r.files;
    m["rows"] = r.rows.size();
    json crit = json::array();
    for (const auto& k : r.criteria)
        crit.push_back({{"id", k.id}, {"name", k.name}, {"pass", k.pass}, {"detail", k.detail}, {"seconds", k.seconds}});
    m["criteria"] = crit;
    m["ok"] = r.ok;
    return m.dump(2);
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& cfg_in, const RunOptions& opts) {
    ExperimentConfig cfg = cfg_in;
    // Precedence: caller, then FKPF_WORKERS, then mc.workers, then hardware.
    const unsigned workers =
        resolve_workers(opts.workers ? opts.workers : std::getenv("FKPF_WORKERS") ? 0u : cfg.mc.workers);
    cfg.mc.workers = workers;
    const std::string dir = opts.out_dir.empty() ? cfg.output.dir : opts.out_dir;
    if (opts.write_files) {
        std::error_code ec;
        fs::create_directories(dir, ec);
        if (ec || !fs::is_directory(dir)) throw IOError("cannot create output directory '" + dir + "'");
    }
    const auto t0 = std::chrono::steady_clock::now();
    RunResult res;
    Emitter em{cfg, {}};
    std::vector<std::string> files;
    const std::string dump_dir = opts.write_files ? dir : (fs::temp_directory_path() / "fkpf-scratch").string();
    if (!opts.write_files) {
        cfg.output.paths = 0;
        cfg.output.operator_dump = false;
        cfg.output.eigenvalues = 0;
    }
    switch (cfg.kind) {
        case ExperimentKind::Semigroup: run_semigroup(cfg, em, dump_dir, files); break;
        case ExperimentKind::Kernel: run_kernel(cfg, em, dump_dir, files); break;
        case ExperimentKind::PenaltySweep: run_penalty_sweep(cfg, em, dump_dir, files); break;
        case ExperimentKind::Diamagnetic: run_diamagnetic(cfg, em, dump_dir, files); break;
        case ExperimentKind::MollifyConverge: run_mollify(cfg, em); break;
        case ExperimentKind::Selftest: {
            AcceptanceOptions ao;
            ao.seed = cfg.mc.seed;
            ao.workers = cfg.mc.workers;
            ao.only = cfg.only;
            res.criteria = run_acceptance(ao, opts.progress);
            for (const auto& k : res.criteria) {
                em.exact("criterion", std::to_string(k.id), "", "", 0.0, k.pass ? 1.0 : 0.0, 0, cfg.mc.seed);
                for (ResultRow r : k.rows) {
                    r.config_hash = cfg.hash;
                    em.rows.push_back(std::move(r));
                }
                res.ok = res.ok && k.pass;
            }
            break;
        }
    }
    res.rows = std::move(em.rows);
    res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (opts.write_files) {
        const std::string csv = (fs::path(dir) / cfg.output.csv).string();
        std::ofstream os(csv);
        if (!os) throw IOError("cannot write '" + csv + "'");
        write_csv(os, res.rows);
        files.insert(files.begin(), csv);
    }
    res.files = files;
    res.manifest = timestamp_free_manifest(cfg, res, workers);
    if (opts.write_files) {
        const std::string mp = (fs::path(dir) / cfg.output.manifest).string();
        std::ofstream os(mp);
        if (!os) throw IOError("cannot write '" + mp + "'");
        os << res.manifest << "\n";
        res.files.push_back(mp);
    }
    return res;
}

}  // namespace fkpf
