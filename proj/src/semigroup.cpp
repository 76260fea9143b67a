#include "fkpf/semigroup.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "fkpf/parallel.hpp"

namespace fkpf {

void MCConfig::validate() const {
    require(samples >= 2, "MC needs at least two samples");
    require(steps >= 2, "MC needs at least two time steps");
    require(block > 0, "block size must be positive");
    if (antithetic) require(samples % 2 == 0, "antithetic sampling needs an even sample count");
    if (gating.kind != GatingKind::Indicator) require(gating.kappa > 0.0, "penalty coupling kappa must be positive");
    if (gating.kind == GatingKind::Penalty) require(gating.n_cap > 0.0, "penalty cap must be positive");
}

std::string MCConfig::describe() const {
    std::ostringstream os;
    os.precision(17);
    os << "N=" << samples << ";n=" << steps << ";seed=" << seed << ";gating=" << static_cast<int>(gating.kind)
       << ";corr=" << static_cast<int>(gating.correction) << ";kappa=" << gating.kappa << ";ncap=" << gating.n_cap
       << ";shell=" << gating.shell_term << ";anti=" << antithetic << ";bridge=" << static_cast<int>(bridge)
       << ";block=" << block;
    return os.str();
}

StateSpec StateSpec::gaussian(std::vector<double> center, double width, cplx amplitude, OneBosonVector field) {
    require(width > 0.0, "Gaussian width must be positive");
    StateSpec s;
    s.profile = [center, width, amplitude](std::span<const double> x) {
        double r2 = 0.0;
        for (std::size_t k = 0; k < x.size(); ++k) r2 += (x[k] - center[k]) * (x[k] - center[k]);
        return amplitude * std::exp(-r2 / (2.0 * width * width));
    };
    s.field = std::move(field);
    s.sup_profile = std::abs(amplitude);
    std::ostringstream os;
    os.precision(17);
    os << "gaussian(w=" << width << ",a=" << amplitude << ")";
    s.description = os.str();
    return s;
}

StateSpec StateSpec::indicator(const Domain& domain, OneBosonVector field) {
    StateSpec s;
    s.profile = [domain](std::span<const double> x) { return cplx(domain.contains(x) ? 1.0 : 0.0); };
    s.field = std::move(field);
    s.sup_profile = 1.0;
    s.description = "indicator(" + domain.describe() + ")";
    return s;
}

StateSpec StateSpec::from_function(std::function<cplx(std::span<const double>)> f, double sup, OneBosonVector field,
                                   std::string description) {
    StateSpec s;
    s.profile = std::move(f);
    s.sup_profile = sup;
    s.field = std::move(field);
    s.description = std::move(description);
    return s;
}

double StateSpec::profile_l2_sq(std::vector<double> lo, std::vector<double> hi, int points) const {
    require(lo.size() == hi.size() && (lo.size() == 1 || lo.size() == 2), "profile norm supports 1D or 2D boxes");
    require(points >= 1, "need at least one point per axis");
    const double h0 = (hi[0] - lo[0]) / points;
    double acc = 0.0;
    if (lo.size() == 1) {
        for (int i = 0; i < points; ++i) {
            const double x[1] = {lo[0] + (i + 0.5) * h0};
            acc += std::norm(profile(x)) * h0;
        }
        return acc;
    }
    const double h1 = (hi[1] - lo[1]) / points;
    for (int i = 0; i < points; ++i)
        for (int j = 0; j < points; ++j) {
            const double x[2] = {lo[0] + (i + 0.5) * h0, lo[1] + (j + 0.5) * h1};
            acc += std::norm(profile(x)) * h0 * h1;
        }
    return acc;
}

std::string fnv1a_hex(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

double heat_kernel(double t, std::span<const double> x, std::span<const double> y) {
    require(t > 0.0, "heat kernel needs t > 0");
    if (x.size() != y.size()) throw DimensionMismatch("heat kernel points differ in dimension");
    double r2 = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) r2 += (x[k] - y[k]) * (x[k] - y[k]);
    return std::pow(2.0 * kPi * t, -0.5 * static_cast<double>(x.size())) * std::exp(-r2 / (2.0 * t));
}

double gate_weight(const SampledPath& p, const Domain& domain, const Gating& gating, PathStream* rng) {
    switch (gating.kind) {
        case GatingKind::Indicator:
            return exit_time(p, domain, gating.correction, rng).survival;
        case GatingKind::Penalty: {
            double y = penalty_integral(p, domain, gating.n_cap);
            if (gating.shell_term) y += shell_gradient_integral(p, domain);
            return std::exp(-gating.kappa * y);
        }
        case GatingKind::Confined: {
            const double w = exit_time(p, domain, gating.correction, rng).survival;
            if (w == 0.0) return 0.0;
            double y = penalty_integral(p, domain, std::numeric_limits<double>::infinity());
            if (gating.shell_term) y += shell_gradient_integral(p, domain);
            return w * std::exp(-gating.kappa * y);
        }
    }
    return 0.0;
}

namespace {

std::uint64_t stream_of(const MCConfig& cfg, std::size_t index, double& sign) {
    if (cfg.antithetic) {
        sign = (index % 2 == 0) ? 1.0 : -1.0;
        return index / 2;
    }
    sign = 1.0;
    return index;
}

struct Workspace {
    SampledPath path;
    NelsonVector K;
    MatR gbuf;
};

// Shared driver: value(index, ws, survived) -> sample; antithetic pairs are averaged.
template <class Eval>
Estimate run_estimator(const MCConfig& cfg, const std::string& descriptor, Eval&& eval) {
    cfg.validate();
    std::atomic<std::size_t> violations{0};
    const std::size_t units = cfg.antithetic ? cfg.samples / 2 : cfg.samples;
    const std::size_t block = cfg.antithetic ? std::max<std::size_t>(1, cfg.block / 2) : cfg.block;
    Accumulator acc = accumulate_blocks(units, block, cfg.workers, [&](std::size_t lo, std::size_t hi, Accumulator& a) {
        Workspace ws;
        std::size_t local_viol = 0;
        for (std::size_t u = lo; u < hi; ++u) {
            if (cfg.antithetic) {
                bool s0 = false, s1 = false;
                const cplx v0 = eval(2 * u, ws, s0, local_viol);
                const cplx v1 = eval(2 * u + 1, ws, s1, local_viol);
                a.push(0.5 * (v0 + v1), s0 || s1);
            } else {
                bool s = false;
                const cplx v = eval(u, ws, s, local_viol);
                a.push(v, s);
            }
        }
        violations += local_viol;
    });
    Estimate e;
    e.n_effective = acc.n;
    e.n_surviving = acc.survivors;
    e.seed = cfg.seed;
    e.config_hash = fnv1a_hex(descriptor + "|" + cfg.describe());
    e.bound_violations = violations.load();
    if (acc.survivors == 0) {
        e.degenerate = true;
        e.value = 0.0;
        e.std_error = std::numeric_limits<double>::infinity();
        return e;
    }
    e.value = acc.mean;
    e.std_error = acc.stderr_of_mean();
    return e;
}

std::string point_str(std::span<const double> x) {
    std::ostringstream os;
    os.precision(17);
    for (std::size_t k = 0; k < x.size(); ++k) os << (k ? ";" : "") << x[k];
    return os.str();
}

void check_model(const Model& model, std::size_t dim) {
    if (static_cast<std::size_t>(model.coeffs.dim) != dim || static_cast<std::size_t>(model.domain.dim()) != dim)
        throw DimensionMismatch("point, coefficient and domain dimensions must agree");
    if (model.coeffs.modes != model.space.modes()) throw DimensionMismatch("coefficient modes vs one-boson space");
}

}  // namespace

SampledPath draw_path(const MCConfig& cfg, std::size_t index, double t, std::span<const double> start,
                      std::span<const double> end, bool bridge) {
    double sign = 1.0;
    PathStream rng(cfg.seed, stream_of(cfg, index, sign));
    SampledPath p;
    const PathGrid grid(t, cfg.steps);
    if (bridge)
        sample_bridge_into(rng, start, end, grid, cfg.bridge, sign, p);
    else
        sample_bm_into(rng, start, grid, sign, p);
    return p;
}

Estimate estimate_Tt_element(std::span<const double> x, const OneBosonVector& u, const StateSpec& psi, double t,
                             const Model& model, const MCConfig& cfg) {
    check_model(model, x.size());
    require(model.domain.contains(x), "evaluation point must lie in the domain");
    if (u.size() != model.space.modes() || psi.field.size() != model.space.modes())
        throw DimensionMismatch("field vectors vs mode count");
    const PathGrid grid(t, cfg.steps);
    const GridKernelCache cache(model.space, t, cfg.steps);
    const double bound = std::exp(0.5 * (u.norm_sq() + psi.field.norm_sq())) * psi.sup_profile * (1.0 + 1e-10);
    const std::vector<double> x0(x.begin(), x.end());
    auto eval = [&](std::size_t i, Workspace& ws, bool& survived, std::size_t& viol) -> cplx {
        double sign = 1.0;
        PathStream rng(cfg.seed, stream_of(cfg, i, sign));
        sample_bm_into(rng, x0, grid, sign, ws.path);
        const double w = gate_weight(ws.path, model.domain, cfg.gating, &rng);
        survived = w > 0.0;
        if (!survived) return 0.0;
        const cplx S = compute_S(ws.path, model.coeffs);
        compute_K_into(ws.path, model.coeffs, ws.K, ws.gbuf);
        const KSummary k = cache.summarize(ws.K);
        const cplx val = psi.profile(ws.path.end()) *
                         w_star_from_summary(t, S, k, model.space, u.amplitudes(), psi.field.amplitudes());
        if (S.real() >= 0.0 && std::abs(val) > bound) ++viol;
        return w * val;
    };
    return run_estimator(cfg, "Tt|" + point_str(x) + "|" + psi.description + "|" + model.coeffs.name + "|" +
                                  model.domain.describe(),
                         eval);
}

Estimate estimate_kernel_element(std::span<const double> x, std::span<const double> y, const OneBosonVector& u,
                                 const OneBosonVector& g, double t, const Model& model, const MCConfig& cfg) {
    check_model(model, x.size());
    if (y.size() != x.size()) throw DimensionMismatch("kernel points differ in dimension");
    require(model.domain.contains(x) && model.domain.contains(y), "kernel points must lie in the domain");
    if (u.size() != model.space.modes() || g.size() != model.space.modes())
        throw DimensionMismatch("field vectors vs mode count");
    const PathGrid grid(t, cfg.steps);
    const GridKernelCache cache(model.space, t, cfg.steps);
    const double bound = std::exp(0.5 * (u.norm_sq() + g.norm_sq())) * (1.0 + 1e-10);
    const std::vector<double> xe(x.begin(), x.end()), ys(y.begin(), y.end());
    auto eval = [&](std::size_t i, Workspace& ws, bool& survived, std::size_t& viol) -> cplx {
        double sign = 1.0;
        PathStream rng(cfg.seed, stream_of(cfg, i, sign));
        sample_bridge_into(rng, ys, xe, grid, cfg.bridge, sign, ws.path);
        const double w = gate_weight(ws.path, model.domain, cfg.gating, &rng);
        survived = w > 0.0;
        if (!survived) return 0.0;
        const cplx S = compute_S(ws.path, model.coeffs);
        compute_K_into(ws.path, model.coeffs, ws.K, ws.gbuf);
        const KSummary k = cache.summarize(ws.K);
        const cplx val = w_kernel_from_summary(t, S, k, model.space, u.amplitudes(), g.amplitudes());
        if (S.real() >= 0.0 && std::abs(val) > bound) ++viol;
        return w * val;
    };
    Estimate e = run_estimator(cfg, "kernel|" + point_str(x) + "|" + point_str(y) + "|" + model.coeffs.name + "|" +
                                        model.domain.describe(),
                               eval);
    const double p = heat_kernel(t, x, y);
    e.value *= p;
    if (!e.degenerate) e.std_error *= p;
    return e;
}

Estimate estimate_penalized_element(std::span<const double> x, std::span<const double> y, const OneBosonVector& u,
                                    const OneBosonVector& g, double t, const Model& model, MCConfig cfg,
                                    double kappa, double n_cap) {
    require(kappa > 0.0, "penalty coupling kappa must be positive");
    cfg.gating = Gating::penalty(kappa, n_cap);
    return estimate_kernel_element(x, y, u, g, t, model, cfg);
}

double ProbePair::z_score() const {
    const double s = std::hypot(first.std_error, second.std_error);
    const double d = std::abs(first.value - second.value);
    if (s == 0.0) return d == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return d / s;
}

ProbePair symmetry_probe(std::span<const double> x, std::span<const double> y, const OneBosonVector& u,
                         const OneBosonVector& g, double t, const Model& model, const MCConfig& cfg) {
    ProbePair r;
    r.first = estimate_kernel_element(x, y, u, g, t, model, cfg);
    MCConfig other = cfg;
    other.seed = cfg.seed ^ 0x9E3779B97F4A7C15ull;
    r.second = estimate_kernel_element(y, x, g, u, t, model, other);
    r.second.value = std::conj(r.second.value);
    return r;
}

ProbePair chapman_probe(double s, double t, std::span<const double> x, const OneBosonVector& u,
                        const StateSpec& psi, const Model& model, const MCConfig& cfg,
                        std::function<cplx(std::span<const double>)> inner, const Tabulation& tab) {
    require(s >= 0.0 && t > 0.0, "chapman_probe needs s >= 0 and t > 0");
    require(!model.coeffs.has_G(), "chapman_probe needs G = 0 (product-state propagation)");
    ProbePair r;
    r.first = estimate_Tt_element(x, u, psi, s + t, model, cfg);
    const OneBosonVector field_t = heat_apply(model.space, t, psi.field);
    if (!inner) {
        require(tab.points >= 2 && tab.lo.size() == 1 && tab.hi.size() == 1,
                "Monte Carlo tabulation of the inner stage supports 1D grids");
        const OneBosonVector zero = OneBosonVector::zero(model.space.modes());
        const int P = tab.points;
        const double h = (tab.hi[0] - tab.lo[0]) / (P - 1);
        std::vector<cplx> vals(static_cast<std::size_t>(P), 0.0);
        MCConfig icfg = cfg;
        for (int k = 0; k < P; ++k) {
            const double y[1] = {tab.lo[0] + k * h};
            if (!model.domain.contains(y)) continue;
            icfg.seed = cfg.seed + 1000003ull * static_cast<std::uint64_t>(k + 1);
            vals[static_cast<std::size_t>(k)] = estimate_Tt_element(y, zero, psi, t, model, icfg).value;
        }
        const double lo = tab.lo[0];
        inner = [vals, lo, h, P](std::span<const double> y) -> cplx {
            double q = (y[0] - lo) / h;
            if (q <= 0.0) return vals.front();
            if (q >= P - 1) return vals.back();
            const int b = static_cast<int>(q);
            const double f = q - b;
            return (1.0 - f) * vals[static_cast<std::size_t>(b)] + f * vals[static_cast<std::size_t>(b + 1)];
        };
    }
    double sup = 0.0;
    if (tab.points >= 2 && tab.lo.size() == 1) {
        for (int k = 0; k < 4 * tab.points; ++k) {
            const double y[1] = {tab.lo[0] + (tab.hi[0] - tab.lo[0]) * k / (4.0 * tab.points - 1)};
            sup = std::max(sup, std::abs(inner(y)));
        }
    } else {
        sup = psi.sup_profile;
    }
    const StateSpec mid = StateSpec::from_function(inner, std::max(sup, psi.sup_profile), field_t, "T_t(" + psi.description + ")");
    if (s == 0.0) {
        Estimate e;
        e.value = inner(x) * std::exp(u.amplitudes().dot(field_t.amplitudes()));
        e.n_effective = 0;
        e.seed = cfg.seed;
        e.config_hash = fnv1a_hex("identity|" + cfg.describe());
        r.second = e;
        return r;
    }
    MCConfig ocfg = cfg;
    ocfg.seed = cfg.seed ^ 0xD1B54A32D192ED03ull;
    r.second = estimate_Tt_element(x, u, mid, s, model, ocfg);
    return r;
}

}  // namespace fkpf
