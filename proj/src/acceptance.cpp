#include "fkpf/acceptance.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <thread>

#include "fkpf/action.hpp"
#include "fkpf/integrand.hpp"
#include "fkpf/oracle.hpp"
#include "fkpf/semigroup.hpp"

namespace fkpf {

namespace {

// Random inputs for the property checks, drawn from the library's own counter
// based generator so every criterion is reproducible from the seed alone.
class Draw {
public:
    Draw(std::uint64_t seed, std::uint64_t stream) : rng_(seed, stream) {}
    double uniform(double a, double b) { return a + (b - a) * rng_.uniform(); }
    double normal() { return rng_.normal(); }
    cplx complex(double scale) { return scale * cplx(rng_.normal(), rng_.normal()) / std::sqrt(2.0); }
    int pick(int lo, int hi) { return lo + static_cast<int>(rng_.uniform() * (hi - lo + 1)) % (hi - lo + 1); }

    OneBosonSpace space(std::size_t M, double lo, double hi) {
        std::vector<double> w(M);
        for (auto& x : w) x = uniform(lo, hi);
        return OneBosonSpace(w);
    }
    OneBosonVector vec(std::size_t M, double scale) {
        VecC a(static_cast<Eigen::Index>(M));
        for (auto& x : a) x = complex(scale);
        return OneBosonVector(a);
    }
    OneBosonVector real_vec(std::size_t M, double scale) {
        VecC a(static_cast<Eigen::Index>(M));
        for (auto& x : a) x = scale * normal();
        return OneBosonVector(a);
    }
    NelsonVector nelson(std::size_t M, int atoms, double t, double scale) {
        NelsonVector K(M);
        for (int l = 0; l < atoms; ++l) K.add(uniform(0.0, t), normal(), real_vec(M, scale));
        return K;
    }

private:
    PathStream rng_;
};

std::string fmt(const char* f, double a) {
    char buf[160];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}
std::string fmt(const char* f, double a, double b) {
    char buf[160];
    std::snprintf(buf, sizeof buf, f, a, b);
    return buf;
}
std::string fmt(const char* f, double a, double b, double c) {
    char buf[200];
    std::snprintf(buf, sizeof buf, f, a, b, c);
    return buf;
}

struct Ctx {
    std::uint64_t seed;
    unsigned workers;

    std::uint64_t seed_for(int id) const { return seed + 1000003ull * static_cast<std::uint64_t>(id); }
    MCConfig mc(int id, std::size_t N, int n) const {
        MCConfig c;
        c.samples = N;
        c.steps = n;
        c.seed = seed_for(id);
        c.workers = workers;
        return c;
    }
};

ResultRow row(int id, const std::string& quantity, const std::string& param, const std::string& x,
              const std::string& y, double t, cplx v, double se, std::size_t n, std::uint64_t seed) {
    ResultRow r;
    r.experiment = "criterion" + std::to_string(id);
    r.quantity = quantity;
    r.param = param;
    r.x = x;
    r.y = y;
    r.t = t;
    r.re = v.real();
    r.im = v.imag();
    r.stderr_ = se;
    r.n = n;
    r.seed = seed;
    return r;
}

ResultRow row(int id, const std::string& quantity, const std::string& param, const std::vector<double>& x,
              const std::vector<double>& y, double t, const Estimate& e) {
    return row(id, quantity, param, format_point(x), format_point(y), t, e.value, e.std_error, e.n_effective, e.seed);
}

// Dirichlet heat kernel of -laplace/2 on (0, 1) by its eigen expansion.
double interval_kernel_series(double x, double y, double t) {
    double s = 0.0;
    for (int n = 1; n <= 400; ++n)
        s += 2.0 * std::sin(n * kPi * x) * std::sin(n * kPi * y) * std::exp(-n * n * kPi * kPi * t / 2);
    return s;
}

// ---------------------------------------------------------------- 1
void nelson_kernel_identity(const Ctx& ctx, CriterionResult& r) {
    Draw d(ctx.seed_for(1), 0);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t M = static_cast<std::size_t>(d.pick(1, 2));
        const auto sp = d.space(M, 0.1, 10.0);
        const double s = d.uniform(-5.0, 5.0);
        const double rr = s + d.uniform(-5.0, 5.0);
        const auto u = d.vec(M, 1.0), v = d.vec(M, 1.0);
        const QuadratureResult q = js_quadrature_inner(sp, s, u, rr, v);
        worst = std::max(worst, std::abs(q.value - nelson_kernel_inner(sp, s, u, rr, v)));
    }
    r.pass = worst < 1e-6;
    r.detail = fmt("max |closed form - quadrature| = %.2e over 100 inputs (tol 1e-6)", worst);
    r.rows.push_back(row(1, "max_abs_diff", "trials=100", "", "", 0.0, worst, 0.0, 100, ctx.seed_for(1)));
}

// ---------------------------------------------------------------- 2
void integrand_vs_alternative(const Ctx& ctx, CriterionResult& r) {
    Draw d(ctx.seed_for(2), 0);
    double worst = 0.0;
    int failures = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t M = trial % 2 == 0 ? 1 : 2;
        const auto sp = d.space(M, 0.3, 3.0);
        const NumberBasisSpace ns(sp, 16);
        const double t = d.uniform(0.1, 3.0);
        const cplx S(d.uniform(0.0, 1.0), d.normal());
        const IntegrandInputs inp(t, S, d.nelson(M, d.pick(1, 8), t, 0.5), sp);
        const auto u = d.vec(M, 0.6), g = d.vec(M, 0.6);
        const MatC G = gmm_operator(inp, ns);
        const EmbeddedVector eu = embed_expvec(ns, u), eg = embed_expvec(ns, g);
        // gmm's truncated entries are exact, so only the coherent tails separate the two.
        const double tail = std::exp(-S.real()) * (std::sqrt(eu.tail_norm_sq) * std::exp(0.5 * g.norm_sq()) +
                                                   std::exp(0.5 * u.norm_sq()) * std::sqrt(eg.tail_norm_sq));
        const cplx wk = w_kernel_matrix_element(inp, u, g), gk = eu.vec.dot(G * eg.vec);
        const cplx ws = w_star_matrix_element(inp, u, g), gs = std::conj(eg.vec.dot(G * eu.vec));
        const double ek = (std::abs(wk - gk) - tail) / std::abs(wk);
        const double es = (std::abs(ws - gs) - tail) / std::abs(ws);
        worst = std::max({worst, ek, es});
        if (!(ek <= 1e-8) || !(es <= 1e-8)) ++failures;
    }
    r.pass = failures == 0;
    r.detail = fmt("max relative excess over tail bound = %.2e on 100 inputs, M in {1,2}, cutoff 16 (tol 1e-8)", worst);
    r.rows.push_back(row(2, "max_rel_excess", "cutoff=16", "", "", 0.0, worst, 0.0, 100, ctx.seed_for(2)));
}

// ---------------------------------------------------------------- 3
void free_semigroup(const Ctx& ctx, CriterionResult& r) {
    const Model m{Coefficients::zero(1, 1), OneBosonSpace(std::vector<double>{1.0}), Domain::all_space(1)};
    const OneBosonVector z{0.0};
    const auto psi = StateSpec::gaussian({0.0}, 1.0, 1.0, z);
    const std::vector<double> x{0.0};
    const double t = 1.0;
    const Estimate e = estimate_Tt_element(x, z, psi, t, m, ctx.mc(3, 100000, 64));
    const double exact = 1.0 / std::sqrt(1.0 + t);
    const double z_score = std::abs(e.value - exact) / e.std_error;
    const double rel_se = e.std_error / exact;
    r.pass = z_score <= 3.0 && rel_se < 0.01;
    r.detail = fmt("estimate %.5f vs (1+t)^-1/2 = %.5f, z = %.2f", e.value.real(), exact, z_score) +
               fmt(", stderr %.3f%% (N=1e5, n=64)", 100 * rel_se);
    r.rows.push_back(row(3, "Tt", "", x, {}, t, e));
    r.rows.push_back(row(3, "exact", "", format_point(x), "", t, exact, 0.0, 0, 0));
}

// ---------------------------------------------------------------- 4
void interval_kernel(const Ctx& ctx, CriterionResult& r) {
    const Model m{Coefficients::zero(1, 1), OneBosonSpace(std::vector<double>{1.0}), Domain::interval(0.0, 1.0)};
    const OneBosonVector z{0.0};
    auto cfg = ctx.mc(4, 100000, 256);
    cfg.gating = Gating::indicator(ExitCorrection::Weighted);
    const std::vector<double> x{0.5};
    const double t = 0.2;
    const Estimate e = estimate_kernel_element(x, x, z, z, t, m, cfg);
    const double exact = interval_kernel_series(0.5, 0.5, t);
    const double z_score = std::abs(e.value - exact) / e.std_error;
    const double rel_se = e.std_error / exact;
    r.pass = z_score <= 3.0 && rel_se <= 0.02;
    r.detail = fmt("bridge estimate %.5f vs eigen series %.5f, z = %.2f", e.value.real(), exact, z_score) +
               fmt(", stderr %.3f%% (N=1e5, n=256, weighted crossing correction)", 100 * rel_se);
    r.rows.push_back(row(4, "kernel", "correction=weighted", x, x, t, e));
    r.rows.push_back(row(4, "eigen_series", "", format_point(x), format_point(x), t, exact, 0.0, 0, 0));
}

// ---------------------------------------------------------------- 5
void gauge(const Ctx& ctx, CriterionResult& r) {
    const std::vector<double> x{0.3}, y{-0.4};
    const double t = 0.8;
    const OneBosonVector z{0.0};
    const double free_value = heat_kernel(t, x, y);
    r.pass = true;
    std::string detail;
    for (double a : {0.5, 2.0}) {
        const Model m{builtin::constant_A({a}, 1), OneBosonSpace(std::vector<double>{1.0}), Domain::all_space(1)};
        const Estimate e = estimate_kernel_element(x, y, z, z, t, m, ctx.mc(5, 20000, 64));
        const double diff = std::abs(std::abs(e.value) - free_value);
        // Every sample carries the same phase, so the stderr is zero up to rounding;
        // the comparison then falls back to floating-point resolution.
        const bool ok = diff <= 3.0 * e.std_error + 64 * 2.2e-16 * free_value;
        r.pass = r.pass && ok;
        detail += fmt("a=%.1f: |K| - p_t = %.1e (stderr %.1e); ", a, std::abs(e.value) - free_value, e.std_error);
        r.rows.push_back(row(5, "kernel", fmt("a=%.17g", a), x, y, t, e));
    }
    r.rows.push_back(row(5, "free_kernel", "", format_point(x), format_point(y), t, free_value, 0.0, 0, 0));
    r.detail = detail + "Lambda = R";
}

// ---------------------------------------------------------------- 6
Coefficients toy_coefficients() {
    Coefficients c = builtin::bump_coupling(1, {1.0}, 1.0, 2.5);
    c.name = "toy(bump g=1, r=2.5)";
    return c;
}

void pauli_fierz_toy(const Ctx& ctx, CriterionResult& r) {
    const Domain dom = Domain::interval(-4.0, 4.0);
    const GridSpec grid = GridSpec::interval(-4.0, 4.0, 64);
    const OneBosonSpace sp(std::vector<double>{1.0});
    const Coefficients coeffs = toy_coefficients();
    const NumberBasisSpace ns(sp, 8);
    const DiscreteOperator H = build_pauli_fierz(grid, dom, coeffs, ns);
    const OneBosonVector field{0.4}, zero{0.0};
    const auto psi = StateSpec::gaussian({0.0}, 1.0, 1.0, field);
    const auto F = static_cast<Eigen::Index>(ns.dimension());
    const VecC eg = embed_expvec(ns, field).vec;
    VecC v0 = VecC::Zero(static_cast<Eigen::Index>(H.dimension()));
    for (std::size_t k = 0; k < H.site_count(); ++k) v0.segment(static_cast<Eigen::Index>(k) * F, F) = psi.profile(H.site_coords(k)) * eg;
    const double t = 0.5;
    const VecC vt = semigroup_apply(H, t, v0);
    const Model m{coeffs, sp, dom};
    r.pass = true;
    double worst_z = 0.0, worst_bias = 0.0;
    for (int idx : {24, 32, 40}) {
        const std::vector<double> x = H.site_coords(static_cast<std::size_t>(idx));
        const cplx oracle = vt[static_cast<Eigen::Index>(idx) * F];  // vacuum component
        auto cfg = ctx.mc(6, 100000, 32);
        cfg.gating = Gating::indicator(ExitCorrection::Weighted);
        const Estimate coarse = estimate_Tt_element(x, zero, psi, t, m, cfg);
        cfg.steps = 64;
        cfg.seed += 1;
        const Estimate fine = estimate_Tt_element(x, zero, psi, t, m, cfg);
        const double z = std::abs(fine.value - oracle) / fine.std_error;
        const double zb = std::abs(fine.value - coarse.value) / std::hypot(fine.std_error, coarse.std_error);
        worst_z = std::max(worst_z, z);
        worst_bias = std::max(worst_bias, zb);
        r.pass = r.pass && z <= 3.0 && zb <= 3.0;
        r.rows.push_back(row(6, "Tt", "n=32", x, {}, t, coarse));
        r.rows.push_back(row(6, "Tt", "n=64", x, {}, t, fine));
        r.rows.push_back(row(6, "oracle", "grid=64;cutoff=8", format_point(x), "", t, oracle, 0.0, 0, 0));
    }
    r.detail = fmt("3 points: max z vs matrix-exponential oracle %.2f, max z between n=32 and n=64 %.2f", worst_z, worst_bias);
}

// ---------------------------------------------------------------- 7
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    double mx = 0, my = 0;
    const double n = static_cast<double>(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += std::log(x[i]) / n;
        my += std::log(y[i]) / n;
    }
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (std::log(x[i]) - mx) * (std::log(y[i]) - my);
        sxx += (std::log(x[i]) - mx) * (std::log(x[i]) - mx);
    }
    return sxy / sxx;
}

void divergence_forms(const Ctx& ctx, CriterionResult& r) {
    const Coefficients c = builtin::smooth_trig({1.0, 0.5}, 0.9, 0.7);
    const OneBosonSpace sp(std::vector<double>{1.0, 2.0});
    const double t = 1.0;
    const std::vector<double> x{0.3};
    std::vector<double> dts, rs, rk;
    for (int n : {32, 64, 128, 256, 512}) {
        double s2 = 0.0, k2 = 0.0;
        for (std::uint64_t i = 0; i < 1000; ++i) {
            PathStream rng(ctx.seed_for(7), i);
            const SampledPath p = sample_bm(rng, x, PathGrid(t, n));
            s2 += std::norm(compute_S(p, c) - compute_S_div(p, c));
            k2 += nelson_norm_sq(sp, compute_K(p, c).combined(compute_K_div(p, c), -1.0));
        }
        dts.push_back(t / n);
        rs.push_back(std::sqrt(s2 / 1000));
        rk.push_back(std::sqrt(k2 / 1000));
        r.rows.push_back(row(7, "rms_S_minus_S_div", "n=" + std::to_string(n), "", "", t, rs.back(), 0.0, 1000, ctx.seed_for(7)));
        r.rows.push_back(row(7, "rms_K_minus_K_div", "n=" + std::to_string(n), "", "", t, rk.back(), 0.0, 1000, ctx.seed_for(7)));
    }
    const double ss = loglog_slope(dts, rs), sk = loglog_slope(dts, rk);
    r.pass = ss >= 0.4 && sk >= 0.4;
    r.detail = fmt("log-log slope in dt: S %.3f, K %.3f (need >= 0.4; 1000 paths, dt = t/32 .. t/512)", ss, sk);
}

// ---------------------------------------------------------------- 8
void diamagnetic(const Ctx& ctx, CriterionResult& r) {
    const Domain dom = Domain::interval(-4.0, 4.0);
    const GridSpec grid = GridSpec::interval(-4.0, 4.0, 64);
    Coefficients c = builtin::bump_coupling(1, {1.0}, 1.2, 3.0);
    c.A = [](std::span<const double> x, std::span<double> o) { o[0] = 0.8 * std::sin(1.3 * x[0]) + 0.3; };
    c.V = [](std::span<const double> x) { return 0.2 * x[0] * x[0]; };
    const NumberBasisSpace ns(OneBosonSpace(std::vector<double>{1.0}), 6);
    const DiscreteOperator H = build_pauli_fierz(grid, dom, c, ns);
    const DiscreteOperator S = build_schrodinger(grid, dom, c.V);
    double worst = -std::numeric_limits<double>::infinity();
    int failures = 0;
    for (double E : {0.1, 1.0, 10.0}) {
        const Resolvent HR(H, E), SR(S, E);
        double worst_e = -std::numeric_limits<double>::infinity();
        for (std::uint64_t trial = 0; trial < 100; ++trial) {
            PathStream rng(ctx.seed_for(8), trial);
            VecC phi(static_cast<Eigen::Index>(H.dimension()));
            for (auto& z : phi) z = rng.uniform();
            const auto rep = diamagnetic_check(HR, SR, H, phi, 1e-10);
            worst_e = std::max(worst_e, rep.max_violation);
            failures += rep.ok ? 0 : 1;
        }
        worst = std::max(worst, worst_e);
        r.rows.push_back(row(8, "max_violation", fmt("E=%.17g", E), "", "", 0.0, worst_e, 0.0, 100, ctx.seed_for(8)));
    }
    r.pass = failures == 0;
    r.detail = fmt("300 checks (E in {0.1,1,10}), max_x(lhs - rhs) = %.2e, tol 1e-10, failures %.0f", worst, failures);
}

// ---------------------------------------------------------------- 9
void penalty(const Ctx& ctx, CriterionResult& r) {
    const Domain dom = Domain::interval(0.0, 1.0);
    const Model m{Coefficients::zero(1, 1), OneBosonSpace(std::vector<double>{1.0}), dom};
    const OneBosonVector z{0.0};
    const std::vector<double> x{0.5};
    const double t = 0.2;
    auto cfg = ctx.mc(9, 100000, 256);
    const std::vector<double> caps{1.0, 10.0, 1e2, 1e3, 1e4, 1e5, 1e6};
    std::size_t violations = 0;
    for (std::size_t i = 0; i < 10000; ++i) {
        const SampledPath p = draw_path(cfg, i, t, x, x, true);
        double prev = std::numeric_limits<double>::infinity();
        for (double cap : caps) {
            const double w = gate_weight(p, dom, Gating::penalty(1.0, cap), nullptr);
            if (w > prev) ++violations;
            prev = w;
        }
    }
    const Estimate pen = estimate_penalized_element(x, x, z, z, t, m, cfg, 1.0, 1e6);
    cfg.gating = Gating::confined(1.0);
    const Estimate conf = estimate_kernel_element(x, x, z, z, t, m, cfg);
    const double zs = std::abs(pen.value - conf.value) / std::hypot(pen.std_error, conf.std_error);
    r.pass = violations == 0 && zs <= 3.0;
    r.detail = fmt("monotonicity violations %.0f over 1e4 paths x 7 caps; penalized(n=1e6) %.6f vs confined %.6f", static_cast<double>(violations),
                   pen.value.real(), conf.value.real()) +
               fmt(", z = %.2f", zs);
    r.rows.push_back(row(9, "monotonicity_violations", "paths=10000", "", "", t, static_cast<double>(violations), 0.0, 10000, cfg.seed));
    r.rows.push_back(row(9, "penalized", "kappa=1;ncap=1e6", x, x, t, pen));
    r.rows.push_back(row(9, "confined", "kappa=1", x, x, t, conf));
}

// ---------------------------------------------------------------- 10
void flow_equation(const Ctx& ctx, CriterionResult& r) {
    const OneBosonSpace sp(std::vector<double>{1.0});
    const Coefficients c = builtin::smooth_trig({1.0}, 0.6, 0.5);
    Coefficients c0 = c;
    c0.G = nullptr;
    c0.divG = nullptr;
    const double t = 0.8;
    const int n = 32, cut = 12;
    const NumberBasisSpace ns(sp, 24);
    const OneBosonVector u{0.3}, g{-0.5};
    const VecC eu = embed_expvec(ns, u).vec, eg = embed_expvec(ns, g).vec;
    MCConfig cfg = ctx.mc(10, 20, n);
    const std::vector<double> a{0.1}, b{-0.2};
    double worst = 0.0, worst0 = 0.0;
    for (std::size_t i = 0; i < 20; ++i) {
        const SampledPath p = draw_path(cfg, i, t, b, a, true);
        const SampledPath p1 = p.slice(0, cut), p2 = p.slice(cut, n);
        const double t1 = p1.grid().t, t2 = p2.grid().t;
        {
            const IntegrandInputs whole(t, compute_S(p, c), compute_K(p, c), sp);
            const IntegrandInputs i1(t1, compute_S(p1, c), compute_K(p1, c), sp);
            const IntegrandInputs i2(t2, compute_S(p2, c), compute_K(p2, c), sp);
            const cplx comp = eu.dot(gmm_operator(i2, ns) * (gmm_operator(i1, ns) * eg));
            const cplx ref = w_kernel_matrix_element(whole, u, g);
            worst = std::max(worst, std::abs(comp - ref) / std::abs(ref));
        }
        {
            const IntegrandInputs whole(t, compute_S(p, c0), compute_K(p, c0), sp);
            const IntegrandInputs i1(t1, compute_S(p1, c0), compute_K(p1, c0), sp);
            const IntegrandInputs i2(t2, compute_S(p2, c0), compute_K(p2, c0), sp);
            const MatC prod = gmm_operator(i2, ns) * gmm_operator(i1, ns);
            worst0 = std::max(worst0, (prod - gmm_operator(whole, ns)).cwiseAbs().maxCoeff());
        }
    }
    r.pass = worst <= 1e-8 && worst0 <= 1e-12;
    r.detail = fmt("20 paths split at s = %.2f: max relative gap %.2e (truncation tol 1e-8, cutoff 24); K = 0 gap %.2e (tol 1e-12)",
                   t * cut / n, worst, worst0);
    r.rows.push_back(row(10, "max_rel_gap", "cutoff=24", "", "", t, worst, 0.0, 20, cfg.seed));
    r.rows.push_back(row(10, "max_abs_gap_K0", "cutoff=24", "", "", t, worst0, 0.0, 20, cfg.seed));
}

// ---------------------------------------------------------------- 11
void contraction(const Ctx& ctx, CriterionResult& r) {
    const Coefficients c = builtin::smooth_trig({1.0, -0.7}, 0.9, 1.5);
    const OneBosonSpace sp(std::vector<double>{0.6, 2.2});
    MCConfig cfg = ctx.mc(11, 10000, 64);
    Draw d(ctx.seed_for(11), 1u << 30);
    std::size_t violations = 0;
    double worst = 0.0;
    for (std::size_t i = 0; i < 10000; ++i) {
        const double t = d.uniform(0.2, 2.0);
        const std::vector<double> x{d.uniform(-2, 2)}, y{d.uniform(-2, 2)};
        const SampledPath p = draw_path(cfg, i, t, y, x, true);
        const IntegrandInputs inp(t, compute_S(p, c), compute_K(p, c), sp);
        const auto u = d.vec(2, 1.0), g = d.vec(2, 1.0);
        const double bound = std::exp(-inp.S.real() + 0.5 * (u.norm_sq() + g.norm_sq()));
        const double a = std::abs(w_kernel_matrix_element(inp, u, g));
        const double b = std::abs(w_star_matrix_element(inp, u, g));
        worst = std::max(worst, std::max(a, b) / bound);
        if (a > bound * (1 + 1e-10) || b > bound * (1 + 1e-10)) ++violations;
    }
    r.pass = violations == 0;
    r.detail = fmt("1e4 paths, max |element| / bound = %.4f, violations %.0f", worst, static_cast<double>(violations));
    r.rows.push_back(row(11, "max_ratio", "paths=10000", "", "", 0.0, worst, 0.0, 10000, cfg.seed));
}

// ---------------------------------------------------------------- 12
void selfadjointness(const Ctx& ctx, CriterionResult& r) {
    Coefficients c = toy_coefficients();
    c.A = [](std::span<const double> x, std::span<double> o) { o[0] = 0.8 * std::sin(1.3 * x[0]); };
    c.divA = [](std::span<const double> x) { return 0.8 * 1.3 * std::cos(1.3 * x[0]); };
    c.name += "+A";
    const Model m{c, OneBosonSpace(std::vector<double>{1.0}), Domain::interval(-4.0, 4.0)};
    const OneBosonVector u{0.4}, g{-0.3};
    const double t = 0.5;
    auto cfg = ctx.mc(12, 100000, 64);
    cfg.gating = Gating::indicator(ExitCorrection::Weighted);
    r.pass = true;
    double worst = 0.0;
    for (const auto& [x, y] : std::vector<std::pair<std::vector<double>, std::vector<double>>>{{{-0.5}, {0.7}}, {{0.2}, {1.5}}}) {
        const ProbePair pr = symmetry_probe(x, y, u, g, t, m, cfg);
        const double z = pr.z_score();
        worst = std::max(worst, z);
        r.pass = r.pass && z <= 3.0;
        r.rows.push_back(row(12, "K(x,y)", "", x, y, t, pr.first));
        r.rows.push_back(row(12, "conj K(y,x)", "", x, y, t, pr.second));
    }
    r.detail = fmt("two (x,y) pairs, max joint z = %.2f (N=1e5 each side)", worst);
}

// ---------------------------------------------------------------- 13
void mollification(const Ctx& ctx, CriterionResult& r) {
    Coefficients c = builtin::bump_coupling(1, {1.0}, 0.5, 3.0);
    c.A = [](std::span<const double> x, std::span<double> o) { o[0] = std::pow(std::abs(x[0]), -0.25); };
    c.divA = nullptr;
    c.smoothness = Smoothness::Singular;
    const Domain dom = Domain::interval(-4.0, 4.0);
    const NumberBasisSpace ns(OneBosonSpace(std::vector<double>{1.0}), 4);
    const std::vector<double> ns_list{2, 4, 8, 16, 32};
    r.pass = true;
    std::string detail;
    for (int points : {64, 128}) {
        const GridSpec grid = GridSpec::interval(-4.0, 4.0, points);
        PathStream rng(ctx.seed_for(13), static_cast<std::uint64_t>(points));
        VecC phi(static_cast<Eigen::Index>(grid.site_count() * ns.dimension()));
        for (auto& z : phi) z = cplx(rng.normal(), rng.normal());
        const auto rows = resolvent_convergence_study(sample_on_sites(c, grid), grid, dom, ns, ns_list, 1.0, phi);
        bool mono = true;
        for (std::size_t i = 1; i < rows.size(); ++i) mono = mono && rows[i].resolvent_difference <= rows[i - 1].resolvent_difference;
        const double ratio = rows.back().resolvent_difference / rows.front().resolvent_difference;
        r.pass = r.pass && mono && ratio < 1e-3;
        detail += fmt("grid %.0f: first %.3e, last/first %.1e", points, rows.front().resolvent_difference, ratio) +
                  (mono ? ", nonincreasing; " : ", NOT monotone; ");
        for (const auto& row_ : rows)
            r.rows.push_back(row(13, "resolvent_difference", fmt("points=%.0f", points) + fmt(";n=%.17g", row_.n), "", "", 0.0,
                                 row_.resolvent_difference, 0.0, 0, ctx.seed_for(13)));
    }
    r.detail = detail + "n in {2,4,8,16,32}";
}

using CriterionFn = void (*)(const Ctx&, CriterionResult&);

struct Entry {
    int id;
    const char* name;
    CriterionFn fn;
    bool monte_carlo;
};

const std::vector<Entry>& registry() {
    static const std::vector<Entry> r{
        {1, "Nelson kernel identity", nelson_kernel_identity, false},
        {2, "integrand closed form vs number-basis formula", integrand_vs_alternative, false},
        {3, "free semigroup", free_semigroup, true},
        {4, "Dirichlet interval kernel", interval_kernel, true},
        {5, "constant vector potential is a gauge", gauge, true},
        {6, "Pauli-Fierz toy vs oracle", pauli_fierz_toy, true},
        {7, "divergence forms", divergence_forms, false},
        {8, "diamagnetic inequality", diamagnetic, false},
        {9, "penalty equivalence", penalty, true},
        {10, "flow equation", flow_equation, false},
        {11, "contraction bound", contraction, false},
        {12, "kernel selfadjointness", selfadjointness, true},
        {13, "resolvent convergence under mollification", mollification, false},
    };
    return r;
}

CriterionResult run_one(const Entry& e, const Ctx& ctx) {
    CriterionResult r;
    r.id = e.id;
    r.name = e.name;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        e.fn(ctx, r);
    } catch (const std::exception& ex) {
        r.pass = false;
        r.detail = std::string("error: ") + ex.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

}  // namespace

std::string format_criterion(const CriterionResult& r) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "[%s] %2d %s", r.pass ? "PASS" : "FAIL", r.id, r.name.c_str());
    char tail[48];
    std::snprintf(tail, sizeof tail, " (%.1f s)", r.seconds);
    return std::string(buf) + ": " + r.detail + tail;
}

std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& opts,
                                            const std::function<void(const CriterionResult&)>& progress) {
    const Ctx ctx{opts.seed, opts.workers};
    auto wanted = [&](int id) { return opts.only.empty() || std::find(opts.only.begin(), opts.only.end(), id) != opts.only.end(); };
    std::vector<CriterionResult> out;
    std::map<int, std::string> mc_csv;
    for (const auto& e : registry()) {
        if (!wanted(e.id)) continue;
        out.push_back(run_one(e, ctx));
        if (e.monte_carlo) mc_csv[e.id] = csv_string(out.back().rows);
        if (progress) progress(out.back());
    }
    if (wanted(14)) {
        CriterionResult r;
        r.id = 14;
        r.name = "reproducibility across worker counts";
        const auto t0 = std::chrono::steady_clock::now();
        const unsigned hw = std::max(2u, std::thread::hardware_concurrency());
        // The first pass is the run above when it covered the criterion; otherwise one worker.
        std::vector<unsigned> counts = {hw == 2 ? 3u : hw, 2u};
        std::size_t compared = 0, mismatched = 0;
        std::string detail;
        for (const auto& e : registry()) {
            if (!e.monte_carlo) continue;
            if (!mc_csv.count(e.id)) {
                const CriterionResult first = run_one(e, Ctx{opts.seed, 1});
                mc_csv[e.id] = csv_string(first.rows);
            }
            for (unsigned w : counts) {
                const CriterionResult again = run_one(e, Ctx{opts.seed, w});
                const std::string csv = csv_string(again.rows);
                ++compared;
                if (csv != mc_csv[e.id]) {
                    ++mismatched;
                    detail += " criterion " + std::to_string(e.id) + " differs with " + std::to_string(w) + " workers;";
                }
            }
        }
        r.pass = mismatched == 0 && compared > 0;
        r.detail = fmt("%.0f reruns of the Monte Carlo criteria with %.0f and 2 workers, byte-identical CSV in all", static_cast<double>(compared),
                       static_cast<double>(counts[0]));
        if (mismatched) r.detail = "mismatch:" + detail;
        r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        r.rows.push_back(row(14, "mismatched_reruns", "", "", "", 0.0, static_cast<double>(mismatched), 0.0, compared, opts.seed));
        out.push_back(r);
        if (progress) progress(out.back());
    }
    return out;
}

}  // namespace fkpf
