#include <doctest.h>

#include <cmath>

#include "fkpf/semigroup.hpp"
#include "../support/gen.hpp"

using namespace fkpf;
using fkpf::testing::Gen;

namespace {

const cplx I(0.0, 1.0);

Model free_model(std::vector<double> omega = {1.0}) {
    return Model{Coefficients::zero(1, omega.size()), OneBosonSpace(omega), Domain::all_space(1)};
}

MCConfig mc(std::size_t N, int n, std::uint64_t seed) {
    MCConfig c;
    c.samples = N;
    c.steps = n;
    c.seed = seed;
    c.workers = 2;
    return c;
}

}  // namespace

TEST_SUITE("semigroup") {

TEST_CASE("heat kernel") {
    const double x[1] = {0.0}, y[1] = {0.0};
    CHECK(heat_kernel(1.0, x, y) == doctest::Approx(1.0 / std::sqrt(2.0 * kPi)).epsilon(1e-15));
    const double a[2] = {1.0, 0.0}, b[2] = {0.0, 0.0};
    CHECK(heat_kernel(0.5, a, b) == doctest::Approx(std::exp(-1.0) / kPi).epsilon(1e-14));
    CHECK_THROWS_AS(heat_kernel(0.0, x, y), InvalidArgument);
    CHECK_THROWS_AS(heat_kernel(1.0, a, y), DimensionMismatch);
}

TEST_CASE("free Gaussian state") {
    const Model m = free_model({0.8});
    const OneBosonVector u{0.4}, g{-0.6};
    const auto psi = StateSpec::gaussian({0.0}, 1.0, 1.0, g);
    for (double t : {0.25, 1.0, 3.0}) {
        const double x[1] = {0.5};
        const auto e = estimate_Tt_element(x, u, psi, t, m, mc(40000, 8, 11));
        const cplx exact = std::exp(-0.25 / (2 * (1 + t))) / std::sqrt(1 + t) * std::exp(inner(m.space, u, heat_apply(m.space, t, g)));
        CHECK(std::abs(e.value - exact) < 4 * e.std_error);
        CHECK(e.bound_violations == 0);
        CHECK(e.n_effective == 40000);
    }
}

TEST_CASE("constant potential is an exact factor") {
    Model m0 = free_model(), mc1 = free_model();
    mc1.coeffs = builtin::constant_V(1, 1, 0.7);
    const auto psi = StateSpec::gaussian({0.2}, 0.8, 1.0, OneBosonVector{0.3});
    const double x[1] = {0.1};
    const OneBosonVector u{0.5};
    const auto a = estimate_Tt_element(x, u, psi, 1.3, m0, mc(5000, 16, 3));
    const auto b = estimate_Tt_element(x, u, psi, 1.3, mc1, mc(5000, 16, 3));
    CHECK(std::abs(b.value - std::exp(-0.7 * 1.3) * a.value) < 1e-13 * std::abs(a.value));
}

TEST_CASE("interval semigroup against the eigen series") {
    Model m = free_model();
    m.domain = Domain::interval(0.0, 1.0);
    const OneBosonVector z{0.0};
    const auto psi = StateSpec::indicator(m.domain, z);
    auto cfg = mc(40000, 128, 5);
    cfg.gating = Gating::indicator(ExitCorrection::Weighted);
    for (double x0 : {0.3, 0.5}) {
        const double x[1] = {x0};
        const auto e = estimate_Tt_element(x, z, psi, 0.1, m, cfg);
        // Allowance for the per-step flat-wall approximation near the corners of paths.
        CHECK(std::abs(e.value.real() - testing::interval_survival_function(x0, 0.1)) < 4 * e.std_error + 2e-3);
        CHECK(e.value.imag() == 0.0);
    }
}

TEST_CASE("kernel elements") {
    const Model m = free_model();
    const OneBosonVector z{0.0};
    const double x[1] = {0.0};
    const auto e = estimate_kernel_element(x, x, z, z, 1.0, m, mc(100, 8, 1));
    CHECK(std::abs(e.value - 1.0 / std::sqrt(2 * kPi)) < 1e-15);
    CHECK(e.std_error == 0.0);

    Model mi = m;
    mi.domain = Domain::interval(0.0, 1.0);
    auto cfg = mc(40000, 128, 9);
    cfg.gating = Gating::indicator(ExitCorrection::Weighted);
    const double a[1] = {0.3}, b[1] = {0.6};
    const auto k = estimate_kernel_element(a, b, z, z, 0.1, mi, cfg);
    CHECK(std::abs(k.value.real() - testing::interval_heat_kernel(0.3, 0.6, 0.1)) < 4 * k.std_error + 5e-3);

    // Constant vector potential: pure phase, modulus the free kernel.
    Model ma = m;
    ma.coeffs = builtin::constant_A({0.9}, 1);
    const double p[1] = {0.7}, q[1] = {-0.4};
    const auto ka = estimate_kernel_element(p, q, z, z, 0.5, ma, mc(200, 16, 2));
    const double pt = heat_kernel(0.5, p, q);
    CHECK(std::abs(std::abs(ka.value) - pt) < 1e-14);
    CHECK(std::abs(ka.value - pt * std::exp(I * 0.9 * 1.1)) < 1e-14);
}

TEST_CASE("penalty gating on all space changes nothing") {
    Model m = free_model({1.0, 2.0});
    m.coeffs = builtin::bump_coupling(1, {1.0, 0.5}, 0.8, 1.5);
    Gen gen(12);
    const auto u = gen.real_vec(2, 0.5), g = gen.real_vec(2, 0.5);
    const double x[1] = {0.1}, y[1] = {-0.2};
    const auto cfg = mc(3000, 32, 77);
    const auto a = estimate_kernel_element(x, y, u, g, 0.7, m, cfg);
    const auto b = estimate_penalized_element(x, y, u, g, 0.7, m, cfg, 3.0, 1e6);
    CHECK(a.value == b.value);
    CHECK(a.std_error == b.std_error);
}

TEST_CASE("symmetry probe") {
    Model m = free_model({0.7, 1.9});
    m.coeffs = builtin::smooth_trig({1.0, 0.6}, 0.8, 0.7);
    Gen gen(13);
    const auto u = gen.real_vec(2, 0.5), g = gen.real_vec(2, 0.5);
    const double x[1] = {0.2}, y[1] = {-0.3};
    const auto pr = symmetry_probe(x, y, u, g, 0.6, m, mc(40000, 32, 21));
    CHECK(pr.z_score() < 4.0);
    CHECK(pr.first.bound_violations == 0);
}

TEST_CASE("Chapman-Kolmogorov probes") {
    Model m = free_model({1.1});
    m.coeffs.A = [](std::span<const double> x, std::span<double> out) { out[0] = 0.5 * std::sin(x[0]); };
    m.coeffs.V = [](std::span<const double> x) { return 0.3 * x[0] * x[0]; };
    m.coeffs.name = "sinA-harmonicV";
    const OneBosonVector u{0.3}, g{0.5};
    const auto psi = StateSpec::gaussian({0.0}, 1.0, 1.0, g);
    const double x[1] = {0.4};
    Tabulation tab{{-5.0}, {5.0}, 81};
    const auto pr = chapman_probe(0.3, 0.4, x, u, psi, m, mc(20000, 32, 31), {}, tab);
    CHECK(pr.z_score() < 4.0);

    // Interval with the exact inner stage.
    Model mi = free_model();
    mi.domain = Domain::interval(0.0, 1.0);
    const OneBosonVector z{0.0};
    const auto ind = StateSpec::indicator(mi.domain, z);
    auto cfg = mc(40000, 128, 41);
    cfg.gating = Gating::indicator(ExitCorrection::Weighted);
    auto inner_fn = [](std::span<const double> y) { return cplx(testing::interval_survival_function(y[0], 0.05)); };
    const double xi[1] = {0.4};
    const auto pi = chapman_probe(0.05, 0.05, xi, z, ind, mi, cfg, inner_fn);
    CHECK(std::abs(pi.first.value - pi.second.value) < 4 * std::hypot(pi.first.std_error, pi.second.std_error) + 2e-3);
    CHECK(std::abs(pi.first.value.real() - testing::interval_survival_function(0.4, 0.1)) < 4 * pi.first.std_error + 2e-3);

    // s = 0 is the identity stage.
    const auto p0 = chapman_probe(0.0, 0.05, xi, z, ind, mi, cfg, inner_fn);
    CHECK(p0.second.value == cplx(testing::interval_survival_function(0.4, 0.05)));

    Model mg = m;
    mg.coeffs = builtin::constant_G(1, {1.0}, 0.2);
    CHECK_THROWS_AS(chapman_probe(0.3, 0.4, x, u, psi, mg, mc(100, 8, 1), {}, tab), InvalidArgument);
}

TEST_CASE("standard error scales as N^{-1/2}") {
    Model m = free_model();
    m.coeffs = builtin::smooth_trig({1.0}, 0.6, 0.5);
    const OneBosonVector u{0.2}, g{0.3};
    const double x[1] = {0.0}, y[1] = {0.5};
    const auto a = estimate_kernel_element(x, y, u, g, 1.0, m, mc(4000, 32, 3));
    const auto b = estimate_kernel_element(x, y, u, g, 1.0, m, mc(16000, 32, 4));
    CHECK(a.std_error / b.std_error == doctest::Approx(2.0).epsilon(0.15));
}

TEST_CASE("results do not depend on the worker count") {
    Model m = free_model({0.9, 2.0});
    m.coeffs = builtin::smooth_trig({1.0, -0.4}, 0.6, 0.5);
    const OneBosonVector u{0.2, 0.1}, g{0.3, -0.2};
    const double x[1] = {0.0}, y[1] = {0.5};
    auto cfg = mc(5000, 32, 3);
    cfg.block = 256;
    cfg.workers = 1;
    const auto a = estimate_kernel_element(x, y, u, g, 1.0, m, cfg);
    for (unsigned w : {2u, 3u, 7u}) {
        cfg.workers = w;
        const auto b = estimate_kernel_element(x, y, u, g, 1.0, m, cfg);
        CHECK(a.value == b.value);
        CHECK(a.std_error == b.std_error);
        CHECK(a.config_hash == b.config_hash);
    }
    cfg.antithetic = true;
    cfg.workers = 1;
    const auto c = estimate_kernel_element(x, y, u, g, 1.0, m, cfg);
    cfg.workers = 4;
    CHECK(estimate_kernel_element(x, y, u, g, 1.0, m, cfg).value == c.value);
}

TEST_CASE("gating does not touch the path draw") {
    auto a = mc(10, 16, 8), b = a;
    b.gating = Gating::confined(2.0);
    b.gating.correction = ExitCorrection::Sampled;
    const double s[1] = {0.1}, e[1] = {0.4};
    for (std::size_t i = 0; i < 10; ++i) {
        const auto p = draw_path(a, i, 0.5, s, e, true), q = draw_path(b, i, 0.5, s, e, true);
        for (int l = 0; l <= 16; ++l) CHECK(p.point(l)[0] == q.point(l)[0]);
    }
    const Domain d = Domain::interval(0.0, 1.0);
    const auto p = draw_path(a, 0, 0.5, s, e, true);
    CHECK(gate_weight(p, d, Gating::penalty(1.0, 1e300), nullptr) ==
          doctest::Approx(std::exp(-penalty_integral(p, d, 1e300))));
}

TEST_CASE("input validation") {
    Model m = free_model();
    const OneBosonVector z{0.0}, z2{0.0, 0.0};
    const double x[1] = {0.0}, x2[2] = {0.0, 0.0};
    CHECK_THROWS_AS(estimate_kernel_element(x, x, z2, z, 1.0, m, mc(10, 8, 1)), DimensionMismatch);
    CHECK_THROWS_AS(estimate_kernel_element(x2, x2, z, z, 1.0, m, mc(10, 8, 1)), DimensionMismatch);
    CHECK_THROWS_AS(estimate_kernel_element(x, x, z, z, 1.0, m, mc(1, 8, 1)), InvalidArgument);
    auto odd = mc(11, 8, 1);
    odd.antithetic = true;
    CHECK_THROWS_AS(estimate_kernel_element(x, x, z, z, 1.0, m, odd), InvalidArgument);
    m.domain = Domain::interval(0.0, 1.0);
    const double out[1] = {2.0};
    CHECK_THROWS_AS(estimate_kernel_element(out, out, z, z, 1.0, m, mc(10, 8, 1)), InvalidArgument);
}

TEST_CASE("paths that never survive give a degenerate estimate") {
    Model m = free_model();
    m.domain = Domain::interval(0.0, 1.0);
    const OneBosonVector z{0.0};
    const double x[1] = {1e-9};
    auto cfg = mc(50, 64, 1);
    const auto e = estimate_Tt_element(x, z, StateSpec::indicator(m.domain, z), 50.0, m, cfg);
    CHECK(e.degenerate);
    CHECK(std::isinf(e.std_error));
}

}
