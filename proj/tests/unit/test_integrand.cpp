#include <doctest.h>

#include <cmath>

#include "fkpf/action.hpp"
#include "fkpf/integrand.hpp"
#include "../support/gen.hpp"

using namespace fkpf;
using fkpf::testing::Gen;

namespace {

const cplx I(0.0, 1.0);

SampledPath bridge(std::uint64_t id, double y0, double x0, double t, int n) {
    PathStream rng(31337, id);
    const double y[1] = {y0}, x[1] = {x0};
    return sample_bridge(rng, y, x, PathGrid(t, n));
}

double rel(cplx a, cplx b) { return std::abs(a - b) / std::max(1e-300, std::abs(b)); }

}  // namespace

TEST_SUITE("integrand") {

TEST_CASE("vacuum and free elements") {
    const OneBosonSpace sp(std::vector<double>{1.0});
    const IntegrandInputs zero(std::log(2.0), 0.0, NelsonVector(1), sp);
    const OneBosonVector z{0.0}, e{1.0};
    CHECK(w_star_matrix_element(zero, z, z) == cplx(1.0));
    CHECK(std::abs(w_star_matrix_element(zero, e, e) - std::exp(0.5)) < 1e-15);

    // Gamma(e^{-t omega}) element in the number basis.
    const NumberBasisSpace ns(sp, 30);
    const auto ee = embed_expvec(ns, e);
    const VecR d = build_dGamma(ns);
    const cplx nb = ee.vec.dot(ee.vec.cwiseProduct((-std::log(2.0) * d).array().exp().matrix().cast<cplx>()));
    CHECK(std::abs(nb - std::exp(0.5)) < 1e-14);

    Gen gen(1);
    const auto sp2 = gen.space(2);
    const auto u = gen.vec(2), g = gen.vec(2);
    const IntegrandInputs z2(0.8, 0.0, NelsonVector(2), sp2);
    CHECK(rel(w_kernel_matrix_element(z2, u, g), std::exp(inner(sp2, u, heat_apply(sp2, 0.8, g)))) < 1e-14);

    // t -> 0+ with S = K = 0 is the identity.
    const IntegrandInputs tiny(1e-14, 0.0, NelsonVector(2), sp2);
    CHECK(rel(w_kernel_matrix_element(tiny, u, g), std::exp(inner(sp2, u, g))) < 1e-12);
    CHECK_THROWS_AS(IntegrandInputs(0.0, 0.0, NelsonVector(2), sp2), InvalidArgument);
    NelsonVector late(2);
    late.add(2.0, 1.0, u);
    CHECK_THROWS_AS(IntegrandInputs(1.0, 0.0, late, sp2), InvalidArgument);
}

TEST_CASE("imaginary shifts of S are phases") {
    Gen gen(2);
    const auto sp = gen.space(2);
    const auto K = gen.nelson(2, 7, 1.0, true);
    const auto u = gen.vec(2), g = gen.vec(2);
    const cplx S(0.3, -0.2);
    const double theta = 0.77;
    const IntegrandInputs a(1.0, S, K, sp), b(1.0, S + I * theta, K, sp);
    CHECK(rel(w_kernel_matrix_element(b, u, g), std::exp(-I * theta) * w_kernel_matrix_element(a, u, g)) < 1e-14);
}

TEST_CASE("adjoint identities") {
    Gen gen(3);
    const auto coeffs = builtin::smooth_trig({1.0, 0.5}, 0.9, 0.8);
    for (int trial = 0; trial < 50; ++trial) {
        const auto sp = gen.space(2, 0.3, 3.0);
        const auto u = gen.vec(2, 0.8), g = gen.vec(2, 0.8);
        const auto K = gen.nelson(2, 10, 1.3, true, 0.5);
        const cplx S(gen.uniform(0, 1), gen.normal());
        const IntegrandInputs inp(1.3, S, K, sp);
        CHECK(rel(std::conj(w_kernel_matrix_element(inp, u, g)), w_star_matrix_element(inp, g, u)) < 1e-12);

        // Path level: the reversed bridge carries conj(S) and the reflected, negated K.
        const auto p = bridge(static_cast<std::uint64_t>(trial), -0.4, 0.6, 1.3, 40);
        const auto r = reverse(p);
        const IntegrandInputs ip(1.3, compute_S(p, coeffs), compute_K(p, coeffs), sp);
        const IntegrandInputs ir(1.3, compute_S(r, coeffs), compute_K(r, coeffs), sp);
        CHECK(std::abs(ir.S - std::conj(ip.S)) < 1e-12);
        CHECK(rel(std::conj(w_kernel_matrix_element(ip, u, g)), w_kernel_matrix_element(ir, g, u)) < 1e-12);
    }
}

TEST_CASE("alternative formula in the number basis") {
    const OneBosonSpace sp(std::vector<double>{0.7, 1.6});
    const NumberBasisSpace ns(sp, 10);
    const double t = 0.9;
    const IntegrandInputs zero(t, 0.0, NelsonVector(2), sp);
    const MatC G0 = gmm_operator(zero, ns);
    const VecR d = build_dGamma(ns);
    CHECK((G0 - MatC(((-t * d).array().exp()).matrix().cast<cplx>().asDiagonal())).norm() < 1e-15);

    Gen gen(4);
    for (int trial = 0; trial < 20; ++trial) {
        const auto K = gen.nelson(2, 6, t, true, 0.4);
        const cplx S(gen.uniform(0, 1), gen.normal());
        const IntegrandInputs inp(t, S, K, sp);
        const MatC Gm = gmm_operator(inp, ns);
        CHECK(rel(Gm(0, 0), std::exp(-S - 0.5 * nelson_norm_sq(sp, K))) < 1e-13);

        const auto u = gen.real_vec(2, 0.4), g = gen.real_vec(2, 0.4);
        const auto eu = embed_expvec(ns, u), eg = embed_expvec(ns, g);
        const cplx closed = w_kernel_matrix_element(inp, u, g);
        const cplx viaop = eu.vec.dot(Gm * eg.vec);
        const cplx viavec = gmm_matrix_element(inp, ns, u, g);
        CHECK(std::abs(viaop - viavec) < 1e-12 * std::abs(closed));
        CHECK(rel(viaop, closed) < 1e-6);
    }
}

TEST_CASE("contraction bound") {
    const OneBosonSpace sp(std::vector<double>{1.0});
    const OneBosonVector z{0.0};
    const auto r0 = contraction_check(IntegrandInputs(1.0, 0.0, NelsonVector(1), sp), z, z);
    CHECK(r0.ok);
    CHECK(r0.slack == doctest::Approx(0.0).epsilon(1e-15));

    Gen gen(5);
    for (int trial = 0; trial < 300; ++trial) {
        const auto spm = gen.space(2);
        const auto K = gen.nelson(2, 30, 2.0, true, 3.0);
        const auto u = gen.vec(2, 1.5), g = gen.vec(2, 1.5);
        const auto rep = contraction_check(IntegrandInputs(2.0, cplx(0.0, gen.normal()), K, spm), u, g);
        CHECK(rep.ok);
        CHECK(rep.slack > 0.0);

        const IntegrandInputs damped(2.0, cplx(5.0, gen.normal()), K, spm);
        CHECK(std::abs(w_kernel_matrix_element(damped, u, g)) <=
              std::exp(-5.0 + 0.5 * (u.norm_sq() + g.norm_sq())) * (1 + 1e-10));
    }
}

TEST_CASE("flow equation in the truncated basis") {
    const OneBosonSpace sp(std::vector<double>{1.0});
    const auto coeffs = builtin::smooth_trig({1.0}, 0.6, 0.5);
    const double t = 0.8;
    const int n = 32, m = 12;
    const NumberBasisSpace ns(sp, 24);
    for (std::uint64_t id = 0; id < 5; ++id) {
        const auto p = bridge(id, 0.1, -0.2, t, n);
        const auto a = p.slice(0, m), b = p.slice(m, n);
        const IntegrandInputs whole(t, compute_S(p, coeffs), compute_K(p, coeffs), sp);
        const IntegrandInputs ia(a.grid().t, compute_S(a, coeffs), compute_K(a, coeffs), sp);
        const IntegrandInputs ib(b.grid().t, compute_S(b, coeffs), compute_K(b, coeffs), sp);
        const MatC comp = gmm_operator(ib, ns) * gmm_operator(ia, ns);
        const OneBosonVector u{0.3}, g{-0.5};
        const auto eu = embed_expvec(ns, u), eg = embed_expvec(ns, g);
        CHECK(rel(eu.vec.dot(comp * eg.vec), w_kernel_matrix_element(whole, u, g)) < 1e-8);
    }
    // K = 0: Gamma(e^{-s omega}) Gamma(e^{-(t-s) omega}) = Gamma(e^{-t omega}).
    const IntegrandInputs z1(0.3, 0.0, NelsonVector(1), sp), z2(0.5, 0.0, NelsonVector(1), sp);
    const IntegrandInputs z(0.8, 0.0, NelsonVector(1), sp);
    CHECK((gmm_operator(z2, ns) * gmm_operator(z1, ns) - gmm_operator(z, ns)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("grid cache summaries match the direct pullbacks") {
    Gen gen(6);
    const auto sp = gen.space(3);
    const auto coeffs = builtin::bump_coupling(1, {1.0, 0.5, -0.3}, 1.2, 2.0);
    const GridKernelCache cache(sp, 0.7, 25);
    for (std::uint64_t id = 0; id < 10; ++id) {
        const auto p = bridge(id, 0.0, 0.5, 0.7, 25);
        const auto K = compute_K(p, coeffs);
        const auto a = cache.summarize(K);
        const auto b = summarize(IntegrandInputs(0.7, 0.0, K, sp));
        CHECK((a.j0 - b.j0).norm() < 1e-13);
        CHECK((a.jt - b.jt).norm() < 1e-13);
        CHECK(std::abs(a.norm_sq - b.norm_sq) < 1e-12);
    }
}

}
