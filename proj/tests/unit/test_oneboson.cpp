#include <doctest.h>

#include <cmath>

#include "fkpf/oneboson.hpp"
#include "../support/gen.hpp"

using namespace fkpf;
using fkpf::testing::Gen;

TEST_SUITE("oneboson") {

TEST_CASE("space invariants") {
    CHECK_THROWS_AS(OneBosonSpace(std::vector<double>{1.0, 0.0}), InvalidArgument);
    CHECK_THROWS_AS(OneBosonSpace(std::vector<double>{-1.0}), InvalidArgument);
    CHECK_THROWS_AS(OneBosonSpace(std::vector<double>{}), InvalidArgument);
    const OneBosonSpace s(std::vector<double>{1.0, 2.0});
    CHECK(s.modes() == 2);
    CHECK(s.omega(1) == 2.0);
}

TEST_CASE("inner product examples") {
    const OneBosonSpace s(std::vector<double>{1.0, 1.0});
    const cplx I(0, 1);
    CHECK(inner(s, OneBosonVector{1.0, 0.0}, OneBosonVector{0.0, 1.0}) == cplx(0.0));
    CHECK(inner(s, OneBosonVector{1.0, 0.0}, OneBosonVector{1.0, 0.0}) == cplx(1.0));
    CHECK(std::abs(inner(s, OneBosonVector{1.0, I}, OneBosonVector{1.0, -I})) < 1e-15);
    CHECK_THROWS_AS(inner(s, OneBosonVector{1.0}, OneBosonVector{1.0, 0.0}), DimensionMismatch);
}

TEST_CASE("heat semigroup") {
    const OneBosonSpace s1(std::vector<double>{1.0});
    const auto v = heat_apply(s1, std::log(2.0), OneBosonVector{1.0});
    CHECK(std::abs(v[0] - 0.5) < 1e-15);
    CHECK_THROWS_AS(heat_apply(s1, -0.1, OneBosonVector{1.0}), InvalidArgument);

    Gen gen(11);
    for (int trial = 0; trial < 50; ++trial) {
        const auto sp = gen.space(3);
        const auto u = gen.vec(3);
        CHECK(heat_apply(sp, 0.0, u).amplitudes() == u.amplitudes());
        const double a = gen.uniform(0, 2), b = gen.uniform(0, 2);
        const auto lhs = heat_apply(sp, a, heat_apply(sp, b, u));
        const auto rhs = heat_apply(sp, a + b, u);
        CHECK((lhs.amplitudes() - rhs.amplitudes()).cwiseAbs().maxCoeff() < 1e-14);
        CHECK(heat_apply(sp, a, gen.real_vec(3)).is_real());
    }
}

TEST_CASE("nelson kernel examples") {
    const OneBosonSpace s1(std::vector<double>{1.0});
    const OneBosonVector e{1.0};
    CHECK(nelson_kernel_inner(s1, 0.3, e, 0.3, e) == cplx(1.0));
    CHECK(std::abs(nelson_kernel_inner(s1, 2.0, e, 1.0, e) - std::exp(-1.0)) < 1e-15);
    const auto q = js_quadrature_inner(s1, 2.0, e, 1.0, e);
    CHECK(std::abs(q.value - std::exp(-1.0)) < 1e-6);
    const OneBosonSpace s2(std::vector<double>{1.0, 3.0});
    CHECK(nelson_kernel_inner(s2, 0.1, OneBosonVector{1.0, 0.0}, 1.7, OneBosonVector{0.0, 1.0}) == cplx(0.0));
}

TEST_CASE("quadrature oracle") {
    const OneBosonSpace s1(std::vector<double>{1.0});
    const OneBosonVector e{1.0};
    const auto q0 = js_quadrature_inner(s1, 0.0, e, 0.0, e);
    CHECK(std::abs(q0.value - 1.0) < 1e-6);
    CHECK(q0.truncation_bound < 1e-8);
    CHECK(js_quadrature_inner(s1, 0.5, OneBosonVector{0.0}, 0.1, e).value == cplx(0.0));

    Gen gen(2024);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t M = static_cast<std::size_t>(gen.integer(1, 2));
        const auto sp = gen.space(M, 0.1, 10.0);
        const double s = gen.uniform(-5, 5);
        const double r = s + gen.uniform(-5, 5);
        const auto u = gen.vec(M), v = gen.vec(M);
        const auto q = js_quadrature_inner(sp, s, u, r, v);
        worst = std::max(worst, std::abs(q.value - nelson_kernel_inner(sp, s, u, r, v)));
    }
    CHECK(worst < 1e-6);

    KappaGrid coarse;
    coarse.half_width = 10.0;
    CHECK_THROWS_AS(js_quadrature_inner(s1, 0.0, e, 0.0, e, coarse), InvalidArgument);
}

TEST_CASE("pullback examples") {
    const OneBosonSpace s1(std::vector<double>{1.0});
    const OneBosonVector g{2.5};
    NelsonVector K(1);
    K.add(0.7, 1.0, g);
    CHECK(pullback(s1, 0.7, K).amplitudes() == g.amplitudes());
    NelsonVector K0(1);
    K0.add(0.0, 1.0, g);
    CHECK(std::abs(pullback(s1, std::log(2.0), K0)[0] - 1.25) < 1e-15);
    CHECK(pullback(s1, 1.0, NelsonVector(1)).norm_sq() == 0.0);

    Gen gen(5);
    for (int trial = 0; trial < 30; ++trial) {
        const auto sp = gen.space(2);
        const auto Kr = gen.nelson(2, 40, 1.0, true);
        double im = 0.0;
        for (double t : {0.0, 0.3, 1.0}) im = std::max(im, pullback(sp, t, Kr).amplitudes().imag().cwiseAbs().maxCoeff());
        CHECK(im < 1e-14);
    }
}

TEST_CASE("nelson norm examples") {
    const OneBosonSpace s1(std::vector<double>{1.0});
    const OneBosonVector g{1.0};
    NelsonVector K(1);
    K.add(0.4, 1.0, g);
    CHECK(std::abs(nelson_norm_sq(s1, K) - 1.0) < 1e-15);
    NelsonVector K2(1);
    K2.add(0.0, 1.0, g);
    K2.add(1.0, 1.0, g);
    CHECK(std::abs(nelson_norm_sq(s1, K2) - (2 + 2 * std::exp(-1.0))) < 1e-14);
    // The 2x2 Gram entries themselves via quadrature.
    const auto q01 = js_quadrature_inner(s1, 0.0, g, 1.0, g).value;
    CHECK(std::abs(2.0 + 2.0 * q01.real() - 2.7357588823428847) < 2e-6);
    CHECK(nelson_norm_sq(s1, NelsonVector(1)) == 0.0);
}

TEST_CASE("nelson norm matches the Gram double sum and stays nonnegative") {
    Gen gen(77);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t M = static_cast<std::size_t>(gen.integer(1, 3));
        const auto sp = gen.space(M);
        const std::size_t atoms = static_cast<std::size_t>(gen.integer(1, 200));
        const auto K = gen.nelson(M, atoms, 2.0, trial % 2 == 0);
        const double fast = nelson_norm_sq(sp, K);
        const cplx gram = nelson_gram_sum(sp, K, K);
        CHECK(fast >= -1e-12);
        CHECK(std::abs(gram.imag()) < 1e-9 * std::max(1.0, std::abs(gram)));
        CHECK(std::abs(fast - gram.real()) < 1e-9 * std::max(1.0, gram.real()));
        CHECK(std::abs(nelson_norm_sq(sp, K.coalesced()) - fast) < 1e-9 * std::max(1.0, fast));
    }
}

TEST_CASE("isometry of j_s") {
    Gen gen(8);
    for (int trial = 0; trial < 50; ++trial) {
        const auto sp = gen.space(2);
        const auto u = gen.vec(2);
        const double s = gen.uniform(-3, 3);
        CHECK(nelson_kernel_inner(sp, s, u, s, u) == inner(sp, u, u));
    }
}

TEST_CASE("nelson vector atoms and merging") {
    NelsonVector K(1);
    K.add(0.5, 2.0, OneBosonVector{1.0});
    K.add(0.1, 1.0, OneBosonVector{3.0});
    K.add(0.5, 1.0, OneBosonVector{-1.0});
    CHECK(!K.times_sorted());
    const auto C = K.coalesced();
    REQUIRE(C.size() == 2);
    CHECK(C.time(0) == 0.1);
    CHECK(C.vector(1)[0] == cplx(1.0));
    CHECK(C.weight(1) == cplx(1.0));
    CHECK_THROWS_AS(K.add(0.0, 1.0, OneBosonVector{1.0, 2.0}), DimensionMismatch);
}

}
