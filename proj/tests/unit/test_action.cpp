#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "fkpf/action.hpp"
#include "../support/gen.hpp"

using namespace fkpf;

namespace {

SampledPath bm(std::uint64_t id, double x0, double t, int n) {
    PathStream rng(2718, id);
    const double x[1] = {x0};
    return sample_bm(rng, x, PathGrid(t, n));
}

Coefficients linear_A() {
    Coefficients c = Coefficients::zero(1, 1);
    c.A = [](std::span<const double> x, std::span<double> out) { out[0] = x[0]; };
    c.divA = [](std::span<const double>) { return 1.0; };
    return c;
}

}  // namespace

TEST_SUITE("action") {

TEST_CASE("Stratonovich sum examples") {
    const auto p = bm(1, 0.3, 1.0, 200);
    CHECK(stratonovich_scalar(p, Coefficients::zero(1, 1)) == 0.0);
    const auto c = builtin::constant_A({1.7}, 1);
    CHECK(std::abs(stratonovich_scalar(p, c) - 1.7 * (p.end()[0] - p.start()[0])) < 1e-12);

    // A(x) = x: the trapezoid sum telescopes; the forward Ito sum carries -t/2.
    const auto lin = linear_A();
    const double b0 = p.start()[0], bt = p.end()[0];
    CHECK(std::abs(stratonovich_scalar(p, lin) - 0.5 * (bt * bt - b0 * b0)) < 1e-12);
    double prev = 1e9;
    for (int n : {16, 64, 256, 1024}) {
        double acc = 0.0;
        for (std::size_t i = 0; i < 400; ++i) {
            const auto q = bm(i, 0.0, 1.0, n);
            const double e = q.end()[0];
            acc += std::pow(forward_ito_sum(q, lin) - (0.5 * e * e - 0.5), 2);
        }
        const double rms = std::sqrt(acc / 400);
        CHECK(rms < prev);
        prev = rms;
    }
    CHECK(prev < 0.05);
}

TEST_CASE("trapezoid is the average of forward and backward Ito sums and flips under reversal") {
    const auto c = builtin::smooth_trig({1.0}, 0.8, 0.0);
    for (std::size_t i = 0; i < 50; ++i) {
        const auto p = bm(i, 0.1, 0.7, 37);
        CHECK(stratonovich_scalar(p, c) == 0.5 * (forward_ito_sum(p, c) + backward_ito_sum(p, c)));
        const auto r = reverse(p);
        CHECK(std::abs(forward_ito_sum(r, c) + backward_ito_sum(p, c)) < 1e-12);
        CHECK(std::abs(stratonovich_scalar(r, c) + stratonovich_scalar(p, c)) < 1e-12);
    }
}

TEST_CASE("compute_S examples") {
    const auto p = bm(3, 0.0, 0.9, 64);
    const auto cv = builtin::constant_V(1, 1, 2.5);
    CHECK(std::abs(compute_S(p, cv) - cplx(2.5 * 0.9, 0.0)) < 1e-13);
    const auto ca = builtin::constant_A({-0.6}, 1);
    const cplx sa = compute_S(p, ca);
    CHECK(sa.real() == 0.0);
    CHECK(std::abs(sa.imag() - 0.6 * (p.end()[0] - p.start()[0])) < 1e-12);

    Coefficients mix = builtin::smooth_trig({1.0}, 1.1, 0.3);
    mix.V = [](std::span<const double> x) { return 1.0 + x[0] * x[0]; };
    mix.U = [](std::span<const double> x) { return 0.25 * std::cos(x[0]); };
    for (std::size_t i = 0; i < 20; ++i) {
        const auto q = bm(i, 0.2, 1.3, 50);
        const cplx s = compute_S(q, mix);
        CHECK(s.real() == potential_trapezoid(q, mix));
        CHECK(compute_S(q, builtin::smooth_trig({1.0}, 1.1, 0.3)).real() == 0.0);
    }
}

TEST_CASE("compute_K examples") {
    const auto p = bm(5, 0.0, 1.0, 40);
    CHECK(compute_K(p, Coefficients::zero(1, 1)).empty());
    const OneBosonSpace sp(std::vector<double>{0.9, 2.2});
    const auto cg = builtin::constant_G(1, {1.0, -0.5}, 0.7);
    const auto K = compute_K(p, cg);
    CHECK(K.size() == 41);
    CHECK(K.is_real());
    VecC sum = VecC::Zero(2);
    for (std::size_t l = 0; l < K.size(); ++l) sum += K.weight(l) * K.vector(l);
    const double db = p.end()[0] - p.start()[0];
    CHECK(std::abs(sum[0] - 0.7 * db) < 1e-12);
    CHECK(std::abs(sum[1] + 0.35 * db) < 1e-12);

    // Merged atoms reproduce the unmerged double sum.
    const auto Ku = compute_K_unmerged(p, cg);
    CHECK(Ku.size() == 80);
    const double n_merged = nelson_norm_sq(sp, K);
    const double n_gram = nelson_gram_sum(sp, Ku, Ku).real();
    CHECK(std::abs(n_merged - n_gram) < 1e-12 * std::max(1.0, n_gram));

    // Reversal with relabelled times s -> t - s.
    const auto Kr = compute_K(reverse(p), cg).retimed(-1.0, 1.0);
    CHECK(std::abs(nelson_norm_sq(sp, Kr) - n_merged) < 1e-12 * std::max(1.0, n_merged));
}

TEST_CASE("divergence forms") {
    const auto p = bm(6, 0.4, 0.8, 30);
    const auto ca = builtin::constant_A({1.3}, 1);
    CHECK(compute_S_div(p, ca) == cplx(0.0, -forward_ito_sum(p, ca)));
    CHECK(std::abs(compute_S_div(p, ca) - compute_S(p, ca)) < 1e-12);

    const auto cg = builtin::constant_G(1, {1.0}, 0.4);
    const auto Kd = compute_K_div(p, cg);
    REQUIRE(Kd.size() == 30);
    for (std::size_t l = 0; l < Kd.size(); ++l) {
        CHECK(Kd.time(l) == p.grid().time(static_cast<int>(l)));
        CHECK(Kd.vector(l)[0] == cplx(0.4 * (p.point(static_cast<int>(l) + 1)[0] - p.point(static_cast<int>(l))[0])));
    }
    Coefficients nodiv = builtin::smooth_trig({1.0}, 1.0, 1.0);
    nodiv.divA = {};
    CHECK_THROWS_AS(compute_S_div(p, nodiv), InvalidArgument);

    // Ito + divergence converges to the trapezoid form.
    const auto trig = builtin::smooth_trig({1.0}, 1.0, 1.0);
    const OneBosonSpace sp(std::vector<double>{1.0});
    std::vector<double> rs, rk;
    for (int n : {32, 128, 512}) {
        double as = 0.0, ak = 0.0;
        for (std::size_t i = 0; i < 300; ++i) {
            const auto q = bm(i, 0.0, 1.0, n);
            as += std::norm(compute_S(q, trig) - compute_S_div(q, trig));
            ak += nelson_norm_sq(sp, compute_K(q, trig).combined(compute_K_div(q, trig), -1.0));
        }
        rs.push_back(std::sqrt(as / 300));
        rk.push_back(std::sqrt(ak / 300));
    }
    CHECK(rs[2] < rs[1]);
    CHECK(rs[1] < rs[0]);
    CHECK(rk[2] < rk[1]);
    CHECK(rk[1] < rk[0]);
}

TEST_CASE("gate first: no coefficient is evaluated on killed paths or outside the domain") {
    const Domain I = Domain::interval(-1.0, 1.0);
    int outside_calls = 0, calls = 0;
    Coefficients c = Coefficients::zero(1, 1);
    c.A = [&](std::span<const double> x, std::span<double> out) {
        ++calls;
        if (!I.contains(x)) ++outside_calls;
        out[0] = 1.0;
    };
    c.V = [&](std::span<const double> x) {
        ++calls;
        if (!I.contains(x)) ++outside_calls;
        return 0.0;
    };
    c.G = [&](std::span<const double> x, Eigen::Ref<MatR> out) {
        ++calls;
        if (!I.contains(x)) ++outside_calls;
        out.setConstant(1.0);
    };
    int killed = 0;
    for (std::size_t i = 0; i < 500; ++i) {
        const auto p = bm(i, 0.0, 1.0, 32);
        const int before = calls;
        const auto r = evaluate_action(p, c, I);
        if (r.gate == 0.0) {
            ++killed;
            CHECK(calls == before);
            CHECK(r.K.empty());
        }
    }
    CHECK(killed > 0);
    CHECK(outside_calls == 0);
    CHECK(localize_gate(bm(1, 0.0, 5.0, 10), Domain::all_space(1)) == 1.0);
}

TEST_CASE("exhaustion consistency") {
    const Domain I = Domain::interval(0.0, 1.0);
    const auto c = builtin::smooth_trig({1.0}, 0.9, 0.5);
    for (std::size_t i = 0; i < 200; ++i) {
        PathStream rng(55, i);
        const double x[1] = {0.5};
        const auto p = sample_bm(rng, x, PathGrid(0.05, 20));
        const auto rn = evaluate_action(p, c, I.exhaustion(8));
        if (rn.gate == 0.0) continue;
        const auto rm = evaluate_action(p, c, I.exhaustion(16));
        CHECK(rm.gate == 1.0);
        CHECK(rm.S == rn.S);
        CHECK(rm.K.vectors() == rn.K.vectors());
    }
}

TEST_CASE("additivity over concatenation") {
    Coefficients c = builtin::smooth_trig({1.0, 0.3}, 0.7, 0.9);
    c.V = [](std::span<const double> x) { return x[0] * x[0]; };
    for (std::size_t i = 0; i < 20; ++i) {
        const auto p = bm(i, 0.0, 1.0, 48);
        const int m = 17;
        const auto a = p.slice(0, m), b = p.slice(m, 48);
        const cplx whole = compute_S(p, c), parts = compute_S(a, c) + compute_S(b, c);
        CHECK(std::abs(whole - parts) < 1e-12);
        const auto Ku = compute_K_unmerged(p, c);
        const auto Kab = compute_K_unmerged(a, c).combined(compute_K_unmerged(b, c).retimed(1.0, p.grid().time(m)), 1.0);
        REQUIRE(Ku.size() == Kab.size());
        CHECK(Ku.vectors() == Kab.vectors());
        for (std::size_t l = 0; l < Ku.size(); ++l) CHECK(std::abs(Ku.time(l) - Kab.time(l)) < 1e-15);
    }
}

TEST_CASE("coefficient tables") {
    const auto c = builtin::smooth_trig({1.0, 2.0}, 0.5, 0.25);
    auto tab = CoefficientTable::sample(c, {-2.0}, {2.0}, {41});
    CHECK(tab.node_count() == 41);
    CHECK(tab.node(40)[0] == 2.0);
    const double x[1] = {0.3};
    CHECK(std::abs(tab.interpolate(tab.A(0), x) - 0.5 * std::sin(0.3)) < 2e-3);
    std::ostringstream os;
    tab.write(os);
    std::istringstream is(os.str());
    const auto back = CoefficientTable::read(is);
    CHECK(back == tab);
    CHECK(os.str().rfind("fkpf-coefficient-table 1\ndim 1\n", 0) == 0);

    // Multilinear interpolation is exact for affine data in 2D.
    CoefficientTable t2(2, {0.0, -1.0}, {1.0, 1.0}, {5, 9}, 1);
    for (std::size_t i = 0; i < t2.node_count(); ++i) {
        const auto y = t2.node(i);
        t2.V()[i] = 2.0 * y[0] - 3.0 * y[1] + 0.5;
    }
    const double q[2] = {0.37, 0.11};
    CHECK(std::abs(t2.interpolate(t2.V(), q) - (2 * 0.37 - 3 * 0.11 + 0.5)) < 1e-14);
    const auto view = t2.as_coefficients();
    CHECK(std::abs(view.V(q) - (2 * 0.37 - 3 * 0.11 + 0.5)) < 1e-14);

    std::istringstream bad("fkpf-coefficient-table 2\n");
    CHECK_THROWS_AS(CoefficientTable::read(bad), InvalidArgument);
}

}
