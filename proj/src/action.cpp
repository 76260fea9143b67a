#include "fkpf/action.hpp"

#include <vector>

namespace fkpf {

namespace {

void check_dims(const SampledPath& p, const Coefficients& c) {
    if (p.dim() != c.dim) throw DimensionMismatch("path and coefficient dimensions differ");
}

}  // namespace

double forward_ito_sum(const SampledPath& p, const Coefficients& c) {
    check_dims(p, c);
    if (!c.has_A()) return 0.0;
    const int d = p.dim();
    std::vector<double> a(static_cast<std::size_t>(d));
    double acc = 0.0;
    for (int l = 1; l <= p.steps(); ++l) {
        auto x0 = p.point(l - 1), x1 = p.point(l);
        c.A(x0, a);
        for (int k = 0; k < d; ++k) acc += a[k] * (x1[k] - x0[k]);
    }
    return acc;
}

double backward_ito_sum(const SampledPath& p, const Coefficients& c) {
    check_dims(p, c);
    if (!c.has_A()) return 0.0;
    const int d = p.dim();
    std::vector<double> a(static_cast<std::size_t>(d));
    double acc = 0.0;
    for (int l = 1; l <= p.steps(); ++l) {
        auto x0 = p.point(l - 1), x1 = p.point(l);
        c.A(x1, a);
        for (int k = 0; k < d; ++k) acc += a[k] * (x1[k] - x0[k]);
    }
    return acc;
}

double stratonovich_scalar(const SampledPath& p, const Coefficients& c) {
    return 0.5 * (forward_ito_sum(p, c) + backward_ito_sum(p, c));
}

double potential_trapezoid(const SampledPath& p, const Coefficients& c) {
    check_dims(p, c);
    if (!c.V && !c.U) return 0.0;
    const double dt = p.grid().dt();
    double acc = 0.0;
    double prev = c.potential(p.point(0));
    for (int l = 1; l <= p.steps(); ++l) {
        const double cur = c.potential(p.point(l));
        acc += 0.5 * (prev + cur) * dt;
        prev = cur;
    }
    return acc;
}

cplx compute_S(const SampledPath& p, const Coefficients& c) {
    return {potential_trapezoid(p, c), -stratonovich_scalar(p, c)};
}

void compute_K_into(const SampledPath& p, const Coefficients& c, NelsonVector& K, MatR& gbuf) {
    check_dims(p, c);
    K.clear();
    if (!c.has_G()) return;
    const int d = p.dim();
    const int n = p.steps();
    const auto M = static_cast<Eigen::Index>(c.modes);
    gbuf.resize(M, d);
    if (K.modes() != c.modes) K = NelsonVector(c.modes);
    K.reserve(static_cast<std::size_t>(n + 1));
    VecR db(d);
    VecC v(M);
    for (int l = 0; l <= n; ++l) {
        auto x = p.point(l);
        db.setZero();
        if (l > 0) {
            auto xm = p.point(l - 1);
            for (int k = 0; k < d; ++k) db[k] += x[k] - xm[k];
        }
        if (l < n) {
            auto xp = p.point(l + 1);
            for (int k = 0; k < d; ++k) db[k] += xp[k] - x[k];
        }
        c.G(x, gbuf);
        v = (0.5 * (gbuf * db)).cast<cplx>();
        K.add(p.grid().time(l), 1.0, v);
    }
}

NelsonVector compute_K(const SampledPath& p, const Coefficients& c) {
    NelsonVector K(c.modes);
    MatR g;
    compute_K_into(p, c, K, g);
    return K;
}

NelsonVector compute_K_unmerged(const SampledPath& p, const Coefficients& c) {
    check_dims(p, c);
    NelsonVector K(c.modes);
    if (!c.has_G()) return K;
    const int d = p.dim();
    MatR g(static_cast<Eigen::Index>(c.modes), d);
    VecR db(d);
    for (int l = 1; l <= p.steps(); ++l) {
        auto x0 = p.point(l - 1), x1 = p.point(l);
        for (int k = 0; k < d; ++k) db[k] = x1[k] - x0[k];
        c.G(x0, g);
        K.add(p.grid().time(l - 1), 1.0, VecC((0.5 * (g * db)).cast<cplx>()));
        c.G(x1, g);
        K.add(p.grid().time(l), 1.0, VecC((0.5 * (g * db)).cast<cplx>()));
    }
    return K;
}

cplx compute_S_div(const SampledPath& p, const Coefficients& c) {
    check_dims(p, c);
    if (!c.has_divergences()) throw InvalidArgument("divergence form needs divA / divG data");
    double div = 0.0;
    if (c.has_A()) {
        const double dt = p.grid().dt();
        for (int l = 0; l < p.steps(); ++l) div += c.divA(p.point(l)) * dt;
    }
    return {potential_trapezoid(p, c), -(forward_ito_sum(p, c) + 0.5 * div)};
}

NelsonVector compute_K_div(const SampledPath& p, const Coefficients& c) {
    check_dims(p, c);
    if (!c.has_divergences()) throw InvalidArgument("divergence form needs divA / divG data");
    NelsonVector K(c.modes);
    if (!c.has_G()) return K;
    const int d = p.dim();
    const auto M = static_cast<Eigen::Index>(c.modes);
    const double dt = p.grid().dt();
    MatR g(M, d);
    VecR dg(M);
    VecR db(d);
    for (int l = 1; l <= p.steps(); ++l) {
        auto x0 = p.point(l - 1), x1 = p.point(l);
        for (int k = 0; k < d; ++k) db[k] = x1[k] - x0[k];
        c.G(x0, g);
        c.divG(x0, dg);
        // Ito atom plus the divergence atom (weight dt/2) at the same time.
        K.add(p.grid().time(l - 1), 1.0, VecC((g * db + 0.5 * dt * dg).cast<cplx>()));
    }
    return K;
}

double localize_gate(const SampledPath& p, const Domain& domain, ExitCorrection correction, PathStream* rng) {
    return exit_time(p, domain, correction, rng).survival;
}

ActionResult evaluate_action(const SampledPath& p, const Coefficients& c, const Domain& domain,
                             ExitCorrection correction, PathStream* rng) {
    ActionResult r;
    r.K = NelsonVector(c.modes);
    r.gate = localize_gate(p, domain, correction, rng);
    if (r.gate == 0.0) return r;
    r.diagnostics.forward_ito = forward_ito_sum(p, c);
    r.diagnostics.backward_ito = backward_ito_sum(p, c);
    r.S = {potential_trapezoid(p, c), -0.5 * (r.diagnostics.forward_ito + r.diagnostics.backward_ito)};
    r.K = compute_K(p, c);
    if (c.has_divergences()) r.diagnostics.S_div = compute_S_div(p, c);
    return r;
}

}  // namespace fkpf
