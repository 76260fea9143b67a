#include "fkpf/integrand.hpp"

#include <cmath>

namespace fkpf {

IntegrandInputs::IntegrandInputs(double t_, cplx S_, NelsonVector K_, OneBosonSpace space_)
    : t(t_), S(S_), K(std::move(K_)), space(std::move(space_)) {
    require(t > 0.0, "integrand horizon must be positive");
    if (!K.empty() && K.modes() != space.modes()) throw DimensionMismatch("K from a different one-boson space");
    for (double s : K.times())
        require(s >= -1e-12 * t && s <= t * (1.0 + 1e-12), "K atom times must lie in [0, t]");
}

KSummary summarize(const IntegrandInputs& inp) {
    return {pullback(inp.space, 0.0, inp.K).amplitudes(), pullback(inp.space, inp.t, inp.K).amplitudes(),
            nelson_norm_sq(inp.space, inp.K)};
}

namespace {

VecC heat(const OneBosonSpace& space, double t, const VecC& g) {
    return g.cwiseProduct((-t * space.dispersion()).array().exp().matrix().cast<cplx>());
}

void check(const OneBosonSpace& space, const VecC& v) {
    if (static_cast<std::size_t>(v.size()) != space.modes()) throw DimensionMismatch("vector length vs mode count");
}

constexpr cplx I{0.0, 1.0};

}  // namespace

cplx w_star_from_summary(double t, cplx S, const KSummary& k, const OneBosonSpace& space, const VecC& u,
                         const VecC& g) {
    check(space, u);
    check(space, g);
    if (k.j0.size() == 0) return std::exp(-std::conj(S) + u.dot(heat(space, t, g)));
    const cplx e = -std::conj(S) - 0.5 * k.norm_sq - I * k.jt.dot(g) - I * u.dot(k.j0) + u.dot(heat(space, t, g));
    return std::exp(e);
}

cplx w_kernel_from_summary(double t, cplx S, const KSummary& k, const OneBosonSpace& space, const VecC& u,
                           const VecC& g) {
    check(space, u);
    check(space, g);
    if (k.j0.size() == 0) return std::exp(-S + u.dot(heat(space, t, g)));
    const cplx e = -S - 0.5 * k.norm_sq + I * k.j0.dot(g) + I * u.dot(k.jt) + u.dot(heat(space, t, g));
    return std::exp(e);
}

cplx w_star_matrix_element(const IntegrandInputs& inp, const OneBosonVector& u, const OneBosonVector& g) {
    return w_star_from_summary(inp.t, inp.S, summarize(inp), inp.space, u.amplitudes(), g.amplitudes());
}

cplx w_kernel_matrix_element(const IntegrandInputs& inp, const OneBosonVector& u, const OneBosonVector& g) {
    return w_kernel_from_summary(inp.t, inp.S, summarize(inp), inp.space, u.amplitudes(), g.amplitudes());
}

MatC gmm_operator(const IntegrandInputs& inp, const NumberBasisSpace& ns) {
    if (ns.base() != inp.space) throw DimensionMismatch("number basis built over a different one-boson space");
    const KSummary k = summarize(inp);
    const OneBosonVector left(VecC(I * k.jt));
    const OneBosonVector right(VecC(-I * k.j0));
    const MatC F1 = f_series_operator(ns, inp.t, left);
    const MatC F2 = f_series_operator(ns, inp.t, right);
    return std::exp(-inp.S - 0.5 * k.norm_sq) * (F1 * F2.adjoint());
}

cplx gmm_matrix_element(const IntegrandInputs& inp, const NumberBasisSpace& ns, const OneBosonVector& u,
                        const OneBosonVector& g) {
    if (ns.base() != inp.space) throw DimensionMismatch("number basis built over a different one-boson space");
    const KSummary k = summarize(inp);
    const OneBosonVector left(VecC(I * k.jt));
    const OneBosonVector right(VecC(-I * k.j0));
    const VecC eu = embed_expvec(ns, u).vec;
    const VecC eg = embed_expvec(ns, g).vec;
    // <eu, F1 F2^* eg> = <F1^* eu, F2^* eg>
    const VecC a = f_series_adjoint_apply(ns, inp.t, left, eu);
    const VecC b = f_series_adjoint_apply(ns, inp.t, right, eg);
    return std::exp(-inp.S - 0.5 * k.norm_sq) * a.dot(b);
}

ContractionReport contraction_check(const IntegrandInputs& inp, const OneBosonVector& u, const OneBosonVector& g) {
    const double bound = std::exp(-inp.S.real() + 0.5 * (u.norm_sq() + g.norm_sq()));
    const double w = std::abs(w_kernel_matrix_element(inp, u, g));
    const double ws = std::abs(w_star_matrix_element(inp, u, g));
    const double worst = std::max(w, ws);
    return {worst <= bound * (1.0 + 1e-10), (bound - worst) / bound};
}

}  // namespace fkpf

namespace fkpf {

GridKernelCache::GridKernelCache(const OneBosonSpace& space, double t, int n) : space_(space), t_(t), n_(n) {
    require(t > 0.0 && n >= 1, "grid cache needs t > 0 and n >= 1");
    const auto M = static_cast<Eigen::Index>(space.modes());
    e0_.resize(M, n + 1);
    et_.resize(M, n + 1);
    for (int l = 0; l <= n; ++l) {
        const double s = l == n ? t : t * l / n;
        for (Eigen::Index m = 0; m < M; ++m) {
            e0_(m, l) = std::exp(-s * space.dispersion()[m]);
            et_(m, l) = std::exp(-(t - s) * space.dispersion()[m]);
        }
    }
    ed_ = (-(t / n) * space.dispersion()).array().exp();
}

KSummary GridKernelCache::summarize(const NelsonVector& K) const {
    const auto M = static_cast<Eigen::Index>(space_.modes());
    KSummary out{VecC::Zero(M), VecC::Zero(M), 0.0};
    if (K.empty()) return out;
    if (K.size() != static_cast<std::size_t>(n_ + 1)) throw DimensionMismatch("K does not match the cached grid");
    const MatC& V = K.vectors();
    double total = 0.0;
    for (Eigen::Index m = 0; m < M; ++m) {
        cplx j0 = 0.0, jt = 0.0, R = 0.0, prev = 0.0;
        double diag = 0.0, cross = 0.0;
        for (int l = 0; l <= n_; ++l) {
            const cplx a = K.weight(static_cast<std::size_t>(l)) * V(m, l);
            j0 += e0_(m, l) * a;
            jt += et_(m, l) * a;
            if (l > 0) {
                R = ed_[m] * (R + prev);
                cross += (std::conj(a) * R).real();
            }
            diag += std::norm(a);
            prev = a;
        }
        out.j0[m] = j0;
        out.jt[m] = jt;
        total += diag + 2.0 * cross;
    }
    out.norm_sq = std::max(total, 0.0);
    return out;
}

}  // namespace fkpf
