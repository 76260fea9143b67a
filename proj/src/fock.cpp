#include "fkpf/fock.hpp"

#include <cmath>

namespace fkpf {

ExpVecCombo ExpVecCombo::single(const OneBosonVector& f, cplx c) {
    ExpVecCombo v;
    v.add(c, f);
    return v;
}

void ExpVecCombo::add(cplx c, const OneBosonVector& f) {
    if (!terms_.empty() && terms_.front().param.size() != f.size())
        throw DimensionMismatch("exponential vector parameters from different spaces");
    terms_.push_back({c, f});
}

cplx ev_inner(const ExpVecCombo& a, const ExpVecCombo& b) {
    cplx acc = 0.0;
    for (const auto& ta : a.terms())
        for (const auto& tb : b.terms()) {
            if (ta.param.size() != tb.param.size()) throw DimensionMismatch("ev_inner: space mismatch");
            acc += std::conj(ta.coef) * tb.coef * std::exp(ta.param.amplitudes().dot(tb.param.amplitudes()));
        }
    return acc;
}

double ev_norm_sq(const ExpVecCombo& a) {
    const cplx n = ev_inner(a, a);
    if (n.real() < -1e-10 || std::abs(n.imag()) > 1e-10 * std::max(1.0, std::abs(n)))
        throw ConsistencyError("exponential-vector Gram matrix is not positive");
    return std::max(0.0, n.real());
}

ExpVecCombo weyl_apply(const OneBosonVector& f, const VecC& C, const ExpVecCombo& v) {
    if (C.size() != 0) {
        if (static_cast<std::size_t>(C.size()) != f.size()) throw DimensionMismatch("weyl_apply: multiplier length");
        for (Eigen::Index m = 0; m < C.size(); ++m)
            require(std::abs(C[m]) <= 1.0 + 1e-15, "weyl_apply: multipliers must satisfy |c| <= 1");
    }
    const double half = 0.5 * f.norm_sq();
    ExpVecCombo out;
    for (const auto& t : v.terms()) {
        if (t.param.size() != f.size()) throw DimensionMismatch("weyl_apply: space mismatch");
        const VecC Cg = C.size() == 0 ? t.param.amplitudes() : VecC(C.cwiseProduct(t.param.amplitudes()));
        const cplx c = t.coef * std::exp(-half - f.amplitudes().dot(Cg));
        out.add(c, OneBosonVector(VecC(f.amplitudes() + Cg)));
    }
    return out;
}

ExpVecCombo gamma_apply(const VecC& C, const ExpVecCombo& v) {
    ExpVecCombo out;
    for (const auto& t : v.terms()) {
        if (static_cast<std::size_t>(C.size()) != t.param.size()) throw DimensionMismatch("gamma_apply: length");
        for (Eigen::Index m = 0; m < C.size(); ++m)
            require(std::abs(C[m]) <= 1.0 + 1e-15, "gamma_apply: multipliers must satisfy |c| <= 1");
        out.add(t.coef, OneBosonVector(VecC(C.cwiseProduct(t.param.amplitudes()))));
    }
    return out;
}

cplx field_matrix_element(const OneBosonVector& u, const OneBosonVector& f, const OneBosonVector& g) {
    if (u.size() != f.size() || f.size() != g.size()) throw DimensionMismatch("field_matrix_element: lengths");
    const cplx fg = f.amplitudes().dot(g.amplitudes());
    const cplx uf = u.amplitudes().dot(f.amplitudes());
    return (fg + uf) * std::exp(u.amplitudes().dot(g.amplitudes()));
}

NumberBasisSpace::NumberBasisSpace(OneBosonSpace base, std::vector<int> cutoffs)
    : base_(std::move(base)), cutoffs_(std::move(cutoffs)) {
    if (cutoffs_.size() != base_.modes()) throw DimensionMismatch("one cutoff per mode required");
    stride_.resize(cutoffs_.size());
    for (std::size_t m = 0; m < cutoffs_.size(); ++m) {
        require(cutoffs_[m] >= 0, "occupation cutoff must be nonnegative");
        stride_[m] = dim_;
        dim_ *= static_cast<std::size_t>(cutoffs_[m] + 1);
        if (dim_ > (std::size_t{1} << 26)) throw ResourceLimit("number-basis dimension too large");
    }
}

NumberBasisSpace::NumberBasisSpace(OneBosonSpace base, int cutoff)
    : NumberBasisSpace(base, std::vector<int>(base.modes(), cutoff)) {}

std::size_t NumberBasisSpace::index(const std::vector<int>& occ) const {
    if (occ.size() != cutoffs_.size()) throw DimensionMismatch("occupation vector length");
    std::size_t idx = 0;
    for (std::size_t m = 0; m < occ.size(); ++m) {
        require(occ[m] >= 0 && occ[m] <= cutoffs_[m], "occupation outside truncation");
        idx += stride_[m] * static_cast<std::size_t>(occ[m]);
    }
    return idx;
}

int NumberBasisSpace::occupation(std::size_t idx, std::size_t m) const {
    return static_cast<int>((idx / stride_[m]) % static_cast<std::size_t>(cutoffs_[m] + 1));
}

std::vector<int> NumberBasisSpace::occupation(std::size_t idx) const {
    std::vector<int> occ(cutoffs_.size());
    for (std::size_t m = 0; m < occ.size(); ++m) occ[m] = occupation(idx, m);
    return occ;
}

EmbeddedVector embed_expvec(const NumberBasisSpace& ns, const OneBosonVector& g) {
    if (g.size() != ns.modes()) throw DimensionMismatch("embed_expvec: length");
    const std::size_t M = ns.modes();
    // Per-mode factors g^n / sqrt(n!).
    std::vector<VecC> fac(M);
    // Tail e^{sum x_m} - prod s_m telescoped over modes, with each remainder
    // e^{x_m} - s_m summed directly so small tails survive.
    double kept = 1.0, tail = 0.0;
    for (std::size_t m = 0; m < M; ++m) {
        const int N = ns.cutoffs()[m];
        fac[m].resize(N + 1);
        fac[m][0] = 1.0;
        double s = 1.0;
        for (int n = 1; n <= N; ++n) {
            fac[m][n] = fac[m][n - 1] * g[m] / std::sqrt(static_cast<double>(n));
            s += std::norm(fac[m][n]);
        }
        const double x = std::norm(g[m]);
        double term = std::norm(fac[m][N]), r = 0.0;
        for (int n = N + 1; n < N + 100000; ++n) {
            term *= x / n;
            r += term;
            if (term <= 1e-17 * r || term == 0.0) break;
        }
        tail = tail * std::exp(x) + kept * r;
        kept *= s;
    }
    EmbeddedVector out;
    out.vec.resize(static_cast<Eigen::Index>(ns.dimension()));
    for (std::size_t i = 0; i < ns.dimension(); ++i) {
        cplx c = 1.0;
        for (std::size_t m = 0; m < M; ++m) c *= fac[m][ns.occupation(i, m)];
        out.vec[static_cast<Eigen::Index>(i)] = c;
    }
    out.tail_norm_sq = tail;
    return out;
}

namespace {

// Sum over modes of coef_m * (a_m or a_m^dagger).
SpMatC ladder(const NumberBasisSpace& ns, const VecC& coef, bool create) {
    const auto D = static_cast<std::ptrdiff_t>(ns.dimension());
    std::vector<Eigen::Triplet<cplx, std::ptrdiff_t>> trip;
    trip.reserve(ns.dimension() * ns.modes());
    for (std::size_t i = 0; i < ns.dimension(); ++i) {
        auto occ = ns.occupation(i);
        for (std::size_t m = 0; m < ns.modes(); ++m) {
            if (coef[static_cast<Eigen::Index>(m)] == cplx(0.0)) continue;
            const int n = occ[m];
            if (n == 0) continue;
            // a_m |n> = sqrt(n) |n - 1>
            auto lower = occ;
            lower[m] = n - 1;
            const auto j = static_cast<std::ptrdiff_t>(ns.index(lower));
            const double amp = std::sqrt(static_cast<double>(n));
            if (create)
                trip.emplace_back(static_cast<std::ptrdiff_t>(i), j, coef[static_cast<Eigen::Index>(m)] * amp);
            else
                trip.emplace_back(j, static_cast<std::ptrdiff_t>(i), coef[static_cast<Eigen::Index>(m)] * amp);
        }
    }
    SpMatC A(D, D);
    A.setFromTriplets(trip.begin(), trip.end());
    return A;
}

}  // namespace

SpMatC build_annihilation(const NumberBasisSpace& ns, std::size_t m) {
    require(m < ns.modes(), "mode index out of range");
    VecC c = VecC::Zero(static_cast<Eigen::Index>(ns.modes()));
    c[static_cast<Eigen::Index>(m)] = 1.0;
    return ladder(ns, c, false);
}

SpMatC build_annihilation(const NumberBasisSpace& ns, const OneBosonVector& f) {
    if (f.size() != ns.modes()) throw DimensionMismatch("annihilation: length");
    return ladder(ns, f.amplitudes().conjugate(), false);
}

SpMatC build_creation(const NumberBasisSpace& ns, const OneBosonVector& f) {
    if (f.size() != ns.modes()) throw DimensionMismatch("creation: length");
    return ladder(ns, f.amplitudes(), true);
}

SpMatC build_field(const NumberBasisSpace& ns, const OneBosonVector& g) {
    require(g.is_real(), "build_field needs a real coupling vector");
    SpMatC phi = build_annihilation(ns, g) + build_creation(ns, g);
    phi.makeCompressed();
    return phi;
}

VecR build_dGamma(const NumberBasisSpace& ns) {
    VecR d(static_cast<Eigen::Index>(ns.dimension()));
    for (std::size_t i = 0; i < ns.dimension(); ++i) {
        double e = 0.0;
        for (std::size_t m = 0; m < ns.modes(); ++m) e += ns.base().omega(m) * ns.occupation(i, m);
        d[static_cast<Eigen::Index>(i)] = e;
    }
    return d;
}

MatC field_exponential(const NumberBasisSpace& ns, const OneBosonVector& g) {
    const MatC phi = MatC(build_field(ns, g));
    Eigen::SelfAdjointEigenSolver<MatC> es(phi);
    const VecC ph = (-cplx(0.0, 1.0) * es.eigenvalues().cast<cplx>()).array().exp();
    return es.eigenvectors() * ph.asDiagonal() * es.eigenvectors().adjoint();
}

MatC f_series_operator(const NumberBasisSpace& ns, double t, const OneBosonVector& g) {
    require(t > 0.0, "f_series_operator needs t > 0");
    const VecR d = build_dGamma(ns);
    const auto D = static_cast<Eigen::Index>(ns.dimension());
    MatC term = MatC::Zero(D, D);
    for (Eigen::Index i = 0; i < D; ++i) term(i, i) = std::exp(-0.5 * t * d[i]);
    MatC sum = term;
    const SpMatC ad = build_creation(ns, g);
    int max_total = 0;
    for (int c : ns.cutoffs()) max_total += c;
    for (int n = 1; n <= max_total; ++n) {
        term = (ad * term) / static_cast<double>(n);
        sum += term;
    }
    return sum;
}

VecC f_series_apply(const NumberBasisSpace& ns, double t, const OneBosonVector& g, const VecC& v) {
    require(t > 0.0, "f_series_apply needs t > 0");
    const VecR d = build_dGamma(ns);
    VecC term = v.cwiseProduct((-0.5 * t * d).array().exp().matrix().cast<cplx>());
    VecC sum = term;
    const SpMatC ad = build_creation(ns, g);
    int max_total = 0;
    for (int c : ns.cutoffs()) max_total += c;
    for (int n = 1; n <= max_total; ++n) {
        term = (ad * term) / static_cast<double>(n);
        sum += term;
    }
    return sum;
}

VecC f_series_adjoint_apply(const NumberBasisSpace& ns, double t, const OneBosonVector& g, const VecC& v) {
    require(t > 0.0, "f_series_adjoint_apply needs t > 0");
    const VecR d = build_dGamma(ns);
    const SpMatC an = build_annihilation(ns, g);
    VecC term = v;
    VecC sum = term;
    int max_total = 0;
    for (int c : ns.cutoffs()) max_total += c;
    for (int n = 1; n <= max_total; ++n) {
        term = (an * term) / static_cast<double>(n);
        sum += term;
    }
    return sum.cwiseProduct((-0.5 * t * d).array().exp().matrix().cast<cplx>());
}

double field_relative_bound_ratio(const NumberBasisSpace& ns, const VecR& kappa, const OneBosonVector& f,
                                  const VecC& psi) {
    if (static_cast<std::size_t>(kappa.size()) != ns.modes()) throw DimensionMismatch("kappa length");
    const SpMatC phi = build_field(ns, f);
    const double lhs = (phi * psi).norm();
    double fn = 0.0;
    for (Eigen::Index m = 0; m < kappa.size(); ++m) fn += (1.0 + 1.0 / kappa[m]) * std::norm(f[m]);
    double dg = 0.0;
    for (std::size_t i = 0; i < ns.dimension(); ++i) {
        double e = 0.0;
        for (std::size_t m = 0; m < ns.modes(); ++m) e += kappa[static_cast<Eigen::Index>(m)] * ns.occupation(i, m);
        dg += e * std::norm(psi[static_cast<Eigen::Index>(i)]);
    }
    const double rhs = std::sqrt(fn) * std::sqrt(dg + psi.squaredNorm());
    return lhs / rhs;
}

}  // namespace fkpf
