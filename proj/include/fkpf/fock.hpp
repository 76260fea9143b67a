#pragma once

#include <vector>

#include <Eigen/Sparse>

#include "fkpf/oneboson.hpp"

namespace fkpf {

using SpMatC = Eigen::SparseMatrix<cplx, Eigen::ColMajor, std::ptrdiff_t>;

// Finite linear combination sum_i c_i eps(f_i) of exponential vectors.
class ExpVecCombo {
public:
    struct Term {
        cplx coef;
        OneBosonVector param;
    };

    ExpVecCombo() = default;
    static ExpVecCombo single(const OneBosonVector& f, cplx c = 1.0);

    void add(cplx c, const OneBosonVector& f);
    const std::vector<Term>& terms() const { return terms_; }
    std::size_t size() const { return terms_.size(); }

private:
    std::vector<Term> terms_;
};

cplx ev_inner(const ExpVecCombo& a, const ExpVecCombo& b);
double ev_norm_sq(const ExpVecCombo& a);

// W(f, C) eps(g) = exp(-|f|^2/2 - <f, C g>) eps(f + C g), term by term.
// C holds per-mode multipliers with |c_m| <= 1; an empty C means identity.
ExpVecCombo weyl_apply(const OneBosonVector& f, const VecC& C, const ExpVecCombo& v);
// Gamma(C) = W(0, C).
ExpVecCombo gamma_apply(const VecC& C, const ExpVecCombo& v);

// <eps(u), phi(f) eps(g)> = (<f, g> + <u, f>) e^{<u, g>} with phi = a + a^dagger.
cplx field_matrix_element(const OneBosonVector& u, const OneBosonVector& f, const OneBosonVector& g);

class NumberBasisSpace {
public:
    NumberBasisSpace(OneBosonSpace base, std::vector<int> cutoffs);
    NumberBasisSpace(OneBosonSpace base, int cutoff);

    const OneBosonSpace& base() const { return base_; }
    std::size_t modes() const { return base_.modes(); }
    const std::vector<int>& cutoffs() const { return cutoffs_; }
    std::size_t dimension() const { return dim_; }

    // Mixed-radix index; mode 0 varies fastest.
    std::size_t index(const std::vector<int>& occ) const;
    std::vector<int> occupation(std::size_t idx) const;
    int occupation(std::size_t idx, std::size_t m) const;

private:
    OneBosonSpace base_;
    std::vector<int> cutoffs_;
    std::vector<std::size_t> stride_;
    std::size_t dim_ = 1;
};

struct EmbeddedVector {
    VecC vec;
    // Squared norm of the dropped part: e^{|g|^2} - |vec|^2, evaluated per mode.
    double tail_norm_sq;
};

EmbeddedVector embed_expvec(const NumberBasisSpace& ns, const OneBosonVector& g);

SpMatC build_annihilation(const NumberBasisSpace& ns, std::size_t m);
// a(f) = sum conj(f_m) a_m, a^dagger(f) = sum f_m a_m^dagger.
SpMatC build_annihilation(const NumberBasisSpace& ns, const OneBosonVector& f);
SpMatC build_creation(const NumberBasisSpace& ns, const OneBosonVector& f);
// phi(g) = a(g) + a^dagger(g); g must be real.
SpMatC build_field(const NumberBasisSpace& ns, const OneBosonVector& g);
VecR build_dGamma(const NumberBasisSpace& ns);
// exp(-i phi(g)) on the truncated space via eigendecomposition (unitary).
MatC field_exponential(const NumberBasisSpace& ns, const OneBosonVector& g);

// F_{t/2}(g) = sum_n a^dagger(g)^n / n! exp(-t dGamma / 2), truncated.
MatC f_series_operator(const NumberBasisSpace& ns, double t, const OneBosonVector& g);
// Same series applied to a vector without forming the operator.
VecC f_series_apply(const NumberBasisSpace& ns, double t, const OneBosonVector& g, const VecC& v);
// F_{t/2}(g)^* v = exp(-t dGamma/2) sum_n a(g)^n / n! v.
VecC f_series_adjoint_apply(const NumberBasisSpace& ns, double t, const OneBosonVector& g, const VecC& v);

// |phi(f) psi| / (|f|_{kappa^{-1}} |psi|_{dGamma(kappa)}) where
// |f|^2_{kappa^{-1}} = sum (1 + 1/kappa_m)|f_m|^2 and |psi|^2_{dGamma(kappa)} = <psi, dGamma(kappa) psi> + |psi|^2
// are the form norms.
double field_relative_bound_ratio(const NumberBasisSpace& ns, const VecR& kappa, const OneBosonVector& f,
                                  const VecC& psi);

}  // namespace fkpf
