#pragma once

#include "fkpf/fock.hpp"
#include "fkpf/oneboson.hpp"

namespace fkpf {

struct IntegrandInputs {
    double t;
    cplx S;
    NelsonVector K;
    OneBosonSpace space;

    IntegrandInputs(double t, cplx S, NelsonVector K, OneBosonSpace space);
};

// Precomputed pieces of K entering every exponential-vector element.
struct KSummary {
    VecC j0;   // j_0^* K
    VecC jt;   // j_t^* K
    double norm_sq;
};

KSummary summarize(const IntegrandInputs& inp);

// <eps(u), W_t^* eps(g)> with W_t^* = e^{-conj S} Gamma(j_0)^* W(-iK) Gamma(j_t).
cplx w_star_matrix_element(const IntegrandInputs& inp, const OneBosonVector& u, const OneBosonVector& g);
// <eps(u), W_t eps(g)> with W_t = e^{-S} Gamma(j_t)^* W(iK) Gamma(j_0).
cplx w_kernel_matrix_element(const IntegrandInputs& inp, const OneBosonVector& u, const OneBosonVector& g);

cplx w_star_from_summary(double t, cplx S, const KSummary& k, const OneBosonSpace& space, const VecC& u,
                         const VecC& g);
cplx w_kernel_from_summary(double t, cplx S, const KSummary& k, const OneBosonSpace& space, const VecC& u,
                           const VecC& g);

// e^{-S - |K|^2/2} F_{t/2}(i j_t^* K) F_{t/2}(-i j_0^* K)^* on the truncated space.
MatC gmm_operator(const IntegrandInputs& inp, const NumberBasisSpace& ns);
// <embed(u), gmm embed(g)> evaluated through vector applications only.
cplx gmm_matrix_element(const IntegrandInputs& inp, const NumberBasisSpace& ns, const OneBosonVector& u,
                        const OneBosonVector& g);

struct ContractionReport {
    bool ok;
    double slack;  // bound - |element|, relative to the bound
};

// |<eps(u), W eps(g)>| <= e^{-Re S} e^{(|u|^2 + |g|^2)/2} (1 + 1e-10).
ContractionReport contraction_check(const IntegrandInputs& inp, const OneBosonVector& u, const OneBosonVector& g);

}  // namespace fkpf

namespace fkpf {

// Exponential tables for K whose atoms sit exactly at the grid times s_0..s_n
// (the layout produced by compute_K); summarizes such K in O(n M).
class GridKernelCache {
public:
    GridKernelCache(const OneBosonSpace& space, double t, int n);
    KSummary summarize(const NelsonVector& K) const;
    const OneBosonSpace& space() const { return space_; }

private:
    OneBosonSpace space_;
    double t_;
    int n_;
    MatR e0_;  // exp(-s_l omega_m)
    MatR et_;  // exp(-(t - s_l) omega_m)
    VecR ed_;  // exp(-dt omega_m)
};

}  // namespace fkpf
