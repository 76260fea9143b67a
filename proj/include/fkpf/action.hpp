#pragma once

#include <optional>

#include "fkpf/coefficients.hpp"
#include "fkpf/oneboson.hpp"
#include "fkpf/paths.hpp"

namespace fkpf {

struct ActionDiagnostics {
    double forward_ito = 0.0;   // sum A(B_{l-1}) . dB_l
    double backward_ito = 0.0;  // sum A(B_l) . dB_l
    std::optional<cplx> S_div;
};

struct ActionResult {
    cplx S = 0.0;
    NelsonVector K;
    double gate = 1.0;
    ActionDiagnostics diagnostics;
};

double forward_ito_sum(const SampledPath& p, const Coefficients& c);
double backward_ito_sum(const SampledPath& p, const Coefficients& c);
// Endpoint-average sum; equals (forward + backward) / 2 by construction.
double stratonovich_scalar(const SampledPath& p, const Coefficients& c);
// Trapezoid of V - U along the path.
double potential_trapezoid(const SampledPath& p, const Coefficients& c);

cplx compute_S(const SampledPath& p, const Coefficients& c);
// Atoms at every grid time s_l with vector G(B_l) (dB_l + dB_{l+1}) / 2 (the two
// half-atoms at each interior time merged).
NelsonVector compute_K(const SampledPath& p, const Coefficients& c);
// Same sum without merging: 2n atoms in the order (s_{l-1}, left half), (s_l, right half).
NelsonVector compute_K_unmerged(const SampledPath& p, const Coefficients& c);
void compute_K_into(const SampledPath& p, const Coefficients& c, NelsonVector& K, MatR& gbuf);

// Ito (left-endpoint) forms with divergence corrections.
cplx compute_S_div(const SampledPath& p, const Coefficients& c);
NelsonVector compute_K_div(const SampledPath& p, const Coefficients& c);

double localize_gate(const SampledPath& p, const Domain& domain, ExitCorrection correction = ExitCorrection::None,
                     PathStream* rng = nullptr);

// Gate first; on a killed path no coefficient is evaluated.
ActionResult evaluate_action(const SampledPath& p, const Coefficients& c, const Domain& domain,
                             ExitCorrection correction = ExitCorrection::None, PathStream* rng = nullptr);

}  // namespace fkpf
