#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <string>

#include "fkpf/action.hpp"
#include "fkpf/integrand.hpp"

namespace fkpf {

enum class GatingKind {
    Indicator,  // exit indicator, optional crossing correction
    Penalty,    // exp(-kappa * int Y_{n_cap}), no killing
    Confined,   // exit indicator times exp(-kappa * int Y_infinity)
};

struct Gating {
    GatingKind kind = GatingKind::Indicator;
    ExitCorrection correction = ExitCorrection::None;
    double kappa = 1.0;
    double n_cap = std::numeric_limits<double>::infinity();
    bool shell_term = false;  // add the sum |grad theta_l|^2 term to Y

    static Gating indicator(ExitCorrection c = ExitCorrection::None) { return {GatingKind::Indicator, c}; }
    static Gating penalty(double kappa, double n_cap) {
        return {GatingKind::Penalty, ExitCorrection::None, kappa, n_cap};
    }
    static Gating confined(double kappa) {
        return {GatingKind::Confined, ExitCorrection::None, kappa, std::numeric_limits<double>::infinity()};
    }
};

struct MCConfig {
    std::size_t samples = 10000;
    int steps = 64;
    std::uint64_t seed = 1;
    Gating gating;
    bool antithetic = false;
    BridgeMethod bridge = BridgeMethod::Exact;
    unsigned workers = 0;  // 0: FKPF_WORKERS or hardware concurrency
    std::size_t block = 1024;

    void validate() const;
    std::string describe() const;
};

// Product state profile(x) eps(field).
struct StateSpec {
    std::function<cplx(std::span<const double>)> profile;
    OneBosonVector field;
    double sup_profile = 1.0;
    std::string description;

    static StateSpec gaussian(std::vector<double> center, double width, cplx amplitude, OneBosonVector field);
    static StateSpec indicator(const Domain& domain, OneBosonVector field);
    static StateSpec from_function(std::function<cplx(std::span<const double>)> f, double sup, OneBosonVector field,
                                   std::string description);

    // |profile|^2 integrated by the midpoint rule over a 1D or 2D box.
    double profile_l2_sq(std::vector<double> lo, std::vector<double> hi, int points_per_axis) const;
};

struct Estimate {
    cplx value = 0.0;
    double std_error = 0.0;
    std::size_t n_effective = 0;
    std::size_t n_surviving = 0;
    bool degenerate = false;       // no surviving path
    std::size_t bound_violations = 0;  // samples breaking |w| <= e^{(|u|^2+|g|^2)/2} sup|profile| with Re S >= 0
    std::uint64_t seed = 0;
    std::string config_hash;
};

// Pieces shared by all estimators.
struct Model {
    Coefficients coeffs;
    OneBosonSpace space;
    Domain domain;
};

std::string fnv1a_hex(const std::string& s);

// <eps(u), (e^{-tH} Psi)(x)> via free paths from x.
Estimate estimate_Tt_element(std::span<const double> x, const OneBosonVector& u, const StateSpec& psi, double t,
                             const Model& model, const MCConfig& cfg);

// <eps(u), e^{-tH}(x, y) eps(g)> via bridges y -> x, times p_t(x, y).
Estimate estimate_kernel_element(std::span<const double> x, std::span<const double> y, const OneBosonVector& u,
                                 const OneBosonVector& g, double t, const Model& model, const MCConfig& cfg);

// Kernel estimator with penalty gating exp(-kappa int Y_{n_cap}).
Estimate estimate_penalized_element(std::span<const double> x, std::span<const double> y, const OneBosonVector& u,
                                    const OneBosonVector& g, double t, const Model& model, MCConfig cfg,
                                    double kappa, double n_cap);

double heat_kernel(double t, std::span<const double> x, std::span<const double> y);

struct ProbePair {
    Estimate first;
    Estimate second;
    double z_score() const;
};

// <eps(u), K(x,y) eps(g)> and conj <eps(g), K(y,x) eps(u)> from independent seeds.
ProbePair symmetry_probe(std::span<const double> x, std::span<const double> y, const OneBosonVector& u,
                         const OneBosonVector& g, double t, const Model& model, const MCConfig& cfg);

struct Tabulation {
    std::vector<double> lo, hi;
    int points = 65;
};

// Direct T_{s+t} Psi at x versus T_s applied to a tabulated T_t Psi. Requires
// G = 0 so that T_t Psi stays a product state. If inner is empty the inner
// stage is tabulated by Monte Carlo on the given grid.
ProbePair chapman_probe(double s, double t, std::span<const double> x, const OneBosonVector& u,
                        const StateSpec& psi, const Model& model, const MCConfig& cfg,
                        std::function<cplx(std::span<const double>)> inner = {}, const Tabulation& tab = {});

// Per-path gate weight under the configured gating (exposed for the
// common-random-number sweeps).
double gate_weight(const SampledPath& p, const Domain& domain, const Gating& gating, PathStream* rng);

// Draws path `index` exactly as the estimators do (bridges y -> x when y is given).
SampledPath draw_path(const MCConfig& cfg, std::size_t index, double t, std::span<const double> start,
                      std::span<const double> end, bool bridge);

}  // namespace fkpf
