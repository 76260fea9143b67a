#pragma once

#include <vector>

#include "fkpf/common.hpp"

namespace fkpf {

// Finite-mode one-boson space with counting measure and dispersion omega > 0.
class OneBosonSpace {
public:
    explicit OneBosonSpace(std::vector<double> omega);
    explicit OneBosonSpace(const VecR& omega);

    std::size_t modes() const { return static_cast<std::size_t>(omega_.size()); }
    const VecR& dispersion() const { return omega_; }
    double omega(std::size_t m) const { return omega_[static_cast<Eigen::Index>(m)]; }

    bool operator==(const OneBosonSpace& o) const;
    bool operator!=(const OneBosonSpace& o) const { return !(*this == o); }

private:
    VecR omega_;
};

class OneBosonVector {
public:
    OneBosonVector() = default;
    explicit OneBosonVector(VecC amplitudes) : a_(std::move(amplitudes)) {}
    OneBosonVector(std::initializer_list<cplx> amps);

    static OneBosonVector zero(std::size_t modes) { return OneBosonVector(VecC::Zero(static_cast<Eigen::Index>(modes))); }
    static OneBosonVector real(const VecR& v) { return OneBosonVector(v.cast<cplx>()); }
    static OneBosonVector unit(std::size_t modes, std::size_t m);

    std::size_t size() const { return static_cast<std::size_t>(a_.size()); }
    const VecC& amplitudes() const { return a_; }
    VecC& amplitudes() { return a_; }
    cplx operator[](std::size_t m) const { return a_[static_cast<Eigen::Index>(m)]; }

    bool is_real(double tol = 0.0) const;
    double norm_sq() const { return a_.squaredNorm(); }

    OneBosonVector operator+(const OneBosonVector& o) const { return OneBosonVector(a_ + o.a_); }
    OneBosonVector operator-(const OneBosonVector& o) const { return OneBosonVector(a_ - o.a_); }
    OneBosonVector operator-() const { return OneBosonVector(-a_); }
    friend OneBosonVector operator*(cplx c, const OneBosonVector& v) { return OneBosonVector(c * v.a_); }

private:
    VecC a_;
};

// Weighted atoms sum_l c_l j_{s_l} g_l. Vectors are stored as columns.
class NelsonVector {
public:
    NelsonVector() = default;
    explicit NelsonVector(std::size_t modes) : vectors_(static_cast<Eigen::Index>(modes), 0) {}

    void add(double s, cplx c, const OneBosonVector& g);
    void add(double s, cplx c, const Eigen::Ref<const VecC>& g);

    std::size_t modes() const { return static_cast<std::size_t>(vectors_.rows()); }
    std::size_t size() const { return times_.size(); }
    bool empty() const { return times_.empty(); }

    double time(std::size_t l) const { return times_[l]; }
    cplx weight(std::size_t l) const { return weights_[l]; }
    auto vector(std::size_t l) const { return vectors_.col(static_cast<Eigen::Index>(l)); }

    const std::vector<double>& times() const { return times_; }
    const std::vector<cplx>& weights() const { return weights_; }
    const MatC& vectors() const { return vectors_; }

    bool times_sorted() const;
    bool is_real(double tol = 0.0) const;

    // Atoms of this followed by atoms of o with weights scaled by c.
    NelsonVector combined(const NelsonVector& o, cplx c) const;
    // Atom times mapped s -> a*s + b.
    NelsonVector retimed(double a, double b) const;
    // Sorted by time with equal-time atoms merged (weights folded into vectors).
    NelsonVector coalesced() const;

    void reserve(std::size_t atoms);
    void clear();

private:
    std::vector<double> times_;
    std::vector<cplx> weights_;
    MatC vectors_;
};

cplx inner(const OneBosonSpace& space, const OneBosonVector& u, const OneBosonVector& v);

OneBosonVector heat_apply(const OneBosonSpace& space, double tau, const OneBosonVector& v);

// <j_s u, j_r v> = <u, exp(-|s-r| omega) v>.
cplx nelson_kernel_inner(const OneBosonSpace& space, double s, const OneBosonVector& u, double r,
                         const OneBosonVector& v);

// Graded symmetric kappa grid for the quadrature oracle. Nodes on [0, half_width]
// with spacing min(max_step, ratio * (kappa + scale)); mirrored to the negative side.
struct KappaGrid {
    double half_width = 1e9;
    double scale = 0.05;
    double ratio = 0.01;
    double max_step = 0.05;
    double tolerance = 1e-7;  // relative to max(1, sum_m |conj(u_m) v_m|)
};

struct QuadratureResult {
    cplx value;
    double truncation_bound;  // tail mass outside the grid
    double discretization_estimate;  // |I(grid) - I(grid with doubled ratio)| / 15
};

// Direct integration of j_s^* j_r over kappa using the explicit kernel
// pi^{-1/2} omega^{1/2} (kappa^2 + omega^2)^{-1/2} e^{-i s kappa}; the panels use
// Filon-Simpson weights so the oscillating factor is integrated exactly.
QuadratureResult js_quadrature_inner(const OneBosonSpace& space, double s, const OneBosonVector& u, double r,
                                     const OneBosonVector& v, const KappaGrid& grid = {});

// j_t^* K = sum_l c_l exp(-|t - s_l| omega) g_l.
OneBosonVector pullback(const OneBosonSpace& space, double t, const NelsonVector& K);

cplx nelson_inner(const OneBosonSpace& space, const NelsonVector& K, const NelsonVector& Kp);
double nelson_norm_sq(const OneBosonSpace& space, const NelsonVector& K);
// O(atoms^2) Gram double sum; the reference for nelson_norm_sq.
cplx nelson_gram_sum(const OneBosonSpace& space, const NelsonVector& K, const NelsonVector& Kp);

}  // namespace fkpf
