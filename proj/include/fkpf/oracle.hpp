#pragma once

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "fkpf/coefficients.hpp"
#include "fkpf/domain.hpp"
#include "fkpf/fock.hpp"

namespace fkpf {

// Uniform grid of interior sites x_i = lo + (i + 1) h, h = (hi - lo) / (points + 1),
// per axis; the box faces carry Dirichlet conditions.
struct GridSpec {
    int dim = 1;
    std::vector<double> lo, hi;
    std::vector<int> points;

    static GridSpec interval(double lo, double hi, int points);
    static GridSpec box(std::vector<double> lo, std::vector<double> hi, std::vector<int> points);

    void validate() const;
    double spacing(int axis) const { return (hi[axis] - lo[axis]) / (points[axis] + 1); }
    std::size_t site_count() const;
    std::vector<double> site(std::size_t flat) const;
    std::vector<int> multi_index(std::size_t flat) const;
    std::size_t flat_index(const std::vector<int>& mi) const;
};

struct DiscreteOperator {
    SpMatC matrix;
    GridSpec grid;
    std::vector<std::size_t> sites;  // flat grid indices of the active sites
    std::size_t fock_dim = 1;
    bool hermitian = false;
    double hermiticity_error = 0.0;
    std::string metadata;

    std::size_t dimension() const { return static_cast<std::size_t>(matrix.rows()); }
    std::size_t site_count() const { return sites.size(); }
    std::vector<double> site_coords(std::size_t k) const { return grid.site(sites[k]); }
};

// Dimension cap for assembled operators (sites x Fock dimension).
inline constexpr std::size_t kOracleDimensionCap = 400000;

DiscreteOperator build_schrodinger(const GridSpec& grid, const Domain& domain, const Coefficients::ScalarFn& V,
                                   const Coefficients::ScalarFn& U = {});
DiscreteOperator build_magnetic(const GridSpec& grid, const Domain& domain, const Coefficients::VectorFn& A,
                                const Coefficients::ScalarFn& V);
// Covariant hopping with link operators exp(-i int_link A) exp(-i phi(int_link G_j)),
// plus (V - U) (x) 1 + 1 (x) dGamma(omega).
DiscreteOperator build_pauli_fierz(const GridSpec& grid, const Domain& domain, const Coefficients& coeffs,
                                   const NumberBasisSpace& ns, std::size_t dimension_cap = kOracleDimensionCap);

// Kronecker assembly op (x) 1 + 1 (x) diag(d); used to cross-check the G = 0 case.
SpMatC tensor_with_field(const SpMatC& op, const VecR& dgamma);

struct Spectral {
    VecR eigenvalues;
    MatC eigenvectors;
};

Spectral decompose(const DiscreteOperator& op);
VecC semigroup_apply(const Spectral& sp, double t, const VecC& v);
// Dense eigendecomposition for dimension <= 3000, Lanczos otherwise.
VecC semigroup_apply(const DiscreteOperator& op, double t, const VecC& v);
VecC lanczos_expm_apply(const SpMatC& H, double t, const VecC& v, double tol = 1e-12, int max_krylov = 300);

class Resolvent {
public:
    Resolvent(const DiscreteOperator& op, double E);
    VecC apply(const VecC& v) const;
    double shift() const { return E_; }

private:
    double E_;
    std::shared_ptr<Eigen::SimplicialLLT<SpMatC, Eigen::Lower>> llt_;
};

VecC resolvent_apply(const DiscreteOperator& op, double E, const VecC& v);
double lowest_eigenvalue(const DiscreteOperator& op);

// |psi(x)|_F per active site.
VecR fiber_norms(const DiscreteOperator& op, const VecC& v);

struct DiamagneticReport {
    bool ok;
    double max_violation;  // max_x (lhs(x) - rhs(x))
};

DiamagneticReport diamagnetic_check(const DiscreteOperator& H_pf, const DiscreteOperator& S_sch, double E,
                                    const VecC& phi, double tol = 1e-10);
DiamagneticReport diamagnetic_check(const Resolvent& H_res, const Resolvent& S_res, const DiscreteOperator& H_pf,
                                    const VecC& phi, double tol = 1e-10);

// Table with nodes exactly at the active grid sites of a full box grid.
CoefficientTable sample_on_sites(const Coefficients& c, const GridSpec& grid);

struct MollifyOptions {
    bool spatial = true;           // rho_n convolution and chi_n cutoff
    bool frequency_cutoff = true;  // zero modes with omega outside [1/n, n]
};

struct MollifiedTable {
    CoefficientTable table;
    double l2_distance_A;
    double l2_distance_G;
};

// A^n = rho_n * (chi_n A), G^n = rho_n * (chi_n 1_{[1/n, n]}(omega) G) by discrete
// convolution on the table nodes with normalized weights.
MollifiedTable mollify_coefficients(const CoefficientTable& table, const VecR& omega, double n,
                                    const MollifyOptions& opts = {});

struct ConvergenceRow {
    double n;
    double resolvent_difference;
    double l2_distance_A;
    double l2_distance_G;
};

// |(H^n + E)^{-1} phi - (H + E)^{-1} phi| for each n on a fixed grid and truncation.
// The table nodes must coincide with the grid sites (see sample_on_sites).
std::vector<ConvergenceRow> resolvent_convergence_study(const CoefficientTable& table, const GridSpec& grid,
                                                        const Domain& domain, const NumberBasisSpace& ns,
                                                        const std::vector<double>& n_list, double E,
                                                        const VecC& phi, const MollifyOptions& opts = {});

void write_operator_triplets(std::ostream& os, const DiscreteOperator& op);
void write_eigenvalue_csv(std::ostream& os, const VecR& eigenvalues);

}  // namespace fkpf
