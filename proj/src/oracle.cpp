#include "fkpf/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>

namespace fkpf {

GridSpec GridSpec::interval(double lo, double hi, int points) {
    GridSpec g;
    g.dim = 1;
    g.lo = {lo};
    g.hi = {hi};
    g.points = {points};
    g.validate();
    return g;
}

GridSpec GridSpec::box(std::vector<double> lo, std::vector<double> hi, std::vector<int> points) {
    GridSpec g;
    g.dim = static_cast<int>(lo.size());
    g.lo = std::move(lo);
    g.hi = std::move(hi);
    g.points = std::move(points);
    g.validate();
    return g;
}

void GridSpec::validate() const {
    if (dim < 1 || lo.size() != static_cast<std::size_t>(dim) || hi.size() != lo.size() || points.size() != lo.size())
        throw DimensionMismatch("grid: lo, hi and points must all have dim entries");
    for (int j = 0; j < dim; ++j) {
        require(points[j] >= 8, "grid: at least 8 points per axis");
        require(hi[j] > lo[j], "grid: empty extent");
    }
}

std::size_t GridSpec::site_count() const {
    std::size_t n = 1;
    for (int p : points) n *= static_cast<std::size_t>(p);
    return n;
}

std::vector<int> GridSpec::multi_index(std::size_t flat) const {
    std::vector<int> mi(static_cast<std::size_t>(dim));
    for (int j = dim - 1; j >= 0; --j) {
        mi[j] = static_cast<int>(flat % static_cast<std::size_t>(points[j]));
        flat /= static_cast<std::size_t>(points[j]);
    }
    return mi;
}

std::size_t GridSpec::flat_index(const std::vector<int>& mi) const {
    std::size_t f = 0;
    for (int j = 0; j < dim; ++j) f = f * static_cast<std::size_t>(points[j]) + static_cast<std::size_t>(mi[j]);
    return f;
}

std::vector<double> GridSpec::site(std::size_t flat) const {
    const auto mi = multi_index(flat);
    std::vector<double> x(static_cast<std::size_t>(dim));
    for (int j = 0; j < dim; ++j) x[j] = lo[j] + (mi[j] + 1) * spacing(j);
    return x;
}

namespace {

// 5-point Gauss-Legendre on [0, 1].
constexpr double kGLx[5] = {0.046910077030668, 0.230765344947158, 0.5, 0.769234655052842, 0.953089922969332};
constexpr double kGLw[5] = {0.118463442528095, 0.239314335249683, 0.284444444444444, 0.239314335249683,
                            0.118463442528095};

struct Lattice {
    const GridSpec& grid;
    std::vector<std::size_t> sites;
    std::vector<std::ptrdiff_t> slot;  // grid flat index -> active position or -1

    Lattice(const GridSpec& g, const Domain& domain) : grid(g), slot(g.site_count(), -1) {
        g.validate();
        if (domain.dim() != g.dim) throw DimensionMismatch("grid and domain dimensions differ");
        for (std::size_t f = 0; f < g.site_count(); ++f) {
            const auto x = g.site(f);
            if (domain.contains(x)) {
                slot[f] = static_cast<std::ptrdiff_t>(sites.size());
                sites.push_back(f);
            }
        }
        require(!sites.empty(), "grid has no sites inside the domain");
    }

    // Active neighbour in the + direction of axis j, or -1.
    std::ptrdiff_t forward(std::size_t k, int j) const {
        auto mi = grid.multi_index(sites[k]);
        if (mi[j] + 1 >= grid.points[j]) return -1;
        ++mi[j];
        return slot[grid.flat_index(mi)];
    }
};

// int over the link x -> x + h e_j of A_j.
double link_phase(const Coefficients::VectorFn& A, const std::vector<double>& x, int j, double h, int dim) {
    if (!A) return 0.0;
    std::vector<double> p = x, a(static_cast<std::size_t>(dim));
    double s = 0.0;
    for (int q = 0; q < 5; ++q) {
        p[j] = x[j] + kGLx[q] * h;
        A(p, a);
        s += kGLw[q] * a[j];
    }
    return s * h;
}

VecR link_coupling(const Coefficients& c, const std::vector<double>& x, int j, double h) {
    VecR out = VecR::Zero(static_cast<Eigen::Index>(c.modes));
    std::vector<double> p = x;
    MatR g(static_cast<Eigen::Index>(c.modes), c.dim);
    for (int q = 0; q < 5; ++q) {
        p[j] = x[j] + kGLx[q] * h;
        c.G(p, g);
        out += kGLw[q] * g.col(j);
    }
    return out * h;
}

double hermiticity_error(const SpMatC& m) {
    const SpMatC d = SpMatC(m.adjoint()) - m;
    double e = 0.0;
    for (Eigen::Index k = 0; k < d.outerSize(); ++k)
        for (SpMatC::InnerIterator it(d, k); it; ++it) e = std::max(e, std::abs(it.value()));
    return e;
}

void finish(DiscreteOperator& op) {
    op.matrix.makeCompressed();
    op.hermiticity_error = hermiticity_error(op.matrix);
    op.hermitian = op.hermiticity_error < 1e-12;
    if (!op.hermitian) throw ConsistencyError("assembled operator is not Hermitian");
}

// Scalar hopping operator shared by the Schrodinger and magnetic builders.
DiscreteOperator build_scalar(const GridSpec& grid, const Domain& domain, const Coefficients::VectorFn& A,
                              const Coefficients::ScalarFn& V, const Coefficients::ScalarFn& U, std::string meta) {
    Lattice lat(grid, domain);
    const auto n = static_cast<std::ptrdiff_t>(lat.sites.size());
    double diag0 = 0.0;
    for (int j = 0; j < grid.dim; ++j) diag0 += 1.0 / (grid.spacing(j) * grid.spacing(j));
    std::vector<Eigen::Triplet<cplx, std::ptrdiff_t>> trip;
    trip.reserve(static_cast<std::size_t>(n) * (1 + 2 * static_cast<std::size_t>(grid.dim)));
    for (std::ptrdiff_t k = 0; k < n; ++k) {
        const auto x = grid.site(lat.sites[k]);
        double d = diag0;
        if (V) d += V(x);
        if (U) d -= U(x);
        trip.emplace_back(k, k, cplx(d, 0.0));
        for (int j = 0; j < grid.dim; ++j) {
            const std::ptrdiff_t nb = lat.forward(static_cast<std::size_t>(k), j);
            if (nb < 0) continue;
            const double h = grid.spacing(j);
            const double theta = link_phase(A, x, j, h, grid.dim);
            const cplx hop = -0.5 / (h * h) * (A ? std::polar(1.0, -theta) : cplx(1.0, 0.0));
            trip.emplace_back(k, nb, hop);
            trip.emplace_back(nb, k, std::conj(hop));
        }
    }
    DiscreteOperator op;
    op.grid = grid;
    op.sites = lat.sites;
    op.fock_dim = 1;
    op.matrix.resize(n, n);
    op.matrix.setFromTriplets(trip.begin(), trip.end());
    op.metadata = std::move(meta);
    finish(op);
    return op;
}

}  // namespace

DiscreteOperator build_schrodinger(const GridSpec& grid, const Domain& domain, const Coefficients::ScalarFn& V,
                                   const Coefficients::ScalarFn& U) {
    std::string meta = "schrodinger: -laplace/2";
    if (V) meta += " + V";
    if (U) meta += " - U";
    return build_scalar(grid, domain, {}, V, U, meta);
}

DiscreteOperator build_magnetic(const GridSpec& grid, const Domain& domain, const Coefficients::VectorFn& A,
                                const Coefficients::ScalarFn& V) {
    std::string meta = "magnetic: peierls hopping";
    if (V) meta += " + V";
    return build_scalar(grid, domain, A, V, {}, meta);
}

DiscreteOperator build_pauli_fierz(const GridSpec& grid, const Domain& domain, const Coefficients& coeffs,
                                   const NumberBasisSpace& ns, std::size_t dimension_cap) {
    if (coeffs.dim != grid.dim) throw DimensionMismatch("coefficients and grid dimensions differ");
    if (coeffs.modes != ns.modes()) throw DimensionMismatch("coefficients and Fock space mode counts differ");
    require(grid.dim <= 2, "the Pauli-Fierz oracle supports dim <= 2");
    Lattice lat(grid, domain);
    const auto F = static_cast<std::ptrdiff_t>(ns.dimension());
    const auto n = static_cast<std::ptrdiff_t>(lat.sites.size());
    const std::size_t total = static_cast<std::size_t>(n) * static_cast<std::size_t>(F);
    if (total > dimension_cap)
        throw ResourceLimit("Pauli-Fierz operator dimension " + std::to_string(total) + " exceeds the cap " +
                            std::to_string(dimension_cap));
    const VecR dg = build_dGamma(ns);
    double diag0 = 0.0;
    for (int j = 0; j < grid.dim; ++j) diag0 += 1.0 / (grid.spacing(j) * grid.spacing(j));

    std::vector<Eigen::Triplet<cplx, std::ptrdiff_t>> trip;
    trip.reserve(total * (1 + 2 * static_cast<std::size_t>(grid.dim) * static_cast<std::size_t>(F)));
    for (std::ptrdiff_t k = 0; k < n; ++k) {
        const auto x = grid.site(lat.sites[k]);
        double d = diag0;
        if (coeffs.V) d += coeffs.V(x);
        if (coeffs.U) d -= coeffs.U(x);
        for (std::ptrdiff_t a = 0; a < F; ++a) trip.emplace_back(k * F + a, k * F + a, cplx(d + dg[a], 0.0));
        for (int j = 0; j < grid.dim; ++j) {
            const std::ptrdiff_t nb = lat.forward(static_cast<std::size_t>(k), j);
            if (nb < 0) continue;
            const double h = grid.spacing(j);
            const double theta = link_phase(coeffs.A, x, j, h, grid.dim);
            const cplx hop = -0.5 / (h * h) * (coeffs.A ? std::polar(1.0, -theta) : cplx(1.0, 0.0));
            VecR gam;
            if (coeffs.G) gam = link_coupling(coeffs, x, j, h);
            if (!coeffs.G || gam.cwiseAbs().maxCoeff() == 0.0) {
                for (std::ptrdiff_t a = 0; a < F; ++a) {
                    trip.emplace_back(k * F + a, nb * F + a, hop);
                    trip.emplace_back(nb * F + a, k * F + a, std::conj(hop));
                }
                continue;
            }
            const MatC Ul = field_exponential(ns, OneBosonVector::real(gam));
            for (std::ptrdiff_t a = 0; a < F; ++a)
                for (std::ptrdiff_t b = 0; b < F; ++b) {
                    const cplx v = hop * Ul(a, b);
                    if (v == cplx(0.0, 0.0)) continue;
                    trip.emplace_back(k * F + a, nb * F + b, v);
                    trip.emplace_back(nb * F + b, k * F + a, std::conj(v));
                }
        }
    }
    DiscreteOperator op;
    op.grid = grid;
    op.sites = lat.sites;
    op.fock_dim = static_cast<std::size_t>(F);
    op.matrix.resize(static_cast<std::ptrdiff_t>(total), static_cast<std::ptrdiff_t>(total));
    op.matrix.setFromTriplets(trip.begin(), trip.end());
    op.metadata = "pauli-fierz: covariant hopping with field links + V";
    if (coeffs.U) op.metadata += " - U";
    op.metadata += " + dGamma";
    finish(op);
    return op;
}

SpMatC tensor_with_field(const SpMatC& op, const VecR& dgamma) {
    const auto F = static_cast<std::ptrdiff_t>(dgamma.size());
    const std::ptrdiff_t n = op.rows();
    std::vector<Eigen::Triplet<cplx, std::ptrdiff_t>> trip;
    for (std::ptrdiff_t c = 0; c < op.outerSize(); ++c)
        for (SpMatC::InnerIterator it(op, c); it; ++it)
            for (std::ptrdiff_t a = 0; a < F; ++a) {
                cplx v = it.value();
                if (it.row() == it.col()) v = cplx(v.real() + dgamma[a], v.imag());
                trip.emplace_back(it.row() * F + a, it.col() * F + a, v);
            }
    SpMatC out(n * F, n * F);
    out.setFromTriplets(trip.begin(), trip.end());
    out.makeCompressed();
    return out;
}

Spectral decompose(const DiscreteOperator& op) {
    if (op.dimension() > 6000) throw ResourceLimit("dense eigendecomposition limited to dimension 6000");
    Eigen::SelfAdjointEigenSolver<MatC> es(MatC(op.matrix));
    if (es.info() != Eigen::Success) throw ConsistencyError("eigendecomposition failed");
    return {es.eigenvalues(), es.eigenvectors()};
}

VecC semigroup_apply(const Spectral& sp, double t, const VecC& v) {
    if (v.size() != sp.eigenvalues.size()) throw DimensionMismatch("semigroup_apply: vector size");
    require(t >= 0.0, "semigroup_apply needs t >= 0");
    if (t == 0.0) return v;
    const VecC c = sp.eigenvectors.adjoint() * v;
    const VecC e = (-t * sp.eigenvalues.array()).exp().cast<cplx>().matrix();
    return sp.eigenvectors * (e.array() * c.array()).matrix();
}

VecC lanczos_expm_apply(const SpMatC& H, double t, const VecC& v, double tol, int max_krylov) {
    const double beta0 = v.norm();
    if (beta0 == 0.0 || t == 0.0) return v;
    const Eigen::Index N = v.size();
    const int mmax = static_cast<int>(std::min<Eigen::Index>(max_krylov, N));
    MatC Q(N, mmax);
    std::vector<double> alpha, beta;
    Q.col(0) = v / beta0;
    VecC y;
    for (int m = 0; m < mmax; ++m) {
        VecC w = H * Q.col(m);
        alpha.push_back(Q.col(m).dot(w).real());
        // full reorthogonalization, twice
        for (int pass = 0; pass < 2; ++pass) w -= Q.leftCols(m + 1) * (Q.leftCols(m + 1).adjoint() * w);
        const double b = w.norm();
        const int k = m + 1;
        MatR T = MatR::Zero(k, k);
        for (int i = 0; i < k; ++i) {
            T(i, i) = alpha[i];
            if (i + 1 < k) T(i, i + 1) = T(i + 1, i) = beta[i];
        }
        Eigen::SelfAdjointEigenSolver<MatR> es(T);
        const VecR ex = (-t * es.eigenvalues().array()).exp().matrix();
        const VecR coef = es.eigenvectors() * (ex.asDiagonal() * es.eigenvectors().row(0).transpose());
        const bool last = (k == mmax) || b < 1e-14 * beta0;
        if (last || std::abs(coef[k - 1]) * b < tol) {
            y = Q.leftCols(k) * coef.cast<cplx>();
            break;
        }
        beta.push_back(b);
        Q.col(k) = w / b;
    }
    if (y.size() == 0) throw ConsistencyError("Lanczos exponential did not converge");
    return beta0 * y;
}

VecC semigroup_apply(const DiscreteOperator& op, double t, const VecC& v) {
    if (static_cast<std::size_t>(v.size()) != op.dimension()) throw DimensionMismatch("semigroup_apply: vector size");
    require(t >= 0.0, "semigroup_apply needs t >= 0");
    if (t == 0.0) return v;
    if (op.dimension() <= 3000) return semigroup_apply(decompose(op), t, v);
    return lanczos_expm_apply(op.matrix, t, v);
}

Resolvent::Resolvent(const DiscreteOperator& op, double E) : E_(E) {
    SpMatC shifted = op.matrix;
    for (Eigen::Index i = 0; i < shifted.rows(); ++i) shifted.coeffRef(i, i) += E;
    shifted.makeCompressed();
    auto llt = std::make_shared<Eigen::SimplicialLLT<SpMatC, Eigen::Lower>>(shifted);
    if (llt->info() != Eigen::Success)
        throw InvalidArgument("resolvent: H + E is not positive definite (indefinite shift E=" + std::to_string(E) + ")");
    llt_ = std::move(llt);
}

VecC Resolvent::apply(const VecC& v) const {
    VecC x = llt_->solve(v);
    if (llt_->info() != Eigen::Success) throw ConsistencyError("resolvent solve failed");
    return x;
}

VecC resolvent_apply(const DiscreteOperator& op, double E, const VecC& v) {
    if (static_cast<std::size_t>(v.size()) != op.dimension()) throw DimensionMismatch("resolvent_apply: vector size");
    return Resolvent(op, E).apply(v);
}

double lowest_eigenvalue(const DiscreteOperator& op) {
    if (op.dimension() <= 3000) return decompose(op).eigenvalues[0];
    // Lanczos with full reorthogonalization; the lowest Ritz value converges first.
    const Eigen::Index N = static_cast<Eigen::Index>(op.dimension());
    const int mmax = static_cast<int>(std::min<Eigen::Index>(400, N));
    MatC Q(N, mmax);
    VecC q = VecC::Ones(N);
    Q.col(0) = q / q.norm();
    std::vector<double> alpha, beta;
    double prev = 0.0;
    for (int m = 0; m < mmax; ++m) {
        VecC w = op.matrix * Q.col(m);
        alpha.push_back(Q.col(m).dot(w).real());
        for (int pass = 0; pass < 2; ++pass) w -= Q.leftCols(m + 1) * (Q.leftCols(m + 1).adjoint() * w);
        const int k = m + 1;
        MatR T = MatR::Zero(k, k);
        for (int i = 0; i < k; ++i) {
            T(i, i) = alpha[i];
            if (i + 1 < k) T(i, i + 1) = T(i + 1, i) = beta[i];
        }
        const double low = Eigen::SelfAdjointEigenSolver<MatR>(T, Eigen::EigenvaluesOnly).eigenvalues()[0];
        const double b = w.norm();
        if (k == mmax || b < 1e-13 || (m > 10 && std::abs(low - prev) < 1e-12 * std::max(1.0, std::abs(low))))
            return low;
        prev = low;
        beta.push_back(b);
        Q.col(k) = w / b;
    }
    return prev;
}

VecR fiber_norms(const DiscreteOperator& op, const VecC& v) {
    if (static_cast<std::size_t>(v.size()) != op.dimension()) throw DimensionMismatch("fiber_norms: vector size");
    const auto F = static_cast<Eigen::Index>(op.fock_dim);
    VecR out(static_cast<Eigen::Index>(op.site_count()));
    for (Eigen::Index k = 0; k < out.size(); ++k) out[k] = v.segment(k * F, F).norm();
    return out;
}

DiamagneticReport diamagnetic_check(const Resolvent& H_res, const Resolvent& S_res, const DiscreteOperator& H_pf,
                                    const VecC& phi, double tol) {
    const VecC psi = H_res.apply(phi);
    const VecR lhs = fiber_norms(H_pf, psi);
    const VecC rhs = S_res.apply(fiber_norms(H_pf, phi).cast<cplx>());
    if (rhs.size() != lhs.size()) throw DimensionMismatch("diamagnetic_check: site counts differ");
    double worst = -std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < lhs.size(); ++k) worst = std::max(worst, lhs[k] - rhs[k].real());
    return {worst <= tol, worst};
}

DiamagneticReport diamagnetic_check(const DiscreteOperator& H_pf, const DiscreteOperator& S_sch, double E,
                                    const VecC& phi, double tol) {
    require(E > 0.0, "diamagnetic_check needs E > 0");
    if (H_pf.sites != S_sch.sites) throw DimensionMismatch("diamagnetic_check: operators live on different sites");
    if (static_cast<std::size_t>(phi.size()) != H_pf.dimension()) throw DimensionMismatch("diamagnetic_check: vector size");
    return diamagnetic_check(Resolvent(H_pf, E), Resolvent(S_sch, E), H_pf, phi, tol);
}

CoefficientTable sample_on_sites(const Coefficients& c, const GridSpec& grid) {
    grid.validate();
    std::vector<double> lo(grid.lo.size()), hi(grid.lo.size());
    for (int j = 0; j < grid.dim; ++j) {
        lo[j] = grid.lo[j] + grid.spacing(j);
        hi[j] = grid.lo[j] + grid.points[j] * grid.spacing(j);
    }
    return CoefficientTable::sample(c, lo, hi, grid.points);
}

namespace {

double bump_rho(double r2) { return r2 < 1.0 ? std::exp(-1.0 / (1.0 - r2)) : 0.0; }

double step_f(double z) { return z > 0.0 ? std::exp(-1.0 / z) : 0.0; }

// Smooth cutoff: 1 on [0, 1], 0 on [2, inf).
double chi(double r) {
    const double a = step_f(2.0 - r), b = step_f(r - 1.0);
    return a / (a + b);
}

}  // namespace

MollifiedTable mollify_coefficients(const CoefficientTable& table, const VecR& omega, double n,
                                    const MollifyOptions& opts) {
    require(n > 0.0, "mollify_coefficients needs n > 0");
    if (static_cast<std::size_t>(omega.size()) != table.modes())
        throw DimensionMismatch("mollify_coefficients: dispersion length differs from table modes");
    const int dim = table.dim();
    const std::size_t N = table.node_count();
    CoefficientTable out = table;

    std::vector<double> cut(N, 1.0);
    if (opts.spatial)
        for (std::size_t i = 0; i < N; ++i) {
            const auto x = table.node(i);
            double r2 = 0.0;
            for (double v : x) r2 += v * v;
            cut[i] = chi(std::sqrt(r2) / n);
        }

    // Stencil offsets with |n * offset * h| < 1.
    std::vector<std::vector<int>> offs{{}};
    std::vector<double> wts;
    if (opts.spatial) {
        for (int j = 0; j < dim; ++j) {
            const int R = static_cast<int>(std::floor(1.0 / (n * table.spacing(j))));
            std::vector<std::vector<int>> next;
            for (const auto& o : offs)
                for (int d = -R; d <= R; ++d) {
                    auto e = o;
                    e.push_back(d);
                    next.push_back(std::move(e));
                }
            offs = std::move(next);
        }
        std::vector<std::vector<int>> kept;
        for (const auto& o : offs) {
            double r2 = 0.0;
            for (int j = 0; j < dim; ++j) r2 += std::pow(n * o[j] * table.spacing(j), 2);
            const double w = bump_rho(r2);
            if (w > 0.0) {
                kept.push_back(o);
                wts.push_back(w);
            }
        }
        offs = std::move(kept);
    }

    auto convolve = [&](const std::vector<double>& f) {
        std::vector<double> g(N);
        for (std::size_t i = 0; i < N; ++i) {
            if (!opts.spatial) {
                g[i] = f[i];
                continue;
            }
            const auto mi = table.node_multi_index(i);
            double s = 0.0, ws = 0.0;
            for (std::size_t q = 0; q < offs.size(); ++q) {
                auto nb = mi;
                for (int j = 0; j < dim; ++j) nb[j] = std::clamp(mi[j] + offs[q][j], 0, table.resolution()[j] - 1);
                const std::size_t k = table.node_index(nb);
                s += wts[q] * cut[k] * f[k];
                ws += wts[q];
            }
            g[i] = s / ws;
        }
        return g;
    };

    double cell = 1.0;
    for (int j = 0; j < dim; ++j) cell *= table.spacing(j);
    double dA = 0.0, dG = 0.0;
    for (int j = 0; j < dim; ++j) {
        out.A(j) = convolve(table.A(j));
        for (std::size_t i = 0; i < N; ++i) dA += std::pow(out.A(j)[i] - table.A(j)[i], 2) * cell;
    }
    for (std::size_t m = 0; m < table.modes(); ++m) {
        const double w = omega[static_cast<Eigen::Index>(m)];
        const bool keep = !opts.frequency_cutoff || (w >= 1.0 / n && w <= n);
        for (int j = 0; j < dim; ++j) {
            if (keep)
                out.G(m, j) = convolve(table.G(m, j));
            else
                std::fill(out.G(m, j).begin(), out.G(m, j).end(), 0.0);
            for (std::size_t i = 0; i < N; ++i) dG += std::pow(out.G(m, j)[i] - table.G(m, j)[i], 2) * cell;
        }
    }
    return {std::move(out), std::sqrt(dA), std::sqrt(dG)};
}

std::vector<ConvergenceRow> resolvent_convergence_study(const CoefficientTable& table, const GridSpec& grid,
                                                        const Domain& domain, const NumberBasisSpace& ns,
                                                        const std::vector<double>& n_list, double E,
                                                        const VecC& phi, const MollifyOptions& opts) {
    grid.validate();
    require(E > 0.0, "resolvent_convergence_study needs E > 0");
    if (table.dim() != grid.dim || table.resolution() != grid.points)
        throw DimensionMismatch("convergence study: table nodes must coincide with grid sites");
    for (int j = 0; j < grid.dim; ++j)
        if (std::abs(table.lo()[j] - (grid.lo[j] + grid.spacing(j))) > 1e-12 * std::max(1.0, std::abs(grid.lo[j])) ||
            std::abs(table.spacing(j) - grid.spacing(j)) > 1e-12 * grid.spacing(j))
            throw DimensionMismatch("convergence study: table nodes must coincide with grid sites");
    const DiscreteOperator H = build_pauli_fierz(grid, domain, table.as_coefficients(), ns);
    if (static_cast<std::size_t>(phi.size()) != H.dimension()) throw DimensionMismatch("convergence study: vector size");
    const VecC ref = Resolvent(H, E).apply(phi);
    std::vector<ConvergenceRow> rows;
    for (double n : n_list) {
        const MollifiedTable mt = mollify_coefficients(table, ns.base().dispersion(), n, opts);
        const DiscreteOperator Hn = build_pauli_fierz(grid, domain, mt.table.as_coefficients(), ns);
        const VecC r = Resolvent(Hn, E).apply(phi);
        rows.push_back({n, (r - ref).norm(), mt.l2_distance_A, mt.l2_distance_G});
    }
    return rows;
}

void write_operator_triplets(std::ostream& os, const DiscreteOperator& op) {
    char buf[128];
    os << "# " << op.metadata << "\n";
    os << "dimension " << op.dimension() << "\n";
    os << "nnz " << op.matrix.nonZeros() << "\n";
    os << "row,col,re,im\n";
    for (Eigen::Index c = 0; c < op.matrix.outerSize(); ++c)
        for (SpMatC::InnerIterator it(op.matrix, c); it; ++it) {
            std::snprintf(buf, sizeof buf, "%td,%td,%.17g,%.17g\n", static_cast<std::ptrdiff_t>(it.row()),
                          static_cast<std::ptrdiff_t>(it.col()), it.value().real(), it.value().imag());
            os << buf;
        }
}

void write_eigenvalue_csv(std::ostream& os, const VecR& eigenvalues) {
    char buf[64];
    os << "index,eigenvalue\n";
    for (Eigen::Index i = 0; i < eigenvalues.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%td,%.17g\n", static_cast<std::ptrdiff_t>(i), eigenvalues[i]);
        os << buf;
    }
}

}  // namespace fkpf
