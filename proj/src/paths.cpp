#include "fkpf/paths.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

namespace fkpf {

PathGrid::PathGrid(double horizon, int steps) : t(horizon), n(steps) {
    require(horizon > 0.0 && std::isfinite(horizon), "path horizon must be positive");
    require(steps >= 1, "path needs at least one step");
}

SampledPath::SampledPath(PathGrid grid, int dim) : grid_(grid), dim_(dim) {
    require(dim >= 1, "path dimension must be positive");
    pos_.assign(static_cast<std::size_t>(grid.n + 1) * dim, 0.0);
}

SampledPath SampledPath::from_positions(PathGrid grid, int dim, std::vector<double> pos, PathKind kind) {
    if (pos.size() != static_cast<std::size_t>(grid.n + 1) * dim) throw DimensionMismatch("position count");
    SampledPath p(grid, dim);
    p.pos_ = std::move(pos);
    p.kind_ = kind;
    return p;
}

SampledPath SampledPath::slice(int l0, int l1) const {
    require(0 <= l0 && l0 < l1 && l1 <= grid_.n, "invalid slice bounds");
    const PathGrid g(grid_.time(l1) - grid_.time(l0), l1 - l0);
    std::vector<double> pos(pos_.begin() + static_cast<std::ptrdiff_t>(l0) * dim_,
                            pos_.begin() + static_cast<std::ptrdiff_t>(l1 + 1) * dim_);
    return from_positions(g, dim_, std::move(pos), kind_);
}

void sample_bm_into(PathStream& rng, std::span<const double> x, const PathGrid& grid, double sign, SampledPath& out) {
    const int dim = static_cast<int>(x.size());
    if (out.grid_.n != grid.n || out.dim_ != dim) out = SampledPath(grid, dim);
    out.grid_ = grid;
    out.kind_ = PathKind::Free;
    const double sd = std::sqrt(grid.dt());
    double* p = out.pos_.data();
    for (int k = 0; k < dim; ++k) p[k] = x[k];
    for (int l = 1; l <= grid.n; ++l) {
        double* q = p + static_cast<std::size_t>(l) * dim;
        const double* r = q - dim;
        for (int k = 0; k < dim; ++k) q[k] = r[k] + sign * sd * rng.normal();
    }
}

void sample_bridge_into(PathStream& rng, std::span<const double> y, std::span<const double> x, const PathGrid& grid,
                        BridgeMethod method, double sign, SampledPath& out) {
    require(grid.n >= 2, "bridge sampling needs at least two steps");
    if (x.size() != y.size()) throw DimensionMismatch("bridge endpoints differ in dimension");
    const int dim = static_cast<int>(x.size());
    if (out.grid_.n != grid.n || out.dim_ != dim) out = SampledPath(grid, dim);
    out.grid_ = grid;
    out.kind_ = PathKind::Bridge;
    const double dt = grid.dt();
    double* p = out.pos_.data();
    for (int k = 0; k < dim; ++k) p[k] = y[k];
    for (int l = 0; l + 1 < grid.n; ++l) {
        const double rem = grid.t - grid.time(l);
        const double* b = p + static_cast<std::size_t>(l) * dim;
        double* q = p + static_cast<std::size_t>(l + 1) * dim;
        if (method == BridgeMethod::Exact) {
            const double sd = std::sqrt(dt * (rem - dt) / rem);
            for (int k = 0; k < dim; ++k) q[k] = b[k] + dt * (x[k] - b[k]) / rem + sign * sd * rng.normal();
        } else {
            const double sd = std::sqrt(dt);
            for (int k = 0; k < dim; ++k) q[k] = b[k] + dt * (x[k] - b[k]) / rem + sign * sd * rng.normal();
        }
    }
    double* last = p + static_cast<std::size_t>(grid.n) * dim;
    for (int k = 0; k < dim; ++k) last[k] = x[k];
}

SampledPath sample_bm(PathStream& rng, std::span<const double> x, const PathGrid& grid) {
    SampledPath p;
    sample_bm_into(rng, x, grid, 1.0, p);
    return p;
}

SampledPath sample_bridge(PathStream& rng, std::span<const double> y, std::span<const double> x, const PathGrid& grid,
                          BridgeMethod method) {
    SampledPath p;
    sample_bridge_into(rng, y, x, grid, method, 1.0, p);
    return p;
}

SampledPath reverse(const SampledPath& p) {
    SampledPath r(p.grid_, p.dim_);
    r.kind_ = p.kind_;
    const int n = p.grid_.n;
    for (int l = 0; l <= n; ++l) {
        auto src = p.point(n - l);
        auto dst = r.point(l);
        for (int k = 0; k < p.dim_; ++k) dst[k] = src[k];
    }
    return r;
}

ExitInfo exit_time(const SampledPath& p, const Domain& domain, ExitCorrection correction, PathStream* rng) {
    ExitInfo info;
    if (domain.kind() == Domain::Kind::AllSpace) return info;
    const int n = p.steps();
    for (int l = 0; l <= n; ++l) {
        if (!domain.contains(p.point(l))) {
            info.exit_index = l;
            info.survival = 0.0;
            return info;
        }
    }
    if (correction == ExitCorrection::None) return info;
    const double dt = p.grid().dt();
    if (correction == ExitCorrection::Weighted) {
        double w = 1.0;
        for (int l = 0; l < n; ++l) w *= domain.crossing_survival(p.point(l), p.point(l + 1), dt);
        info.survival = w;
        return info;
    }
    require(rng != nullptr, "sampled crossing correction needs a random stream");
    for (int l = 0; l < n; ++l) {
        const double q = domain.crossing_survival(p.point(l), p.point(l + 1), dt);
        if (rng->uniform() > q) {
            info.survival = 0.0;
            info.crossing_flag = true;
            return info;
        }
    }
    return info;
}

double penalty_density(const Domain& domain, std::span<const double> x, double n_cap) {
    require(n_cap > 0.0, "penalty cap must be positive");
    if (domain.kind() == Domain::Kind::AllSpace) return 0.0;
    const double d = domain.signed_distance(x);
    if (d <= 0.0) return n_cap;
    return std::min(n_cap, 1.0 / (d * d * d));
}

double penalty_integral(const SampledPath& p, const Domain& domain, double n_cap) {
    require(n_cap > 0.0, "penalty cap must be positive");
    if (domain.kind() == Domain::Kind::AllSpace) return 0.0;
    const int n = p.steps();
    const double dt = p.grid().dt();
    double acc = 0.0;
    double prev = penalty_density(domain, p.point(0), n_cap);
    for (int l = 1; l <= n; ++l) {
        const double cur = penalty_density(domain, p.point(l), n_cap);
        acc += 0.5 * (prev + cur) * dt;
        prev = cur;
    }
    return acc;
}

namespace {

double psi(double u) { return u > 0.0 ? std::exp(-1.0 / u) : 0.0; }

// Derivative of the smooth step psi(u) / (psi(u) + psi(1 - u)) on (0, 1).
double smooth_step_derivative(double u) {
    if (u <= 0.0 || u >= 1.0) return 0.0;
    const double a = psi(u), b = psi(1.0 - u);
    const double da = a / (u * u), db = -b / ((1.0 - u) * (1.0 - u));
    return (da * (a + b) - a * (da + db)) / ((a + b) * (a + b));
}

double shell_density(const Domain& domain, std::span<const double> x) {
    const double d = domain.signed_distance(x);
    if (d <= 0.0 || d >= 0.5) return 0.0;
    // The shell with 2^{-l-1} <= d < 2^{-l}.
    const int l = static_cast<int>(std::floor(-std::log2(d)));
    const double w = std::ldexp(1.0, -l - 1);
    const double g = smooth_step_derivative((d - w) / w) / w;
    return g * g;
}

}  // namespace

double shell_gradient_integral(const SampledPath& p, const Domain& domain) {
    if (domain.kind() == Domain::Kind::AllSpace) return 0.0;
    const double dt = p.grid().dt();
    double acc = 0.0;
    double prev = shell_density(domain, p.point(0));
    for (int l = 1; l <= p.steps(); ++l) {
        const double cur = shell_density(domain, p.point(l));
        acc += 0.5 * (prev + cur) * dt;
        prev = cur;
    }
    return acc;
}

double holder_diagnostic(const SampledPath& p) {
    const double scale = std::cbrt(p.grid().dt());
    double worst = 0.0;
    for (int l = 1; l <= p.steps(); ++l) {
        double d2 = 0.0;
        auto a = p.point(l - 1), b = p.point(l);
        for (int k = 0; k < p.dim(); ++k) d2 += (b[k] - a[k]) * (b[k] - a[k]);
        worst = std::max(worst, std::sqrt(d2) / scale);
    }
    return worst;
}

void write_path_csv(std::ostream& os, std::size_t path_id, const SampledPath& p, bool header) {
    if (header) {
        os << "path_id,l,s";
        for (int k = 0; k < p.dim(); ++k) os << ",x" << k;
        os << "\n";
    }
    char buf[64];
    for (int l = 0; l <= p.steps(); ++l) {
        os << path_id << "," << l;
        std::snprintf(buf, sizeof buf, ",%.17g", p.grid().time(l));
        os << buf;
        for (double c : p.point(l)) {
            std::snprintf(buf, sizeof buf, ",%.17g", c);
            os << buf;
        }
        os << "\n";
    }
}

}  // namespace fkpf
