#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "fkpf/domain.hpp"
#include "fkpf/rng.hpp"

namespace fkpf {

struct PathGrid {
    double t = 1.0;
    int n = 1;

    PathGrid() = default;
    PathGrid(double horizon, int steps);
    double dt() const { return t / n; }
    double time(int l) const { return l == n ? t : t * l / n; }
    bool operator==(const PathGrid& o) const { return t == o.t && n == o.n; }
};

enum class PathKind { Free, Bridge };
enum class BridgeMethod { Exact, Euler };

class SampledPath {
public:
    SampledPath() = default;
    SampledPath(PathGrid grid, int dim);

    const PathGrid& grid() const { return grid_; }
    int dim() const { return dim_; }
    int steps() const { return grid_.n; }
    PathKind kind() const { return kind_; }

    std::span<const double> point(int l) const {
        return {pos_.data() + static_cast<std::size_t>(l) * dim_, static_cast<std::size_t>(dim_)};
    }
    std::span<double> point(int l) {
        return {pos_.data() + static_cast<std::size_t>(l) * dim_, static_cast<std::size_t>(dim_)};
    }
    const std::vector<double>& positions() const { return pos_; }
    std::span<const double> start() const { return point(0); }
    std::span<const double> end() const { return point(grid_.n); }

    bool operator==(const SampledPath& o) const {
        return grid_ == o.grid_ && dim_ == o.dim_ && kind_ == o.kind_ && pos_ == o.pos_;
    }

    // Builds a path from explicit positions ((n+1) * dim values).
    static SampledPath from_positions(PathGrid grid, int dim, std::vector<double> pos, PathKind kind);

    // Sub-path over indices [l0, l1], re-based to start at time 0.
    SampledPath slice(int l0, int l1) const;

private:
    friend void sample_bm_into(PathStream&, std::span<const double>, const PathGrid&, double, SampledPath&);
    friend void sample_bridge_into(PathStream&, std::span<const double>, std::span<const double>, const PathGrid&,
                                   BridgeMethod, double, SampledPath&);
    friend SampledPath reverse(const SampledPath&);

    PathGrid grid_;
    int dim_ = 1;
    PathKind kind_ = PathKind::Free;
    std::vector<double> pos_;
};

// sign = -1 gives the antithetic partner (negated normals).
void sample_bm_into(PathStream& rng, std::span<const double> x, const PathGrid& grid, double sign, SampledPath& out);
void sample_bridge_into(PathStream& rng, std::span<const double> y, std::span<const double> x, const PathGrid& grid,
                        BridgeMethod method, double sign, SampledPath& out);

SampledPath sample_bm(PathStream& rng, std::span<const double> x, const PathGrid& grid);
SampledPath sample_bridge(PathStream& rng, std::span<const double> y, std::span<const double> x, const PathGrid& grid,
                          BridgeMethod method = BridgeMethod::Exact);

SampledPath reverse(const SampledPath& p);

enum class ExitCorrection {
    None,
    // Multiply survival by the product of per-step flat-wall survival probabilities.
    Weighted,
    // Kill the path with the complementary probability using a uniform draw.
    Sampled,
};

struct ExitInfo {
    std::optional<int> exit_index;
    double survival = 1.0;
    bool crossing_flag = false;
};

ExitInfo exit_time(const SampledPath& p, const Domain& domain, ExitCorrection correction = ExitCorrection::None,
                   PathStream* rng = nullptr);

// Trapezoid of Y_n = min(n_cap, dist^{-3}) inside, n_cap outside; n_cap may be +inf.
double penalty_integral(const SampledPath& p, const Domain& domain, double n_cap);
// Trapezoid of the shell term sum_l |grad theta_l|^2 built from a C-infinity step
// across dist in [2^{-l-1}, 2^{-l}]; off by default in the estimators.
double shell_gradient_integral(const SampledPath& p, const Domain& domain);
// Y at one point, exposed for tests.
double penalty_density(const Domain& domain, std::span<const double> x, double n_cap);

// max_l |Delta B_l| / dt^{1/3}.
double holder_diagnostic(const SampledPath& p);

// CSV rows: path_id, l, s_l, x0, x1, ...
void write_path_csv(std::ostream& os, std::size_t path_id, const SampledPath& p, bool header);

}  // namespace fkpf
