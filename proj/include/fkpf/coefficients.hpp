#pragma once

#include <functional>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "fkpf/common.hpp"

namespace fkpf {

enum class Smoothness { Regular, Singular };

// Particle-field coefficients on R^nu. Empty callables mean "identically zero"
// (for divA / divG: "not supplied").
struct Coefficients {
    using ScalarFn = std::function<double(std::span<const double>)>;
    using VectorFn = std::function<void(std::span<const double>, std::span<double>)>;
    // G(x) is written as a modes x dim matrix: column j holds G_j(x).
    using CouplingFn = std::function<void(std::span<const double>, Eigen::Ref<MatR>)>;
    using ModeFn = std::function<void(std::span<const double>, Eigen::Ref<VecR>)>;

    int dim = 1;
    std::size_t modes = 1;
    VectorFn A;
    ScalarFn V;
    ScalarFn U;
    CouplingFn G;
    ScalarFn divA;
    ModeFn divG;
    Smoothness smoothness = Smoothness::Regular;
    std::string name = "zero";

    bool has_A() const { return static_cast<bool>(A); }
    bool has_G() const { return static_cast<bool>(G); }
    bool has_divergences() const;

    // V - U at x.
    double potential(std::span<const double> x) const;
    void eval_A(std::span<const double> x, std::span<double> out) const;
    void eval_G(std::span<const double> x, Eigen::Ref<MatR> out) const;

    static Coefficients zero(int dim, std::size_t modes);
};

// Builtin examples used by tests, the CLI and the acceptance suite.
namespace builtin {

// A = a (constant vector), divA = 0.
Coefficients constant_A(std::vector<double> a, std::size_t modes);
// V = c.
Coefficients constant_V(int dim, std::size_t modes, double c);
// Smooth compact bump on |x| < radius with peak 1: exp(1 - 1/(1 - |x|^2/r^2)).
double bump(std::span<const double> x, double radius);
double bump_gradient_component(std::span<const double> x, double radius, int j);
// G_j(x) = g * bump(x) * profile for every axis j; profile is per mode.
Coefficients bump_coupling(int dim, std::vector<double> mode_profile, double g, double radius);
// 1D: A(x) = amp * sin(x), G(x) = g * cos(x) * profile, with divergences.
Coefficients smooth_trig(std::vector<double> mode_profile, double a_amp, double g);
// G = g (constant, every axis, every mode scaled by profile); divG = 0.
Coefficients constant_G(int dim, std::vector<double> mode_profile, double g);

}  // namespace builtin

// Coefficients sampled on a node grid with multilinear interpolation
// (clamped at the table edges).
class CoefficientTable {
public:
    CoefficientTable(int dim, std::vector<double> lo, std::vector<double> hi, std::vector<int> resolution,
                     std::size_t modes);

    // Samples a callable coefficient set at the nodes (U and divergences dropped).
    static CoefficientTable sample(const Coefficients& c, std::vector<double> lo, std::vector<double> hi,
                                   std::vector<int> resolution);

    int dim() const { return dim_; }
    std::size_t modes() const { return modes_; }
    const std::vector<double>& lo() const { return lo_; }
    const std::vector<double>& hi() const { return hi_; }
    const std::vector<int>& resolution() const { return res_; }
    std::size_t node_count() const { return nodes_; }
    double spacing(int axis) const;
    std::vector<double> node(std::size_t idx) const;
    std::vector<int> node_multi_index(std::size_t idx) const;
    std::size_t node_index(const std::vector<int>& mi) const;

    // A component j at node i: A(j)[i]; G of mode m, axis j: G(m, j)[i].
    std::vector<double>& A(int j) { return A_[static_cast<std::size_t>(j)]; }
    const std::vector<double>& A(int j) const { return A_[static_cast<std::size_t>(j)]; }
    std::vector<double>& V() { return V_; }
    const std::vector<double>& V() const { return V_; }
    std::vector<double>& G(std::size_t m, int j) { return G_[m * static_cast<std::size_t>(dim_) + static_cast<std::size_t>(j)]; }
    const std::vector<double>& G(std::size_t m, int j) const {
        return G_[m * static_cast<std::size_t>(dim_) + static_cast<std::size_t>(j)];
    }

    double interpolate(const std::vector<double>& field, std::span<const double> x) const;

    // Callable view; the table is shared, not copied per call.
    Coefficients as_coefficients(std::string name = "table") const;

    void write(std::ostream& os) const;
    static CoefficientTable read(std::istream& is);
    void save(const std::string& path) const;
    static CoefficientTable load(const std::string& path);

    bool operator==(const CoefficientTable& o) const;

private:
    int dim_;
    std::vector<double> lo_, hi_;
    std::vector<int> res_;
    std::size_t modes_;
    std::size_t nodes_ = 1;
    std::vector<std::vector<double>> A_;
    std::vector<double> V_;
    std::vector<std::vector<double>> G_;
};

}  // namespace fkpf
