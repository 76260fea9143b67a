#include "fkpf/coefficients.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace fkpf {

bool Coefficients::has_divergences() const { return (!A || divA) && (!G || divG); }

double Coefficients::potential(std::span<const double> x) const {
    double v = V ? V(x) : 0.0;
    if (U) v -= U(x);
    return v;
}

void Coefficients::eval_A(std::span<const double> x, std::span<double> out) const {
    if (A)
        A(x, out);
    else
        std::fill(out.begin(), out.end(), 0.0);
}

void Coefficients::eval_G(std::span<const double> x, Eigen::Ref<MatR> out) const {
    if (G)
        G(x, out);
    else
        out.setZero();
}

Coefficients Coefficients::zero(int dim, std::size_t modes) {
    require(dim >= 1 && modes >= 1, "coefficients need dim >= 1 and modes >= 1");
    Coefficients c;
    c.dim = dim;
    c.modes = modes;
    return c;
}

namespace builtin {

Coefficients constant_A(std::vector<double> a, std::size_t modes) {
    Coefficients c = Coefficients::zero(static_cast<int>(a.size()), modes);
    c.A = [a](std::span<const double>, std::span<double> out) {
        for (std::size_t j = 0; j < a.size(); ++j) out[j] = a[j];
    };
    c.divA = [](std::span<const double>) { return 0.0; };
    c.name = "constant-A";
    return c;
}

Coefficients constant_V(int dim, std::size_t modes, double v) {
    Coefficients c = Coefficients::zero(dim, modes);
    c.V = [v](std::span<const double>) { return v; };
    c.name = "constant-V";
    return c;
}

double bump(std::span<const double> x, double radius) {
    double q = 0.0;
    for (double c : x) q += c * c;
    q /= radius * radius;
    if (q >= 1.0) return 0.0;
    return std::exp(1.0 - 1.0 / (1.0 - q));
}

double bump_gradient_component(std::span<const double> x, double radius, int j) {
    double q = 0.0;
    for (double c : x) q += c * c;
    q /= radius * radius;
    if (q >= 1.0) return 0.0;
    const double f = std::exp(1.0 - 1.0 / (1.0 - q));
    return -f * 2.0 * x[static_cast<std::size_t>(j)] / (radius * radius * (1.0 - q) * (1.0 - q));
}

Coefficients bump_coupling(int dim, std::vector<double> profile, double g, double radius) {
    require(radius > 0.0, "bump radius must be positive");
    Coefficients c = Coefficients::zero(dim, profile.size());
    VecR p = Eigen::Map<VecR>(profile.data(), static_cast<Eigen::Index>(profile.size()));
    c.G = [p, g, radius](std::span<const double> x, Eigen::Ref<MatR> out) {
        const double b = g * bump(x, radius);
        for (Eigen::Index j = 0; j < out.cols(); ++j) out.col(j) = b * p;
    };
    c.divG = [p, g, radius, dim](std::span<const double> x, Eigen::Ref<VecR> out) {
        double s = 0.0;
        for (int j = 0; j < dim; ++j) s += bump_gradient_component(x, radius, j);
        out = g * s * p;
    };
    c.name = "bump-coupling";
    return c;
}

Coefficients smooth_trig(std::vector<double> profile, double a_amp, double g) {
    Coefficients c = Coefficients::zero(1, profile.size());
    VecR p = Eigen::Map<VecR>(profile.data(), static_cast<Eigen::Index>(profile.size()));
    c.A = [a_amp](std::span<const double> x, std::span<double> out) { out[0] = a_amp * std::sin(x[0]); };
    c.divA = [a_amp](std::span<const double> x) { return a_amp * std::cos(x[0]); };
    c.G = [p, g](std::span<const double> x, Eigen::Ref<MatR> out) { out.col(0) = g * std::cos(x[0]) * p; };
    c.divG = [p, g](std::span<const double> x, Eigen::Ref<VecR> out) { out = -g * std::sin(x[0]) * p; };
    c.name = "smooth-trig";
    return c;
}

Coefficients constant_G(int dim, std::vector<double> profile, double g) {
    Coefficients c = Coefficients::zero(dim, profile.size());
    VecR p = Eigen::Map<VecR>(profile.data(), static_cast<Eigen::Index>(profile.size()));
    c.G = [p, g](std::span<const double>, Eigen::Ref<MatR> out) {
        for (Eigen::Index j = 0; j < out.cols(); ++j) out.col(j) = g * p;
    };
    c.divG = [](std::span<const double>, Eigen::Ref<VecR> out) { out.setZero(); };
    c.name = "constant-G";
    return c;
}

}  // namespace builtin

CoefficientTable::CoefficientTable(int dim, std::vector<double> lo, std::vector<double> hi,
                                   std::vector<int> resolution, std::size_t modes)
    : dim_(dim), lo_(std::move(lo)), hi_(std::move(hi)), res_(std::move(resolution)), modes_(modes) {
    require(dim_ >= 1, "table dimension must be positive");
    require(modes_ >= 1, "table needs at least one mode");
    if (lo_.size() != static_cast<std::size_t>(dim_) || hi_.size() != lo_.size() || res_.size() != lo_.size())
        throw DimensionMismatch("table extents must have one entry per axis");
    for (int j = 0; j < dim_; ++j) {
        require(lo_[j] < hi_[j], "table extent must satisfy lo < hi");
        require(res_[j] >= 2, "table resolution must be at least 2");
        nodes_ *= static_cast<std::size_t>(res_[j]);
    }
    A_.assign(static_cast<std::size_t>(dim_), std::vector<double>(nodes_, 0.0));
    V_.assign(nodes_, 0.0);
    G_.assign(modes_ * static_cast<std::size_t>(dim_), std::vector<double>(nodes_, 0.0));
}

double CoefficientTable::spacing(int axis) const { return (hi_[axis] - lo_[axis]) / (res_[axis] - 1); }

std::vector<int> CoefficientTable::node_multi_index(std::size_t idx) const {
    std::vector<int> mi(static_cast<std::size_t>(dim_));
    for (int j = dim_ - 1; j >= 0; --j) {
        mi[j] = static_cast<int>(idx % static_cast<std::size_t>(res_[j]));
        idx /= static_cast<std::size_t>(res_[j]);
    }
    return mi;
}

std::size_t CoefficientTable::node_index(const std::vector<int>& mi) const {
    std::size_t idx = 0;
    for (int j = 0; j < dim_; ++j) idx = idx * static_cast<std::size_t>(res_[j]) + static_cast<std::size_t>(mi[j]);
    return idx;
}

std::vector<double> CoefficientTable::node(std::size_t idx) const {
    auto mi = node_multi_index(idx);
    std::vector<double> x(static_cast<std::size_t>(dim_));
    for (int j = 0; j < dim_; ++j) x[j] = mi[j] == res_[j] - 1 ? hi_[j] : lo_[j] + mi[j] * spacing(j);
    return x;
}

CoefficientTable CoefficientTable::sample(const Coefficients& c, std::vector<double> lo, std::vector<double> hi,
                                          std::vector<int> resolution) {
    CoefficientTable t(c.dim, std::move(lo), std::move(hi), std::move(resolution), c.modes);
    std::vector<double> a(static_cast<std::size_t>(c.dim));
    MatR g(static_cast<Eigen::Index>(c.modes), c.dim);
    for (std::size_t i = 0; i < t.nodes_; ++i) {
        const auto x = t.node(i);
        c.eval_A(x, a);
        for (int j = 0; j < c.dim; ++j) t.A_[j][i] = a[j];
        t.V_[i] = c.V ? c.V(x) : 0.0;
        c.eval_G(x, g);
        for (std::size_t m = 0; m < c.modes; ++m)
            for (int j = 0; j < c.dim; ++j) t.G(m, j)[i] = g(static_cast<Eigen::Index>(m), j);
    }
    return t;
}

double CoefficientTable::interpolate(const std::vector<double>& field, std::span<const double> x) const {
    if (static_cast<int>(x.size()) != dim_) throw DimensionMismatch("interpolation point dimension");
    int base[8];
    double frac[8];
    require(dim_ <= 8, "table interpolation supports at most 8 axes");
    for (int j = 0; j < dim_; ++j) {
        const double h = spacing(j);
        double u = (x[j] - lo_[j]) / h;
        u = std::clamp(u, 0.0, static_cast<double>(res_[j] - 1));
        int b = static_cast<int>(std::floor(u));
        if (b >= res_[j] - 1) b = res_[j] - 2;
        base[j] = b;
        frac[j] = u - b;
    }
    double acc = 0.0;
    std::vector<int> mi(static_cast<std::size_t>(dim_));
    for (unsigned corner = 0; corner < (1u << dim_); ++corner) {
        double w = 1.0;
        for (int j = 0; j < dim_; ++j) {
            const bool up = (corner >> j) & 1u;
            mi[j] = base[j] + (up ? 1 : 0);
            w *= up ? frac[j] : 1.0 - frac[j];
        }
        if (w != 0.0) acc += w * field[node_index(mi)];
    }
    return acc;
}

Coefficients CoefficientTable::as_coefficients(std::string name) const {
    auto self = std::make_shared<const CoefficientTable>(*this);
    Coefficients c = Coefficients::zero(dim_, modes_);
    c.A = [self](std::span<const double> x, std::span<double> out) {
        for (int j = 0; j < self->dim_; ++j) out[j] = self->interpolate(self->A_[j], x);
    };
    c.V = [self](std::span<const double> x) { return self->interpolate(self->V_, x); };
    c.G = [self](std::span<const double> x, Eigen::Ref<MatR> out) {
        for (std::size_t m = 0; m < self->modes_; ++m)
            for (int j = 0; j < self->dim_; ++j)
                out(static_cast<Eigen::Index>(m), j) = self->interpolate(self->G(m, j), x);
    };
    c.smoothness = Smoothness::Singular;
    c.name = std::move(name);
    return c;
}

namespace {

void write_array(std::ostream& os, const std::vector<double>& v) {
    char buf[40];
    for (std::size_t i = 0; i < v.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g", v[i]);
        os << buf << ((i + 1) % 8 == 0 || i + 1 == v.size() ? "\n" : " ");
    }
}

void expect_word(std::istream& is, const std::string& w) {
    std::string got;
    if (!(is >> got) || got != w) throw InvalidArgument("coefficient table: expected '" + w + "', got '" + got + "'");
}

void read_array(std::istream& is, std::vector<double>& v) {
    for (double& x : v)
        if (!(is >> x)) throw InvalidArgument("coefficient table: truncated data block");
}

}  // namespace

void CoefficientTable::write(std::ostream& os) const {
    os << "fkpf-coefficient-table 1\n";
    os << "dim " << dim_ << "\n";
    char buf[40];
    os << "lo";
    for (double v : lo_) {
        std::snprintf(buf, sizeof buf, " %.17g", v);
        os << buf;
    }
    os << "\nhi";
    for (double v : hi_) {
        std::snprintf(buf, sizeof buf, " %.17g", v);
        os << buf;
    }
    os << "\nresolution";
    for (int r : res_) os << " " << r;
    os << "\nmodes " << modes_ << "\n";
    for (int j = 0; j < dim_; ++j) {
        os << "A " << j << "\n";
        write_array(os, A_[j]);
    }
    os << "V\n";
    write_array(os, V_);
    for (std::size_t m = 0; m < modes_; ++m)
        for (int j = 0; j < dim_; ++j) {
            os << "G " << m << " " << j << "\n";
            write_array(os, G(m, j));
        }
}

CoefficientTable CoefficientTable::read(std::istream& is) {
    expect_word(is, "fkpf-coefficient-table");
    int version = 0;
    if (!(is >> version) || version != 1) throw InvalidArgument("coefficient table: unsupported version");
    int dim = 0;
    expect_word(is, "dim");
    if (!(is >> dim) || dim < 1 || dim > 8) throw InvalidArgument("coefficient table: bad dimension");
    std::vector<double> lo(static_cast<std::size_t>(dim)), hi(static_cast<std::size_t>(dim));
    std::vector<int> res(static_cast<std::size_t>(dim));
    expect_word(is, "lo");
    read_array(is, lo);
    expect_word(is, "hi");
    read_array(is, hi);
    expect_word(is, "resolution");
    for (int& r : res)
        if (!(is >> r)) throw InvalidArgument("coefficient table: bad resolution");
    std::size_t modes = 0;
    expect_word(is, "modes");
    if (!(is >> modes)) throw InvalidArgument("coefficient table: bad mode count");
    CoefficientTable t(dim, lo, hi, res, modes);
    for (int j = 0; j < dim; ++j) {
        expect_word(is, "A");
        int jj = -1;
        if (!(is >> jj) || jj != j) throw InvalidArgument("coefficient table: A blocks out of order");
        read_array(is, t.A_[j]);
    }
    expect_word(is, "V");
    read_array(is, t.V_);
    for (std::size_t m = 0; m < modes; ++m)
        for (int j = 0; j < dim; ++j) {
            expect_word(is, "G");
            std::size_t mm = 0;
            int jj = -1;
            if (!(is >> mm >> jj) || mm != m || jj != j) throw InvalidArgument("coefficient table: G blocks out of order");
            read_array(is, t.G(m, j));
        }
    return t;
}

void CoefficientTable::save(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw InvalidArgument("cannot open coefficient table for writing: " + path);
    write(os);
}

CoefficientTable CoefficientTable::load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw InvalidArgument("cannot open coefficient table: " + path);
    return read(is);
}

bool CoefficientTable::operator==(const CoefficientTable& o) const {
    return dim_ == o.dim_ && lo_ == o.lo_ && hi_ == o.hi_ && res_ == o.res_ && modes_ == o.modes_ && A_ == o.A_ &&
           V_ == o.V_ && G_ == o.G_;
}

}  // namespace fkpf
