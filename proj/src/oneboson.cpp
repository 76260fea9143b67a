#include "fkpf/oneboson.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace fkpf {

OneBosonSpace::OneBosonSpace(std::vector<double> omega)
    : OneBosonSpace(VecR(Eigen::Map<const VecR>(omega.data(), static_cast<Eigen::Index>(omega.size())))) {}

OneBosonSpace::OneBosonSpace(const VecR& omega) : omega_(omega) {
    require(omega_.size() >= 1, "one-boson space needs at least one mode");
    for (Eigen::Index m = 0; m < omega_.size(); ++m)
        require(std::isfinite(omega_[m]) && omega_[m] > 0.0, "dispersion must be strictly positive");
}

bool OneBosonSpace::operator==(const OneBosonSpace& o) const {
    return omega_.size() == o.omega_.size() && omega_ == o.omega_;
}

OneBosonVector::OneBosonVector(std::initializer_list<cplx> amps) : a_(static_cast<Eigen::Index>(amps.size())) {
    Eigen::Index i = 0;
    for (cplx z : amps) a_[i++] = z;
}

OneBosonVector OneBosonVector::unit(std::size_t modes, std::size_t m) {
    require(m < modes, "mode index out of range");
    auto v = zero(modes);
    v.a_[static_cast<Eigen::Index>(m)] = 1.0;
    return v;
}

bool OneBosonVector::is_real(double tol) const {
    for (Eigen::Index i = 0; i < a_.size(); ++i)
        if (std::abs(a_[i].imag()) > tol) return false;
    return true;
}

void NelsonVector::add(double s, cplx c, const OneBosonVector& g) { add(s, c, g.amplitudes()); }

void NelsonVector::add(double s, cplx c, const Eigen::Ref<const VecC>& g) {
    if (vectors_.rows() == 0 && times_.empty()) vectors_.resize(g.size(), 0);
    if (g.size() != vectors_.rows()) throw DimensionMismatch("atom vector has wrong mode count");
    const Eigen::Index l = static_cast<Eigen::Index>(times_.size());
    if (vectors_.cols() <= l) vectors_.conservativeResize(Eigen::NoChange, std::max<Eigen::Index>(2 * l, 8));
    vectors_.col(l) = g;
    times_.push_back(s);
    weights_.push_back(c);
}

void NelsonVector::reserve(std::size_t atoms) {
    if (static_cast<std::size_t>(vectors_.cols()) < atoms)
        vectors_.conservativeResize(Eigen::NoChange, static_cast<Eigen::Index>(atoms));
    times_.reserve(atoms);
    weights_.reserve(atoms);
}

void NelsonVector::clear() {
    times_.clear();
    weights_.clear();
}

bool NelsonVector::times_sorted() const { return std::is_sorted(times_.begin(), times_.end()); }

bool NelsonVector::is_real(double tol) const {
    for (std::size_t l = 0; l < size(); ++l) {
        if (std::abs(weights_[l].imag()) > tol) return false;
        auto v = vector(l);
        for (Eigen::Index m = 0; m < v.size(); ++m)
            if (std::abs(v[m].imag()) > tol) return false;
    }
    return true;
}

NelsonVector NelsonVector::combined(const NelsonVector& o, cplx c) const {
    if (!empty() && !o.empty() && modes() != o.modes()) throw DimensionMismatch("Nelson vectors from different spaces");
    NelsonVector r(empty() ? o.modes() : modes());
    r.reserve(size() + o.size());
    for (std::size_t l = 0; l < size(); ++l) r.add(times_[l], weights_[l], vector(l));
    for (std::size_t l = 0; l < o.size(); ++l) r.add(o.times_[l], c * o.weights_[l], o.vector(l));
    return r;
}

NelsonVector NelsonVector::retimed(double a, double b) const {
    NelsonVector r = *this;
    for (double& s : r.times_) s = a * s + b;
    return r;
}

NelsonVector NelsonVector::coalesced() const {
    std::vector<std::size_t> idx(size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return times_[a] < times_[b]; });
    NelsonVector r(modes());
    r.reserve(size());
    for (std::size_t k = 0; k < idx.size();) {
        const double s = times_[idx[k]];
        VecC acc = weights_[idx[k]] * vector(idx[k]);
        std::size_t j = k + 1;
        for (; j < idx.size() && times_[idx[j]] == s; ++j) acc += weights_[idx[j]] * vector(idx[j]);
        r.add(s, 1.0, acc);
        k = j;
    }
    return r;
}

namespace {

void check_same(const OneBosonSpace& space, const OneBosonVector& v) {
    if (v.size() != space.modes()) throw DimensionMismatch("vector length does not match mode count");
}

void check_same(const OneBosonSpace& space, const NelsonVector& K) {
    if (!K.empty() && K.modes() != space.modes()) throw DimensionMismatch("Nelson vector mode count mismatch");
}

// Filon-Simpson moments of e^{i a y} on [-h, h]: C0 = int e^{iay}, S1 = int y sin(ay),
// C2 = int y^2 cos(ay). Series near ah = 0 avoids cancellation.
void filon_moments(double a, double h, double& c0, double& s1, double& c2) {
    const double x = a * h;
    if (std::abs(x) < 0.5) {
        const double x2 = x * x;
        double t0 = 1.0, t1 = 1.0, t2 = 1.0;  // running (ah)^{2k} / factorials
        c0 = s1 = c2 = 0.0;
        for (int k = 0; k < 12; ++k) {
            const double sg = (k % 2 == 0) ? 1.0 : -1.0;
            c0 += sg * t0 / (2 * k + 1);
            s1 += sg * t1 / (2 * k + 3);
            c2 += sg * t2 / (2 * k + 3);
            t0 *= x2 / ((2 * k + 1) * (2 * k + 2));
            t1 *= x2 / ((2 * k + 2) * (2 * k + 3));
            t2 *= x2 / ((2 * k + 1) * (2 * k + 2));
        }
        c0 *= 2.0 * h;
        s1 *= 2.0 * h * h * x;
        c2 *= 2.0 * h * h * h;
        return;
    }
    const double sn = std::sin(x), cs = std::cos(x);
    c0 = 2.0 * sn / a;
    s1 = 2.0 * (sn / (a * a) - h * cs / a);
    c2 = 2.0 * (h * h * sn / a + 2.0 * h * cs / (a * a) - 2.0 * sn / (a * a * a));
}

// (1/pi) int_{-L}^{L} omega / (kappa^2 + omega^2) e^{i a kappa} dkappa on the graded grid.
cplx filon_mode_integral(double omega, double a, double L, double scale, double ratio) {
    auto f = [omega](double k) { return omega / (k * k + omega * omega) / kPi; };
    cplx acc = 0.0;
    double k = 0.0;
    while (k < L) {
        double h = ratio * (k + scale);
        if (k + 2.0 * h > L) h = 0.5 * (L - k);
        // Panel [k, k+2h] and its mirror [-k-2h, -k].
        const double x1 = k + h;
        const double f0 = f(k), f1 = f(x1), f2 = f(k + 2.0 * h);
        const double al = f1;
        const double be = (f2 - f0) / (2.0 * h);
        const double ga = (f0 - 2.0 * f1 + f2) / (2.0 * h * h);
        double c0, s1, c2;
        filon_moments(a, h, c0, s1, c2);
        const cplx local_pos = al * c0 + ga * c2 + cplx(0.0, be * s1);
        // Mirror panel: f(-x1 + y) has slope -be.
        const cplx local_neg = al * c0 + ga * c2 - cplx(0.0, be * s1);
        acc += std::exp(cplx(0.0, a * x1)) * local_pos + std::exp(cplx(0.0, -a * x1)) * local_neg;
        k += 2.0 * h;
    }
    return acc;
}

}  // namespace

cplx inner(const OneBosonSpace& space, const OneBosonVector& u, const OneBosonVector& v) {
    check_same(space, u);
    check_same(space, v);
    return u.amplitudes().dot(v.amplitudes());
}

OneBosonVector heat_apply(const OneBosonSpace& space, double tau, const OneBosonVector& v) {
    require(tau >= 0.0, "heat_apply needs tau >= 0");
    check_same(space, v);
    VecC out = v.amplitudes();
    for (Eigen::Index m = 0; m < out.size(); ++m) out[m] *= std::exp(-tau * space.dispersion()[m]);
    return OneBosonVector(std::move(out));
}

cplx nelson_kernel_inner(const OneBosonSpace& space, double s, const OneBosonVector& u, double r,
                         const OneBosonVector& v) {
    return inner(space, u, heat_apply(space, std::abs(s - r), v));
}

QuadratureResult js_quadrature_inner(const OneBosonSpace& space, double s, const OneBosonVector& u, double r,
                                     const OneBosonVector& v, const KappaGrid& grid) {
    check_same(space, u);
    check_same(space, v);
    require(grid.half_width > 0.0 && grid.ratio > 0.0 && grid.scale > 0.0, "invalid kappa grid");
    const double a = s - r;
    QuadratureResult res{0.0, 0.0, 0.0};
    double weight = 0.0;
    for (std::size_t m = 0; m < space.modes(); ++m) {
        const cplx w = std::conj(u[m]) * v[m];
        if (w == cplx(0.0)) continue;
        const double om = space.omega(m);
        const cplx fine = filon_mode_integral(om, a, grid.half_width, grid.scale, grid.ratio);
        const cplx coarse = filon_mode_integral(om, a, grid.half_width, grid.scale, 2.0 * grid.ratio);
        res.value += w * fine;
        weight += std::abs(w);
        // Fourth-order rule: Richardson estimate of the fine-grid error.
        res.discretization_estimate += std::abs(w) * std::abs(fine - coarse) / 15.0;
        res.truncation_bound += std::abs(w) * (1.0 - 2.0 / kPi * std::atan(grid.half_width / om));
    }
    if (res.truncation_bound + res.discretization_estimate > grid.tolerance * std::max(1.0, weight))
    {
        char buf[160];
        std::snprintf(buf, sizeof buf, "kappa grid too coarse for requested tolerance: tail %.3e, discretization %.3e",
                      res.truncation_bound, res.discretization_estimate);
        throw InvalidArgument(buf);
    }
    return res;
}

OneBosonVector pullback(const OneBosonSpace& space, double t, const NelsonVector& K) {
    check_same(space, K);
    const auto& om = space.dispersion();
    VecC out = VecC::Zero(om.size());
    for (std::size_t l = 0; l < K.size(); ++l) {
        const double gap = std::abs(t - K.time(l));
        const cplx c = K.weight(l);
        auto g = K.vector(l);
        for (Eigen::Index m = 0; m < om.size(); ++m) out[m] += c * std::exp(-gap * om[m]) * g[m];
    }
    return OneBosonVector(std::move(out));
}

cplx nelson_gram_sum(const OneBosonSpace& space, const NelsonVector& K, const NelsonVector& Kp) {
    check_same(space, K);
    check_same(space, Kp);
    const auto& om = space.dispersion();
    cplx acc = 0.0;
    for (std::size_t l = 0; l < K.size(); ++l) {
        auto g = K.vector(l);
        const cplx cl = std::conj(K.weight(l));
        for (std::size_t k = 0; k < Kp.size(); ++k) {
            const double gap = std::abs(K.time(l) - Kp.time(k));
            auto h = Kp.vector(k);
            cplx e = 0.0;
            for (Eigen::Index m = 0; m < om.size(); ++m) e += std::conj(g[m]) * std::exp(-gap * om[m]) * h[m];
            acc += cl * Kp.weight(k) * e;
        }
    }
    return acc;
}

cplx nelson_inner(const OneBosonSpace& space, const NelsonVector& K, const NelsonVector& Kp) {
    return nelson_gram_sum(space, K, Kp);
}

double nelson_norm_sq(const OneBosonSpace& space, const NelsonVector& K) {
    check_same(space, K);
    if (K.empty()) return 0.0;
    if (!K.times_sorted()) return nelson_norm_sq(space, K.coalesced());
    // For time-ordered atoms the Gram sum telescopes through the Markov
    // property of exp(-|s - s'| omega): R_l = exp(-(s_l - s_{l-1}) omega)(R_{l-1} + a_{l-1}).
    const auto& om = space.dispersion();
    double total = 0.0, scale = 0.0;
    for (Eigen::Index m = 0; m < om.size(); ++m) {
        cplx R = 0.0;
        cplx prev = 0.0;
        double diag = 0.0, cross = 0.0;
        for (std::size_t l = 0; l < K.size(); ++l) {
            const cplx a = K.weight(l) * K.vector(l)[m];
            if (l > 0) {
                R = std::exp(-(K.time(l) - K.time(l - 1)) * om[m]) * (R + prev);
                cross += (std::conj(a) * R).real();
            }
            diag += std::norm(a);
            prev = a;
        }
        total += diag + 2.0 * cross;
        scale += diag;
    }
    if (total < -1e-12 * std::max(1.0, scale)) throw ConsistencyError("negative Nelson norm");
    return std::max(total, 0.0);
}

}  // namespace fkpf
