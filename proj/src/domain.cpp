#include "fkpf/domain.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace fkpf {

Domain Domain::all_space(int dim) {
    require(dim >= 1, "dimension must be positive");
    Domain d;
    d.kind_ = Kind::AllSpace;
    d.dim_ = dim;
    return d;
}

Domain Domain::interval(double a, double b) { return box({a}, {b}); }

Domain Domain::box(std::vector<double> lo, std::vector<double> hi) {
    require(!lo.empty() && lo.size() == hi.size(), "box corners must have equal positive length");
    for (std::size_t i = 0; i < lo.size(); ++i) require(lo[i] < hi[i], "box needs lo < hi on every axis");
    Domain d;
    d.kind_ = Kind::Box;
    d.dim_ = static_cast<int>(lo.size());
    d.lo_ = std::move(lo);
    d.hi_ = std::move(hi);
    return d;
}

Domain Domain::ball(std::vector<double> center, double radius) {
    require(!center.empty() && radius > 0.0, "ball needs a center and positive radius");
    Domain d;
    d.kind_ = Kind::Ball;
    d.dim_ = static_cast<int>(center.size());
    d.lo_ = std::move(center);
    d.radius_ = radius;
    return d;
}

Domain Domain::half_space(std::vector<double> normal, double offset) {
    require(!normal.empty(), "half-space needs a normal");
    double n2 = 0.0;
    for (double c : normal) n2 += c * c;
    require(n2 > 0.0, "half-space normal must be nonzero");
    const double n = std::sqrt(n2);
    for (double& c : normal) c /= n;
    Domain d;
    d.kind_ = Kind::HalfSpace;
    d.dim_ = static_cast<int>(normal.size());
    d.lo_ = std::move(normal);
    d.radius_ = offset / n;
    return d;
}

double Domain::signed_distance(std::span<const double> x) const {
    if (static_cast<int>(x.size()) != dim_) throw DimensionMismatch("point dimension does not match domain");
    switch (kind_) {
        case Kind::AllSpace:
            return std::numeric_limits<double>::infinity();
        case Kind::Box: {
            double d = std::numeric_limits<double>::infinity();
            for (int i = 0; i < dim_; ++i) d = std::min({d, x[i] - lo_[i], hi_[i] - x[i]});
            return d - margin_;
        }
        case Kind::Ball: {
            double r2 = 0.0;
            for (int i = 0; i < dim_; ++i) r2 += (x[i] - lo_[i]) * (x[i] - lo_[i]);
            return radius_ - std::sqrt(r2) - margin_;
        }
        case Kind::HalfSpace: {
            double p = 0.0;
            for (int i = 0; i < dim_; ++i) p += lo_[i] * x[i];
            return radius_ - p - margin_;
        }
    }
    return 0.0;
}

double Domain::dist_to_complement(std::span<const double> x) const { return std::max(0.0, signed_distance(x)); }

double Domain::crossing_survival(std::span<const double> a, std::span<const double> b, double dt) const {
    auto wall = [dt](double da, double db) {
        if (da <= 0.0 || db <= 0.0) return 0.0;
        return -std::expm1(-2.0 * da * db / dt);
    };
    switch (kind_) {
        case Kind::AllSpace:
            return 1.0;
        case Kind::Box: {
            double p = 1.0;
            for (int i = 0; i < dim_; ++i) {
                p *= wall(a[i] - lo_[i] - margin_, b[i] - lo_[i] - margin_);
                p *= wall(hi_[i] - a[i] - margin_, hi_[i] - b[i] - margin_);
            }
            return p;
        }
        case Kind::Ball:
        case Kind::HalfSpace:
            return wall(signed_distance(a), signed_distance(b));
    }
    return 0.0;
}

Domain Domain::with_margin(double margin) const {
    require(margin >= 0.0, "margin must be nonnegative");
    Domain d = *this;
    d.margin_ = margin;
    return d;
}

Domain Domain::exhaustion(double n) const {
    require(n > 0.0, "exhaustion index must be positive");
    return with_margin(1.0 / n);
}

std::string Domain::describe() const {
    std::ostringstream os;
    os.precision(17);
    switch (kind_) {
        case Kind::AllSpace: os << "all-space(" << dim_ << ")"; break;
        case Kind::Box:
            os << "box(";
            for (int i = 0; i < dim_; ++i) os << (i ? ";" : "") << lo_[i] << ":" << hi_[i];
            os << ")";
            break;
        case Kind::Ball:
            os << "ball(";
            for (int i = 0; i < dim_; ++i) os << (i ? ";" : "") << lo_[i];
            os << "|" << radius_ << ")";
            break;
        case Kind::HalfSpace:
            os << "half-space(";
            for (int i = 0; i < dim_; ++i) os << (i ? ";" : "") << lo_[i];
            os << "|" << radius_ << ")";
            break;
    }
    if (margin_ > 0.0) os << "-" << margin_;
    return os.str();
}

}  // namespace fkpf
