#pragma once

#include <limits>
#include <span>
#include <string>
#include <vector>

#include "fkpf/common.hpp"

namespace fkpf {

// Open set Lambda in R^nu described by a signed distance to its boundary
// (positive inside). An optional margin realizes the exhaustion {dist > margin}.
class Domain {
public:
    enum class Kind { AllSpace, Box, Ball, HalfSpace };

    static Domain all_space(int dim);
    static Domain interval(double a, double b);
    static Domain box(std::vector<double> lo, std::vector<double> hi);
    static Domain ball(std::vector<double> center, double radius);
    // {x : <normal, x> < offset} with |normal| = 1 after normalization.
    static Domain half_space(std::vector<double> normal, double offset);

    Kind kind() const { return kind_; }
    int dim() const { return dim_; }
    double margin() const { return margin_; }

    // Signed distance to the boundary: > 0 inside, <= 0 outside; +inf for all-space.
    double signed_distance(std::span<const double> x) const;
    // max(0, signed_distance).
    double dist_to_complement(std::span<const double> x) const;
    bool contains(std::span<const double> x) const { return signed_distance(x) > 0.0; }

    // Probability that a Brownian bridge over time dt between two interior
    // points stays inside, treating each face (or the nearest tangent plane
    // for a ball) as a flat wall.
    double crossing_survival(std::span<const double> a, std::span<const double> b, double dt) const;

    // Lambda_n = {dist > 1/n}.
    Domain exhaustion(double n) const;
    Domain with_margin(double margin) const;

    std::string describe() const;

    const std::vector<double>& lo() const { return lo_; }
    const std::vector<double>& hi() const { return hi_; }
    const std::vector<double>& center() const { return lo_; }
    double radius() const { return radius_; }
    const std::vector<double>& normal() const { return lo_; }
    double offset() const { return radius_; }

private:
    Kind kind_ = Kind::AllSpace;
    int dim_ = 1;
    std::vector<double> lo_, hi_;
    double radius_ = 0.0;
    double margin_ = 0.0;
};

}  // namespace fkpf
