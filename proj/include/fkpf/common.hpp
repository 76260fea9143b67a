#pragma once

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace fkpf {

using cplx = std::complex<double>;
using VecC = Eigen::VectorXcd;
using VecR = Eigen::VectorXd;
using MatC = Eigen::MatrixXcd;
using MatR = Eigen::MatrixXd;

inline constexpr double kPi = 3.14159265358979323846;

// Base class for all library diagnostics; the subclasses let callers
// distinguish input errors from internal failures.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

class ConsistencyError : public Error {
public:
    using Error::Error;
};

class ResourceLimit : public Error {
public:
    using Error::Error;
};

inline void require(bool cond, const std::string& what) {
    if (!cond) throw InvalidArgument(what);
}

}  // namespace fkpf
