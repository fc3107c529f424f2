#pragma once

#include <Eigen/Dense>

#include <complex>
#include <stdexcept>
#include <string>

namespace twr {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using RVector = Eigen::VectorXd;
using RMatrix = Eigen::MatrixXd;

// Source node index. The relay is never addressed through this type.
enum class Source : int { One = 1, Two = 2 };

constexpr Source other(Source s) { return s == Source::One ? Source::Two : Source::One; }
constexpr int index_of(Source s) { return static_cast<int>(s) - 1; }
inline const char* name_of(Source s) { return s == Source::One ? "1" : "2"; }

class InvalidSpec : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class InvalidInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class InvalidProgram : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class UnachievableRate : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// Source covariance pair (D1, D2).
struct CovPair {
    CMatrix d1;
    CMatrix d2;

    const CMatrix& operator[](Source s) const { return s == Source::One ? d1 : d2; }
    CMatrix& operator[](Source s) { return s == Source::One ? d1 : d2; }

    double trace(Source s) const { return (*this)[s].trace().real(); }
    double total_trace() const { return trace(Source::One) + trace(Source::Two); }

    static CovPair zeros(int n1, int n2) { return {CMatrix::Zero(n1, n1), CMatrix::Zero(n2, n2)}; }
};

struct PowerLimits {
    double p1max = 0.0;
    double p2max = 0.0;
    double prmax = 0.0;

    double source(Source s) const { return s == Source::One ? p1max : p2max; }
};

}  // namespace twr
