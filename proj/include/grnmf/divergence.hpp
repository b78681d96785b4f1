#pragma once

#include <cmath>
#include <cstddef>

#include "grnmf/errors.hpp"

namespace grnmf {

/// Floor applied to data and model entries before any power or log in the
/// iterative code paths.
inline constexpr double kFloor = 1e-12;

inline double floored(double v) noexcept { return v < kFloor ? kFloor : v; }

/// Shape parameter of the beta-divergence.
///
/// Branches are chosen by exact comparison: only a stored value of exactly
/// 0 selects Itakura-Saito and exactly 1 selects Kullback-Leibler.
class Beta {
public:
    explicit Beta(double value) : value_(value) {
        if (!std::isfinite(value)) throw DomainError("beta must be finite");
    }

    double value() const noexcept { return value_; }
    bool is_itakura_saito() const noexcept { return value_ == 0.0; }
    bool is_kullback_leibler() const noexcept { return value_ == 1.0; }

    friend bool operator==(const Beta&, const Beta&) = default;

private:
    double value_;
};

/// How the multiplicative update exponents are chosen.
enum class ExponentPolicy {
    TableOne,    ///< exponents that make the M and R steps majorization-minimization
    OverRelaxed, ///< exponent 1 everywhere
};

/// Scalar beta-divergence d(x|y). Requires x >= 0, y > 0.
double d_beta(double x, double y, Beta beta);

/// Convex part (in y) of the convex-concave decomposition of d(x|y).
double d_convex(double x, double y, Beta beta);

/// Concave part (in y) of the convex-concave decomposition of d(x|y).
double d_concave(double x, double y, Beta beta);

/// Derivative of d_concave with respect to y.
double d_concave_prime(double x, double y, Beta beta);

/// d(x|y) - d_convex(x|y) - d_concave(x|y); depends on x only.
double d_constant(double x, Beta beta);

/// Exponent of the endmember (M) update.
double gamma_exponent(Beta beta) noexcept;

/// Exponent of the outlier (R) update.
double xi_exponent(Beta beta) noexcept;

inline double gamma_exponent(Beta beta, ExponentPolicy policy) noexcept {
    return policy == ExponentPolicy::OverRelaxed ? 1.0 : gamma_exponent(beta);
}

inline double xi_exponent(Beta beta, ExponentPolicy policy) noexcept {
    return policy == ExponentPolicy::OverRelaxed ? 1.0 : xi_exponent(beta);
}

/// Fast y^e for the exponents that occur in the updates. Integer and half
/// integer exponents avoid std::pow.
class PowerKernel {
public:
    explicit PowerKernel(double exponent);
    double operator()(double y) const noexcept;
    /// out[i] = y[i]^exponent for i < n; in-place use (out == y) is fine.
    void apply(const double* y, double* out, std::size_t n) const noexcept;

private:
    enum class Kind { Zero, One, Two, Three, MinusOne, MinusTwo, MinusThree, Half, MinusHalf, General };
    Kind kind_;
    double exponent_;
};

} // namespace grnmf
