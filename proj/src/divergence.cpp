#include "grnmf/divergence.hpp"

#include <string>

namespace grnmf {

namespace {

enum class Row { BelowOne, Zero, OneToTwo, AboveTwo };

// Rows of the convex-concave decomposition table, boundaries as printed:
// beta < 1 (beta != 0), beta == 0, 1 <= beta <= 2, beta > 2.
Row table_row(double b) noexcept {
    if (b == 0.0) return Row::Zero;
    if (b < 1.0) return Row::BelowOne;
    if (b <= 2.0) return Row::OneToTwo;
    return Row::AboveTwo;
}

const char* branch_name(double b) noexcept {
    if (b == 0.0) return "beta=0 (Itakura-Saito)";
    if (b == 1.0) return "beta=1 (Kullback-Leibler)";
    return "generic beta";
}

void check_args(double x, double y, double b, const char* op) {
    if (!(x >= 0.0) || !std::isfinite(x))
        throw DomainError(std::string(op) + ": x must be finite and >= 0, got " + std::to_string(x));
    if (!(y > 0.0) || !std::isfinite(y))
        throw DomainError(std::string(op) + ": y must be finite and > 0, got " + std::to_string(y) +
                          " [" + branch_name(b) + "]");
}

double finite_or_throw(double v, double x, double y, double b, const char* op) {
    if (!std::isfinite(v))
        throw DomainError(std::string(op) + ": non-finite value on branch " + branch_name(b) +
                          " at x=" + std::to_string(x) + ", y=" + std::to_string(y));
    return v;
}

} // namespace

double d_beta(double x, double y, Beta beta) {
    const double b = beta.value();
    check_args(x, y, b, "d_beta");
    double v;
    if (b == 1.0) {
        // x log(x/y) -> 0 as x -> 0
        v = (x == 0.0 ? 0.0 : x * std::log(x / y)) - x + y;
    } else if (b == 0.0) {
        const double q = x / y;
        v = q - std::log(q) - 1.0;
    } else {
        v = std::pow(x, b) / (b * (b - 1.0)) + std::pow(y, b) / b - x * std::pow(y, b - 1.0) / (b - 1.0);
    }
    v = finite_or_throw(v, x, y, b, "d_beta");
    // cancellation can leave a tiny negative residue around x == y
    return v < 0.0 ? 0.0 : v;
}

double d_convex(double x, double y, Beta beta) {
    const double b = beta.value();
    check_args(x, y, b, "d_convex");
    double v = 0.0;
    switch (table_row(b)) {
    case Row::BelowOne: v = -x * std::pow(y, b - 1.0) / (b - 1.0); break;
    case Row::Zero: v = x / y; break;
    case Row::OneToTwo: return d_beta(x, y, beta);
    case Row::AboveTwo: v = std::pow(y, b) / b; break;
    }
    return finite_or_throw(v, x, y, b, "d_convex");
}

double d_concave(double x, double y, Beta beta) {
    const double b = beta.value();
    check_args(x, y, b, "d_concave");
    double v = 0.0;
    switch (table_row(b)) {
    case Row::BelowOne: v = std::pow(y, b) / b; break;
    case Row::Zero: v = std::log(y); break;
    case Row::OneToTwo: v = 0.0; break;
    case Row::AboveTwo: v = -x * std::pow(y, b - 1.0) / (b - 1.0); break;
    }
    return finite_or_throw(v, x, y, b, "d_concave");
}

double d_concave_prime(double x, double y, Beta beta) {
    const double b = beta.value();
    check_args(x, y, b, "d_concave_prime");
    double v = 0.0;
    switch (table_row(b)) {
    case Row::BelowOne: v = std::pow(y, b - 1.0); break;
    case Row::Zero: v = 1.0 / y; break;
    case Row::OneToTwo: v = 0.0; break;
    case Row::AboveTwo: v = -x * std::pow(y, b - 2.0); break;
    }
    return finite_or_throw(v, x, y, b, "d_concave_prime");
}

double d_constant(double x, Beta beta) {
    const double b = beta.value();
    if (!(x >= 0.0) || !std::isfinite(x)) throw DomainError("d_constant: x must be finite and >= 0");
    double v = 0.0;
    switch (table_row(b)) {
    case Row::BelowOne:
    case Row::AboveTwo: v = std::pow(x, b) / (b * (b - 1.0)); break;
    case Row::Zero: v = -std::log(x) - 1.0; break;
    case Row::OneToTwo: v = 0.0; break;
    }
    return finite_or_throw(v, x, 1.0, b, "d_constant");
}

double gamma_exponent(Beta beta) noexcept {
    const double b = beta.value();
    switch (table_row(b)) {
    case Row::BelowOne: return 1.0 / (2.0 - b);
    case Row::Zero: return 0.5;
    case Row::OneToTwo: return 1.0;
    case Row::AboveTwo: return 1.0 / (b - 1.0);
    }
    return 1.0;
}

double xi_exponent(Beta beta) noexcept {
    const double b = beta.value();
    switch (table_row(b)) {
    case Row::BelowOne:
    case Row::OneToTwo: return 1.0 / (3.0 - b);
    case Row::Zero: return 1.0 / 3.0;
    case Row::AboveTwo: return 1.0 / (b - 1.0);
    }
    return 1.0;
}

PowerKernel::PowerKernel(double exponent) : kind_(Kind::General), exponent_(exponent) {
    if (exponent == 0.0) kind_ = Kind::Zero;
    else if (exponent == 1.0) kind_ = Kind::One;
    else if (exponent == 2.0) kind_ = Kind::Two;
    else if (exponent == 3.0) kind_ = Kind::Three;
    else if (exponent == -1.0) kind_ = Kind::MinusOne;
    else if (exponent == -2.0) kind_ = Kind::MinusTwo;
    else if (exponent == -3.0) kind_ = Kind::MinusThree;
    else if (exponent == 0.5) kind_ = Kind::Half;
    else if (exponent == -0.5) kind_ = Kind::MinusHalf;
}

double PowerKernel::operator()(double y) const noexcept {
    switch (kind_) {
    case Kind::Zero: return 1.0;
    case Kind::One: return y;
    case Kind::Two: return y * y;
    case Kind::Three: return y * y * y;
    case Kind::MinusOne: return 1.0 / y;
    case Kind::MinusTwo: return 1.0 / (y * y);
    case Kind::MinusThree: return 1.0 / (y * y * y);
    case Kind::Half: return std::sqrt(y);
    case Kind::MinusHalf: return 1.0 / std::sqrt(y);
    case Kind::General: break;
    }
    return std::pow(y, exponent_);
}

void PowerKernel::apply(const double* y, double* out, std::size_t n) const noexcept {
    // one switch per call so each loop body is branch-free
    switch (kind_) {
    case Kind::Zero: for (std::size_t i = 0; i < n; ++i) out[i] = 1.0; return;
    case Kind::One: for (std::size_t i = 0; i < n; ++i) out[i] = y[i]; return;
    case Kind::Two: for (std::size_t i = 0; i < n; ++i) out[i] = y[i] * y[i]; return;
    case Kind::Three: for (std::size_t i = 0; i < n; ++i) out[i] = y[i] * y[i] * y[i]; return;
    case Kind::MinusOne: for (std::size_t i = 0; i < n; ++i) out[i] = 1.0 / y[i]; return;
    case Kind::MinusTwo: for (std::size_t i = 0; i < n; ++i) out[i] = 1.0 / (y[i] * y[i]); return;
    case Kind::MinusThree: for (std::size_t i = 0; i < n; ++i) out[i] = 1.0 / (y[i] * y[i] * y[i]); return;
    case Kind::Half: for (std::size_t i = 0; i < n; ++i) out[i] = std::sqrt(y[i]); return;
    case Kind::MinusHalf: for (std::size_t i = 0; i < n; ++i) out[i] = 1.0 / std::sqrt(y[i]); return;
    case Kind::General: break;
    }
    for (std::size_t i = 0; i < n; ++i) out[i] = std::pow(y[i], exponent_);
}

} // namespace grnmf
