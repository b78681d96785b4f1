#include "grnmf/model.hpp"

#include <cmath>
#include <sstream>

namespace grnmf {

namespace {

void require_nonnegative(const Matrix& X, const char* name) {
    for (Index j = 0; j < X.cols(); ++j)
        for (Index i = 0; i < X.rows(); ++i) {
            const double v = X(i, j);
            if (!std::isfinite(v) || v < 0.0) {
                std::ostringstream os;
                os << name << "(" << i << "," << j << ") = " << v << " is not a finite nonnegative value";
                throw DomainError(os.str());
            }
        }
}

void require_nonempty(const Matrix& X, const char* name) {
    if (X.rows() < 1 || X.cols() < 1)
        throw DimensionMismatch(std::string(name) + " must have at least one row and one column");
}

} // namespace

void require_data(const Matrix& Y) {
    require_nonempty(Y, "Y");
    require_nonnegative(Y, "Y");
}

void require_endmembers(const Matrix& M) {
    require_nonempty(M, "M");
    require_nonnegative(M, "M");
    for (Index k = 0; k < M.cols(); ++k)
        if (M.col(k).maxCoeff() <= 0.0)
            throw DomainError("M column " + std::to_string(k) + " is all zero (degenerate endmember)");
}

void require_abundances(const Matrix& A) {
    require_nonempty(A, "A");
    require_nonnegative(A, "A");
    for (Index p = 0; p < A.cols(); ++p) {
        const double s = A.col(p).sum();
        if (std::abs(s - 1.0) > kSumToOneTol)
            throw DomainError("A column " + std::to_string(p) + " sums to " + std::to_string(s));
    }
}

void require_outliers(const Matrix& R) {
    require_nonempty(R, "R");
    require_nonnegative(R, "R");
}

Matrix mix(const Matrix& M, const Matrix& A, int threads) {
    if (M.cols() != A.rows())
        throw DimensionMismatch("mix: M has " + std::to_string(M.cols()) + " columns, A has " +
                                std::to_string(A.rows()) + " rows");
    Matrix S(M.rows(), A.cols());
    const Index P = A.cols();
#pragma omp parallel for num_threads(threads) schedule(static) if (threads > 1)
    for (Index p = 0; p < P; ++p) {
        // column-by-column accumulation in a fixed order keeps results
        // independent of the thread count
        auto s = S.col(p);
        s.setZero();
        for (Index k = 0; k < M.cols(); ++k) {
            const double a = A(k, p);
            if (a != 0.0) s.noalias() += a * M.col(k);
        }
    }
    return S;
}

UnmixingState::UnmixingState(Matrix M, Matrix A, Matrix R, int threads)
    : M_(std::move(M)), A_(std::move(A)), R_(std::move(R)), threads_(threads < 1 ? 1 : threads) {
    if (M_.cols() != A_.rows())
        throw DimensionMismatch("M is " + std::to_string(M_.rows()) + "x" + std::to_string(M_.cols()) +
                                " but A has " + std::to_string(A_.rows()) + " rows");
    if (R_.rows() != M_.rows() || R_.cols() != A_.cols())
        throw DimensionMismatch("R must be " + std::to_string(M_.rows()) + "x" + std::to_string(A_.cols()));
    require_endmembers(M_);
    require_abundances(A_);
    require_outliers(R_);
    refresh();
}

void UnmixingState::set_M(Matrix M) {
    if (M.rows() != M_.rows() || M.cols() != M_.cols()) throw DimensionMismatch("set_M: shape changed");
    M_ = std::move(M);
    S_ = mix(M_, A_, threads_);
    Yhat_ = S_ + R_;
}

void UnmixingState::set_A(Matrix A) {
    if (A.rows() != A_.rows() || A.cols() != A_.cols()) throw DimensionMismatch("set_A: shape changed");
    A_ = std::move(A);
    S_ = mix(M_, A_, threads_);
    Yhat_ = S_ + R_;
}

void UnmixingState::set_R(Matrix R) {
    if (R.rows() != R_.rows() || R.cols() != R_.cols()) throw DimensionMismatch("set_R: shape changed");
    R_ = std::move(R);
    Yhat_ = S_ + R_;
}

void UnmixingState::refresh() {
    S_ = mix(M_, A_, threads_);
    Yhat_ = S_ + R_;
}

double l21_norm(const Matrix& R) { return energy_vector(R).sum(); }

Vector energy_vector(const Matrix& R) {
    Vector e(R.cols());
    for (Index p = 0; p < R.cols(); ++p) e(p) = R.col(p).norm();
    return e;
}

double data_term(const Matrix& Y, const Matrix& Yhat, Beta beta, const Matrix* weights) {
    if (Y.rows() != Yhat.rows() || Y.cols() != Yhat.cols())
        throw DimensionMismatch("data_term: Y and Yhat differ in shape");
    if (weights && (weights->rows() != Y.rows() || weights->cols() != Y.cols()))
        throw DimensionMismatch("data_term: weights differ in shape");
    const double b = beta.value();
    double total = 0.0;
    for (Index p = 0; p < Y.cols(); ++p) {
        double col = 0.0;
        for (Index l = 0; l < Y.rows(); ++l) {
            if (weights && (*weights)(l, p) == 0.0) continue;
            const double x = floored(Y(l, p));
            const double y = floored(Yhat(l, p));
            double d;
            if (b == 2.0) {
                d = 0.5 * (x - y) * (x - y);
            } else if (b == 1.0) {
                d = x * std::log(x / y) - x + y;
            } else if (b == 0.0) {
                const double q = x / y;
                d = q - std::log(q) - 1.0;
            } else {
                d = std::pow(x, b) / (b * (b - 1.0)) + std::pow(y, b) / b - x * std::pow(y, b - 1.0) / (b - 1.0);
            }
            col += d;
        }
        total += col;
    }
    if (!std::isfinite(total)) throw DomainError("data_term: non-finite divergence sum");
    return total;
}

double objective(const Matrix& Y, const UnmixingState& state, Beta beta, double lambda) {
    if (!(lambda >= 0.0)) throw DomainError("objective: lambda must be >= 0");
    const double fit = data_term(Y, state.Yhat(), beta);
    return lambda == 0.0 ? fit : fit + lambda * l21_norm(state.R());
}

std::string Violation::describe() const {
    std::ostringstream os;
    switch (kind) {
    case Kind::Negativity: os << "Negativity"; break;
    case Kind::SumToOne: os << "SumToOne"; break;
    case Kind::StaleCache: os << "StaleCache"; break;
    case Kind::NonFinite: os << "NonFinite"; break;
    }
    os << " in " << matrix;
    if (row >= 0) os << " row " << row;
    if (col >= 0) os << " col " << col;
    os << " (value " << value << ")";
    return os.str();
}

std::vector<Violation> validate(const UnmixingState& state) {
    std::vector<Violation> out;
    auto scan = [&](const Matrix& X, const char* name) {
        for (Index j = 0; j < X.cols(); ++j)
            for (Index i = 0; i < X.rows(); ++i) {
                const double v = X(i, j);
                if (!std::isfinite(v)) out.push_back({Violation::Kind::NonFinite, name, i, j, v});
                else if (v < 0.0) out.push_back({Violation::Kind::Negativity, name, i, j, v});
            }
    };
    scan(state.M(), "M");
    scan(state.A(), "A");
    scan(state.R(), "R");

    const Matrix& A = state.A();
    for (Index p = 0; p < A.cols(); ++p) {
        const double s = A.col(p).sum();
        if (!(std::abs(s - 1.0) <= kSumToOneTol)) out.push_back({Violation::Kind::SumToOne, "A", -1, p, s});
    }

    if (state.M().cols() == A.rows() && state.R().rows() == state.M().rows() && state.R().cols() == A.cols()) {
        const Matrix S = mix(state.M(), A);
        const Matrix Yhat = S + state.R();
        auto stale = [&](const Matrix& cached, const Matrix& fresh, const char* name) {
            if (cached.rows() != fresh.rows() || cached.cols() != fresh.cols()) {
                out.push_back({Violation::Kind::StaleCache, name, -1, -1, 0.0});
                return;
            }
            for (Index p = 0; p < fresh.cols(); ++p) {
                const double err = (cached.col(p) - fresh.col(p)).cwiseAbs().maxCoeff();
                const double scale = std::max(1.0, fresh.col(p).cwiseAbs().maxCoeff());
                if (!(err <= kCacheTol * scale)) out.push_back({Violation::Kind::StaleCache, name, -1, p, err});
            }
        };
        stale(state.S(), S, "S");
        stale(state.Yhat(), Yhat, "Yhat");
    }
    return out;
}

} // namespace grnmf
