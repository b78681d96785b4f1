#include "grnmf/updates.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace grnmf {

namespace {

// Elementwise factors shared by all updates:
//   P1 = yhat^(beta-1),  Q = y * yhat^(beta-2)
// with y and yhat floored, and masked entries zeroed when weights are given.
struct Powers {
    Matrix P1;
    Matrix Q;
};

Powers compute_powers(const Matrix& Y, const Matrix& Yhat, double b, const Matrix* w, int threads) {
    if (Y.rows() != Yhat.rows() || Y.cols() != Yhat.cols())
        throw DimensionMismatch("Y is " + std::to_string(Y.rows()) + "x" + std::to_string(Y.cols()) +
                                " but the model is " + std::to_string(Yhat.rows()) + "x" +
                                std::to_string(Yhat.cols()));
    if (w && (w->rows() != Y.rows() || w->cols() != Y.cols()))
        throw DimensionMismatch("weights differ in shape from Y");
    const PowerKernel pow_m2(b - 2.0);
    Powers out{Matrix(Y.rows(), Y.cols()), Matrix(Y.rows(), Y.cols())};
    const Index L = Y.rows();
    const Index P = Y.cols();
#pragma omp parallel for num_threads(threads) schedule(static) if (threads > 1)
    for (Index p = 0; p < P; ++p) {
        double* p1 = out.P1.col(p).data();
        double* q = out.Q.col(p).data();
        const double* yh = Yhat.col(p).data();
        const double* y = Y.col(p).data();
        for (Index l = 0; l < L; ++l) p1[l] = floored(yh[l]);
        pow_m2.apply(p1, q, static_cast<std::size_t>(L)); // q holds yhat^(beta-2)
        for (Index l = 0; l < L; ++l) {
            const double base = q[l];
            p1[l] *= base;
            q[l] = floored(y[l]) * base;
        }
        if (w) {
            const double* wt = w->col(p).data();
            for (Index l = 0; l < L; ++l) {
                p1[l] *= wt[l];
                q[l] *= wt[l];
            }
        }
    }
    return out;
}

inline double safe_ratio(double num, double den) {
    if (den == 0.0 && num == 0.0) return 1.0;
    return num / (den < kDenominatorFloor ? kDenominatorFloor : den);
}

inline double apply_exponent(double ratio, double e) { return e == 1.0 ? ratio : std::pow(ratio, e); }

// Gradient parts of C(U) for column scales n_p = ||u_p||_1, given the model
// products S and Yhat built from the normalized abundances.
GradientSplit split_from_products(const Matrix& M, const Matrix& S, const Powers& pw, const Vector& scale) {
    // column sums of S .* P1 and S .* Q, shared by every row k
    const Eigen::RowVectorXd sp1 = S.cwiseProduct(pw.P1).colwise().sum();
    const Eigen::RowVectorXd sq = S.cwiseProduct(pw.Q).colwise().sum();
    GradientSplit g;
    g.minus = M.transpose() * pw.Q;
    g.minus.rowwise() += sp1;
    g.plus = M.transpose() * pw.P1;
    g.plus.rowwise() += sq;
    for (Index p = 0; p < S.cols(); ++p) {
        g.minus.col(p) /= scale(p);
        g.plus.col(p) /= scale(p);
    }
    return g;
}

void require_lambda(double lambda) {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw DomainError("lambda must be finite and >= 0");
}

} // namespace

Matrix update_M(const Matrix& Y, const UnmixingState& state, Beta beta, ExponentPolicy policy, const Matrix* weights) {
    const Powers pw = compute_powers(Y, state.Yhat(), beta.value(), weights, state.threads());
    const Matrix& A = state.A();
    const Matrix num = pw.Q * A.transpose();
    const Matrix den = pw.P1 * A.transpose();
    const double e = gamma_exponent(beta, policy);

    Matrix M = state.M();
    for (Index k = 0; k < M.cols(); ++k)
        for (Index l = 0; l < M.rows(); ++l) {
            if (den(l, k) == 0.0 && weights == nullptr)
                throw DomainError("update_M: denominator vanished at band " + std::to_string(l) + ", endmember " +
                                  std::to_string(k) + " (dead endmember)");
            M(l, k) *= apply_exponent(safe_ratio(num(l, k), den(l, k)), e);
        }
    return M;
}

Matrix update_R(const Matrix& Y, const UnmixingState& state, Beta beta, double lambda, ExponentPolicy policy,
                PenaltyNorm norm) {
    require_lambda(lambda);
    const Powers pw = compute_powers(Y, state.Yhat(), beta.value(), nullptr, state.threads());
    const double e = xi_exponent(beta, policy);
    Matrix R = state.R();
    const Index L = R.rows();
    const Index P = R.cols();
    const int threads = state.threads();
#pragma omp parallel for num_threads(threads) schedule(static) if (threads > 1)
    for (Index p = 0; p < P; ++p) {
        auto r = R.col(p);
        const double n = norm == PenaltyNorm::L2 ? r.norm() : r.lpNorm<1>();
        if (n == 0.0) continue; // zero columns are a fixed point
        for (Index l = 0; l < L; ++l) {
            const double rt = r(l);
            if (rt == 0.0) continue;
            const double den = pw.P1(l, p) + lambda * rt / n;
            const double v = rt * apply_exponent(pw.Q(l, p) / (den < kDenominatorFloor ? kDenominatorFloor : den), e);
            // a shrinking entry would otherwise crawl through the subnormal range
            r(l) = v < std::numeric_limits<double>::min() ? 0.0 : v;
        }
    }
    return R;
}

Matrix update_A(const Matrix& Y, const UnmixingState& state, Beta beta, const Matrix* weights) {
    const Powers pw = compute_powers(Y, state.Yhat(), beta.value(), weights, state.threads());
    // current abundances are normalized, so U~ = A~ and every scale is one
    const GradientSplit g = split_from_products(state.M(), state.S(), pw, Vector::Ones(state.pixels()));
    Matrix A = state.A();
    for (Index p = 0; p < A.cols(); ++p) {
        auto a = A.col(p);
        for (Index k = 0; k < A.rows(); ++k) a(k) *= safe_ratio(g.minus(k, p), g.plus(k, p));
        const double s = a.sum();
        if (!(s > 0.0) || !std::isfinite(s))
            throw DomainError("update_A: abundance column " + std::to_string(p) + " collapsed (sum " +
                              std::to_string(s) + ")");
        a /= s;
    }
    return A;
}

Matrix update_A_free(const Matrix& Y, const UnmixingState& state, Beta beta, ExponentPolicy policy,
                     const Matrix* weights) {
    const Powers pw = compute_powers(Y, state.Yhat(), beta.value(), weights, state.threads());
    const Matrix& M = state.M();
    const Matrix num = M.transpose() * pw.Q;
    const Matrix den = M.transpose() * pw.P1;
    const double e = gamma_exponent(beta, policy);
    Matrix A = state.A();
    for (Index p = 0; p < A.cols(); ++p)
        for (Index k = 0; k < A.rows(); ++k) A(k, p) *= apply_exponent(safe_ratio(num(k, p), den(k, p)), e);
    return A;
}

GradientSplit abundance_gradient_split(const Matrix& Y, const Matrix& M, const Matrix& U, const Matrix& R,
                                       Beta beta) {
    if (M.cols() != U.rows() || R.rows() != M.rows() || R.cols() != U.cols())
        throw DimensionMismatch("abundance_gradient_split: incompatible M, U, R");
    Vector scale(U.cols());
    Matrix A = U;
    for (Index p = 0; p < U.cols(); ++p) {
        scale(p) = U.col(p).sum();
        if (!(scale(p) > 0.0)) throw DomainError("abundance_gradient_split: column " + std::to_string(p) + " of U is zero");
        A.col(p) /= scale(p);
    }
    const Matrix S = mix(M, A);
    const Matrix Yhat = S + R;
    const Powers pw = compute_powers(Y, Yhat, beta.value(), nullptr, 1);
    return split_from_products(M, S, pw, scale);
}

double aux_bound_M(const Matrix& Y, const UnmixingState& state, const Matrix& M_candidate, Beta beta) {
    const Matrix& Mt = state.M();
    const Matrix& A = state.A();
    const Matrix& R = state.R();
    if (M_candidate.rows() != Mt.rows() || M_candidate.cols() != Mt.cols())
        throw DimensionMismatch("aux_bound_M: candidate shape differs from M");
    if (Y.rows() != Mt.rows() || Y.cols() != A.cols()) throw DimensionMismatch("aux_bound_M: Y shape");

    double G = 0.0;
    for (Index p = 0; p < Y.cols(); ++p)
        for (Index l = 0; l < Y.rows(); ++l) {
            const double x = floored(Y(l, p));
            const double yt = floored(state.Yhat()(l, p));
            double term = d_constant(x, beta) + d_concave(x, yt, beta);
            const double slope = d_concave_prime(x, yt, beta);
            for (Index k = 0; k < Mt.cols(); ++k) {
                const double a = A(k, p);
                if (a == 0.0) continue;
                const double mt = Mt(l, k);
                const double m = M_candidate(l, k);
                term += slope * a * (m - mt);
                if (mt == 0.0) {
                    if (m != 0.0) throw DomainError("aux_bound_M: candidate leaves the support of M~");
                    continue;
                }
                term += (mt * a / yt) * d_convex(x, yt * m / mt, beta);
            }
            if (R(l, p) > 0.0) term += (R(l, p) / yt) * d_convex(x, yt, beta);
            G += term;
        }
    return G;
}

double l21_majorizer(const Matrix& R, const Matrix& R_tilde) {
    if (R.rows() != R_tilde.rows() || R.cols() != R_tilde.cols())
        throw DimensionMismatch("l21_majorizer: shapes differ");
    double total = 0.0;
    for (Index p = 0; p < R.cols(); ++p) {
        const double nt = R_tilde.col(p).norm();
        const double sq = R.col(p).squaredNorm();
        if (nt == 0.0) {
            if (sq != 0.0) throw DomainError("l21_majorizer: anchor column " + std::to_string(p) + " is zero");
            continue;
        }
        total += 0.5 * (sq / nt + nt);
    }
    return total;
}

double aux_bound_R(const Matrix& Y, const UnmixingState& state, const Matrix& R_candidate, Beta beta,
                   double lambda) {
    require_lambda(lambda);
    const Matrix& Rt = state.R();
    const Matrix& S = state.S();
    if (R_candidate.rows() != Rt.rows() || R_candidate.cols() != Rt.cols())
        throw DimensionMismatch("aux_bound_R: candidate shape differs from R");
    if (Y.rows() != Rt.rows() || Y.cols() != Rt.cols()) throw DimensionMismatch("aux_bound_R: Y shape");

    double F = 0.0;
    for (Index p = 0; p < Y.cols(); ++p)
        for (Index l = 0; l < Y.rows(); ++l) {
            const double x = floored(Y(l, p));
            const double yt = floored(state.Yhat()(l, p));
            const double rt = Rt(l, p);
            const double r = R_candidate(l, p);
            double term = d_constant(x, beta) + d_concave(x, yt, beta) + d_concave_prime(x, yt, beta) * (r - rt);
            if (rt > 0.0) {
                term += (rt / yt) * d_convex(x, yt * r / rt, beta);
            } else if (r != 0.0) {
                throw DomainError("aux_bound_R: candidate leaves the support of R~");
            }
            if (S(l, p) > 0.0) term += (S(l, p) / yt) * d_convex(x, yt, beta);
            F += term;
        }
    return lambda == 0.0 ? F : F + lambda * l21_majorizer(R_candidate, Rt);
}

} // namespace grnmf
