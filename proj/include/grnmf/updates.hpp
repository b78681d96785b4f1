#pragma once

#include "grnmf/divergence.hpp"
#include "grnmf/model.hpp"

namespace grnmf {

/// Column norm used in the penalty ratio of the R update. L2 is the
/// majorization-minimization derivation; L1 reproduces the matrix-form
/// listing variant.
enum class PenaltyNorm { L2, L1 };

/// Floor for every denominator of a multiplicative ratio.
inline constexpr double kDenominatorFloor = 1e-300;

/// Multiplicative endmember update. Returns the new M; `state` is not
/// modified. With `weights` (0/1, same shape as Y) only observed entries
/// enter the sums, and rows without information are left unchanged.
/// Throws DomainError when a denominator vanishes without weights.
Matrix update_M(const Matrix& Y, const UnmixingState& state, Beta beta, ExponentPolicy policy,
                const Matrix* weights = nullptr);

/// Multiplicative outlier update with the group-sparse penalty. Columns of R
/// that are identically zero stay zero.
Matrix update_R(const Matrix& Y, const UnmixingState& state, Beta beta, double lambda, ExponentPolicy policy,
                PenaltyNorm norm = PenaltyNorm::L2);

/// Abundance update through the change of variable a_p = u_p / ||u_p||_1 and
/// the heuristic gradient split. Output columns are renormalized to sum to
/// one. Throws DomainError if a column collapses to zero.
Matrix update_A(const Matrix& Y, const UnmixingState& state, Beta beta, const Matrix* weights = nullptr);

/// Plain (not simplex constrained) multiplicative abundance update, the
/// transpose counterpart of update_M. Used by the missing-data fit.
Matrix update_A_free(const Matrix& Y, const UnmixingState& state, Beta beta, ExponentPolicy policy,
                     const Matrix* weights = nullptr);

/// Positive and negative parts of the gradient of
///   C(U) = D(Y | M [u_1/||u_1||_1, ..., u_P/||u_P||_1] + R)
/// with respect to U, so that grad = plus - minus.
struct GradientSplit {
    Matrix plus;
    Matrix minus;
};

GradientSplit abundance_gradient_split(const Matrix& Y, const Matrix& M, const Matrix& U, const Matrix& R,
                                       Beta beta);

/// Auxiliary function G(M | M~) of the endmember step, where M~ is
/// state.M(). Includes all constants so it compares directly against
/// C(M) = D(Y | M A + R). Entries are floored like the objective.
double aux_bound_M(const Matrix& Y, const UnmixingState& state, const Matrix& M_candidate, Beta beta);

/// Auxiliary function of the outlier step: Jensen/tangent bound of the data
/// term plus lambda times the quadratic bound of ||R||_{2,1}, anchored at
/// R~ = state.R(). Majorizes D(Y | M A + R) + lambda ||R||_{2,1}.
double aux_bound_R(const Matrix& Y, const UnmixingState& state, const Matrix& R_candidate, Beta beta,
                   double lambda);

/// 1/2 sum_p ( ||r_p||^2 / ||r~_p|| + ||r~_p|| ), an upper bound on
/// ||R||_{2,1} that is tight at R = R~.
double l21_majorizer(const Matrix& R, const Matrix& R_tilde);

} // namespace grnmf
