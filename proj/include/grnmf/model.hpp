#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "grnmf/divergence.hpp"

namespace grnmf {

/// Column-major dense matrix. Observations are stored bands x pixels, so
/// each pixel spectrum is a contiguous column.
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Tolerance on abundance column sums.
inline constexpr double kSumToOneTol = 1e-9;

/// Tolerance when comparing cached products against fresh recomputation.
inline constexpr double kCacheTol = 1e-10;

// Type checks. Each throws DomainError (negative / non-finite entries,
// zero endmember column, column sum off the simplex) or DimensionMismatch.
void require_data(const Matrix& Y);
void require_endmembers(const Matrix& M);
void require_abundances(const Matrix& A);
void require_outliers(const Matrix& R);

/// S = M A, evaluated one pixel column at a time.
Matrix mix(const Matrix& M, const Matrix& A, int threads = 1);

/// Factors M, A, R of the robust linear mixing model together with the cached
/// low-rank part S = M A and the approximation Yhat = S + R.
class UnmixingState {
public:
    UnmixingState() = default;

    /// Validates shapes and entries, then computes the caches.
    UnmixingState(Matrix M, Matrix A, Matrix R, int threads = 1);

    const Matrix& M() const noexcept { return M_; }
    const Matrix& A() const noexcept { return A_; }
    const Matrix& R() const noexcept { return R_; }
    const Matrix& S() const noexcept { return S_; }
    const Matrix& Yhat() const noexcept { return Yhat_; }

    Index bands() const noexcept { return M_.rows(); }
    Index endmembers() const noexcept { return M_.cols(); }
    Index pixels() const noexcept { return A_.cols(); }

    // Replace one block and refresh the dependent caches.
    void set_M(Matrix M);
    void set_A(Matrix A);
    void set_R(Matrix R);

    /// Raw access to a factor without cache refresh. Call refresh() after.
    Matrix& unchecked_M() noexcept { return M_; }
    Matrix& unchecked_A() noexcept { return A_; }
    Matrix& unchecked_R() noexcept { return R_; }
    void refresh();

    void set_threads(int threads) noexcept { threads_ = threads < 1 ? 1 : threads; }
    int threads() const noexcept { return threads_; }

private:
    Matrix M_, A_, R_, S_, Yhat_;
    int threads_ = 1;
};

/// Sum of Euclidean norms of the columns of R.
double l21_norm(const Matrix& R);

/// Per-pixel Euclidean norms of the columns of R.
Vector energy_vector(const Matrix& R);

/// Sum over entries of d_beta(y, yhat) with both arguments floored at kFloor.
/// When `weights` is given, only entries with weight 1 contribute.
double data_term(const Matrix& Y, const Matrix& Yhat, Beta beta, const Matrix* weights = nullptr);

/// Penalized objective D(Y | M A + R) + lambda * ||R||_{2,1}.
double objective(const Matrix& Y, const UnmixingState& state, Beta beta, double lambda);

struct Violation {
    enum class Kind { Negativity, SumToOne, StaleCache, NonFinite };
    Kind kind;
    std::string matrix; ///< "M", "A", "R", "S" or "Yhat"
    Index row = -1;     ///< -1 when the violation concerns a whole column
    Index col = -1;
    double value = 0.0;

    std::string describe() const;
};

/// Every violated state invariant. Empty means valid.
std::vector<Violation> validate(const UnmixingState& state);

} // namespace grnmf
