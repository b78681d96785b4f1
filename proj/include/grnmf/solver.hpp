#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "grnmf/divergence.hpp"
#include "grnmf/model.hpp"
#include "grnmf/updates.hpp"

namespace grnmf {

/// Dimension plugged into the Gamma ratio of the penalty rule of thumb.
enum class LambdaDimRule {
    EndmemberK, ///< n = K, the endmember count (default)
    BandL,  ///< n = L, the length of an outlier column
};

/// C(n) = (2/sqrt(pi)) Gamma(n/2 + 1) / Gamma(n/2 + 1/2).
double lambda_constant(double n);

/// lambda0 = C(n) / mean(Y). Throws DomainError if mean(Y) == 0.
double estimate_lambda0(const Matrix& Y, Index K, LambdaDimRule rule = LambdaDimRule::EndmemberK);

/// C(n) / (mean(Y) - rho); requires 0 <= rho < mean(Y).
double estimate_lambda(const Matrix& Y, Index K, double rho, LambdaDimRule rule = LambdaDimRule::EndmemberK);

struct InitSpec {
    enum class Kind { RandomUniform, DirichletAbundances, FromMatrices };

    Kind kind = Kind::RandomUniform;
    double dirichlet_alpha = 1.0;
    /// Initial outliers are the constant outlier_scale * mean(Y) unless R0 is
    /// given (R0 applies to every kind).
    double outlier_scale = 1e-2;
    std::optional<Matrix> M0;
    std::optional<Matrix> A0;
    std::optional<Matrix> R0;

    static InitSpec random_uniform() { return {}; }
    static InitSpec dirichlet(double alpha) {
        InitSpec s;
        s.kind = Kind::DirichletAbundances;
        s.dirichlet_alpha = alpha;
        return s;
    }
    static InitSpec from_matrices(Matrix M, std::optional<Matrix> A = std::nullopt,
                                  std::optional<Matrix> R = std::nullopt) {
        InitSpec s;
        s.kind = Kind::FromMatrices;
        s.M0 = std::move(M);
        s.A0 = std::move(A);
        s.R0 = std::move(R);
        return s;
    }
};

struct SolverConfig {
    Beta beta{2.0};
    std::optional<double> lambda; ///< empty means automatic (lambda0)
    double tol = 1e-5;
    std::size_t max_iter = 1000;
    ExponentPolicy policy = ExponentPolicy::TableOne;
    PenaltyNorm penalty_norm = PenaltyNorm::L2;
    LambdaDimRule lambda_rule = LambdaDimRule::EndmemberK;
    double rho = 0.0;
    std::uint64_t seed = 0;
    InitSpec init;
    /// Re-seed identically zero outlier columns with 1e-8 every 50 iterations.
    bool r_reseed = false;
    int threads = 1;

    void check() const;
};

enum class StopReason { Converged, MaxIter };

const char* to_string(StopReason reason) noexcept;

struct SolveReport {
    UnmixingState state;
    double initial_objective = 0.0;
    std::vector<double> objective_trace; ///< one entry per outer iteration
    std::size_t iterations = 0;
    StopReason stop = StopReason::MaxIter;
    double final_relative_decrease = 0.0;
    double wall_seconds = 0.0;
    double lambda = 0.0;
};

enum class Block { R, A, M };

/// Called after every block update with the refreshed state.
using UpdateObserver = std::function<void(const UnmixingState&, Block, std::size_t iteration)>;

inline constexpr double kReseedValue = 1e-8;
inline constexpr std::size_t kReseedPeriod = 50;

/// Builds a starting state. Deterministic given the seed.
UnmixingState initialize(const Matrix& Y, Index K, const InitSpec& spec, std::uint64_t seed, int threads = 1);

/// Block-coordinate descent: R, then A, then M per outer iteration, with the
/// relative decrease of the penalized objective as stopping rule.
SolveReport solve(const Matrix& Y, Index K, const SolverConfig& config, const UpdateObserver& observer = {});

} // namespace grnmf
