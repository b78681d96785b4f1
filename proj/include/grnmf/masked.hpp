#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "grnmf/solver.hpp"

namespace grnmf {

/// Observed entries of an L x P data matrix, stored as 0/1 weights.
class ObservationMask {
public:
    explicit ObservationMask(Matrix weights);

    static ObservationMask full(Index L, Index P);
    /// Exactly round(fraction * L * P) entries, chosen uniformly without
    /// replacement, are observed.
    static ObservationMask random(Index L, Index P, double fraction, std::uint64_t seed);

    const Matrix& weights() const noexcept { return weights_; }
    bool observed(Index l, Index p) const { return weights_(l, p) != 0.0; }
    Index observed_count() const noexcept { return observed_; }
    Index heldout_count() const noexcept { return weights_.size() - observed_; }
    double fraction_observed() const noexcept {
        return static_cast<double>(observed_) / static_cast<double>(weights_.size());
    }

private:
    Matrix weights_;
    Index observed_ = 0;
};

struct MaskedConfig {
    Beta beta{1.0};
    double tol = 1e-5;
    std::size_t max_iter = 1000;
    ExponentPolicy policy = ExponentPolicy::TableOne;
    std::uint64_t seed = 0;
    InitSpec init;
    /// Keep abundance columns on the simplex (heuristic update) instead of
    /// the plain multiplicative update.
    bool simplex = false;
    int threads = 1;
};

struct MaskedResult {
    Matrix M;
    Matrix A;
    double initial_objective = 0.0;
    std::vector<double> objective_trace;
    std::size_t iterations = 0;
    StopReason stop = StopReason::MaxIter;
    double wall_seconds = 0.0;
};

/// Low-rank fit Y ~ M A on the observed entries only (no outlier term).
/// Unobserved values of Y are never read.
MaskedResult masked_solve(const Matrix& Y, const ObservationMask& mask, Index K, const MaskedConfig& config);

/// Replaces the unobserved entries of Y_full by [M A] and returns the mean
/// spectral angle between original and reconstructed columns, over the
/// columns that contain at least one unobserved entry.
double reconstruct_and_score(const Matrix& Y_full, const ObservationMask& mask, const Matrix& M, const Matrix& A);

/// Interpolation-based selection of beta: one masked fit per
/// (fraction, beta, restart) cell.
struct SweepSpec {
    std::vector<double> betas;
    std::vector<double> observe_fractions;
    int restarts = 10;
    std::uint64_t seed = 0;
    MaskedConfig base;
    unsigned jobs = 1;
};

struct SweepCell {
    double beta = 0.0;
    int restart = 0;
    double fraction_observed = 0.0;
    double heldout_asam = 0.0;
    std::size_t iterations = 0;
    bool monotone = true;
    std::string error; ///< empty on success
};

/// Default grid -1, -0.5, ..., 3.
std::vector<double> default_beta_grid();

std::vector<SweepCell> beta_sweep(const Matrix& Y, Index K, const SweepSpec& spec);

struct BetaSummary {
    double beta = 0.0;
    double fraction_observed = 0.0;
    double mean_asam = 0.0;
    double std_asam = 0.0;
    int runs = 0;
};

/// Mean and standard deviation of the heldout score per (fraction, beta),
/// skipping failed cells.
std::vector<BetaSummary> summarize_sweep(const std::vector<SweepCell>& cells);

} // namespace grnmf
