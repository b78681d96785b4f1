#include "grnmf/solver.hpp"

#include <chrono>
#include <cmath>
#include <numbers>

#include "grnmf/rng.hpp"
#include "grnmf/synth.hpp"

namespace grnmf {

double lambda_constant(double n) {
    if (!(n > 0.0)) throw DomainError("lambda_constant: n must be positive");
    const double a = n / 2.0 + 1.0;
    const double b = n / 2.0 + 0.5;
    const double ratio = n < 300.0 ? std::tgamma(a) / std::tgamma(b) : std::exp(std::lgamma(a) - std::lgamma(b));
    return 2.0 / std::sqrt(std::numbers::pi) * ratio;
}

double estimate_lambda(const Matrix& Y, Index K, double rho, LambdaDimRule rule) {
    if (K < 1) throw DomainError("estimate_lambda: K must be >= 1");
    if (Y.size() == 0) throw DimensionMismatch("estimate_lambda: empty data");
    const double mu = Y.mean();
    if (!(mu > 0.0)) throw DomainError("estimate_lambda: mean of Y is zero");
    if (!(rho >= 0.0) || !(rho < mu)) throw DomainError("estimate_lambda: rho must satisfy 0 <= rho < mean(Y)");
    const double n = rule == LambdaDimRule::EndmemberK ? static_cast<double>(K) : static_cast<double>(Y.rows());
    return lambda_constant(n) / (mu - rho);
}

double estimate_lambda0(const Matrix& Y, Index K, LambdaDimRule rule) { return estimate_lambda(Y, K, 0.0, rule); }

void SolverConfig::check() const {
    if (!(tol > 0.0)) throw ConfigError("tol must be > 0");
    if (max_iter < 1) throw ConfigError("max_iter must be >= 1");
    if (lambda && (!(*lambda >= 0.0) || !std::isfinite(*lambda))) throw ConfigError("lambda must be finite and >= 0");
    if (threads < 1) throw ConfigError("threads must be >= 1");
}

const char* to_string(StopReason reason) noexcept {
    return reason == StopReason::Converged ? "Converged" : "MaxIter";
}

UnmixingState initialize(const Matrix& Y, Index K, const InitSpec& spec, std::uint64_t seed, int threads) {
    require_data(Y);
    if (K < 1) throw DomainError("initialize: K must be >= 1");
    const Index L = Y.rows();
    const Index P = Y.cols();
    const double mean = Y.mean();
    const double ymax = Y.maxCoeff();
    if (!(ymax > 0.0)) throw DomainError("initialize: data has no positive entry");

    Rng rng(substream_seed(seed, 0x1417));
    Matrix M(L, K), A(K, P);
    std::optional<Matrix> R = spec.R0;
    if (R && (R->rows() != L || R->cols() != P))
        throw DimensionMismatch("initial R must be " + std::to_string(L) + "x" + std::to_string(P));

    switch (spec.kind) {
    case InitSpec::Kind::RandomUniform:
    case InitSpec::Kind::DirichletAbundances:
        for (Index k = 0; k < K; ++k)
            for (Index l = 0; l < L; ++l) M(l, k) = ymax * uniform_open01(rng);
        if (spec.kind == InitSpec::Kind::RandomUniform) {
            for (Index p = 0; p < P; ++p) A.col(p) = sample_simplex(K, false, 1.0, rng);
        } else {
            if (!(spec.dirichlet_alpha > 0.0)) throw ConfigError("dirichlet alpha must be > 0");
            std::gamma_distribution<double> g(spec.dirichlet_alpha, 1.0);
            for (Index p = 0; p < P; ++p) {
                double s = 0.0;
                while (!(s > 0.0)) {
                    s = 0.0;
                    for (Index k = 0; k < K; ++k) s += (A(k, p) = g(rng));
                }
                A.col(p) /= s;
            }
        }
        break;
    case InitSpec::Kind::FromMatrices:
        if (!spec.M0) throw ConfigError("FromMatrices initialization needs M0");
        M = *spec.M0;
        if (M.rows() != L || M.cols() != K)
            throw DimensionMismatch("initial M must be " + std::to_string(L) + "x" + std::to_string(K));
        if (spec.A0) {
            A = *spec.A0;
        } else {
            A.setConstant(1.0 / static_cast<double>(K));
        }
        break;
    }
    if (!R) R = Matrix::Constant(L, P, spec.outlier_scale * mean);
    return UnmixingState(std::move(M), std::move(A), std::move(*R), threads);
}

SolveReport solve(const Matrix& Y, Index K, const SolverConfig& config, const UpdateObserver& observer) {
    config.check();
    require_data(Y);
    const auto start = std::chrono::steady_clock::now();

    SolveReport report;
    report.lambda = config.lambda ? *config.lambda
                                  : estimate_lambda(Y, K, config.rho, config.lambda_rule);
    report.state = initialize(Y, K, config.init, config.seed, config.threads);
    UnmixingState& state = report.state;
    if (state.bands() != Y.rows() || state.pixels() != Y.cols())
        throw DimensionMismatch("initial state does not match the data shape");

    const Beta beta = config.beta;
    double previous;
    try {
        previous = objective(Y, state, beta, report.lambda);
    } catch (const DomainError& e) {
        throw NumericalFailure(e.what(), 0);
    }
    report.initial_objective = previous;
    report.objective_trace.reserve(config.max_iter);

    for (std::size_t it = 1; it <= config.max_iter; ++it) {
        if (config.r_reseed && it % kReseedPeriod == 0) {
            Matrix R = state.R();
            bool touched = false;
            for (Index p = 0; p < R.cols(); ++p)
                if (R.col(p).isZero(0.0)) {
                    R.col(p).setConstant(kReseedValue);
                    touched = true;
                }
            if (touched) state.set_R(std::move(R));
        }

        state.set_R(update_R(Y, state, beta, report.lambda, config.policy, config.penalty_norm));
        if (observer) observer(state, Block::R, it);
        state.set_A(update_A(Y, state, beta));
        if (observer) observer(state, Block::A, it);
        state.set_M(update_M(Y, state, beta, config.policy));
        if (observer) observer(state, Block::M, it);

        double current;
        try {
            current = objective(Y, state, beta, report.lambda);
        } catch (const DomainError& e) {
            throw NumericalFailure(e.what(), it);
        }
        if (!std::isfinite(current)) throw NumericalFailure("objective is not finite", it);

        report.objective_trace.push_back(current);
        report.iterations = it;
        const double rel = previous == 0.0 ? 0.0 : std::abs(previous - current) / previous;
        report.final_relative_decrease = rel;
        if (rel < config.tol) {
            report.stop = StopReason::Converged;
            break;
        }
        previous = current;
    }

    report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

} // namespace grnmf
