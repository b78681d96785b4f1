#include "grnmf/masked.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "grnmf/metrics.hpp"
#include "grnmf/parallel.hpp"
#include "grnmf/rng.hpp"
#include "grnmf/updates.hpp"

namespace grnmf {

ObservationMask::ObservationMask(Matrix weights) : weights_(std::move(weights)) {
    for (Index i = 0; i < weights_.size(); ++i) {
        const double w = weights_.data()[i];
        if (w != 0.0 && w != 1.0) throw DomainError("observation mask entries must be 0 or 1");
        if (w == 1.0) ++observed_;
    }
    if (observed_ == 0) throw DomainError("observation mask has no observed entry");
}

ObservationMask ObservationMask::full(Index L, Index P) { return ObservationMask(Matrix::Ones(L, P)); }

ObservationMask ObservationMask::random(Index L, Index P, double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction <= 1.0)) throw DomainError("observed fraction must lie in (0, 1]");
    const Index n = L * P;
    const auto keep = std::max<Index>(1, static_cast<Index>(std::llround(fraction * static_cast<double>(n))));
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    Rng rng(substream_seed(seed, 0x3a5c));
    std::shuffle(order.begin(), order.end(), rng);
    Matrix w = Matrix::Zero(L, P);
    for (Index i = 0; i < keep; ++i) w.data()[order[static_cast<std::size_t>(i)]] = 1.0;
    return ObservationMask(std::move(w));
}

MaskedResult masked_solve(const Matrix& Y, const ObservationMask& mask, Index K, const MaskedConfig& config) {
    const Matrix& W = mask.weights();
    if (W.rows() != Y.rows() || W.cols() != Y.cols()) throw DimensionMismatch("mask shape differs from Y");
    if (!(config.tol > 0.0)) throw ConfigError("tol must be > 0");
    if (config.max_iter < 1) throw ConfigError("max_iter must be >= 1");
    const auto start = std::chrono::steady_clock::now();

    // Heldout values are zeroed once; nothing below reads Y again.
    Matrix Yobs(Y.rows(), Y.cols());
    for (Index p = 0; p < Y.cols(); ++p)
        for (Index l = 0; l < Y.rows(); ++l) Yobs(l, p) = W(l, p) != 0.0 ? Y(l, p) : 0.0;
    require_data(Yobs);

    InitSpec init = config.init;
    init.R0 = Matrix::Zero(Y.rows(), Y.cols());
    UnmixingState state = initialize(Yobs, K, init, config.seed, config.threads);

    const Beta beta = config.beta;
    MaskedResult out;
    double previous = data_term(Yobs, state.Yhat(), beta, &W);
    out.initial_objective = previous;

    for (std::size_t it = 1; it <= config.max_iter; ++it) {
        if (config.simplex) {
            state.set_A(update_A(Yobs, state, beta, &W));
        } else {
            state.unchecked_A() = update_A_free(Yobs, state, beta, config.policy, &W);
            state.refresh();
        }
        state.set_M(update_M(Yobs, state, beta, config.policy, &W));

        double current;
        try {
            current = data_term(Yobs, state.Yhat(), beta, &W);
        } catch (const DomainError& e) {
            throw NumericalFailure(e.what(), it);
        }
        out.objective_trace.push_back(current);
        out.iterations = it;
        const double rel = previous == 0.0 ? 0.0 : std::abs(previous - current) / previous;
        if (rel < config.tol) {
            out.stop = StopReason::Converged;
            break;
        }
        previous = current;
    }
    out.M = state.M();
    out.A = state.A();
    out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
}

double reconstruct_and_score(const Matrix& Y_full, const ObservationMask& mask, const Matrix& M, const Matrix& A) {
    const Matrix& W = mask.weights();
    if (W.rows() != Y_full.rows() || W.cols() != Y_full.cols()) throw DimensionMismatch("mask shape differs from Y");
    if (M.rows() != Y_full.rows() || A.cols() != Y_full.cols() || M.cols() != A.rows())
        throw DimensionMismatch("reconstruct_and_score: M A does not match Y");
    double total = 0.0;
    Index columns = 0;
    for (Index p = 0; p < Y_full.cols(); ++p) {
        if ((W.col(p).array() != 0.0).all()) continue;
        Vector rec = Y_full.col(p);
        const Vector model = M * A.col(p);
        for (Index l = 0; l < Y_full.rows(); ++l)
            if (W(l, p) == 0.0) rec(l) = model(l);
        total += spectral_angle(Y_full.col(p), rec);
        ++columns;
    }
    if (columns == 0) throw DomainError("reconstruct_and_score: no heldout entries");
    return total / static_cast<double>(columns);
}

std::vector<double> default_beta_grid() {
    std::vector<double> grid;
    for (int i = -2; i <= 6; ++i) grid.push_back(0.5 * i);
    return grid;
}

std::vector<SweepCell> beta_sweep(const Matrix& Y, Index K, const SweepSpec& spec) {
    if (spec.betas.empty()) throw ConfigError("beta grid is empty");
    if (spec.observe_fractions.empty()) throw ConfigError("observe-fraction list is empty");
    if (spec.restarts < 1) throw ConfigError("restarts must be >= 1");
    require_data(Y);
    for (double f : spec.observe_fractions) {
        if (!(f > 0.0 && f <= 1.0)) throw ConfigError("observe fraction must lie in (0, 1]");
        const auto kept = std::llround(f * static_cast<double>(Y.size()));
        if (kept >= Y.size()) throw ConfigError("observe fraction leaves no heldout entry");
    }

    const std::size_t nf = spec.observe_fractions.size();
    const std::size_t nb = spec.betas.size();
    const auto nr = static_cast<std::size_t>(spec.restarts);
    std::vector<SweepCell> cells(nf * nb * nr);

    parallel_for(cells.size(), spec.jobs, [&](std::size_t idx) {
        const std::size_t fi = idx / (nb * nr);
        const std::size_t bi = (idx / nr) % nb;
        const std::size_t r = idx % nr;
        SweepCell& cell = cells[idx];
        cell.beta = spec.betas[bi];
        cell.restart = static_cast<int>(r);
        // the mask and the initialization depend on (fraction, restart) only,
        // so every beta of a restart sees the same problem
        const ObservationMask mask = ObservationMask::random(Y.rows(), Y.cols(), spec.observe_fractions[fi],
                                                             substream_seed(spec.seed, fi, r));
        cell.fraction_observed = mask.fraction_observed();
        MaskedConfig cfg = spec.base;
        cfg.beta = Beta(spec.betas[bi]);
        cfg.seed = substream_seed(spec.seed, 0x5eed, r);
        try {
            const MaskedResult res = masked_solve(Y, mask, K, cfg);
            cell.iterations = res.iterations;
            double prev = res.initial_objective;
            for (double v : res.objective_trace) {
                if (v > prev * (1.0 + 1e-9)) cell.monotone = false;
                prev = v;
            }
            cell.heldout_asam = reconstruct_and_score(Y, mask, res.M, res.A);
        } catch (const std::exception& e) {
            cell.error = e.what();
            cell.heldout_asam = std::numeric_limits<double>::quiet_NaN();
        }
    });
    return cells;
}

std::vector<BetaSummary> summarize_sweep(const std::vector<SweepCell>& cells) {
    std::map<std::pair<double, double>, std::vector<double>> groups;
    std::vector<std::pair<double, double>> order;
    for (const auto& c : cells) {
        const auto key = std::make_pair(c.fraction_observed, c.beta);
        if (!groups.count(key)) order.push_back(key);
        if (c.error.empty()) groups[key].push_back(c.heldout_asam);
        else groups[key];
    }
    std::vector<BetaSummary> out;
    for (const auto& key : order) {
        const auto& v = groups[key];
        BetaSummary s;
        s.fraction_observed = key.first;
        s.beta = key.second;
        s.runs = static_cast<int>(v.size());
        if (!v.empty()) {
            s.mean_asam = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
            double ss = 0.0;
            for (double x : v) ss += (x - s.mean_asam) * (x - s.mean_asam);
            s.std_asam = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
        } else {
            s.mean_asam = std::numeric_limits<double>::quiet_NaN();
        }
        out.push_back(s);
    }
    return out;
}

} // namespace grnmf
