#include "grnmf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace grnmf {

double spectral_angle(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b) {
    if (a.size() != b.size()) throw DimensionMismatch("spectral_angle: lengths differ");
    const double na = a.norm();
    const double nb = b.norm();
    if (na == 0.0 || nb == 0.0) throw DomainError("spectral_angle: zero vector");
    const double c = std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
    return std::acos(c);
}

double asam(const Matrix& M_true, const Matrix& M_est) {
    if (M_true.rows() != M_est.rows() || M_true.cols() != M_est.cols())
        throw DimensionMismatch("asam: shapes differ");
    if (M_true.cols() == 0) throw DimensionMismatch("asam: no endmembers");
    double total = 0.0;
    for (Index k = 0; k < M_true.cols(); ++k) {
        if (M_true.col(k).norm() == 0.0 || M_est.col(k).norm() == 0.0)
            throw DomainError("asam: zero column " + std::to_string(k));
        total += spectral_angle(M_true.col(k), M_est.col(k));
    }
    return total / static_cast<double>(M_true.cols());
}

double gmse_sq(const Matrix& A_true, const Matrix& A_est) {
    if (A_true.rows() != A_est.rows() || A_true.cols() != A_est.cols())
        throw DimensionMismatch("gmse_sq: shapes differ");
    if (A_true.size() == 0) throw DimensionMismatch("gmse_sq: empty");
    return (A_true - A_est).squaredNorm() / static_cast<double>(A_true.size());
}

std::vector<Index> min_cost_assignment(const Matrix& cost) {
    const Index n = cost.rows();
    if (cost.cols() != n) throw DimensionMismatch("min_cost_assignment: cost must be square");
    // potentials u (rows), v (cols); way[] tracks augmenting paths; 1-based
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<Index> match(n + 1, 0), way(n + 1, 0);
    for (Index i = 1; i <= n; ++i) {
        match[0] = i;
        Index j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const Index i0 = match[j0];
            double delta = inf;
            Index j1 = 0;
            for (Index j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (Index j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[match[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (match[j0] != 0);
        do {
            const Index j1 = way[j0];
            match[j0] = match[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<Index> result(static_cast<std::size_t>(n));
    for (Index j = 1; j <= n; ++j) result[static_cast<std::size_t>(match[j] - 1)] = j - 1;
    return result;
}

Alignment align_endmembers(const Matrix& M_true, const Matrix& M_est, const Matrix& A_est) {
    const Index K = M_true.cols();
    if (M_est.cols() != K || M_est.rows() != M_true.rows()) throw DimensionMismatch("align_endmembers: M shapes differ");
    if (A_est.rows() != K) throw DimensionMismatch("align_endmembers: A must have K rows");
    Matrix angles(K, K);
    for (Index i = 0; i < K; ++i)
        for (Index j = 0; j < K; ++j) angles(i, j) = spectral_angle(M_true.col(i), M_est.col(j));

    Alignment out;
    out.permutation = min_cost_assignment(angles);
    out.M.resize(M_est.rows(), K);
    out.A.resize(K, A_est.cols());
    for (Index k = 0; k < K; ++k) {
        const Index src = out.permutation[static_cast<std::size_t>(k)];
        out.M.col(k) = M_est.col(src);
        out.A.row(k) = A_est.row(src);
        out.total_angle += angles(k, src);
    }
    return out;
}

DetectionScores outlier_detection_scores(const Vector& energy, const std::vector<bool>& mask, double threshold) {
    if (static_cast<std::size_t>(energy.size()) != mask.size())
        throw DimensionMismatch("outlier_detection_scores: energy and mask lengths differ");
    std::size_t tp = 0, fp = 0, fn = 0;
    for (Index p = 0; p < energy.size(); ++p) {
        const bool flagged = energy(p) > threshold;
        const bool truth = mask[static_cast<std::size_t>(p)];
        if (flagged && truth) ++tp;
        else if (flagged) ++fp;
        else if (truth) ++fn;
    }
    DetectionScores s;
    s.threshold = threshold;
    s.detected = tp + fp;
    s.precision = tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    s.recall = tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    s.f1 = s.precision + s.recall > 0.0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
    return s;
}

double otsu_threshold(const Vector& values, int bins) {
    if (values.size() == 0) throw DimensionMismatch("otsu_threshold: no values");
    if (bins < 2) throw DomainError("otsu_threshold: need at least two bins");
    const double lo = values.minCoeff();
    const double hi = values.maxCoeff();
    if (!(hi > lo)) return hi;
    const double width = (hi - lo) / bins;
    std::vector<double> hist(static_cast<std::size_t>(bins), 0.0);
    for (Index i = 0; i < values.size(); ++i) {
        auto b = static_cast<int>((values(i) - lo) / width);
        hist[static_cast<std::size_t>(std::clamp(b, 0, bins - 1))] += 1.0;
    }
    const double total = static_cast<double>(values.size());
    double sum_all = 0.0;
    for (int b = 0; b < bins; ++b) sum_all += b * hist[static_cast<std::size_t>(b)];

    double w0 = 0.0, sum0 = 0.0, best = -1.0;
    int best_bin = 0;
    for (int b = 0; b < bins - 1; ++b) {
        w0 += hist[static_cast<std::size_t>(b)];
        sum0 += b * hist[static_cast<std::size_t>(b)];
        const double w1 = total - w0;
        if (w0 == 0.0 || w1 == 0.0) continue;
        const double mu0 = sum0 / w0;
        const double mu1 = (sum_all - sum0) / w1;
        const double between = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
        if (between > best) {
            best = between;
            best_bin = b;
        }
    }
    return lo + width * (best_bin + 1);
}

Index active_columns(const Matrix& R, double threshold) {
    Index n = 0;
    for (Index p = 0; p < R.cols(); ++p)
        if (R.col(p).norm() > threshold) ++n;
    return n;
}

} // namespace grnmf
