#pragma once

#include <vector>

#include "grnmf/model.hpp"

namespace grnmf {

/// Angle in radians between two nonzero vectors, acos argument clamped to [-1, 1].
double spectral_angle(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b);

/// Average spectral angle between matching columns.
double asam(const Matrix& M_true, const Matrix& M_est);

/// (1/(K P)) sum_p ||a_p - a^_p||^2.
double gmse_sq(const Matrix& A_true, const Matrix& A_est);

/// Optimal assignment on a square cost matrix: result[i] is the column
/// assigned to row i, minimizing the total cost (Hungarian method).
std::vector<Index> min_cost_assignment(const Matrix& cost);

struct Alignment {
    Matrix M;                     ///< estimated endmembers, reordered
    Matrix A;                     ///< estimated abundances, rows reordered
    std::vector<Index> permutation; ///< permutation[k]: estimated index matched to true endmember k
    double total_angle = 0.0;
};

/// Reorders estimated endmembers (and abundance rows) to minimize the total
/// spectral angle to the reference endmembers.
Alignment align_endmembers(const Matrix& M_true, const Matrix& M_est, const Matrix& A_est);

struct DetectionScores {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double threshold = 0.0;
    std::size_t detected = 0;
};

/// Pixel p is flagged when energy(p) > threshold. Precision is 0 when
/// nothing is flagged; recall is 0 when the mask is empty.
DetectionScores outlier_detection_scores(const Vector& energy, const std::vector<bool>& mask, double threshold);

/// Otsu's threshold on a histogram of the values. Returns the upper edge of
/// the last bin of the lower class.
double otsu_threshold(const Vector& values, int bins = 256);

/// Number of columns with Euclidean norm above `threshold`.
Index active_columns(const Matrix& R, double threshold = 0.0);

} // namespace grnmf
