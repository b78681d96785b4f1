#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "grnmf/model.hpp"
#include "grnmf/rng.hpp"

namespace grnmf {

enum class MixingModel { LMM, NM, FM, GBM };

const char* to_string(MixingModel model) noexcept;
/// Case-insensitive "lmm", "nm", "fm", "gbm". Throws ParseError.
MixingModel parse_mixing_model(std::string_view name);

/// How pure pixels are excluded when pure_pixels is false.
enum class Truncation {
    SumCap,   ///< a >= 0, sum(a) <= cap
    EntryCap, ///< a on the simplex with every a_k <= cap
};

struct SceneSpec {
    MixingModel model = MixingModel::LMM;
    Index L = 100;
    Index K = 3;
    Index P = 64 * 64;
    double snr_db = 30.0;
    bool add_noise = true;
    /// false draws abundances on the truncated set {a >= 0, sum(a) <= cap}
    bool pure_pixels = true;
    double cap = 0.9;
    Truncation truncation = Truncation::SumCap;
    /// Fraction of pixels generated by the nonlinear model (ignored for LMM).
    double nonlinear_fraction = 0.25;
    /// NM only: one coefficient per first index i instead of one per pair.
    bool nm_shared_b = false;
    /// GBM interaction coefficients are drawn uniformly on (0, gbm_gamma_max).
    double gbm_gamma_max = 1.0;
    std::uint64_t seed = 0;

    void check() const;
};

struct GroundTruth {
    Matrix M_true;
    Matrix A_true;
    std::vector<bool> nonlinear_mask;
    Matrix B_true;     ///< NM interaction coefficients (coefficients x P), empty otherwise
    Matrix Gamma_true; ///< GBM gamma_ijp (pairs x P), empty otherwise
    Matrix signal;     ///< noise-free data
    double noise_sigma = 0.0;
    double empirical_snr_db = 0.0;
    double clamped_fraction = 0.0;
};

struct Scene {
    Matrix Y;
    GroundTruth truth;
};

/// Number of unordered endmember pairs, K(K-1)/2.
inline Index pair_count(Index K) noexcept { return K * (K - 1) / 2; }

/// Uniform draw on the unit simplex (sorted uniform gaps), or on
/// {a >= 0, sum(a) <= cap} when truncated.
Vector sample_simplex(Index K, bool truncated, double cap, Rng& rng);
Vector sample_simplex(Index K, bool truncated, double cap, std::uint64_t seed);

/// Uniform draw on {a in the simplex, max_k a_k <= cap} by rejection.
/// Throws DomainError when K * cap <= 1 (the set is empty or a single point).
Vector sample_entry_capped_simplex(Index K, double cap, Rng& rng);

/// Synthetic scene under one of the four mixing models. Each pixel draws
/// from its own RNG substreams, so the output does not depend on threading.
Scene generate(const SceneSpec& spec, const Matrix& M_source);

/// Smooth reflectance-like spectra in (0, 1] for tests and demos when no
/// spectral library is at hand.
Matrix smooth_spectra(Index L, Index K, std::uint64_t seed);

/// Reads an L x K spectra file (binary or CSV matrix format) and checks it.
/// Throws ParseError or DomainError naming the offending entry.
Matrix load_endmember_library(const std::string& path);

} // namespace grnmf
