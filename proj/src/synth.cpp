#include "grnmf/synth.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <sstream>

#include "grnmf/matrix_io.hpp"

namespace grnmf {

namespace {

enum Stream : std::uint64_t { kAbundance = 0, kCoefficient = 1, kNoise = 2, kMask = 3 };

// Interaction slots of pixel p: one per pair (i<j), or one per first index.
Index nm_coefficient_count(Index K, bool shared) { return shared ? K - 1 : pair_count(K); }

} // namespace

const char* to_string(MixingModel model) noexcept {
    switch (model) {
    case MixingModel::LMM: return "lmm";
    case MixingModel::NM: return "nm";
    case MixingModel::FM: return "fm";
    case MixingModel::GBM: return "gbm";
    }
    return "?";
}

MixingModel parse_mixing_model(std::string_view name) {
    std::string s(name);
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    if (s == "lmm") return MixingModel::LMM;
    if (s == "nm") return MixingModel::NM;
    if (s == "fm") return MixingModel::FM;
    if (s == "gbm") return MixingModel::GBM;
    throw ParseError("unknown mixing model '" + std::string(name) + "' (expected lmm, nm, fm or gbm)");
}

void SceneSpec::check() const {
    if (L < 1 || K < 1 || P < 1) throw ConfigError("scene dimensions must be positive");
    if (!std::isfinite(snr_db)) throw ConfigError("snr_db must be finite");
    if (!(nonlinear_fraction >= 0.0 && nonlinear_fraction <= 1.0))
        throw ConfigError("nonlinear_fraction must lie in [0, 1]");
    if (!(cap > 0.0 && cap <= 1.0)) throw ConfigError("truncation cap must lie in (0, 1]");
    if (!(gbm_gamma_max >= 0.0 && gbm_gamma_max <= 1.0)) throw ConfigError("gbm_gamma_max must lie in [0, 1]");
}

Vector sample_simplex(Index K, bool truncated, double cap, Rng& rng) {
    if (K < 1) throw DomainError("sample_simplex: K must be >= 1");
    // Gaps between sorted uniforms are uniform on the simplex. With one
    // extra slack coordinate dropped, the first K gaps are uniform on the
    // corner {a >= 0, sum(a) <= 1}, which is then scaled by the cap.
    const Index n = truncated ? K + 1 : K;
    std::vector<double> cuts(static_cast<std::size_t>(n - 1));
    for (auto& c : cuts) c = uniform_open01(rng);
    std::sort(cuts.begin(), cuts.end());
    Vector gaps(n);
    double prev = 0.0;
    for (Index i = 0; i + 1 < n; ++i) {
        gaps(i) = cuts[static_cast<std::size_t>(i)] - prev;
        prev = cuts[static_cast<std::size_t>(i)];
    }
    gaps(n - 1) = 1.0 - prev;
    if (!truncated) return gaps;
    return cap * gaps.head(K);
}

Vector sample_simplex(Index K, bool truncated, double cap, std::uint64_t seed) {
    Rng rng(seed);
    return sample_simplex(K, truncated, cap, rng);
}

Vector sample_entry_capped_simplex(Index K, double cap, Rng& rng) {
    if (!(static_cast<double>(K) * cap > 1.0))
        throw DomainError("sample_entry_capped_simplex: K * cap must exceed 1");
    for (;;) {
        Vector a = sample_simplex(K, false, 1.0, rng);
        if (a.maxCoeff() <= cap) return a;
    }
}

Scene generate(const SceneSpec& spec, const Matrix& M_source) {
    spec.check();
    if (M_source.rows() != spec.L || M_source.cols() != spec.K)
        throw DimensionMismatch("endmember source is " + std::to_string(M_source.rows()) + "x" +
                                std::to_string(M_source.cols()) + ", scene expects " + std::to_string(spec.L) + "x" +
                                std::to_string(spec.K));
    require_endmembers(M_source);

    const Index L = spec.L, K = spec.K, P = spec.P;
    const bool truncated = !spec.pure_pixels;
    const bool nonlinear_model = spec.model != MixingModel::LMM;
    auto draw = [&](Index n, Rng& rng) {
        if (truncated && spec.truncation == Truncation::EntryCap) return sample_entry_capped_simplex(n, spec.cap, rng);
        return sample_simplex(n, truncated, spec.cap, rng);
    };

    Scene scene;
    GroundTruth& gt = scene.truth;
    gt.M_true = M_source;
    gt.A_true.resize(K, P);
    gt.nonlinear_mask.assign(static_cast<std::size_t>(P), false);

    if (nonlinear_model) {
        const auto count = static_cast<Index>(std::llround(spec.nonlinear_fraction * static_cast<double>(P)));
        std::vector<Index> order(static_cast<std::size_t>(P));
        std::iota(order.begin(), order.end(), Index{0});
        Rng mask_rng(substream_seed(spec.seed, ~0ULL, kMask));
        std::shuffle(order.begin(), order.end(), mask_rng);
        for (Index i = 0; i < count; ++i) gt.nonlinear_mask[static_cast<std::size_t>(order[i])] = true;
    }

    const Index nm_slots = nm_coefficient_count(K, spec.nm_shared_b);
    if (spec.model == MixingModel::NM) gt.B_true = Matrix::Zero(nm_slots, P);
    if (spec.model == MixingModel::GBM) gt.Gamma_true = Matrix::Zero(pair_count(K), P);

    for (Index p = 0; p < P; ++p) {
        const bool nl = gt.nonlinear_mask[static_cast<std::size_t>(p)];
        Rng rng(substream_seed(spec.seed, static_cast<std::uint64_t>(p), kAbundance));
        if (nl && spec.model == MixingModel::NM) {
            // [a; b] lives on the simplex of dimension K + (number of slots)
            const Vector ab = draw(K + nm_slots, rng);
            gt.A_true.col(p) = ab.head(K);
            gt.B_true.col(p) = ab.tail(nm_slots);
        } else {
            gt.A_true.col(p) = draw(K, rng);
        }
        if (nl && spec.model == MixingModel::GBM) {
            Rng crng(substream_seed(spec.seed, static_cast<std::uint64_t>(p), kCoefficient));
            for (Index q = 0; q < pair_count(K); ++q) gt.Gamma_true(q, p) = spec.gbm_gamma_max * uniform_open01(crng);
        }
    }

    gt.signal = mix(M_source, gt.A_true);
    for (Index p = 0; p < P; ++p) {
        if (!gt.nonlinear_mask[static_cast<std::size_t>(p)]) continue;
        auto x = gt.signal.col(p);
        Index q = 0;
        for (Index i = 0; i + 1 < K; ++i)
            for (Index j = i + 1; j < K; ++j, ++q) {
                double c = 0.0;
                switch (spec.model) {
                case MixingModel::NM: c = gt.B_true(spec.nm_shared_b ? i : q, p); break;
                case MixingModel::FM: c = gt.A_true(i, p) * gt.A_true(j, p); break;
                case MixingModel::GBM: c = gt.Gamma_true(q, p) * gt.A_true(i, p) * gt.A_true(j, p); break;
                case MixingModel::LMM: break;
                }
                x += c * M_source.col(i).cwiseProduct(M_source.col(j));
            }
    }

    scene.Y = gt.signal;
    if (spec.add_noise) {
        const double power = gt.signal.squaredNorm() / static_cast<double>(gt.signal.size());
        gt.noise_sigma = std::sqrt(power / std::pow(10.0, spec.snr_db / 10.0));
        Index clamped = 0;
        for (Index p = 0; p < P; ++p) {
            Rng rng(substream_seed(spec.seed, static_cast<std::uint64_t>(p), kNoise));
            std::normal_distribution<double> noise(0.0, gt.noise_sigma);
            for (Index l = 0; l < L; ++l) {
                const double v = gt.signal(l, p) + noise(rng);
                if (v < 0.0) ++clamped;
                scene.Y(l, p) = v < 0.0 ? 0.0 : v;
            }
        }
        gt.clamped_fraction = static_cast<double>(clamped) / static_cast<double>(scene.Y.size());
        const double noise_energy = (scene.Y - gt.signal).squaredNorm();
        gt.empirical_snr_db = 10.0 * std::log10(gt.signal.squaredNorm() / noise_energy);
    } else {
        gt.empirical_snr_db = std::numeric_limits<double>::infinity();
    }
    return scene;
}

Matrix smooth_spectra(Index L, Index K, std::uint64_t seed) {
    if (L < 1 || K < 1) throw DomainError("smooth_spectra: dimensions must be positive");
    Matrix M(L, K);
    for (Index k = 0; k < K; ++k) {
        Rng rng(substream_seed(seed, static_cast<std::uint64_t>(k), 7));
        auto u = [&](double lo, double hi) { return lo + (hi - lo) * uniform_open01(rng); };
        const double base = u(0.05, 0.2);
        const double slope = u(-0.15, 0.3);
        const int bumps = 2 + static_cast<int>(rng() % 3);
        std::vector<std::array<double, 3>> shape;
        for (int b = 0; b < bumps; ++b) shape.push_back({u(0.0, 1.0), u(0.04, 0.25), u(-0.1, 0.7)});
        for (Index l = 0; l < L; ++l) {
            const double t = L == 1 ? 0.5 : static_cast<double>(l) / static_cast<double>(L - 1);
            double v = base + slope * t;
            for (const auto& [c, w, h] : shape) v += h * std::exp(-0.5 * (t - c) * (t - c) / (w * w));
            M(l, k) = std::max(v, 0.02);
        }
        M.col(k) *= u(0.55, 0.95) / M.col(k).maxCoeff();
    }
    return M;
}

Matrix load_endmember_library(const std::string& path) {
    Matrix M = read_matrix(path);
    for (Index k = 0; k < M.cols(); ++k)
        for (Index l = 0; l < M.rows(); ++l)
            if (M(l, k) < 0.0) {
                std::ostringstream os;
                os << path << ": Negativity at row " << l << ", col " << k << " (value " << M(l, k) << ")";
                throw DomainError(os.str());
            }
    require_endmembers(M);
    return M;
}

} // namespace grnmf
