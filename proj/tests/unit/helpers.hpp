#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>

#include "grnmf/rng.hpp"
#include "grnmf/solver.hpp"
#include "grnmf/synth.hpp"

namespace grnmf::test {

inline Matrix random_positive(Index rows, Index cols, Rng& rng, double lo = 0.1, double hi = 1.0) {
    Matrix X(rows, cols);
    for (Index i = 0; i < X.size(); ++i) X.data()[i] = lo + (hi - lo) * uniform_open01(rng);
    return X;
}

inline Matrix random_simplex_columns(Index K, Index P, Rng& rng) {
    Matrix A(K, P);
    for (Index p = 0; p < P; ++p) A.col(p) = sample_simplex(K, false, 1.0, rng);
    return A;
}

/// Strictly positive random problem: data Y and a state (M, A, R).
struct Instance {
    Matrix Y;
    UnmixingState state;
};

inline Instance random_instance(Index L, Index K, Index P, Rng& rng) {
    Instance in;
    in.Y = random_positive(L, P, rng, 0.05, 1.5);
    in.state = UnmixingState(random_positive(L, K, rng, 0.1, 1.0), random_simplex_columns(K, P, rng),
                             random_positive(L, P, rng, 0.01, 0.3));
    return in;
}

/// Fresh empty directory under the system temp path.
inline std::filesystem::path temp_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("grnmf_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

} // namespace grnmf::test
