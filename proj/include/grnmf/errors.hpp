#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace grnmf {

/// A value fell outside the domain of a divergence, update or metric.
class DomainError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionMismatch : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed matrix file, spectra library or configuration text.
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid run configuration (empty sweep axis, bad flag combination, ...).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The objective became non-finite during an iterative solve.
class NumericalFailure : public std::runtime_error {
public:
    NumericalFailure(const std::string& what, std::size_t iteration)
        : std::runtime_error(what + " (iteration " + std::to_string(iteration) + ")"),
          iteration_(iteration) {}

    std::size_t iteration() const noexcept { return iteration_; }

private:
    std::size_t iteration_;
};

} // namespace grnmf
