#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "grnmf/model.hpp"

namespace grnmf {

/// On-disk matrix formats.
///
/// Binary: 32-byte little-endian header
///   bytes  0..7   magic "GRNMF1\0\0"
///   bytes  8..15  rows (uint64)
///   bytes 16..23  cols (uint64)
///   bytes 24..27  dtype tag (uint32, 1 = IEEE-754 float64)
///   bytes 28..31  reserved, zero
/// followed by rows*cols float64 values in row-major order.
///
/// CSV: a "# rows cols" header line, then one comma-separated line per row
/// using shortest round-trip formatting.
enum class MatrixFormat { Binary, Csv };

inline constexpr std::string_view kMatrixMagic{"GRNMF1\0\0", 8};
inline constexpr std::uint32_t kDtypeFloat64 = 1;

/// Csv for a ".csv" extension, Binary otherwise.
MatrixFormat format_for_path(const std::string& path);

/// File extension (with dot) for a format.
const char* extension(MatrixFormat format) noexcept;

void write_matrix(const std::string& path, const Matrix& X, MatrixFormat format);
inline void write_matrix(const std::string& path, const Matrix& X) { write_matrix(path, X, format_for_path(path)); }

/// Reads either format (detected from the magic bytes). Throws ParseError on
/// malformed, empty or non-finite input.
Matrix read_matrix(const std::string& path);

Matrix parse_csv_matrix(std::string_view text);
std::string to_csv(const Matrix& X);

/// Shortest decimal representation that reads back to the same double.
std::string format_double(double v);

} // namespace grnmf
