#include "grnmf/matrix_io.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>
#include <vector>

namespace grnmf {

namespace {

constexpr std::size_t kHeaderBytes = 32;

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

std::uint64_t get_u64(const std::string& in, std::size_t at) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
    return v;
}

std::uint32_t get_u32(const std::string& in, std::size_t at) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
    return v;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open " + path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Matrix parse_binary(const std::string& bytes, const std::string& path) {
    if (bytes.size() < kHeaderBytes) throw ParseError(path + ": truncated header");
    const std::uint64_t rows = get_u64(bytes, 8);
    const std::uint64_t cols = get_u64(bytes, 16);
    const std::uint32_t dtype = get_u32(bytes, 24);
    if (dtype != kDtypeFloat64) throw ParseError(path + ": unsupported dtype tag " + std::to_string(dtype));
    if (rows == 0 || cols == 0) throw ParseError(path + ": empty matrix");
    if (rows > (1ULL << 32) || cols > (1ULL << 32)) throw ParseError(path + ": implausible dimensions");
    const std::uint64_t expected = kHeaderBytes + rows * cols * 8;
    if (bytes.size() != expected)
        throw ParseError(path + ": declared " + std::to_string(rows) + "x" + std::to_string(cols) + " needs " +
                         std::to_string(expected) + " bytes, file has " + std::to_string(bytes.size()));
    Matrix X(static_cast<Index>(rows), static_cast<Index>(cols));
    std::size_t at = kHeaderBytes;
    for (Index i = 0; i < X.rows(); ++i)
        for (Index j = 0; j < X.cols(); ++j, at += 8) {
            const double v = std::bit_cast<double>(get_u64(bytes, at));
            if (!std::isfinite(v))
                throw ParseError(path + ": non-finite value at (" + std::to_string(i) + "," + std::to_string(j) + ")");
            X(i, j) = v;
        }
    return X;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

double parse_number(std::string_view field, std::size_t line) {
    field = trim(field);
    if (!field.empty() && field.front() == '+') field.remove_prefix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (field.empty() || ec != std::errc() || ptr != field.data() + field.size())
        throw ParseError("line " + std::to_string(line) + ": cannot parse number '" + std::string(field) + "'");
    if (!std::isfinite(v)) throw ParseError("line " + std::to_string(line) + ": non-finite value");
    return v;
}

} // namespace

MatrixFormat format_for_path(const std::string& path) {
    const auto dot = path.rfind('.');
    if (dot != std::string::npos && path.substr(dot) == ".csv") return MatrixFormat::Csv;
    return MatrixFormat::Binary;
}

const char* extension(MatrixFormat format) noexcept { return format == MatrixFormat::Csv ? ".csv" : ".bin"; }

std::string format_double(double v) {
    std::array<char, 32> buf{};
    const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), ptr);
}

std::string to_csv(const Matrix& X) {
    std::string out = "# " + std::to_string(X.rows()) + " " + std::to_string(X.cols()) + "\n";
    for (Index i = 0; i < X.rows(); ++i) {
        for (Index j = 0; j < X.cols(); ++j) {
            if (j) out.push_back(',');
            out += format_double(X(i, j));
        }
        out.push_back('\n');
    }
    return out;
}

Matrix parse_csv_matrix(std::string_view text) {
    std::vector<std::vector<double>> rows;
    long declared_rows = -1, declared_cols = -1;
    std::size_t line_no = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        std::string_view line = trim(text.substr(0, nl));
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        if (line.empty()) continue;
        if (line.front() == '#') {
            if (declared_rows < 0 && rows.empty()) {
                std::istringstream hs{std::string(line.substr(1))};
                long r = -1, c = -1;
                if (hs >> r >> c) {
                    declared_rows = r;
                    declared_cols = c;
                }
            }
            continue;
        }
        std::vector<double> values;
        std::size_t start = 0;
        for (;;) {
            const auto comma = line.find(',', start);
            values.push_back(parse_number(line.substr(start, comma - start), line_no));
            if (comma == std::string_view::npos) break;
            start = comma + 1;
        }
        if (!rows.empty() && values.size() != rows.front().size())
            throw ParseError("line " + std::to_string(line_no) + ": expected " + std::to_string(rows.front().size()) +
                             " columns, found " + std::to_string(values.size()));
        rows.push_back(std::move(values));
    }
    if (rows.empty()) throw ParseError("matrix file contains no data rows");
    const auto nrows = static_cast<long>(rows.size());
    const auto ncols = static_cast<long>(rows.front().size());
    if (declared_rows >= 0 && (declared_rows != nrows || declared_cols != ncols))
        throw ParseError("header declares " + std::to_string(declared_rows) + "x" + std::to_string(declared_cols) +
                         " but payload is " + std::to_string(nrows) + "x" + std::to_string(ncols));
    Matrix X(nrows, ncols);
    for (Index i = 0; i < nrows; ++i)
        for (Index j = 0; j < ncols; ++j) X(i, j) = rows[i][j];
    return X;
}

void write_matrix(const std::string& path, const Matrix& X, MatrixFormat format) {
    std::string bytes;
    if (format == MatrixFormat::Csv) {
        bytes = to_csv(X);
    } else {
        bytes.reserve(kHeaderBytes + static_cast<std::size_t>(X.size()) * 8);
        bytes.append(kMatrixMagic);
        put_u64(bytes, static_cast<std::uint64_t>(X.rows()));
        put_u64(bytes, static_cast<std::uint64_t>(X.cols()));
        put_u32(bytes, kDtypeFloat64);
        put_u32(bytes, 0);
        for (Index i = 0; i < X.rows(); ++i)
            for (Index j = 0; j < X.cols(); ++j) put_u64(bytes, std::bit_cast<std::uint64_t>(X(i, j)));
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ParseError("cannot open " + path + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw ParseError("failed writing " + path);
}

Matrix read_matrix(const std::string& path) {
    const std::string bytes = slurp(path);
    if (bytes.empty()) throw ParseError(path + ": empty file");
    if (bytes.size() >= kMatrixMagic.size() && std::string_view(bytes).substr(0, kMatrixMagic.size()) == kMatrixMagic)
        return parse_binary(bytes, path);
    try {
        return parse_csv_matrix(bytes);
    } catch (const ParseError& e) {
        throw ParseError(path + ": " + e.what());
    }
}

} // namespace grnmf
