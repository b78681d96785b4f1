#include <gtest/gtest.h>

#include <fstream>

#include "grnmf/matrix_io.hpp"
#include "helpers.hpp"

using namespace grnmf;

namespace {

void write_text(const std::filesystem::path& p, const std::string& s) {
    std::ofstream out(p, std::ios::binary);
    out << s;
}

} // namespace

TEST(MatrixIo, BinaryHeaderLayout) {
    const auto dir = test::temp_dir("io_header");
    Matrix X(2, 3);
    X << 1, 2, 3, 4, 5, 6;
    const auto path = (dir / "x.bin").string();
    write_matrix(path, X);
    const std::string bytes = test::read_file(path);
    ASSERT_EQ(bytes.size(), 32u + 6 * 8);
    EXPECT_EQ(bytes.substr(0, 8), std::string("GRNMF1\0\0", 8));
    EXPECT_EQ(static_cast<unsigned char>(bytes[8]), 2);
    EXPECT_EQ(static_cast<unsigned char>(bytes[16]), 3);
    EXPECT_EQ(static_cast<unsigned char>(bytes[24]), 1);
    // row-major: the second value is X(0, 1) = 2.0 = 0x4000000000000000
    EXPECT_EQ(static_cast<unsigned char>(bytes[32 + 8 + 7]), 0x40);
    EXPECT_EQ(read_matrix(path), X);
}

TEST(MatrixIoProperty, RoundTripBothFormats) {
    Rng rng(1);
    const auto dir = test::temp_dir("io_roundtrip");
    for (int t = 0; t < 30; ++t) {
        const Index r = 1 + static_cast<Index>(rng() % 7), c = 1 + static_cast<Index>(rng() % 7);
        Matrix X = test::random_positive(r, c, rng, -1e3, 1e3);
        X(0, 0) = 1e-300;
        for (auto fmt : {MatrixFormat::Binary, MatrixFormat::Csv}) {
            const auto path = (dir / ("m" + std::string(extension(fmt)))).string();
            write_matrix(path, X, fmt);
            EXPECT_EQ(read_matrix(path), X);
        }
    }
}

TEST(MatrixIo, CsvFormatting) {
    Matrix X(1, 3);
    X << 0.1, 1e-300, 2.0;
    EXPECT_EQ(to_csv(X), "# 1 3\n0.1,1e-300,2\n");
    EXPECT_EQ(format_double(0.30000000000000004), "0.30000000000000004");
    EXPECT_EQ(parse_csv_matrix("1, 2\n 3 ,+4\n"), (Matrix(2, 2) << 1, 2, 3, 4).finished());
    EXPECT_EQ(format_for_path("a/b.csv"), MatrixFormat::Csv);
    EXPECT_EQ(format_for_path("a/b.txt"), MatrixFormat::Binary);
}

TEST(MatrixIo, CsvErrorsNameTheLine) {
    try {
        parse_csv_matrix("1,2\n3,x\n");
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
    }
    EXPECT_THROW(parse_csv_matrix("1,2\n3\n"), ParseError);
    EXPECT_THROW(parse_csv_matrix("# 3 2\n1,2\n"), ParseError);
    EXPECT_THROW(parse_csv_matrix("# only a comment\n"), ParseError);
    EXPECT_THROW(parse_csv_matrix("1,nan\n"), ParseError);
    EXPECT_THROW(parse_csv_matrix("1,inf\n"), ParseError);
}

TEST(MatrixIo, BinaryErrors) {
    const auto dir = test::temp_dir("io_errors");
    Matrix X = Matrix::Ones(2, 2);
    write_matrix((dir / "ok.bin").string(), X);
    std::string bytes = test::read_file(dir / "ok.bin");

    write_text(dir / "short.bin", bytes.substr(0, bytes.size() - 3));
    EXPECT_THROW(read_matrix((dir / "short.bin").string()), ParseError);

    std::string dtype = bytes;
    dtype[24] = 2;
    write_text(dir / "dtype.bin", dtype);
    EXPECT_THROW(read_matrix((dir / "dtype.bin").string()), ParseError);

    std::string nonfinite = bytes;
    for (int i = 0; i < 8; ++i) nonfinite[32 + i] = static_cast<char>(i == 7 ? 0x7f : (i == 6 ? 0xf0 : 0));
    write_text(dir / "inf.bin", nonfinite);
    EXPECT_THROW(read_matrix((dir / "inf.bin").string()), ParseError);

    write_text(dir / "empty.bin", "");
    EXPECT_THROW(read_matrix((dir / "empty.bin").string()), ParseError);
    EXPECT_THROW(read_matrix((dir / "nope.bin").string()), ParseError);
}
