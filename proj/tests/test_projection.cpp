#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "doctest.h"
#include "fixhead/io.hpp"
#include "fixhead/projection.hpp"

using namespace fixhead;
namespace fs = std::filesystem;

namespace {

double gram_error(const Matrix& q) {
  const Matrix gram = q.transpose() * q;
  return (gram - Matrix::Identity(q.cols(), q.cols())).cwiseAbs().maxCoeff();
}

fs::path temp_file(const char* name) {
  return fs::temp_directory_path() / (std::string("fixhead_proj_") + name);
}

// Captures std::cerr for the scope.
class CerrCapture {
 public:
  CerrCapture() : old_(std::cerr.rdbuf(buffer_.rdbuf())) {}
  ~CerrCapture() { std::cerr.rdbuf(old_); }
  std::string text() const { return buffer_.str(); }

 private:
  std::ostringstream buffer_;
  std::streambuf* old_;
};

}  // namespace

TEST_SUITE("projection") {
  TEST_CASE("1-D strict projection is the pinned unit vector") {
    const FixedProjection p = random_orthonormal(1, 1, 3);
    CHECK(p.q.rows() == 1);
    CHECK(p.q.cols() == 1);
    CHECK(p.q(0, 0) == 1.0);  // sign pinning makes the first entry positive
  }

  TEST_CASE("strict mode: Q^T Q = I within 1e-10") {
    const FixedProjection p = random_orthonormal(8, 4, 7);
    CHECK(gram_error(p.q) < 1e-10);
    CHECK(p.mode == ProjectionMode::StrictOrthonormal);
    CHECK(p.n_features == 8);
    CHECK(p.n_classes == 4);
  }

  TEST_CASE("strict mode holds up to 512x512") {
    const Index shapes[][2] = {{16, 3}, {64, 64}, {257, 100}, {512, 512}};
    for (const auto& s : shapes) {
      const FixedProjection p = random_orthonormal(s[0], s[1], 99);
      CHECK(gram_error(p.q) < 1e-10);
    }
  }

  TEST_CASE("deterministic per seed") {
    const FixedProjection a = random_orthonormal(12, 5, 41);
    const FixedProjection b = random_orthonormal(12, 5, 41);
    const FixedProjection c = random_orthonormal(12, 5, 42);
    CHECK(a.q == b.q);
    CHECK(a.q != c.q);
  }

  TEST_CASE("c > n is rejected with a pointer to unit_rows") {
    try {
      random_orthonormal(4, 9, 1);
      FAIL("expected an exception");
    } catch (const std::invalid_argument& e) {
      CHECK(std::string(e.what()).find("unit_rows") != std::string::npos);
    }
  }

  TEST_CASE("unit_rows columns are unit norm") {
    const FixedProjection p = unit_rows(16, 40, 5);
    CHECK(p.mode == ProjectionMode::UnitRows);
    for (Index j = 0; j < 40; ++j)
      CHECK(std::abs(p.q.col(j).norm() - 1.0) < 1e-12);
  }

  TEST_CASE("unit_rows near-orthogonality statistic for n=64, c=128") {
    const FixedProjection p = unit_rows(64, 128, 8);
    double sum = 0.0;
    Index pairs = 0;
    for (Index i = 0; i < 128; ++i)
      for (Index j = i + 1; j < 128; ++j) {
        sum += std::abs(p.q.col(i).dot(p.q.col(j)));
        ++pairs;
      }
    const double mean = sum / static_cast<double>(pairs);
    CHECK(mean < 3.0 / std::sqrt(64.0));
  }

  TEST_CASE("unit_rows warns when strict mode is available") {
    CerrCapture capture;
    const FixedProjection p = unit_rows(16, 4, 9);
    CHECK(p.q.cols() == 4);
    CHECK(capture.text().find("strict") != std::string::npos);
  }

  TEST_CASE("unit_rows warning can be suppressed") {
    CerrCapture capture;
    unit_rows(16, 4, 9, /*warn_if_strict_available=*/false);
    CHECK(capture.text().empty());
  }

  TEST_CASE("deterministic unit_rows per seed") {
    const FixedProjection a = unit_rows(10, 20, 77);
    const FixedProjection b = unit_rows(10, 20, 77);
    CHECK(a.q == b.q);
  }

  TEST_CASE("file round trip preserves the matrix bitwise") {
    const FixedProjection p = random_orthonormal(6, 3, 123);
    const fs::path path = temp_file("roundtrip.bin");
    save_projection(p, path);
    const FixedProjection back = load_projection(path);
    CHECK(back.q == p.q);
    CHECK(back.n_features == p.n_features);
    CHECK(back.n_classes == p.n_classes);
    CHECK(back.mode == p.mode);
    fs::remove(path);
  }

  TEST_CASE("file header layout: magic, n, c, mode, row-major f64") {
    const FixedProjection p = unit_rows(2, 3, 55, false);
    const fs::path path = temp_file("header.bin");
    save_projection(p, path);

    std::ifstream is(path, std::ios::binary);
    char magic[4];
    is.read(magic, 4);
    CHECK(std::string(magic, 4) == "FIXQ");
    CHECK(read_u32_le(is) == 2);  // n
    CHECK(read_u32_le(is) == 3);  // c
    CHECK(read_u32_le(is) == 1);  // unit-rows mode
    for (Index i = 0; i < 2; ++i)
      for (Index j = 0; j < 3; ++j) CHECK(read_f64_le(is) == p.q(i, j));
    is.get();
    CHECK(is.eof());
    fs::remove(path);
  }

  TEST_CASE("load rejects a bad magic") {
    const fs::path path = temp_file("badmagic.bin");
    std::ofstream os(path, std::ios::binary);
    os << "NOPE";
    write_u32_le(os, 1);
    write_u32_le(os, 1);
    write_u32_le(os, 0);
    write_f64_le(os, 1.0);
    os.close();
    CHECK_THROWS_AS(load_projection(path), std::runtime_error);
    fs::remove(path);
  }
}
