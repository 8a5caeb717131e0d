#include "decsal/matrix.hpp"

#include <cmath>
#include <random>

#include "decsal/errors.hpp"
#include "doctest.h"
#include "support/test_util.hpp"

using namespace decsal;

TEST_CASE("matmul identity leaves the operand unchanged") {
  std::mt19937_64 rng(7);
  Matrix m = testutil::random_matrix(rng, 2, 2);
  Matrix out = matmul(Matrix::identity(2), m);
  CHECK(out == m);
}

TEST_CASE("matmul hand example") {
  Matrix a{{1, 2}, {3, 4}};
  Matrix b{{0}, {1}};
  Matrix out = matmul(a, b);
  CHECK(out(0, 0) == 2.0);
  CHECK(out(1, 0) == 4.0);
}

namespace {
// Brute-force triple loop, the independent oracle for every matmul kernel.
Matrix matmul_oracle(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) acc += a(i, k) * b(k, j);
      out(i, j) = acc;
    }
  return out;
}
}  // namespace

TEST_CASE("matmul matches triple-loop oracle") {
  std::mt19937_64 rng(11);
  Matrix a = testutil::random_matrix(rng, 3, 4);
  Matrix b = testutil::random_matrix(rng, 4, 2);
  CHECK(max_abs_diff(matmul(a, b), matmul_oracle(a, b)) < 1e-12);
}

TEST_CASE("matmul variants match transposed oracles") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    Matrix a = testutil::random_matrix(rng, 5, 3);
    Matrix b = testutil::random_matrix(rng, 7, 3);
    CHECK(max_abs_diff(matmul_nt(a, b), matmul_oracle(a, transpose(b))) < 1e-12);
    Matrix c = testutil::random_matrix(rng, 5, 6);
    CHECK(max_abs_diff(matmul_tn(a, c), matmul_oracle(transpose(a), c)) < 1e-12);
  }
}

TEST_CASE("matmul shape mismatch names both shapes") {
  Matrix a(2, 3);
  Matrix b(2, 3);
  CHECK_THROWS_WITH_AS(matmul(a, b), doctest::Contains("2x3"), DimensionError);
}

TEST_CASE("softmax symmetric row") {
  Matrix out = softmax_rows(Matrix{{0, 0}});
  CHECK(out(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(out(0, 1) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("softmax of [ln 2, 0]") {
  Matrix out = softmax_rows(Matrix{{std::log(2.0), 0.0}});
  CHECK(out(0, 0) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(out(0, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("softmax stays finite for large rows and matches long-double oracle") {
  Matrix in{{1000, 1000, 999}};
  Matrix out = softmax_rows(in);
  CHECK(out.all_finite());
  long double denom = 0.0L;
  for (int j = 0; j < 3; ++j) denom += expl(static_cast<long double>(in(0, j)) - 1000.0L);
  for (int j = 0; j < 3; ++j) {
    const long double want = expl(static_cast<long double>(in(0, j)) - 1000.0L) / denom;
    CHECK(out(0, j) == doctest::Approx(static_cast<double>(want)).epsilon(1e-12));
  }
  double sum = out(0, 0) + out(0, 1) + out(0, 2);
  CHECK(std::abs(sum - 1.0) < 1e-9);
}

TEST_CASE("softmax rows sum to one for random inputs") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    Matrix m = testutil::random_matrix(rng, 4, 6, -15.0, 15.0);
    Matrix p = softmax_rows(m);
    for (std::size_t i = 0; i < p.rows(); ++i) {
      double sum = 0.0;
      for (std::size_t j = 0; j < p.cols(); ++j) {
        sum += p(i, j);
        CHECK(p(i, j) > 0.0);
        CHECK(p(i, j) < 1.0);
      }
      CHECK(std::abs(sum - 1.0) < 1e-9);
    }
  }
  // Rows with extreme spread still sum to one and stay normalized.
  for (int trial = 0; trial < 20; ++trial) {
    Matrix m = testutil::random_matrix(rng, 2, 5, -500.0, 500.0);
    Matrix p = softmax_rows(m);
    for (std::size_t i = 0; i < p.rows(); ++i) {
      double sum = 0.0;
      for (std::size_t j = 0; j < p.cols(); ++j) sum += p(i, j);
      CHECK(std::abs(sum - 1.0) < 1e-9);
    }
    CHECK(p.all_finite());
  }
}

TEST_CASE("layer_norm of a constant row is all zeros") {
  Matrix gain(1, 4, 1.0);
  Matrix bias(1, 4, 0.0);
  Matrix out = layer_norm(Matrix(1, 4, 3.25), gain, bias, 1e-5);
  for (std::size_t j = 0; j < 4; ++j) CHECK(out(0, j) == 0.0);
}

TEST_CASE("layer_norm of an already-normalized row") {
  Matrix gain(1, 2, 1.0);
  Matrix bias(1, 2, 0.0);
  Matrix out = layer_norm(Matrix{{1, -1}}, gain, bias, 1e-12);
  CHECK(out(0, 0) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(out(0, 1) == doctest::Approx(-1.0).epsilon(1e-6));
}

TEST_CASE("layer_norm matches two-pass mean/variance oracle") {
  std::mt19937_64 rng(23);
  Matrix m = testutil::random_matrix(rng, 3, 8);
  Matrix gain = testutil::random_matrix(rng, 1, 8, 0.5, 1.5);
  Matrix bias = testutil::random_matrix(rng, 1, 8, -0.5, 0.5);
  const double eps = 1e-6;
  Matrix out = layer_norm(m, gain, bias, eps);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    double mean = 0.0;
    for (std::size_t j = 0; j < m.cols(); ++j) mean += m(i, j);
    mean /= static_cast<double>(m.cols());
    double var = 0.0;
    for (std::size_t j = 0; j < m.cols(); ++j) var += (m(i, j) - mean) * (m(i, j) - mean);
    var /= static_cast<double>(m.cols());
    for (std::size_t j = 0; j < m.cols(); ++j) {
      const double want = (m(i, j) - mean) / std::sqrt(var + eps) * gain(0, j) + bias(0, j);
      CHECK(out(i, j) == doctest::Approx(want).epsilon(1e-9));
    }
  }
}

TEST_CASE("layer_norm rows have zero mean and unit variance before rescale") {
  std::mt19937_64 rng(29);
  Matrix m = testutil::random_matrix(rng, 4, 16);
  Matrix gain(1, 16, 1.0);
  Matrix bias(1, 16, 0.0);
  Matrix out = layer_norm(m, gain, bias, 1e-9);
  for (std::size_t i = 0; i < out.rows(); ++i) {
    double mean = 0.0, var = 0.0;
    for (std::size_t j = 0; j < out.cols(); ++j) mean += out(i, j);
    mean /= 16.0;
    for (std::size_t j = 0; j < out.cols(); ++j) var += (out(i, j) - mean) * (out(i, j) - mean);
    var /= 16.0;
    CHECK(std::abs(mean) < 1e-6);
    CHECK(std::abs(var - 1.0) < 1e-6);
  }
}

TEST_CASE("layer_norm rejects mismatched gain shape") {
  CHECK_THROWS_AS(layer_norm(Matrix(2, 4), Matrix(1, 3), Matrix(1, 4), 1e-5), DimensionError);
}
