#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace decsal {

/// Dense row-major matrix of 64-bit reals. Values are immutable by convention
/// once handed to a Tape; all mutating members are for construction and
/// in-place accumulation during training.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols);
  Matrix(std::size_t rows, std::size_t cols, double fill);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  double* row(std::size_t i) { return data_.data() + i * cols_; }
  const double* row(std::size_t i) const { return data_.data() + i * cols_; }
  std::span<const double> row_span(std::size_t i) const { return {row(i), cols_}; }

  bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }
  std::string shape_str() const;
  bool all_finite() const;

  bool operator==(const Matrix& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_ && data_ == o.data_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Raises DimensionError naming both shapes if the operands disagree.
void check_same_shape(const Matrix& a, const Matrix& b, const char* op);
void check_inner(const Matrix& a, const Matrix& b, const char* op);

// out = a * b. Shapes checked by caller-facing wrappers.
void matmul_into(const Matrix& a, const Matrix& b, Matrix& out);
// out = a * b^T
void matmul_nt_into(const Matrix& a, const Matrix& b, Matrix& out);
// out = a^T * b
void matmul_tn_into(const Matrix& a, const Matrix& b, Matrix& out);

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix matmul_nt(const Matrix& a, const Matrix& b);
Matrix matmul_tn(const Matrix& a, const Matrix& b);

Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);
Matrix mul_elem(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& a, double s);
Matrix transpose(const Matrix& a);
Matrix relu(const Matrix& a);

// Row-stabilized softmax: subtracts the row max before exponentiation.
Matrix softmax_rows(const Matrix& m);

// Per-row normalization with affine rescale; gain and bias are 1 x cols.
Matrix layer_norm(const Matrix& m, const Matrix& gain, const Matrix& bias, double eps);

// Length-rows vector of per-row sums.
std::vector<double> row_sums(const Matrix& m);
std::size_t argmax_row(const Matrix& m, std::size_t i);

void add_in_place(Matrix& a, const Matrix& b);
void axpy_in_place(Matrix& a, double s, const Matrix& b);  // a += s * b

double max_abs_diff(const Matrix& a, const Matrix& b);

}  // namespace decsal
