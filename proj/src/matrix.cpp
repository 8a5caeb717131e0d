#include "decsal/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "decsal/errors.hpp"

namespace decsal {

Matrix::Matrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw DimensionError("Matrix: data length " + std::to_string(data_.size()) +
                         " does not equal " + std::to_string(rows_) + "x" + std::to_string(cols_));
  }
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ ? rows.begin()->size() : 0;
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw DimensionError("Matrix: ragged initializer rows");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

std::string Matrix::shape_str() const {
  return std::to_string(rows_) + "x" + std::to_string(cols_);
}

bool Matrix::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void check_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (!a.same_shape(b)) {
    throw DimensionError(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " +
                         b.shape_str());
  }
}

void check_inner(const Matrix& a, const Matrix& b, const char* op) {
  if (a.cols() != b.rows()) {
    throw DimensionError(std::string(op) + ": inner dimensions disagree, " + a.shape_str() +
                         " by " + b.shape_str());
  }
}

void matmul_into(const Matrix& a, const Matrix& b, Matrix& out) {
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  std::memset(out.data(), 0, n * m * sizeof(double));
  for (std::size_t i = 0; i < n; ++i) {
    const double* arow = a.row(i);
    double* orow = out.row(i);
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      const double* brow = b.row(p);
      for (std::size_t j = 0; j < m; ++j) orow[j] += av * brow[j];
    }
  }
}

void matmul_nt_into(const Matrix& a, const Matrix& b, Matrix& out) {
  const std::size_t n = a.rows(), k = a.cols(), m = b.rows();
  for (std::size_t i = 0; i < n; ++i) {
    const double* arow = a.row(i);
    double* orow = out.row(i);
    for (std::size_t j = 0; j < m; ++j) {
      const double* brow = b.row(j);
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
      orow[j] = acc;
    }
  }
}

void matmul_tn_into(const Matrix& a, const Matrix& b, Matrix& out) {
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  std::memset(out.data(), 0, k * m * sizeof(double));
  for (std::size_t p = 0; p < n; ++p) {
    const double* arow = a.row(p);
    const double* brow = b.row(p);
    for (std::size_t i = 0; i < k; ++i) {
      const double av = arow[i];
      double* orow = out.row(i);
      for (std::size_t j = 0; j < m; ++j) orow[j] += av * brow[j];
    }
  }
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  check_inner(a, b, "matmul");
  Matrix out(a.rows(), b.cols());
  matmul_into(a, b, out);
  return out;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    throw DimensionError("matmul_nt: inner dimensions disagree, " + a.shape_str() + " by " +
                         b.shape_str() + "^T");
  }
  Matrix out(a.rows(), b.rows());
  matmul_nt_into(a, b, out);
  return out;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) {
    throw DimensionError("matmul_tn: inner dimensions disagree, " + a.shape_str() + "^T by " +
                         b.shape_str());
  }
  Matrix out(a.cols(), b.cols());
  matmul_tn_into(a, b, out);
  return out;
}

Matrix add(const Matrix& a, const Matrix& b) {
  check_same_shape(a, b, "add");
  Matrix out = a;
  const double* pb = b.data();
  double* po = out.data();
  for (std::size_t i = 0; i < out.size(); ++i) po[i] += pb[i];
  return out;
}

Matrix sub(const Matrix& a, const Matrix& b) {
  check_same_shape(a, b, "sub");
  Matrix out = a;
  const double* pb = b.data();
  double* po = out.data();
  for (std::size_t i = 0; i < out.size(); ++i) po[i] -= pb[i];
  return out;
}

Matrix mul_elem(const Matrix& a, const Matrix& b) {
  check_same_shape(a, b, "mul_elem");
  Matrix out = a;
  const double* pb = b.data();
  double* po = out.data();
  for (std::size_t i = 0; i < out.size(); ++i) po[i] *= pb[i];
  return out;
}

Matrix scale(const Matrix& a, double s) {
  Matrix out = a;
  double* po = out.data();
  for (std::size_t i = 0; i < out.size(); ++i) po[i] *= s;
  return out;
}

Matrix transpose(const Matrix& a) {
  Matrix out(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  return out;
}

Matrix relu(const Matrix& a) {
  Matrix out = a;
  double* po = out.data();
  for (std::size_t i = 0; i < out.size(); ++i) po[i] = po[i] > 0.0 ? po[i] : 0.0;
  return out;
}

Matrix softmax_rows(const Matrix& m) {
  Matrix out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const double* in = m.row(i);
    double* o = out.row(i);
    double mx = in[0];
    for (std::size_t j = 1; j < m.cols(); ++j) mx = std::max(mx, in[j]);
    double sum = 0.0;
    for (std::size_t j = 0; j < m.cols(); ++j) {
      o[j] = std::exp(in[j] - mx);
      sum += o[j];
    }
    const double inv = 1.0 / sum;
    for (std::size_t j = 0; j < m.cols(); ++j) o[j] *= inv;
  }
  return out;
}

Matrix layer_norm(const Matrix& m, const Matrix& gain, const Matrix& bias, double eps) {
  if (gain.rows() != 1 || gain.cols() != m.cols() || bias.rows() != 1 || bias.cols() != m.cols()) {
    throw DimensionError("layer_norm: gain/bias must be 1x" + std::to_string(m.cols()) +
                         ", got " + gain.shape_str() + " and " + bias.shape_str());
  }
  if (eps <= 0.0) throw DimensionError("layer_norm: eps must be positive");
  Matrix out(m.rows(), m.cols());
  const std::size_t c = m.cols();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const double* in = m.row(i);
    double* o = out.row(i);
    double mean = 0.0;
    for (std::size_t j = 0; j < c; ++j) mean += in[j];
    mean /= static_cast<double>(c);
    double var = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      const double d = in[j] - mean;
      var += d * d;
    }
    var /= static_cast<double>(c);
    const double inv_std = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < c; ++j) {
      o[j] = (in[j] - mean) * inv_std * gain(0, j) + bias(0, j);
    }
  }
  return out;
}

std::vector<double> row_sums(const Matrix& m) {
  std::vector<double> out(m.rows(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const double* in = m.row(i);
    double acc = 0.0;
    for (std::size_t j = 0; j < m.cols(); ++j) acc += in[j];
    out[i] = acc;
  }
  return out;
}

std::size_t argmax_row(const Matrix& m, std::size_t i) {
  const double* in = m.row(i);
  std::size_t best = 0;
  for (std::size_t j = 1; j < m.cols(); ++j)
    if (in[j] > in[best]) best = j;
  return best;
}

void add_in_place(Matrix& a, const Matrix& b) {
  check_same_shape(a, b, "add_in_place");
  double* pa = a.data();
  const double* pb = b.data();
  for (std::size_t i = 0; i < a.size(); ++i) pa[i] += pb[i];
}

void axpy_in_place(Matrix& a, double s, const Matrix& b) {
  check_same_shape(a, b, "axpy_in_place");
  double* pa = a.data();
  const double* pb = b.data();
  for (std::size_t i = 0; i < a.size(); ++i) pa[i] += s * pb[i];
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  check_same_shape(a, b, "max_abs_diff");
  double mx = 0.0;
  const double* pa = a.data();
  const double* pb = b.data();
  for (std::size_t i = 0; i < a.size(); ++i) mx = std::max(mx, std::abs(pa[i] - pb[i]));
  return mx;
}

}  // namespace decsal
