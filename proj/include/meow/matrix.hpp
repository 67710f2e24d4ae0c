#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace meow {

/// Dense row-major matrix of 64-bit reals. The only numeric container used on
/// the autodiff tape and in the encoder path; sparse structures are confined
/// to meta-path preprocessing.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }
  bool all_finite() const;

  void set_zero() { std::fill(data_.begin(), data_.end(), 0.0); }

  /// Exact elementwise equality (used by determinism tests; no tolerance).
  bool operator==(const Matrix& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_ && data_ == o.data_;
  }

  std::string shape_str() const {
    return std::to_string(rows_) + "x" + std::to_string(cols_);
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// out = op(a) * op(b) with op controlled by the transpose flags.
Matrix matmul(const Matrix& a, const Matrix& b, bool trans_a = false, bool trans_b = false);

/// out += op(a) * op(b); shapes must already agree.
void matmul_acc(Matrix& out, const Matrix& a, const Matrix& b, bool trans_a = false,
                bool trans_b = false);

Matrix transpose(const Matrix& a);

/// dst += scale * src (shape-checked).
void add_scaled(Matrix& dst, const Matrix& src, double scale = 1.0);

[[noreturn]] void throw_shape_error(const std::string& op, const Matrix& a, const Matrix& b);

}  // namespace meow
