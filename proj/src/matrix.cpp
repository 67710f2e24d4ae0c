#include "meow/matrix.hpp"

#include <Eigen/Core>

#include <cmath>

namespace meow {

namespace {

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const EMat>;
using MutMap = Eigen::Map<EMat>;

ConstMap map_of(const Matrix& m) {
  return ConstMap(m.data(), static_cast<Eigen::Index>(m.rows()),
                  static_cast<Eigen::Index>(m.cols()));
}

}  // namespace

bool Matrix::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void throw_shape_error(const std::string& op, const Matrix& a, const Matrix& b) {
  throw std::invalid_argument(op + ": incompatible shapes " + a.shape_str() + " and " +
                              b.shape_str());
}

Matrix matmul(const Matrix& a, const Matrix& b, bool trans_a, bool trans_b) {
  const std::size_t out_rows = trans_a ? a.cols() : a.rows();
  const std::size_t inner = trans_a ? a.rows() : a.cols();
  const std::size_t b_inner = trans_b ? b.cols() : b.rows();
  const std::size_t out_cols = trans_b ? b.rows() : b.cols();
  if (inner != b_inner) throw_shape_error("matmul", a, b);

  Matrix out(out_rows, out_cols);
  MutMap mo(out.data(), static_cast<Eigen::Index>(out_rows),
            static_cast<Eigen::Index>(out_cols));
  auto ma = map_of(a);
  auto mb = map_of(b);
  if (!trans_a && !trans_b)
    mo.noalias() = ma * mb;
  else if (trans_a && !trans_b)
    mo.noalias() = ma.transpose() * mb;
  else if (!trans_a && trans_b)
    mo.noalias() = ma * mb.transpose();
  else
    mo.noalias() = ma.transpose() * mb.transpose();
  return out;
}

void matmul_acc(Matrix& out, const Matrix& a, const Matrix& b, bool trans_a, bool trans_b) {
  const std::size_t out_rows = trans_a ? a.cols() : a.rows();
  const std::size_t inner = trans_a ? a.rows() : a.cols();
  const std::size_t b_inner = trans_b ? b.cols() : b.rows();
  const std::size_t out_cols = trans_b ? b.rows() : b.cols();
  if (inner != b_inner) throw_shape_error("matmul_acc", a, b);
  if (out.rows() != out_rows || out.cols() != out_cols)
    throw std::invalid_argument("matmul_acc: output shape " + out.shape_str() +
                                " does not match product");

  MutMap mo(out.data(), static_cast<Eigen::Index>(out_rows),
            static_cast<Eigen::Index>(out_cols));
  auto ma = map_of(a);
  auto mb = map_of(b);
  if (!trans_a && !trans_b)
    mo.noalias() += ma * mb;
  else if (trans_a && !trans_b)
    mo.noalias() += ma.transpose() * mb;
  else if (!trans_a && trans_b)
    mo.noalias() += ma * mb.transpose();
  else
    mo.noalias() += ma.transpose() * mb.transpose();
}

Matrix transpose(const Matrix& a) {
  Matrix out(a.cols(), a.rows());
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = 0; c < a.cols(); ++c) out(c, r) = a(r, c);
  return out;
}

void add_scaled(Matrix& dst, const Matrix& src, double scale) {
  if (!dst.same_shape(src)) throw_shape_error("add_scaled", dst, src);
  double* d = dst.data();
  const double* s = src.data();
  for (std::size_t i = 0; i < dst.size(); ++i) d[i] += scale * s[i];
}

}  // namespace meow
