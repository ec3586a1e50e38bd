#include "cotbert/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cotbert/error.hpp"
#include "cotbert/simd/kernels.hpp"

namespace cotbert {
namespace {

std::string shape_of(const Matrix& m) {
  return "[" + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + "]";
}

}  // namespace

void Matrix::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

void matmul(const Matrix& a, const Matrix& b, Matrix& out) {
  require(a.cols() == b.rows(), ErrorKind::shape, "matmul " + shape_of(a) + " * " + shape_of(b));
  if (out.rows() != a.rows() || out.cols() != b.cols()) out = Matrix(a.rows(), b.cols());
  else out.fill(0.0);
  const auto& k = simd::active();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* dst = out.row(i).data();
    for (std::size_t p = 0; p < a.cols(); ++p) {
      const double s = a(i, p);
      if (s != 0.0) k.axpy(s, b.row(p).data(), dst, b.cols());
    }
  }
}

void matmul_tn_acc(const Matrix& a, const Matrix& b, Matrix& out) {
  require(a.rows() == b.rows() && out.rows() == a.cols() && out.cols() == b.cols(), ErrorKind::shape,
          "matmul_tn " + shape_of(a) + "^T * " + shape_of(b) + " -> " + shape_of(out));
  const auto& k = simd::active();
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const double* src = b.row(r).data();
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double s = a(r, i);
      if (s != 0.0) k.axpy(s, src, out.row(i).data(), b.cols());
    }
  }
}

void matmul_nt(const Matrix& a, const Matrix& b, Matrix& out) {
  require(a.cols() == b.cols(), ErrorKind::shape, "matmul_nt " + shape_of(a) + " * " + shape_of(b) + "^T");
  if (out.rows() != a.rows() || out.cols() != b.rows()) out = Matrix(a.rows(), b.rows());
  const auto& k = simd::active();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.rows(); ++j) {
      out(i, j) = k.dot(a.row(i).data(), b.row(j).data(), a.cols());
    }
  }
}

void add_row_bias(Matrix& m, const Matrix& bias) {
  require(bias.rows() == 1 && bias.cols() == m.cols(), ErrorKind::shape, "bias " + shape_of(bias));
  const auto& k = simd::active();
  for (std::size_t i = 0; i < m.rows(); ++i) k.axpy(1.0, bias.row(0).data(), m.row(i).data(), m.cols());
}

void acc_column_sums(const Matrix& g, Matrix& grad_bias) {
  require(grad_bias.rows() == 1 && grad_bias.cols() == g.cols(), ErrorKind::shape,
          "bias grad " + shape_of(grad_bias));
  const auto& k = simd::active();
  for (std::size_t i = 0; i < g.rows(); ++i) k.axpy(1.0, g.row(i).data(), grad_bias.row(0).data(), g.cols());
}

void add_inplace(Matrix& a, const Matrix& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), ErrorKind::shape,
          "add " + shape_of(a) + " + " + shape_of(b));
  simd::axpy(1.0, b.values(), a.values());
}

double l2_norm(std::span<const double> v) { return std::sqrt(simd::dot(v, v)); }

Matrix normalize_rows(const Matrix& m) {
  Matrix out = m;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const double n = l2_norm(m.row(i));
    require(n > 0.0 && std::isfinite(n), ErrorKind::numeric,
            "cannot normalize row " + std::to_string(i) + " with norm " + std::to_string(n));
    simd::scale(1.0 / n, out.row(i));
  }
  return out;
}

}  // namespace cotbert
