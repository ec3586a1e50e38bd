#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace cotbert {

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  void fill(double v);

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// [batch x seq x dim] activations, contiguous per (batch, position).
class Tensor3 {
 public:
  Tensor3() = default;
  Tensor3(std::size_t batch, std::size_t seq, std::size_t dim, double fill = 0.0)
      : batch_(batch), seq_(seq), dim_(dim), data_(batch * seq * dim, fill) {}

  std::size_t batch() const noexcept { return batch_; }
  std::size_t seq() const noexcept { return seq_; }
  std::size_t dim() const noexcept { return dim_; }

  std::span<double> at(std::size_t b, std::size_t s) {
    return {data_.data() + (b * seq_ + s) * dim_, dim_};
  }
  std::span<const double> at(std::size_t b, std::size_t s) const {
    return {data_.data() + (b * seq_ + s) * dim_, dim_};
  }

  /// All positions of sequence b as one [seq x dim] block.
  std::span<double> sequence(std::size_t b) { return {data_.data() + b * seq_ * dim_, seq_ * dim_}; }
  std::span<const double> sequence(std::size_t b) const {
    return {data_.data() + b * seq_ * dim_, seq_ * dim_};
  }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  bool operator==(const Tensor3&) const = default;

 private:
  std::size_t batch_ = 0;
  std::size_t seq_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> data_;
};

// Small dense linear algebra on top of the simd kernels. Shapes are checked
// and mismatches throw ErrorKind::shape.

/// out = a * b
void matmul(const Matrix& a, const Matrix& b, Matrix& out);
/// out += a^T * b
void matmul_tn_acc(const Matrix& a, const Matrix& b, Matrix& out);
/// out = a * b^T
void matmul_nt(const Matrix& a, const Matrix& b, Matrix& out);
/// Adds the single-row `bias` to every row of `m`.
void add_row_bias(Matrix& m, const Matrix& bias);
/// grad_bias += column sums of `g`.
void acc_column_sums(const Matrix& g, Matrix& grad_bias);
/// a += b (same shape)
void add_inplace(Matrix& a, const Matrix& b);

double l2_norm(std::span<const double> v);

/// Row-wise L2 normalization; zero rows throw ErrorKind::numeric.
Matrix normalize_rows(const Matrix& m);

}  // namespace cotbert
