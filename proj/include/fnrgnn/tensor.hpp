#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace fnr {

/// Dense row-major matrix of doubles. Vectors are stored as n x 1 columns and
/// scalars as 1 x 1.
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::size_t rows, std::size_t cols, double fill = 0.0);
  Tensor(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Tensor column(std::vector<double> values);
  static Tensor scalar(double value);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  const std::vector<double>& values() const noexcept { return data_; }

  // Value of a 1 x 1 tensor.
  double item() const;

  bool same_shape(const Tensor& other) const noexcept { return rows_ == other.rows_ && cols_ == other.cols_; }
  bool all_finite() const noexcept;
  void fill(double value);
  // this += alpha * other
  void add_scaled(const Tensor& other, double alpha = 1.0);

  std::string shape_string() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// C = A * B
Tensor matmul(const Tensor& a, const Tensor& b);
// C = A^T * B
Tensor matmul_tn(const Tensor& a, const Tensor& b);
// C = A * B^T
Tensor matmul_nt(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// Throws std::invalid_argument naming both shapes.
void require_same_shape(const Tensor& a, const Tensor& b, const char* op);

/// Compressed sparse row matrix.
class CsrMatrix {
 public:
  struct Entry {
    std::size_t row;
    std::size_t col;
    double value;
  };

  CsrMatrix() = default;
  // Entries may be given in any order; duplicates are summed.
  CsrMatrix(std::size_t rows, std::size_t cols, std::vector<Entry> entries);

  static CsrMatrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t nnz() const noexcept { return values_.size(); }

  std::span<const std::size_t> row_ptr() const noexcept { return row_ptr_; }
  std::span<const std::size_t> col_index() const noexcept { return col_; }
  std::span<const double> values() const noexcept { return values_; }

  // NaN when (r, c) is not stored.
  double at(std::size_t r, std::size_t c) const;
  std::vector<Entry> entries() const;
  Tensor to_dense() const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::size_t> row_ptr_;
  std::vector<std::size_t> col_;
  std::vector<double> values_;
};

// Y = A * X
Tensor spmm(const CsrMatrix& a, const Tensor& x);
// Y = A^T * X
Tensor spmm_transposed(const CsrMatrix& a, const Tensor& x);

}  // namespace fnr
