#include "fnrgnn/tensor.hpp"

#include "fnrgnn/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace fnr {

Tensor::Tensor(std::size_t rows, std::size_t cols, double fill) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Tensor::Tensor(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw std::invalid_argument("Tensor: data length " + std::to_string(data_.size()) + " does not match shape " +
                                std::to_string(rows) + "x" + std::to_string(cols));
  }
}

Tensor Tensor::column(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor(n, 1, std::move(values));
}

Tensor Tensor::scalar(double value) { return Tensor(1, 1, value); }

double Tensor::item() const {
  if (size() != 1) throw std::invalid_argument("Tensor::item on non-scalar tensor of shape " + shape_string());
  return data_[0];
}

bool Tensor::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

void Tensor::add_scaled(const Tensor& other, double alpha) {
  require_same_shape(*this, other, "add_scaled");
  kernels::axpy(alpha, other.data_.data(), data_.data(), data_.size());
}

std::string Tensor::shape_string() const { return "(" + std::to_string(rows_) + ", " + std::to_string(cols_) + ")"; }

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + a.shape_string() + " vs " + b.shape_string());
  }
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) {
    throw std::invalid_argument("matmul: shape mismatch " + a.shape_string() + " vs " + b.shape_string());
  }
  Tensor c(a.rows(), b.cols());
  const std::size_t n = b.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* out = c.row(i).data();
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik != 0.0) kernels::axpy(aik, b.row(k).data(), out, n);
    }
  }
  return c;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows()) {
    throw std::invalid_argument("matmul_tn: shape mismatch " + a.shape_string() + " vs " + b.shape_string());
  }
  Tensor c(a.cols(), b.cols());
  const std::size_t n = b.cols();
  for (std::size_t k = 0; k < a.rows(); ++k) {
    const double* brow = b.row(k).data();
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double aki = a(k, i);
      if (aki != 0.0) kernels::axpy(aki, brow, c.row(i).data(), n);
    }
  }
  return c;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.cols()) {
    throw std::invalid_argument("matmul_nt: shape mismatch " + a.shape_string() + " vs " + b.shape_string());
  }
  Tensor c(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.rows(); ++j) c(i, j) = kernels::dot(a.row(i).data(), b.row(j).data(), a.cols());
  }
  return c;
}

Tensor transpose(const Tensor& a) {
  Tensor t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

CsrMatrix::CsrMatrix(std::size_t rows, std::size_t cols, std::vector<Entry> entries) : rows_(rows), cols_(cols) {
  for (const auto& e : entries) {
    if (e.row >= rows || e.col >= cols) throw std::out_of_range("CsrMatrix: entry index out of range");
  }
  std::sort(entries.begin(), entries.end(),
            [](const Entry& a, const Entry& b) { return a.row != b.row ? a.row < b.row : a.col < b.col; });
  row_ptr_.assign(rows + 1, 0);
  for (std::size_t k = 0; k < entries.size(); ++k) {
    if (k > 0 && entries[k].row == entries[k - 1].row && entries[k].col == entries[k - 1].col) {
      values_.back() += entries[k].value;
      continue;
    }
    col_.push_back(entries[k].col);
    values_.push_back(entries[k].value);
    ++row_ptr_[entries[k].row + 1];
  }
  for (std::size_t r = 0; r < rows; ++r) row_ptr_[r + 1] += row_ptr_[r];
}

CsrMatrix CsrMatrix::identity(std::size_t n) {
  std::vector<Entry> entries;
  entries.reserve(n);
  for (std::size_t i = 0; i < n; ++i) entries.push_back({i, i, 1.0});
  return CsrMatrix(n, n, std::move(entries));
}

double CsrMatrix::at(std::size_t r, std::size_t c) const {
  const auto begin = col_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[r]);
  const auto end = col_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[r + 1]);
  const auto it = std::lower_bound(begin, end, c);
  if (it == end || *it != c) return std::numeric_limits<double>::quiet_NaN();
  return values_[static_cast<std::size_t>(it - col_.begin())];
}

std::vector<CsrMatrix::Entry> CsrMatrix::entries() const {
  std::vector<Entry> out;
  out.reserve(nnz());
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) out.push_back({r, col_[k], values_[k]});
  return out;
}

Tensor CsrMatrix::to_dense() const {
  Tensor d(rows_, cols_);
  for (const auto& e : entries()) d(e.row, e.col) = e.value;
  return d;
}

Tensor spmm(const CsrMatrix& a, const Tensor& x) {
  if (a.cols() != x.rows()) {
    throw std::invalid_argument("spmm: shape mismatch (" + std::to_string(a.rows()) + ", " + std::to_string(a.cols()) +
                                ") vs " + x.shape_string());
  }
  Tensor y(a.rows(), x.cols());
  const auto rp = a.row_ptr();
  const auto ci = a.col_index();
  const auto v = a.values();
  for (std::size_t r = 0; r < a.rows(); ++r) {
    double* out = y.row(r).data();
    for (std::size_t k = rp[r]; k < rp[r + 1]; ++k) kernels::axpy(v[k], x.row(ci[k]).data(), out, x.cols());
  }
  return y;
}

Tensor spmm_transposed(const CsrMatrix& a, const Tensor& x) {
  if (a.rows() != x.rows()) {
    throw std::invalid_argument("spmm_transposed: shape mismatch (" + std::to_string(a.rows()) + ", " +
                                std::to_string(a.cols()) + ") vs " + x.shape_string());
  }
  Tensor y(a.cols(), x.cols());
  const auto rp = a.row_ptr();
  const auto ci = a.col_index();
  const auto v = a.values();
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const double* in = x.row(r).data();
    for (std::size_t k = rp[r]; k < rp[r + 1]; ++k) kernels::axpy(v[k], in, y.row(ci[k]).data(), x.cols());
  }
  return y;
}

}  // namespace fnr
