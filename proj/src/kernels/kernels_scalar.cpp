#include "fnrgnn/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace fnr::kernels {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

double squared_distance_scalar(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

void exp_scalar(const double* in, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = std::exp(in[i]);
}

double sum_scalar(const double* x, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i];
  return acc;
}

void scale_scalar(double alpha, double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] *= alpha;
}

double softmin_logits_scalar(const double* c, const double* pot, const double* logw, double inv_eps, double* out,
                             std::size_t n) {
  double m = HUGE_VAL;
  for (std::size_t i = 0; i < n; ++i) m = std::min(m, c[i] - pot[i]);
  for (std::size_t i = 0; i < n; ++i) out[i] = logw[i] - ((c[i] - pot[i]) - m) * inv_eps;
  return m;
}

constexpr Table kScalar{
    Backend::scalar, dot_scalar,  axpy_scalar,          squared_distance_scalar,
    exp_scalar,      sum_scalar,  scale_scalar,         softmin_logits_scalar,
};

}  // namespace

const Table& scalar_table() { return kScalar; }

}  // namespace fnr::kernels
