#pragma once

// Dense inner-loop kernels used by the tensor, sparse and loss code.
//
// Every kernel has a scalar reference implementation. On x86-64 builds an
// AVX2+FMA variant is compiled into a separate translation unit and selected
// at runtime when the CPU supports it. Setting FNRGNN_KERNELS=scalar in the
// environment (or calling set_backend) forces the reference path.

#include <cstddef>
#include <string_view>

namespace fnr::kernels {

enum class Backend { scalar, avx2 };

struct Table {
  Backend backend;
  // sum_i a[i] * b[i]
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y[i] += alpha * x[i]
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // sum_i (a[i] - b[i])^2
  double (*squared_distance)(const double* a, const double* b, std::size_t n);
  // out[i] = exp(in[i]); in and out may alias
  void (*exp)(const double* in, double* out, std::size_t n);
  double (*sum)(const double* x, std::size_t n);
  // x[i] *= alpha
  void (*scale)(double alpha, double* x, std::size_t n);
  // Shifted soft-min logits: with m = min_i (c[i] - pot[i]),
  // out[i] = logw[i] - (c[i] - pot[i] - m) * inv_eps. Returns m.
  double (*softmin_logits)(const double* c, const double* pot, const double* logw, double inv_eps, double* out,
                           std::size_t n);
};

const Table& scalar_table();

// nullptr when the AVX2 variant was not compiled in.
const Table* avx2_table();

bool cpu_supports_avx2();

// The table used by the convenience wrappers below. Resolved on first use from
// FNRGNN_KERNELS and CPU support.
const Table& active();
Backend active_backend();

// Throws std::runtime_error when the requested backend is unavailable.
void set_backend(Backend backend);

std::string_view backend_name(Backend backend);

inline double dot(const double* a, const double* b, std::size_t n) { return active().dot(a, b, n); }
inline void axpy(double alpha, const double* x, double* y, std::size_t n) { active().axpy(alpha, x, y, n); }
inline double squared_distance(const double* a, const double* b, std::size_t n) {
  return active().squared_distance(a, b, n);
}
inline void exp(const double* in, double* out, std::size_t n) { active().exp(in, out, n); }
inline double sum(const double* x, std::size_t n) { return active().sum(x, n); }
inline void scale(double alpha, double* x, std::size_t n) { active().scale(alpha, x, n); }
inline double softmin_logits(const double* c, const double* pot, const double* logw, double inv_eps, double* out,
                             std::size_t n) {
  return active().softmin_logits(c, pot, logw, inv_eps, out, n);
}

}  // namespace fnr::kernels
