#include "fnrgnn/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace fnr::kernels {

#ifdef FNRGNN_HAVE_AVX2
const Table* avx2_table_impl();
#endif

const Table* avx2_table() {
#ifdef FNRGNN_HAVE_AVX2
  return avx2_table_impl();
#else
  return nullptr;
#endif
}

bool cpu_supports_avx2() {
#if defined(__x86_64__) || defined(__i386__)
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

namespace {

const Table* resolve_default() {
  if (const char* env = std::getenv("FNRGNN_KERNELS"); env != nullptr && std::string(env) == "scalar") {
    return &scalar_table();
  }
  if (avx2_table() != nullptr && cpu_supports_avx2()) return avx2_table();
  return &scalar_table();
}

std::atomic<const Table*>& current() {
  static std::atomic<const Table*> table{resolve_default()};
  return table;
}

}  // namespace

const Table& active() { return *current().load(std::memory_order_acquire); }

Backend active_backend() { return active().backend; }

void set_backend(Backend backend) {
  if (backend == Backend::scalar) {
    current().store(&scalar_table(), std::memory_order_release);
    return;
  }
  if (avx2_table() == nullptr) throw std::runtime_error("AVX2 kernels were not compiled into this build");
  if (!cpu_supports_avx2()) throw std::runtime_error("CPU does not support AVX2/FMA");
  current().store(avx2_table(), std::memory_order_release);
}

std::string_view backend_name(Backend backend) {
  switch (backend) {
    case Backend::scalar:
      return "scalar";
    case Backend::avx2:
      return "avx2";
  }
  return "unknown";
}

}  // namespace fnr::kernels
