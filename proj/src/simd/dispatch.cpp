#include <cstdlib>
#include <string_view>

#include "cotbert/simd/kernels.hpp"

namespace cotbert::simd {

#if defined(COTBERT_HAVE_AVX2)
const KernelTable& avx2_kernel_table();
#endif

namespace {

bool cpu_has_avx2() {
#if defined(COTBERT_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable* initial_table() {
  const char* env = std::getenv("COTBERT_SIMD");
  const std::string_view request = env ? env : "auto";
  if (request == "scalar") return &scalar_kernels();
  if (const KernelTable* wide = avx2_kernels()) return wide;
  return &scalar_kernels();
}

const KernelTable*& current() {
  static const KernelTable* table = initial_table();
  return table;
}

}  // namespace

std::string_view to_string(Isa isa) {
  switch (isa) {
    case Isa::scalar: return "scalar";
    case Isa::avx2: return "avx2";
  }
  return "unknown";
}

const KernelTable* avx2_kernels() {
#if defined(COTBERT_HAVE_AVX2)
  static const bool supported = cpu_has_avx2();
  if (supported) return &avx2_kernel_table();
#endif
  return nullptr;
}

const KernelTable& active() { return *current(); }

bool select(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      current() = &scalar_kernels();
      return true;
    case Isa::avx2:
      if (const KernelTable* wide = avx2_kernels()) {
        current() = wide;
        return true;
      }
      return false;
  }
  return false;
}

}  // namespace cotbert::simd
