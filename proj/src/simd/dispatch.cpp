#include "pni/simd/kernels.hpp"

#include <cstdlib>
#include <cstring>

namespace pni::simd {

#if defined(PNI_HAVE_AVX2)
namespace detail {
const KernelTable* avx2_table();
}
#endif

namespace {

bool cpu_has_avx2_fma() {
#if defined(PNI_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

bool scalar_forced() {
  const char* env = std::getenv("PNI_FORCE_SCALAR");
  return env != nullptr && std::strcmp(env, "") != 0 && std::strcmp(env, "0") != 0;
}

const KernelTable& select_kernels() {
  if (!scalar_forced()) {
    if (const KernelTable* table = avx2_kernels()) {
      return *table;
    }
  }
  return scalar_kernels();
}

}  // namespace

const KernelTable* avx2_kernels() {
#if defined(PNI_HAVE_AVX2)
  static const bool supported = cpu_has_avx2_fma();
  return supported ? detail::avx2_table() : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable& active_kernels() {
  static const KernelTable& table = select_kernels();
  return table;
}

}  // namespace pni::simd
