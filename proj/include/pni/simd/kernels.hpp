#pragma once

#include <cstddef>
#include <string_view>

namespace pni::simd {

// Inner-loop kernels over contiguous float arrays. Every variant computes the
// same mathematical result; only the summation order differs, so results may
// differ by float rounding but never by more than a few ulps per element.
struct KernelTable {
  std::string_view name;
  float (*squared_l2)(const float* a, const float* b, std::size_t n);
  float (*dot)(const float* a, const float* b, std::size_t n);
  // y[i] += alpha * x[i]
  void (*axpy)(float alpha, const float* x, float* y, std::size_t n);
};

const KernelTable& scalar_kernels();

// nullptr when the AVX2 variants were not compiled in.
const KernelTable* avx2_kernels();

// Chosen once per process: AVX2+FMA when both the build and the CPU support
// it, scalar otherwise. Setting PNI_FORCE_SCALAR=1 in the environment forces
// the scalar table.
const KernelTable& active_kernels();

inline float squared_l2(const float* a, const float* b, std::size_t n) {
  return active_kernels().squared_l2(a, b, n);
}

inline float dot(const float* a, const float* b, std::size_t n) {
  return active_kernels().dot(a, b, n);
}

inline void axpy(float alpha, const float* x, float* y, std::size_t n) {
  active_kernels().axpy(alpha, x, y, n);
}

}  // namespace pni::simd
