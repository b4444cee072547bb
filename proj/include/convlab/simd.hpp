/* Copyright 2026 The ConvLab Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#ifndef CONVLAB_SIMD_HPP_
#define CONVLAB_SIMD_HPP_

#include <cstddef>

namespace convlab {
namespace simd {

// Inner loops of the host-side convolution kernels. Every primitive keeps
// per-element accumulation order identical between the scalar reference and
// the vector variants (independent accumulators, no FP contraction), so the
// backends are equivalence-tested for bit-exact equality.

// y[i] += a * x[i]
using AxpyFn = void (*)(float a, const float* x, float* y, std::size_t n);
// y[i] += x[i] * z[i]
using MulAccFn = void (*)(const float* x, const float* z, float* y, std::size_t n);

struct Kernels {
  AxpyFn axpy;
  MulAccFn mul_acc;
  const char* name;
};

// Scalar reference kernels.
extern const Kernels kScalar;

#if defined(__x86_64__) || defined(_M_X64)
// AVX2 kernels; only valid to call when the CPU supports AVX2.
extern const Kernels kAvx2;
#endif

// Backend picked at startup: AVX2 when the CPU supports it, scalar
// otherwise. CONVLAB_SIMD=scalar in the environment forces the reference
// path.
const Kernels& active();

inline void axpy(float a, const float* x, float* y, std::size_t n) {
  active().axpy(a, x, y, n);
}
inline void mul_acc(const float* x, const float* z, float* y, std::size_t n) {
  active().mul_acc(x, z, y, n);
}

}  // namespace simd
}  // namespace convlab

#endif  // CONVLAB_SIMD_HPP_
