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
#include <cstdlib>
#include <cstring>

#include "convlab/simd.hpp"

namespace convlab {
namespace simd {

namespace {

const Kernels& pick() {
  const char* force = std::getenv("CONVLAB_SIMD");
  if (force != nullptr && std::strcmp(force, "scalar") == 0) return kScalar;
#if defined(__x86_64__) || defined(_M_X64)
  if (force != nullptr && std::strcmp(force, "avx2") == 0) return kAvx2;
  if (__builtin_cpu_supports("avx2")) return kAvx2;
#endif
  return kScalar;
}

}  // namespace

const Kernels& active() {
  static const Kernels& k = pick();
  return k;
}

}  // namespace simd
}  // namespace convlab
