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
#include <string>
#include <vector>

#include "convlab/common.hpp"
#include "convlab/simd.hpp"
#include "doctest.h"

using namespace convlab;

namespace {

void run_equivalence(const simd::Kernels& a, const simd::Kernels& b) {
  Rng rng(2024);
  // Odd sizes exercise the vector tails.
  for (std::size_t n : {std::size_t{1}, std::size_t{7}, std::size_t{8},
                        std::size_t{9}, std::size_t{64}, std::size_t{1003}}) {
    std::vector<float> x(n), z(n), y1(n), y2(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = rng.next_float();
      z[i] = rng.next_float();
      y1[i] = rng.next_float();
      y2[i] = y1[i];
    }
    const float alpha = rng.next_float();
    a.axpy(alpha, x.data(), y1.data(), n);
    b.axpy(alpha, x.data(), y2.data(), n);
    for (std::size_t i = 0; i < n; ++i) CHECK(y1[i] == y2[i]);

    a.mul_acc(x.data(), z.data(), y1.data(), n);
    b.mul_acc(x.data(), z.data(), y2.data(), n);
    for (std::size_t i = 0; i < n; ++i) CHECK(y1[i] == y2[i]);
  }
}

}  // namespace

TEST_CASE("scalar axpy reference values") {
  std::vector<float> x = {1.0f, 2.0f, 3.0f};
  std::vector<float> y = {10.0f, 20.0f, 30.0f};
  simd::kScalar.axpy(2.0f, x.data(), y.data(), 3);
  CHECK(y[0] == 12.0f);
  CHECK(y[1] == 24.0f);
  CHECK(y[2] == 36.0f);
}

TEST_CASE("active backend is bit-identical to the scalar reference") {
  INFO("active backend: " << simd::active().name);
  run_equivalence(simd::kScalar, simd::active());
}

#if defined(__x86_64__) || defined(_M_X64)
TEST_CASE("avx2 backend is bit-identical to the scalar reference") {
  if (!__builtin_cpu_supports("avx2")) {
    MESSAGE("cpu lacks avx2, skipping");
    return;
  }
  run_equivalence(simd::kScalar, simd::kAvx2);
}
#endif
