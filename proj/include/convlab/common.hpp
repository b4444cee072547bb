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
#ifndef CONVLAB_COMMON_HPP_
#define CONVLAB_COMMON_HPP_

#include <cstdint>
#include <stdexcept>
#include <string>

namespace convlab {

// Error taxonomy. The CLI maps these onto exit codes: usage errors -> 2,
// resource/launch errors -> 3, everything else that escapes -> 1.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& msg) : Error("shape error: " + msg) {}
};

class LayoutError : public Error {
 public:
  explicit LayoutError(const std::string& msg) : Error("layout error: " + msg) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& msg) : Error("config error: " + msg) {}
};

// A kernel that does not fit the machine (shared memory, registers,
// workgroup size) fails at launch, mirroring a real driver error.
class LaunchError : public Error {
 public:
  explicit LaunchError(const std::string& msg) : Error("launch error: " + msg) {}
};

// Deterministic RNG. Test vectors and golden files depend on the stream, so
// this is a fixed splitmix64 rather than an unspecified std:: distribution.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Uniform in [-1, 1).
  float next_float() {
    return static_cast<float>(next_u64() >> 40) * (2.0f / 16777216.0f) - 1.0f;
  }

  // Uniform integer in [0, n).
  std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

 private:
  std::uint64_t state_;
};

}  // namespace convlab

#endif  // CONVLAB_COMMON_HPP_
