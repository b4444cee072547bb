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
#ifndef CONVLAB_ORACLE_HPP_
#define CONVLAB_ORACLE_HPP_

#include <cstdint>

#include "convlab/tensor.hpp"

namespace convlab {

struct OracleResult {
  Tensor output;            // CHW over K output channels, OH x OW
  std::uint64_t mac_count;  // exactly K*OH*OW*C*R*S
};

// Trivially correct sliding-window convolution, used as ground truth for
// every other algorithm in the lab. Accumulates in double so it is strictly
// more accurate than the fp32 kernels it judges. Deliberately unoptimized.
//
//   output[k][y][x] = sum_{c,r,s} input[c][y*stride+r-pad][x*stride+s-pad]
//                                 * filters[k][c][r][s]
//
// with out-of-bounds input reads taken as zero.
OracleResult oracle_conv(const Tensor& input, const Tensor& filters,
                         const ConvShape& shape);

}  // namespace convlab

#endif  // CONVLAB_ORACLE_HPP_
