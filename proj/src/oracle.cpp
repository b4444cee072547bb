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
#include "convlab/oracle.hpp"

namespace convlab {

OracleResult oracle_conv(const Tensor& input, const Tensor& filters,
                         const ConvShape& shape) {
  shape.validate();
  if (input.layout() != Layout::CHW) {
    throw LayoutError("oracle_conv expects CHW input");
  }
  if (filters.layout() != Layout::KCRS) {
    throw LayoutError("oracle_conv expects KCRS filters");
  }
  if (input.dim(0) != shape.in_channels || input.dim(1) != shape.height ||
      input.dim(2) != shape.width) {
    throw ShapeError("input extents do not match ConvShape");
  }
  if (filters.dim(0) != shape.out_channels ||
      filters.dim(1) != shape.in_channels ||
      filters.dim(2) != shape.filter_h || filters.dim(3) != shape.filter_w) {
    throw ShapeError("filter extents do not match ConvShape");
  }

  const auto [oh, ow] = shape.output_shape();
  Tensor out = Tensor::chw(shape.out_channels, oh, ow);
  std::uint64_t macs = 0;

  for (int k = 0; k < shape.out_channels; ++k) {
    for (int y = 0; y < oh; ++y) {
      for (int x = 0; x < ow; ++x) {
        double acc = 0.0;
        for (int c = 0; c < shape.in_channels; ++c) {
          for (int r = 0; r < shape.filter_h; ++r) {
            for (int s = 0; s < shape.filter_w; ++s) {
              const int iy = y * shape.stride + r - shape.pad;
              const int ix = x * shape.stride + s - shape.pad;
              ++macs;
              if (iy < 0 || iy >= shape.height || ix < 0 || ix >= shape.width) {
                continue;  // zero padding
              }
              acc += static_cast<double>(input.at(c, iy, ix)) *
                     static_cast<double>(filters.at(k, c, r, s));
            }
          }
        }
        out.at(k, y, x) = static_cast<float>(acc);
      }
    }
  }
  return OracleResult{std::move(out), macs};
}

}  // namespace convlab
