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
#ifndef CONVLAB_TENSOR_HPP_
#define CONVLAB_TENSOR_HPP_

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "convlab/common.hpp"

namespace convlab {

// Single-image convolution problem description.
//
// Spatial size is H x W, the filter is R x S, zero padding of `pad` pixels on
// every side, uniform stride. Output extents must divide exactly; a geometry
// where (H + 2*pad - R) is not a multiple of the stride is rejected instead
// of floored so that shape bugs surface immediately.
struct ConvShape {
  int in_channels = 1;   // C
  int out_channels = 1;  // K
  int height = 1;        // H
  int width = 1;         // W
  int filter_h = 3;      // R
  int filter_w = 3;      // S
  int pad = 1;
  int stride = 1;

  void validate() const;
  // Returns (OH, OW); throws ShapeError on invalid geometry.
  std::pair<int, int> output_shape() const;

  std::int64_t input_elems() const {
    return static_cast<std::int64_t>(in_channels) * height * width;
  }
  std::int64_t filter_elems() const {
    return static_cast<std::int64_t>(out_channels) * in_channels * filter_h * filter_w;
  }
  std::int64_t output_elems() const {
    auto [oh, ow] = output_shape();
    return static_cast<std::int64_t>(out_channels) * oh * ow;
  }
};

// Dense tensor layouts used by the lab.
//   CHW      single-image feature map, channel major
//   KCRS     standard filter bank (output channel major)
//   CRSK     filter bank reorganized for coalesced per-channel reads
//   ROWMAJOR generic 2-D matrix
enum class Layout { CHW, KCRS, CRSK, ROWMAJOR };

const char* layout_name(Layout l);

// Dense fp32 tensor with an explicit layout tag. Values are immutable by
// convention once built (the lab treats tensors as values); mutation is only
// exposed through at() for construction code.
class Tensor {
 public:
  Tensor() = default;

  static Tensor chw(int c, int h, int w);
  static Tensor kcrs(int k, int c, int r, int s);
  static Tensor crsk(int c, int r, int s, int k);
  static Tensor rowmajor(int rows, int cols);

  Layout layout() const { return layout_; }
  int rank() const { return rank_; }
  int dim(int i) const { return dims_[i]; }
  std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }

  const std::vector<float>& data() const { return data_; }
  std::vector<float>& data() { return data_; }

  // Flat index in layout order.
  std::int64_t index(int i0, int i1 = 0, int i2 = 0, int i3 = 0) const;

  float at(int i0, int i1 = 0, int i2 = 0, int i3 = 0) const {
    return data_[index(i0, i1, i2, i3)];
  }
  float& at(int i0, int i1 = 0, int i2 = 0, int i3 = 0) {
    return data_[index(i0, i1, i2, i3)];
  }

  void fill_random(Rng& rng) {
    for (float& v : data_) v = rng.next_float();
  }

  bool same_extents(const Tensor& other) const {
    return rank_ == other.rank_ && dims_ == other.dims_;
  }

 private:
  Tensor(Layout layout, std::array<int, 4> dims, int rank);

  Layout layout_ = Layout::ROWMAJOR;
  std::array<int, 4> dims_ = {1, 1, 1, 1};
  int rank_ = 0;
  std::vector<float> data_;
};

// Lossless layout conversion. Supported pairs: KCRS <-> CRSK (filter bank
// reorganization) and ROWMAJOR <-> ROWMAJOR (matrix transpose). Anything
// else is a LayoutError.
Tensor convert_layout(const Tensor& t, Layout target);

// Convolution strategies implemented by the lab.
enum class AlgoKind {
  oracle,
  im2col,
  fused_unroll,
  winograd,
  direct_cache,
  direct_nocache,
  ilpm,
};

const char* algo_name(AlgoKind a);
AlgoKind algo_from_name(const std::string& name);

// Per-algorithm tuning knobs. Only the fields relevant to the chosen
// algorithm are consulted:
//   tile_x/tile_y            output-pixel tile per workgroup (direct, ilpm,
//                            fused unroll)
//   out_channels_per_thread  direct variants, must divide K
//   gemm_tile_*              GEMM-based algorithms (square staging tiles)
//   cache_filter             direct: stage filters through shared memory
//   transpose_output         ilpm: stage the output through shared memory so
//                            the global write is coalesced
struct AlgoConfig {
  AlgoKind algorithm = AlgoKind::ilpm;
  int tile_x = 14;
  int tile_y = 14;
  int out_channels_per_thread = 1;
  int gemm_tile_m = 16;
  int gemm_tile_n = 16;
  int gemm_tile_k = 16;
  bool cache_filter = true;
  bool transpose_output = false;

  // Machine-independent validation; throws ConfigError.
  void validate(const ConvShape& shape) const;

  // Deterministic short description, used in tuner audit rows.
  std::string describe() const;
};

}  // namespace convlab

#endif  // CONVLAB_TENSOR_HPP_
