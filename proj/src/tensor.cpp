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
#include "convlab/tensor.hpp"

#include <numeric>
#include <sstream>

namespace convlab {

void ConvShape::validate() const {
  if (in_channels < 1 || out_channels < 1 || height < 1 || width < 1 ||
      filter_h < 1 || filter_w < 1) {
    throw ShapeError("all extents must be >= 1");
  }
  if (pad < 0) throw ShapeError("pad must be >= 0");
  if (stride < 1) throw ShapeError("stride must be >= 1");
  (void)output_shape();
}

std::pair<int, int> ConvShape::output_shape() const {
  const int span_h = height + 2 * pad - filter_h;
  const int span_w = width + 2 * pad - filter_w;
  if (span_h < 0 || span_w < 0) {
    throw ShapeError("filter larger than padded input");
  }
  if (span_h % stride != 0 || span_w % stride != 0) {
    throw ShapeError("output extent is not an integer (stride does not divide)");
  }
  return {span_h / stride + 1, span_w / stride + 1};
}

const char* layout_name(Layout l) {
  switch (l) {
    case Layout::CHW: return "CHW";
    case Layout::KCRS: return "KCRS";
    case Layout::CRSK: return "CRSK";
    case Layout::ROWMAJOR: return "ROWMAJOR";
  }
  return "?";
}

Tensor::Tensor(Layout layout, std::array<int, 4> dims, int rank)
    : layout_(layout), dims_(dims), rank_(rank) {
  std::int64_t n = 1;
  for (int i = 0; i < rank_; ++i) {
    if (dims_[i] < 1) throw ShapeError("tensor extent must be >= 1");
    n *= dims_[i];
  }
  data_.assign(static_cast<std::size_t>(n), 0.0f);
}

Tensor Tensor::chw(int c, int h, int w) {
  return Tensor(Layout::CHW, {c, h, w, 1}, 3);
}
Tensor Tensor::kcrs(int k, int c, int r, int s) {
  return Tensor(Layout::KCRS, {k, c, r, s}, 4);
}
Tensor Tensor::crsk(int c, int r, int s, int k) {
  return Tensor(Layout::CRSK, {c, r, s, k}, 4);
}
Tensor Tensor::rowmajor(int rows, int cols) {
  return Tensor(Layout::ROWMAJOR, {rows, cols, 1, 1}, 2);
}

std::int64_t Tensor::index(int i0, int i1, int i2, int i3) const {
  std::int64_t idx = i0;
  for (int d = 1; d < rank_; ++d) {
    idx = idx * dims_[d] + (d == 1 ? i1 : d == 2 ? i2 : i3);
  }
  return idx;
}

Tensor convert_layout(const Tensor& t, Layout target) {
  if (t.layout() == target) return t;

  if (t.layout() == Layout::KCRS && target == Layout::CRSK) {
    const int k = t.dim(0), c = t.dim(1), r = t.dim(2), s = t.dim(3);
    Tensor out = Tensor::crsk(c, r, s, k);
    for (int ik = 0; ik < k; ++ik)
      for (int ic = 0; ic < c; ++ic)
        for (int ir = 0; ir < r; ++ir)
          for (int is = 0; is < s; ++is)
            out.at(ic, ir, is, ik) = t.at(ik, ic, ir, is);
    return out;
  }
  if (t.layout() == Layout::CRSK && target == Layout::KCRS) {
    const int c = t.dim(0), r = t.dim(1), s = t.dim(2), k = t.dim(3);
    Tensor out = Tensor::kcrs(k, c, r, s);
    for (int ic = 0; ic < c; ++ic)
      for (int ir = 0; ir < r; ++ir)
        for (int is = 0; is < s; ++is)
          for (int ik = 0; ik < k; ++ik)
            out.at(ik, ic, ir, is) = t.at(ic, ir, is, ik);
    return out;
  }
  if (t.layout() == Layout::ROWMAJOR && target == Layout::ROWMAJOR) {
    return t;
  }
  throw LayoutError(std::string("unsupported conversion ") +
                    layout_name(t.layout()) + " -> " + layout_name(target));
}

const char* algo_name(AlgoKind a) {
  switch (a) {
    case AlgoKind::oracle: return "oracle";
    case AlgoKind::im2col: return "im2col";
    case AlgoKind::fused_unroll: return "fused_unroll";
    case AlgoKind::winograd: return "winograd";
    case AlgoKind::direct_cache: return "direct_cache";
    case AlgoKind::direct_nocache: return "direct_nocache";
    case AlgoKind::ilpm: return "ilpm";
  }
  return "?";
}

AlgoKind algo_from_name(const std::string& name) {
  for (AlgoKind a :
       {AlgoKind::oracle, AlgoKind::im2col, AlgoKind::fused_unroll,
        AlgoKind::winograd, AlgoKind::direct_cache, AlgoKind::direct_nocache,
        AlgoKind::ilpm}) {
    if (name == algo_name(a)) return a;
  }
  throw ConfigError("unknown algorithm: " + name);
}

void AlgoConfig::validate(const ConvShape& shape) const {
  shape.validate();
  if (tile_x < 1 || tile_y < 1) throw ConfigError("tile extents must be >= 1");
  switch (algorithm) {
    case AlgoKind::direct_cache:
    case AlgoKind::direct_nocache: {
      if (out_channels_per_thread < 1 ||
          shape.out_channels % out_channels_per_thread != 0) {
        throw ConfigError("out_channels_per_thread must divide K");
      }
      break;
    }
    case AlgoKind::im2col:
    case AlgoKind::fused_unroll:
    case AlgoKind::winograd: {
      if (gemm_tile_m < 1 || gemm_tile_n < 1 || gemm_tile_k < 1) {
        throw ConfigError("gemm tiles must be >= 1");
      }
      break;
    }
    default:
      break;
  }
  if (algorithm == AlgoKind::winograd) {
    if (shape.filter_h != 3 || shape.filter_w != 3 || shape.pad != 1 ||
        shape.stride != 1) {
      throw ConfigError("winograd F(2x2,3x3) requires R=S=3, pad=1, stride=1");
    }
  }
}

std::string AlgoConfig::describe() const {
  std::ostringstream os;
  os << algo_name(algorithm);
  switch (algorithm) {
    case AlgoKind::direct_cache:
    case AlgoKind::direct_nocache:
      os << " tile=" << tile_x << "x" << tile_y
         << " ocpt=" << out_channels_per_thread
         << " cache_filter=" << (cache_filter ? 1 : 0);
      break;
    case AlgoKind::ilpm:
      os << " tile=" << tile_x << "x" << tile_y
         << " transpose_output=" << (transpose_output ? 1 : 0);
      break;
    case AlgoKind::fused_unroll:
      os << " tile=" << tile_x << "x" << tile_y << " tm=" << gemm_tile_m;
      break;
    case AlgoKind::im2col:
    case AlgoKind::winograd:
      os << " gemm=" << gemm_tile_m << "/" << gemm_tile_n << "/" << gemm_tile_k;
      break;
    default:
      break;
  }
  return os.str();
}

}  // namespace convlab
