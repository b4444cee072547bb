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
#ifndef CONVLAB_ALGOS_HPP_
#define CONVLAB_ALGOS_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "convlab/tensor.hpp"

namespace convlab {

// Threads per workgroup the machine model accepts. Mirrors the common 256
// limit; the simulator re-validates against the actual MachineConfig.
inline constexpr int kMaxWorkgroupThreads = 256;

// Lane width used by the analytic traffic model where warp granularity
// matters (duplicated broadcast loads). The simulator uses the real
// MachineConfig value instead.
inline constexpr int kAnalyticWarpSize = 32;

inline constexpr int ceil_div(int a, int b) { return (a + b - 1) / b; }

// Analytic operation counts. These are exact integers derived from shape and
// config (never measured), assuming 4 bytes per global element access before
// any coalescing; coalescing and caching are modeled only by the simulator.
struct OpCounts {
  std::uint64_t multiplies = 0;
  std::uint64_t adds = 0;
  std::uint64_t global_read_bytes = 0;
  std::uint64_t global_write_bytes = 0;
};

struct AlgoResult {
  Tensor output;  // CHW, K x OH x OW
  OpCounts counts;
};

// ---------------------------------------------------------------------------
// Workgroup geometries shared by the host algorithms, the kernel lowerings
// and the analytic traffic model.

// ILP-M: threads are output channels; each thread walks a tile_y x tile_x
// pixel tile. wg_threads is the largest divisor of K that fits a workgroup.
struct IlpmGeom {
  int wg_threads;
  int channel_blocks;  // K / wg_threads
  int tiles_x, tiles_y;
  int halo_x, halo_y;  // staged input tile extents (tile + R-1)
};
IlpmGeom ilpm_geom(const ConvShape& shape, const AlgoConfig& cfg);

// Direct convolution: threads are output pixels of a tile_y x tile_x tile;
// each workgroup handles out_channels_per_thread output channels.
struct DirectGeom {
  int threads;  // tile_x * tile_y
  int tiles_x, tiles_y;
  int channel_blocks;  // K / out_channels_per_thread
  int halo_x, halo_y;
};
DirectGeom direct_geom(const ConvShape& shape, const AlgoConfig& cfg);

// Fused unroll (libdnn style): a workgroup owns one output row segment of
// tile_x pixels across gemm_tile_m output channels; the unrolled tile is
// built on the fly in shared memory, once per (row segment, channel block).
struct FusedGeom {
  int xblocks;        // ceil(OW / tile_x)
  int rows;           // OH (one output row per workgroup slot)
  int kblocks;        // ceil(K / gemm_tile_m)
  int threads_x;      // tile_x
  int threads_y;      // gemm_tile_m
};
FusedGeom fused_geom(const ConvShape& shape, const AlgoConfig& cfg);

// ---------------------------------------------------------------------------
// im2col + GEMM

struct UnrolledMatrix {
  Tensor matrix;        // (C*R*S) x (OH*OW), ROWMAJOR
  std::uint64_t bytes;  // rows * cols * 4
};

// Unrolls convolution windows into matrix columns; padded taps become zeros.
UnrolledMatrix im2col_unroll(const Tensor& input, const ConvShape& shape);

// Tiled GEMM, C = A * B. Accumulation is k-innermost per output element, so
// the result is bit-identical for every tile choice.
Tensor gemm(const Tensor& a, const Tensor& b, int tile_m, int tile_n,
            int tile_k);

AlgoResult im2col_conv(const Tensor& input, const Tensor& filters,
                       const ConvShape& shape, const AlgoConfig& cfg);

AlgoResult fused_unroll_conv(const Tensor& input, const Tensor& filters,
                             const ConvShape& shape, const AlgoConfig& cfg);

// ---------------------------------------------------------------------------
// Winograd F(2x2, 3x3)

// Transformation matrices with exact small-rational entries and the tile
// grid for a shape. The correctness identity
//   AT * [(G g GT) .* (BT d BT^T)] * AT^T == valid 2x2 conv of d with g
// is checked by the tests for random g, d.
struct WinogradPlan {
  static constexpr int kTileOut = 2;     // m
  static constexpr int kFilter = 3;      // r
  static constexpr int kTileIn = 4;      // m + r - 1
  static const float kBT[4][4];
  static const float kG[4][3];
  static const float kAT[2][4];

  int tiles_y = 0, tiles_x = 0;

  static WinogradPlan for_shape(const ConvShape& shape);
};

void winograd_filter_transform(const float g[9], float u[16]);   // U = G g GT
void winograd_input_transform(const float d[16], float v[16]);   // V = BT d BT^T
void winograd_output_transform(const float m[16], float out[4]); // AT m AT^T

AlgoResult winograd_conv(const Tensor& input, const Tensor& filters,
                         const ConvShape& shape, const AlgoConfig& cfg);

// ---------------------------------------------------------------------------
// Direct convolution (Algorithm "cache filter" / "no cache filter" variants)

AlgoResult direct_conv(const Tensor& input, const Tensor& filters,
                       const ConvShape& shape, const AlgoConfig& cfg);

// ---------------------------------------------------------------------------
// ILP-M convolution. Filters must be in CRSK layout.

AlgoResult ilpm_conv(const Tensor& input, const Tensor& filters,
                     const ConvShape& shape, const AlgoConfig& cfg);

// Analytic read split for ILP-M (filters are read exactly once per pixel
// tile; the image tile is staged once per workgroup, halo included).
struct IlpmReads {
  std::uint64_t filter_bytes;
  std::uint64_t image_bytes;
};
IlpmReads ilpm_analytic_reads(const ConvShape& shape, const AlgoConfig& cfg);

// ---------------------------------------------------------------------------
// Dispatch and per-kernel analytic traffic (full-scale, Table-style rows).

AlgoResult run_algorithm(const AlgoConfig& cfg, const Tensor& input,
                         const Tensor& filters_kcrs, const ConvShape& shape);

struct StageTraffic {
  std::string stage;  // kernel name, matches the lowering's stage names
  std::uint64_t read_bytes = 0;
  std::uint64_t write_bytes = 0;
  std::uint64_t multiplies = 0;
};
std::vector<StageTraffic> analytic_stage_traffic(const AlgoConfig& cfg,
                                                 const ConvShape& shape);

}  // namespace convlab

#endif  // CONVLAB_ALGOS_HPP_
