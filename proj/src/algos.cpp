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
#include "convlab/algos.hpp"

#include <algorithm>
#include <cstring>

#include "convlab/simd.hpp"

namespace convlab {

namespace {

std::uint64_t input_bytes(const ConvShape& s) {
  return static_cast<std::uint64_t>(s.input_elems()) * 4;
}
std::uint64_t filter_bytes(const ConvShape& s) {
  return static_cast<std::uint64_t>(s.filter_elems()) * 4;
}
std::uint64_t output_bytes(const ConvShape& s) {
  return static_cast<std::uint64_t>(s.output_elems()) * 4;
}

std::uint64_t mac_total(const ConvShape& s) {
  auto [oh, ow] = s.output_shape();
  return static_cast<std::uint64_t>(s.out_channels) * oh * ow * s.in_channels *
         s.filter_h * s.filter_w;
}

// Count of in-bounds input elements inside the staged halo region of the
// output tile [y0, y0+ty) x [x0, x0+tx). Overlapping halos of neighbouring
// tiles are counted once per tile that stages them.
std::uint64_t halo_inbounds(const ConvShape& s, int y0, int x0, int ty, int tx) {
  const int ry0 = y0 * s.stride - s.pad;
  const int ry1 = (y0 + ty - 1) * s.stride - s.pad + s.filter_h;  // exclusive
  const int rx0 = x0 * s.stride - s.pad;
  const int rx1 = (x0 + tx - 1) * s.stride - s.pad + s.filter_w;
  const int rows = std::max(0, std::min(ry1, s.height) - std::max(ry0, 0));
  const int cols = std::max(0, std::min(rx1, s.width) - std::max(rx0, 0));
  return static_cast<std::uint64_t>(rows) * cols;
}

// In-bounds tap count for on-the-fly unrolling of one output row segment:
// sum over (r, s) of valid input positions under outputs
// (oy, x0..x0+tx) clipped to the image.
std::uint64_t unroll_inbounds_row(const ConvShape& s, int oy, int x0, int tx) {
  std::uint64_t n = 0;
  const int xs = std::min(x0 + tx, [&] {
    auto [oh, ow] = s.output_shape();
    (void)oh;
    return ow;
  }());
  for (int r = 0; r < s.filter_h; ++r) {
    const int iy = oy * s.stride + r - s.pad;
    if (iy < 0 || iy >= s.height) continue;
    for (int fs = 0; fs < s.filter_w; ++fs) {
      int cnt = 0;
      for (int x = x0; x < xs; ++x) {
        const int ix = x * s.stride + fs - s.pad;
        if (ix >= 0 && ix < s.width) ++cnt;
      }
      n += cnt;
    }
  }
  return n;
}

// Image zero-extended on all sides: pad border plus whatever the pixel-tile
// grid overruns. Gives the host kernels branch-free inner loops with exactly
// the zeros the lowered kernels see through their guarded loads.
struct PaddedImage {
  std::vector<float> data;
  int rows, cols;  // per channel

  const float* row(int c, int y) const {
    return data.data() + (static_cast<std::int64_t>(c) * rows + y) * cols;
  }
};

PaddedImage pad_image(const Tensor& input, const ConvShape& s, int extra_y,
                      int extra_x) {
  PaddedImage p;
  p.rows = s.height + 2 * s.pad + extra_y;
  p.cols = s.width + 2 * s.pad + extra_x;
  p.data.assign(static_cast<std::size_t>(s.in_channels) * p.rows * p.cols, 0.0f);
  for (int c = 0; c < s.in_channels; ++c) {
    for (int y = 0; y < s.height; ++y) {
      float* dst = p.data.data() +
                   (static_cast<std::int64_t>(c) * p.rows + y + s.pad) * p.cols +
                   s.pad;
      std::memcpy(dst, &input.data()[input.index(c, y, 0)],
                  sizeof(float) * s.width);
    }
  }
  return p;
}

void check_input(const Tensor& input, const ConvShape& s) {
  if (input.layout() != Layout::CHW) throw LayoutError("expected CHW input");
  if (input.dim(0) != s.in_channels || input.dim(1) != s.height ||
      input.dim(2) != s.width) {
    throw ShapeError("input extents do not match ConvShape");
  }
}

void check_filters_kcrs(const Tensor& f, const ConvShape& s) {
  if (f.layout() != Layout::KCRS) throw LayoutError("expected KCRS filters");
  if (f.dim(0) != s.out_channels || f.dim(1) != s.in_channels ||
      f.dim(2) != s.filter_h || f.dim(3) != s.filter_w) {
    throw ShapeError("filter extents do not match ConvShape");
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Geometries

IlpmGeom ilpm_geom(const ConvShape& shape, const AlgoConfig& cfg) {
  auto [oh, ow] = shape.output_shape();
  IlpmGeom g;
  // Largest divisor of K that fits a workgroup: every output channel is owned
  // by exactly one thread, so filters are never loaded twice per pixel tile.
  g.wg_threads = 1;
  for (int d = 1; d <= std::min(shape.out_channels, kMaxWorkgroupThreads); ++d) {
    if (shape.out_channels % d == 0) g.wg_threads = d;
  }
  g.channel_blocks = shape.out_channels / g.wg_threads;
  g.tiles_x = ceil_div(ow, cfg.tile_x);
  g.tiles_y = ceil_div(oh, cfg.tile_y);
  g.halo_x = (cfg.tile_x - 1) * shape.stride + shape.filter_w;
  g.halo_y = (cfg.tile_y - 1) * shape.stride + shape.filter_h;
  return g;
}

DirectGeom direct_geom(const ConvShape& shape, const AlgoConfig& cfg) {
  auto [oh, ow] = shape.output_shape();
  DirectGeom g;
  g.threads = cfg.tile_x * cfg.tile_y;
  if (g.threads > kMaxWorkgroupThreads) {
    throw ConfigError("direct tile exceeds max workgroup size");
  }
  g.tiles_x = ceil_div(ow, cfg.tile_x);
  g.tiles_y = ceil_div(oh, cfg.tile_y);
  g.channel_blocks = shape.out_channels / cfg.out_channels_per_thread;
  g.halo_x = (cfg.tile_x - 1) * shape.stride + shape.filter_w;
  g.halo_y = (cfg.tile_y - 1) * shape.stride + shape.filter_h;
  return g;
}

FusedGeom fused_geom(const ConvShape& shape, const AlgoConfig& cfg) {
  auto [oh, ow] = shape.output_shape();
  FusedGeom g;
  g.xblocks = ceil_div(ow, cfg.tile_x);
  g.rows = oh;
  g.kblocks = ceil_div(shape.out_channels, cfg.gemm_tile_m);
  g.threads_x = cfg.tile_x;
  g.threads_y = cfg.gemm_tile_m;
  if (g.threads_x * g.threads_y > kMaxWorkgroupThreads) {
    throw ConfigError("fused tile_x * gemm_tile_m exceeds max workgroup size");
  }
  return g;
}

// ---------------------------------------------------------------------------
// im2col + GEMM

UnrolledMatrix im2col_unroll(const Tensor& input, const ConvShape& shape) {
  shape.validate();
  check_input(input, shape);
  auto [oh, ow] = shape.output_shape();
  const int rows = shape.in_channels * shape.filter_h * shape.filter_w;
  const int cols = oh * ow;
  Tensor m = Tensor::rowmajor(rows, cols);
  for (int c = 0; c < shape.in_channels; ++c) {
    for (int r = 0; r < shape.filter_h; ++r) {
      for (int s = 0; s < shape.filter_w; ++s) {
        const int row = (c * shape.filter_h + r) * shape.filter_w + s;
        for (int oy = 0; oy < oh; ++oy) {
          for (int ox = 0; ox < ow; ++ox) {
            const int iy = oy * shape.stride + r - shape.pad;
            const int ix = ox * shape.stride + s - shape.pad;
            float v = 0.0f;
            if (iy >= 0 && iy < shape.height && ix >= 0 && ix < shape.width) {
              v = input.at(c, iy, ix);
            }
            m.at(row, oy * ow + ox) = v;
          }
        }
      }
    }
  }
  const std::uint64_t bytes = static_cast<std::uint64_t>(rows) * cols * 4;
  return UnrolledMatrix{std::move(m), bytes};
}

Tensor gemm(const Tensor& a, const Tensor& b, int tile_m, int tile_n,
            int tile_k) {
  if (a.layout() != Layout::ROWMAJOR || b.layout() != Layout::ROWMAJOR) {
    throw LayoutError("gemm expects ROWMAJOR operands");
  }
  const int m = a.dim(0), kd = a.dim(1);
  const int n = b.dim(1);
  if (b.dim(0) != kd) throw ShapeError("gemm inner dimensions do not match");
  if (tile_m < 1 || tile_n < 1 || tile_k < 1) {
    throw ConfigError("gemm tiles must be >= 1");
  }

  Tensor c = Tensor::rowmajor(m, n);
  const float* pa = a.data().data();
  const float* pb = b.data().data();
  float* pc = c.data().data();

  for (int i0 = 0; i0 < m; i0 += tile_m) {
    const int il = std::min(tile_m, m - i0);
    for (int j0 = 0; j0 < n; j0 += tile_n) {
      const int jl = std::min(tile_n, n - j0);
      // k ascending per output element regardless of tiling.
      for (int k0 = 0; k0 < kd; k0 += tile_k) {
        const int kl = std::min(tile_k, kd - k0);
        for (int i = i0; i < i0 + il; ++i) {
          for (int k = k0; k < k0 + kl; ++k) {
            simd::axpy(pa[static_cast<std::int64_t>(i) * kd + k],
                       pb + static_cast<std::int64_t>(k) * n + j0,
                       pc + static_cast<std::int64_t>(i) * n + j0, jl);
          }
        }
      }
    }
  }
  return c;
}

AlgoResult im2col_conv(const Tensor& input, const Tensor& filters,
                       const ConvShape& shape, const AlgoConfig& cfg) {
  cfg.validate(shape);
  check_input(input, shape);
  check_filters_kcrs(filters, shape);
  auto [oh, ow] = shape.output_shape();
  const int crs = shape.in_channels * shape.filter_h * shape.filter_w;

  UnrolledMatrix um = im2col_unroll(input, shape);

  // KCRS filter data is already a flat K x (C*R*S) row-major matrix.
  Tensor a = Tensor::rowmajor(shape.out_channels, crs);
  a.data() = filters.data();
  Tensor prod = gemm(a, um.matrix, cfg.gemm_tile_m, cfg.gemm_tile_n,
                     cfg.gemm_tile_k);

  Tensor out = Tensor::chw(shape.out_channels, oh, ow);
  out.data() = prod.data();  // K x (OH*OW) row-major == CHW flat order

  AlgoResult res{std::move(out), {}};
  res.counts.multiplies = mac_total(shape);
  res.counts.adds = mac_total(shape);
  res.counts.global_write_bytes = um.bytes + output_bytes(shape);
  res.counts.global_read_bytes =
      input_bytes(shape) +
      um.bytes * ceil_div(shape.out_channels, cfg.gemm_tile_m) +
      filter_bytes(shape) * ceil_div(oh * ow, cfg.gemm_tile_n);
  return res;
}

AlgoResult fused_unroll_conv(const Tensor& input, const Tensor& filters,
                             const ConvShape& shape, const AlgoConfig& cfg) {
  cfg.validate(shape);
  check_input(input, shape);
  check_filters_kcrs(filters, shape);
  const FusedGeom g = fused_geom(shape, cfg);
  auto [oh, ow] = shape.output_shape();
  const int tm = cfg.gemm_tile_m;
  const int rs_count = shape.filter_h * shape.filter_w;

  Tensor out = Tensor::chw(shape.out_channels, oh, ow);
  std::vector<float> b_tile(static_cast<std::size_t>(rs_count) * cfg.tile_x);
  std::vector<float> acc(static_cast<std::size_t>(tm) * cfg.tile_x);

  for (int kb = 0; kb < g.kblocks; ++kb) {
    for (int oy = 0; oy < oh; ++oy) {
      for (int xb = 0; xb < g.xblocks; ++xb) {
        const int x0 = xb * cfg.tile_x;
        const int xl = std::min(cfg.tile_x, ow - x0);
        const int ml = std::min(tm, shape.out_channels - kb * tm);
        std::fill(acc.begin(), acc.end(), 0.0f);
        for (int c = 0; c < shape.in_channels; ++c) {
          // Unroll the tile of the input matrix on the fly (zeros where
          // padded), exactly what the fused kernel stages in shared memory.
          for (int r = 0; r < shape.filter_h; ++r) {
            for (int s = 0; s < shape.filter_w; ++s) {
              const int iy = oy * shape.stride + r - shape.pad;
              float* row = &b_tile[static_cast<std::size_t>(
                  (r * shape.filter_w + s)) * cfg.tile_x];
              for (int x = 0; x < xl; ++x) {
                const int ix = (x0 + x) * shape.stride + s - shape.pad;
                row[x] = (iy >= 0 && iy < shape.height && ix >= 0 &&
                          ix < shape.width)
                             ? input.at(c, iy, ix)
                             : 0.0f;
              }
            }
          }
          for (int rs = 0; rs < rs_count; ++rs) {
            for (int mm = 0; mm < ml; ++mm) {
              const int k = kb * tm + mm;
              const float w = filters.data()[static_cast<std::int64_t>(k) * shape.in_channels * rs_count +
                                             c * rs_count + rs];
              simd::axpy(w, &b_tile[static_cast<std::size_t>(rs) * cfg.tile_x],
                         &acc[static_cast<std::size_t>(mm) * cfg.tile_x], xl);
            }
          }
        }
        for (int mm = 0; mm < ml; ++mm) {
          const int k = kb * tm + mm;
          std::memcpy(&out.at(k, oy, x0), &acc[static_cast<std::size_t>(mm) * cfg.tile_x],
                      sizeof(float) * xl);
        }
      }
    }
  }

  AlgoResult res{std::move(out), {}};
  res.counts.multiplies = mac_total(shape);
  res.counts.adds = mac_total(shape);
  res.counts.global_write_bytes = output_bytes(shape);
  // Filters staged once per workgroup; the same input tile is unrolled again
  // by every channel block that needs it.
  std::uint64_t unroll_reads = 0;
  for (int oy = 0; oy < oh; ++oy) {
    for (int xb = 0; xb < g.xblocks; ++xb) {
      unroll_reads += unroll_inbounds_row(shape, oy, xb * cfg.tile_x, cfg.tile_x);
    }
  }
  unroll_reads *= static_cast<std::uint64_t>(shape.in_channels) * g.kblocks;
  res.counts.global_read_bytes =
      filter_bytes(shape) * (static_cast<std::uint64_t>(oh) * g.xblocks) +
      unroll_reads * 4;
  return res;
}

// ---------------------------------------------------------------------------
// Winograd F(2x2, 3x3)

const float WinogradPlan::kBT[4][4] = {
    {1, 0, -1, 0}, {0, 1, 1, 0}, {0, -1, 1, 0}, {0, 1, 0, -1}};
const float WinogradPlan::kG[4][3] = {
    {1, 0, 0}, {0.5f, 0.5f, 0.5f}, {0.5f, -0.5f, 0.5f}, {0, 0, 1}};
const float WinogradPlan::kAT[2][4] = {{1, 1, 1, 0}, {0, 1, -1, -1}};

WinogradPlan WinogradPlan::for_shape(const ConvShape& shape) {
  if (shape.filter_h != 3 || shape.filter_w != 3 || shape.pad != 1 ||
      shape.stride != 1) {
    throw ConfigError("winograd plan requires R=S=3, pad=1, stride=1");
  }
  auto [oh, ow] = shape.output_shape();
  WinogradPlan p;
  p.tiles_y = ceil_div(oh, kTileOut);
  p.tiles_x = ceil_div(ow, kTileOut);
  return p;
}

void winograd_filter_transform(const float g[9], float u[16]) {
  // G g: 4x3
  float t[12];
  for (int j = 0; j < 3; ++j) {
    const float g0 = g[0 * 3 + j], g1 = g[1 * 3 + j], g2 = g[2 * 3 + j];
    t[0 * 3 + j] = g0;
    t[1 * 3 + j] = ((g0 + g1) + g2) * 0.5f;
    t[2 * 3 + j] = ((g0 - g1) + g2) * 0.5f;
    t[3 * 3 + j] = g2;
  }
  // (G g) G^T: 4x4
  for (int i = 0; i < 4; ++i) {
    const float a = t[i * 3 + 0], b = t[i * 3 + 1], c = t[i * 3 + 2];
    u[i * 4 + 0] = a;
    u[i * 4 + 1] = ((a + b) + c) * 0.5f;
    u[i * 4 + 2] = ((a - b) + c) * 0.5f;
    u[i * 4 + 3] = c;
  }
}

void winograd_input_transform(const float d[16], float v[16]) {
  // BT d: 4x4, every element one signed add
  float w[16];
  for (int j = 0; j < 4; ++j) {
    w[0 * 4 + j] = d[0 * 4 + j] - d[2 * 4 + j];
    w[1 * 4 + j] = d[1 * 4 + j] + d[2 * 4 + j];
    w[2 * 4 + j] = d[2 * 4 + j] - d[1 * 4 + j];
    w[3 * 4 + j] = d[1 * 4 + j] - d[3 * 4 + j];
  }
  // (BT d) BT^T
  for (int i = 0; i < 4; ++i) {
    v[i * 4 + 0] = w[i * 4 + 0] - w[i * 4 + 2];
    v[i * 4 + 1] = w[i * 4 + 1] + w[i * 4 + 2];
    v[i * 4 + 2] = w[i * 4 + 2] - w[i * 4 + 1];
    v[i * 4 + 3] = w[i * 4 + 1] - w[i * 4 + 3];
  }
}

void winograd_output_transform(const float m[16], float out[4]) {
  // AT m: 2x4, rows have three taps -> two adds each
  float w[8];
  for (int j = 0; j < 4; ++j) {
    w[0 * 4 + j] = (m[0 * 4 + j] + m[1 * 4 + j]) + m[2 * 4 + j];
    w[1 * 4 + j] = (m[1 * 4 + j] - m[2 * 4 + j]) - m[3 * 4 + j];
  }
  for (int i = 0; i < 2; ++i) {
    out[i * 2 + 0] = (w[i * 4 + 0] + w[i * 4 + 1]) + w[i * 4 + 2];
    out[i * 2 + 1] = (w[i * 4 + 1] - w[i * 4 + 2]) - w[i * 4 + 3];
  }
}

AlgoResult winograd_conv(const Tensor& input, const Tensor& filters,
                         const ConvShape& shape, const AlgoConfig& cfg) {
  cfg.validate(shape);
  check_input(input, shape);
  check_filters_kcrs(filters, shape);
  const WinogradPlan plan = WinogradPlan::for_shape(shape);
  auto [oh, ow] = shape.output_shape();
  const int C = shape.in_channels, K = shape.out_channels;
  const int T = plan.tiles_y * plan.tiles_x;

  // Zero-extend the input so every 4x4 patch read is branch-free; edge tiles
  // are handled by padding to a tile multiple and cropping the output.
  const int extra_y = plan.tiles_y * 2 - oh;
  const int extra_x = plan.tiles_x * 2 - ow;
  const PaddedImage img = pad_image(input, shape, extra_y, extra_x);

  // V[p][c][t] : transformed input, plane-major (the layout the 16 GEMM
  // kernels consume).
  std::vector<float> v(static_cast<std::size_t>(16) * C * T);
  for (int c = 0; c < C; ++c) {
    for (int tyi = 0; tyi < plan.tiles_y; ++tyi) {
      for (int txi = 0; txi < plan.tiles_x; ++txi) {
        float d[16], vt[16];
        for (int i = 0; i < 4; ++i) {
          const float* row = img.row(c, tyi * 2 + i);
          for (int j = 0; j < 4; ++j) d[i * 4 + j] = row[txi * 2 + j];
        }
        winograd_input_transform(d, vt);
        const int t = tyi * plan.tiles_x + txi;
        for (int p = 0; p < 16; ++p) {
          v[(static_cast<std::size_t>(p) * C + c) * T + t] = vt[p];
        }
      }
    }
  }

  // U[p][k][c] : transformed filters (computed offline for inference, so the
  // transform itself is not part of the kernel cost model).
  std::vector<float> u(static_cast<std::size_t>(16) * K * C);
  for (int k = 0; k < K; ++k) {
    for (int c = 0; c < C; ++c) {
      float ut[16];
      winograd_filter_transform(&filters.data()[filters.index(k, c, 0, 0)], ut);
      for (int p = 0; p < 16; ++p) {
        u[(static_cast<std::size_t>(p) * K + k) * C + c] = ut[p];
      }
    }
  }

  // 16 independent GEMMs: M[p] = U[p] (KxC) * V[p] (CxT), c ascending.
  std::vector<float> mm(static_cast<std::size_t>(16) * K * T, 0.0f);
  for (int p = 0; p < 16; ++p) {
    const float* up = &u[static_cast<std::size_t>(p) * K * C];
    const float* vp = &v[static_cast<std::size_t>(p) * C * T];
    float* mp = &mm[static_cast<std::size_t>(p) * K * T];
    for (int k = 0; k < K; ++k) {
      for (int c = 0; c < C; ++c) {
        simd::axpy(up[static_cast<std::size_t>(k) * C + c],
                   vp + static_cast<std::size_t>(c) * T,
                   mp + static_cast<std::size_t>(k) * T, T);
      }
    }
  }

  Tensor out = Tensor::chw(K, oh, ow);
  for (int k = 0; k < K; ++k) {
    for (int tyi = 0; tyi < plan.tiles_y; ++tyi) {
      for (int txi = 0; txi < plan.tiles_x; ++txi) {
        const int t = tyi * plan.tiles_x + txi;
        float mt[16], o[4];
        for (int p = 0; p < 16; ++p) {
          mt[p] = mm[(static_cast<std::size_t>(p) * K + k) * T + t];
        }
        winograd_output_transform(mt, o);
        for (int i = 0; i < 2; ++i) {
          for (int j = 0; j < 2; ++j) {
            const int y = tyi * 2 + i, x = txi * 2 + j;
            if (y < oh && x < ow) out.at(k, y, x) = o[i * 2 + j];
          }
        }
      }
    }
  }

  AlgoResult res{std::move(out), {}};
  const std::uint64_t t64 = static_cast<std::uint64_t>(T);
  res.counts.multiplies = t64 * 16 * C * K;  // Hadamard stage only
  res.counts.adds = t64 * 16 * C * K            // GEMM accumulations
                    + 32ull * C * t64           // input transform
                    + 24ull * K * t64;          // output transform
  res.counts.global_read_bytes =
      input_bytes(shape)  // trans_from_image
      + 16ull * (static_cast<std::uint64_t>(K) * C * 4 * ceil_div(T, cfg.gemm_tile_n) +
                 static_cast<std::uint64_t>(C) * T * 4 * ceil_div(K, cfg.gemm_tile_m))
      + t64 * 16 * K * 4;  // trans_to_output reads M
  res.counts.global_write_bytes = static_cast<std::uint64_t>(C) * t64 * 16 * 4  // V
                                  + static_cast<std::uint64_t>(K) * t64 * 16 * 4  // M
                                  + output_bytes(shape);
  return res;
}

// ---------------------------------------------------------------------------
// Direct convolution

AlgoResult direct_conv(const Tensor& input, const Tensor& filters,
                       const ConvShape& shape, const AlgoConfig& cfg) {
  cfg.validate(shape);
  check_input(input, shape);
  check_filters_kcrs(filters, shape);
  const DirectGeom g = direct_geom(shape, cfg);
  auto [oh, ow] = shape.output_shape();

  const PaddedImage img = pad_image(input, shape, 0, 0);
  Tensor out = Tensor::chw(shape.out_channels, oh, ow);

  // Thread-private accumulation order of Algorithm-style kernels: input
  // channel outer, filter taps inner, one accumulator per (pixel, owned
  // output channel).
  for (int k = 0; k < shape.out_channels; ++k) {
    for (int c = 0; c < shape.in_channels; ++c) {
      for (int r = 0; r < shape.filter_h; ++r) {
        for (int s = 0; s < shape.filter_w; ++s) {
          const float w = filters.at(k, c, r, s);
          for (int y = 0; y < oh; ++y) {
            if (shape.stride == 1) {
              simd::axpy(w, img.row(c, y + r) + s, &out.at(k, y, 0), ow);
            } else {
              const float* src = img.row(c, y * shape.stride + r);
              float* dst = &out.at(k, y, 0);
              for (int x = 0; x < ow; ++x) {
                dst[x] = dst[x] + w * src[x * shape.stride + s];
              }
            }
          }
        }
      }
    }
  }

  AlgoResult res{std::move(out), {}};
  res.counts.multiplies = mac_total(shape);
  res.counts.adds = mac_total(shape);
  res.counts.global_write_bytes = output_bytes(shape);

  std::uint64_t img_tile_reads = 0;
  for (int tyi = 0; tyi < g.tiles_y; ++tyi) {
    for (int txi = 0; txi < g.tiles_x; ++txi) {
      img_tile_reads += halo_inbounds(shape, tyi * cfg.tile_y, txi * cfg.tile_x,
                                      cfg.tile_y, cfg.tile_x);
    }
  }
  const std::uint64_t img_read = img_tile_reads * shape.in_channels * 4 *
                                 g.channel_blocks;
  const std::uint64_t pixel_tiles =
      static_cast<std::uint64_t>(g.tiles_x) * g.tiles_y;
  std::uint64_t filt_read = pixel_tiles * filter_bytes(shape);
  if (!cfg.cache_filter) {
    // Without shared-memory staging every warp issues its own broadcast
    // filter loads, so the duplication scales with the warp count.
    filt_read *= ceil_div(g.threads, kAnalyticWarpSize);
  }
  res.counts.global_read_bytes = img_read + filt_read;
  return res;
}

// ---------------------------------------------------------------------------
// ILP-M convolution

IlpmReads ilpm_analytic_reads(const ConvShape& shape, const AlgoConfig& cfg) {
  const IlpmGeom g = ilpm_geom(shape, cfg);
  IlpmReads r;
  const std::uint64_t pixel_tiles =
      static_cast<std::uint64_t>(g.tiles_x) * g.tiles_y;
  r.filter_bytes = pixel_tiles * filter_bytes(shape);
  std::uint64_t tile_reads = 0;
  for (int tyi = 0; tyi < g.tiles_y; ++tyi) {
    for (int txi = 0; txi < g.tiles_x; ++txi) {
      tile_reads += halo_inbounds(shape, tyi * cfg.tile_y, txi * cfg.tile_x,
                                  cfg.tile_y, cfg.tile_x);
    }
  }
  r.image_bytes = tile_reads * shape.in_channels * 4 * g.channel_blocks;
  return r;
}

AlgoResult ilpm_conv(const Tensor& input, const Tensor& filters,
                     const ConvShape& shape, const AlgoConfig& cfg) {
  cfg.validate(shape);
  check_input(input, shape);
  if (filters.layout() != Layout::CRSK) {
    throw LayoutError("ilpm_conv expects CRSK filters");
  }
  if (filters.dim(0) != shape.in_channels || filters.dim(1) != shape.filter_h ||
      filters.dim(2) != shape.filter_w || filters.dim(3) != shape.out_channels) {
    throw ShapeError("filter extents do not match ConvShape");
  }
  const IlpmGeom g = ilpm_geom(shape, cfg);
  auto [oh, ow] = shape.output_shape();

  // Full tiles are computed and edge results cropped, as the kernel does;
  // pad the image far enough that every tile's halo reads zeros.
  const int span_y = (g.tiles_y * cfg.tile_y - 1) * shape.stride + shape.filter_h;
  const int span_x = (g.tiles_x * cfg.tile_x - 1) * shape.stride + shape.filter_w;
  const PaddedImage img = pad_image(input, shape, span_y - (shape.height + 2 * shape.pad),
                                    span_x - (shape.width + 2 * shape.pad));

  Tensor out = Tensor::chw(shape.out_channels, oh, ow);
  std::vector<float> acc(static_cast<std::size_t>(cfg.tile_y) * cfg.tile_x);

  for (int k = 0; k < shape.out_channels; ++k) {
    for (int tyi = 0; tyi < g.tiles_y; ++tyi) {
      for (int txi = 0; txi < g.tiles_x; ++txi) {
        std::fill(acc.begin(), acc.end(), 0.0f);
        for (int c = 0; c < shape.in_channels; ++c) {
          for (int r = 0; r < shape.filter_h; ++r) {
            for (int s = 0; s < shape.filter_w; ++s) {
              // One filter weight in a register, applied to the whole tile.
              const float w = filters.at(c, r, s, k);
              for (int wy = 0; wy < cfg.tile_y; ++wy) {
                const int iy = (tyi * cfg.tile_y + wy) * shape.stride + r;
                const float* src = img.row(c, iy) + txi * cfg.tile_x * shape.stride + s;
                float* dst = &acc[static_cast<std::size_t>(wy) * cfg.tile_x];
                if (shape.stride == 1) {
                  simd::axpy(w, src, dst, cfg.tile_x);
                } else {
                  for (int wx = 0; wx < cfg.tile_x; ++wx) {
                    dst[wx] = dst[wx] + w * src[wx * shape.stride];
                  }
                }
              }
            }
          }
        }
        for (int wy = 0; wy < cfg.tile_y; ++wy) {
          const int y = tyi * cfg.tile_y + wy;
          if (y >= oh) break;
          const int xl = std::min(cfg.tile_x, ow - txi * cfg.tile_x);
          std::memcpy(&out.at(k, y, txi * cfg.tile_x),
                      &acc[static_cast<std::size_t>(wy) * cfg.tile_x],
                      sizeof(float) * xl);
        }
      }
    }
  }

  AlgoResult res{std::move(out), {}};
  // Full-tile convention: the per-thread tile loops always run to LOCAL_DIM,
  // matching the lowered kernel's dynamic FMA count.
  res.counts.multiplies = static_cast<std::uint64_t>(shape.out_channels) *
                          shape.in_channels * shape.filter_h * shape.filter_w *
                          g.tiles_y * cfg.tile_y * g.tiles_x * cfg.tile_x;
  res.counts.adds = res.counts.multiplies;
  const IlpmReads rd = ilpm_analytic_reads(shape, cfg);
  res.counts.global_read_bytes = rd.filter_bytes + rd.image_bytes;
  res.counts.global_write_bytes = output_bytes(shape);
  return res;
}

// ---------------------------------------------------------------------------
// Dispatch and per-stage analytics

AlgoResult run_algorithm(const AlgoConfig& cfg, const Tensor& input,
                         const Tensor& filters_kcrs, const ConvShape& shape) {
  switch (cfg.algorithm) {
    case AlgoKind::oracle: {
      throw ConfigError("oracle is not dispatched through run_algorithm");
    }
    case AlgoKind::im2col:
      return im2col_conv(input, filters_kcrs, shape, cfg);
    case AlgoKind::fused_unroll:
      return fused_unroll_conv(input, filters_kcrs, shape, cfg);
    case AlgoKind::winograd:
      return winograd_conv(input, filters_kcrs, shape, cfg);
    case AlgoKind::direct_cache: {
      AlgoConfig c = cfg;
      c.cache_filter = true;
      return direct_conv(input, filters_kcrs, shape, c);
    }
    case AlgoKind::direct_nocache: {
      AlgoConfig c = cfg;
      c.cache_filter = false;
      return direct_conv(input, filters_kcrs, shape, c);
    }
    case AlgoKind::ilpm:
      return ilpm_conv(input, convert_layout(filters_kcrs, Layout::CRSK),
                       shape, cfg);
  }
  throw ConfigError("unknown algorithm");
}

std::vector<StageTraffic> analytic_stage_traffic(const AlgoConfig& cfg,
                                                 const ConvShape& shape) {
  cfg.validate(shape);
  auto [oh, ow] = shape.output_shape();
  std::vector<StageTraffic> rows;

  switch (cfg.algorithm) {
    case AlgoKind::im2col: {
      const std::uint64_t um_bytes =
          static_cast<std::uint64_t>(shape.in_channels) * shape.filter_h *
          shape.filter_w * oh * ow * 4;
      rows.push_back({"im2col_im2col", input_bytes(shape), um_bytes, 0});
      rows.push_back({"im2col_gemm",
                      um_bytes * ceil_div(shape.out_channels, cfg.gemm_tile_m) +
                          filter_bytes(shape) * ceil_div(oh * ow, cfg.gemm_tile_n),
                      output_bytes(shape), mac_total(shape)});
      break;
    }
    case AlgoKind::fused_unroll: {
      const FusedGeom g = fused_geom(shape, cfg);
      std::uint64_t unroll_reads = 0;
      for (int oy = 0; oy < oh; ++oy) {
        for (int xb = 0; xb < g.xblocks; ++xb) {
          unroll_reads +=
              unroll_inbounds_row(shape, oy, xb * cfg.tile_x, cfg.tile_x);
        }
      }
      unroll_reads *= static_cast<std::uint64_t>(shape.in_channels) * g.kblocks;
      rows.push_back({"fused_unroll_conv",
                      filter_bytes(shape) * (static_cast<std::uint64_t>(oh) * g.xblocks) +
                          unroll_reads * 4,
                      output_bytes(shape), mac_total(shape)});
      break;
    }
    case AlgoKind::winograd: {
      const WinogradPlan plan = WinogradPlan::for_shape(shape);
      const std::uint64_t T = static_cast<std::uint64_t>(plan.tiles_y) * plan.tiles_x;
      const std::uint64_t v_bytes = static_cast<std::uint64_t>(shape.in_channels) * T * 16 * 4;
      const std::uint64_t m_bytes = static_cast<std::uint64_t>(shape.out_channels) * T * 16 * 4;
      rows.push_back({"winograd_trans_from_image", input_bytes(shape), v_bytes, 0});
      rows.push_back(
          {"winograd_gemm",
           16ull * (static_cast<std::uint64_t>(shape.out_channels) * shape.in_channels * 4 *
                        ceil_div(static_cast<int>(T), cfg.gemm_tile_n) +
                    static_cast<std::uint64_t>(shape.in_channels) * T * 4 *
                        ceil_div(shape.out_channels, cfg.gemm_tile_m)),
           m_bytes, T * 16 * shape.in_channels * shape.out_channels});
      rows.push_back({"winograd_trans_to_output", m_bytes, output_bytes(shape), 0});
      break;
    }
    case AlgoKind::direct_cache:
    case AlgoKind::direct_nocache: {
      AlgoConfig c = cfg;
      c.cache_filter = (cfg.algorithm == AlgoKind::direct_cache);
      const DirectGeom g = direct_geom(shape, c);
      std::uint64_t img_tile_reads = 0;
      for (int tyi = 0; tyi < g.tiles_y; ++tyi) {
        for (int txi = 0; txi < g.tiles_x; ++txi) {
          img_tile_reads += halo_inbounds(shape, tyi * cfg.tile_y,
                                          txi * cfg.tile_x, cfg.tile_y, cfg.tile_x);
        }
      }
      std::uint64_t filt = static_cast<std::uint64_t>(g.tiles_x) * g.tiles_y *
                           filter_bytes(shape);
      if (!c.cache_filter) filt *= ceil_div(g.threads, kAnalyticWarpSize);
      rows.push_back({"direct_conv",
                      img_tile_reads * shape.in_channels * 4 * g.channel_blocks + filt,
                      output_bytes(shape), mac_total(shape)});
      break;
    }
    case AlgoKind::ilpm: {
      const IlpmReads rd = ilpm_analytic_reads(shape, cfg);
      const IlpmGeom g = ilpm_geom(shape, cfg);
      rows.push_back({"ilpm_conv", rd.filter_bytes + rd.image_bytes,
                      output_bytes(shape),
                      static_cast<std::uint64_t>(shape.out_channels) *
                          shape.in_channels * shape.filter_h * shape.filter_w *
                          g.tiles_y * cfg.tile_y * g.tiles_x * cfg.tile_x});
      break;
    }
    case AlgoKind::oracle:
      throw ConfigError("oracle has no kernel stages");
  }
  return rows;
}

}  // namespace convlab
