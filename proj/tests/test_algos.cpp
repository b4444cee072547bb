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
#include <cmath>

#include "convlab/algos.hpp"
#include "convlab/oracle.hpp"
#include "doctest.h"

using namespace convlab;

namespace {

ConvShape make_shape(int c, int k, int h, int w, int pad = 1, int stride = 1,
                     int r = 3, int s = 3) {
  ConvShape sh;
  sh.in_channels = c;
  sh.out_channels = k;
  sh.height = h;
  sh.width = w;
  sh.filter_h = r;
  sh.filter_w = s;
  sh.pad = pad;
  sh.stride = stride;
  return sh;
}

double max_rel_err(const Tensor& got, const Tensor& want) {
  double m = 0;
  for (std::int64_t i = 0; i < got.size(); ++i) {
    const double w = want.data()[i];
    const double d = std::abs(got.data()[i] - w);
    m = std::max(m, d / std::max(1.0, std::abs(w)));
  }
  return m;
}

struct Problem {
  ConvShape shape;
  Tensor input;
  Tensor filters;  // KCRS
};

Problem random_problem(const ConvShape& sh, std::uint64_t seed) {
  Rng rng(seed);
  Problem p{sh, Tensor::chw(sh.in_channels, sh.height, sh.width),
            Tensor::kcrs(sh.out_channels, sh.in_channels, sh.filter_h,
                         sh.filter_w)};
  p.input.fill_random(rng);
  p.filters.fill_random(rng);
  return p;
}

}  // namespace

// ---------------------------------------------------------------------------
// im2col

TEST_CASE("im2col single window flattens the input") {
  ConvShape sh = make_shape(1, 1, 3, 3, 0);
  Problem p = random_problem(sh, 5);
  UnrolledMatrix um = im2col_unroll(p.input, sh);
  CHECK(um.matrix.dim(0) == 9);
  CHECK(um.matrix.dim(1) == 1);
  for (int i = 0; i < 9; ++i) {
    CHECK(um.matrix.at(i, 0) == p.input.data()[i]);
  }
}

TEST_CASE("im2col 1x1 filter is a reshape") {
  ConvShape sh = make_shape(3, 2, 4, 5, 0, 1, 1, 1);
  Problem p = random_problem(sh, 6);
  UnrolledMatrix um = im2col_unroll(p.input, sh);
  CHECK(um.matrix.dim(0) == 3);
  CHECK(um.matrix.dim(1) == 20);
  CHECK(um.bytes == static_cast<std::uint64_t>(p.input.size()) * 4);
  for (std::int64_t i = 0; i < p.input.size(); ++i) {
    CHECK(um.matrix.data()[i] == p.input.data()[i]);
  }
}

TEST_CASE("im2col conv4.x unrolled matrix is 2304 x 196 = 1806336 bytes") {
  ConvShape sh = make_shape(256, 256, 14, 14);
  Problem p = random_problem(sh, 7);
  UnrolledMatrix um = im2col_unroll(p.input, sh);
  CHECK(um.matrix.dim(0) == 2304);
  CHECK(um.matrix.dim(1) == 196);
  CHECK(um.bytes == 1806336);
  // kernel_size x input bytes when stride=1 and output matches input size
  CHECK(um.bytes == 9ull * 256 * 14 * 14 * 4);
}

TEST_CASE("gemm identity and ones") {
  Rng rng(8);
  Tensor i4 = Tensor::rowmajor(4, 4);
  for (int i = 0; i < 4; ++i) i4.at(i, i) = 1.0f;
  Tensor b = Tensor::rowmajor(4, 7);
  b.fill_random(rng);
  Tensor c = gemm(i4, b, 2, 2, 2);
  for (std::int64_t i = 0; i < b.size(); ++i) CHECK(c.data()[i] == b.data()[i]);

  const int kk = 11;
  Tensor row = Tensor::rowmajor(1, kk), col = Tensor::rowmajor(kk, 1);
  for (float& v : row.data()) v = 1.0f;
  for (float& v : col.data()) v = 1.0f;
  Tensor dot = gemm(row, col, 8, 8, 8);
  CHECK(dot.at(0, 0) == static_cast<float>(kk));
}

namespace {

// Untiled k-innermost triple loop, the tiling oracle.
Tensor gemm_naive(const Tensor& a, const Tensor& b) {
  const int m = a.dim(0), kd = a.dim(1), n = b.dim(1);
  Tensor c = Tensor::rowmajor(m, n);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) {
      float acc = 0.0f;
      for (int k = 0; k < kd; ++k) acc = acc + a.at(i, k) * b.at(k, j);
      c.at(i, j) = acc;
    }
  return c;
}

}  // namespace

TEST_CASE("gemm random 17x23 * 23x9 matches untiled oracle") {
  Rng rng(21);
  Tensor a = Tensor::rowmajor(17, 23), b = Tensor::rowmajor(23, 9);
  a.fill_random(rng);
  b.fill_random(rng);
  Tensor want = gemm_naive(a, b);
  Tensor got = gemm(a, b, 8, 8, 8);
  double m = 0;
  for (std::int64_t i = 0; i < got.size(); ++i) {
    m = std::max(m, std::abs(static_cast<double>(got.data()[i]) - want.data()[i]));
  }
  CHECK(m <= 1e-5);
}

TEST_CASE("gemm result is bit-identical across tilings") {
  Rng rng(22);
  Tensor a = Tensor::rowmajor(13, 19), b = Tensor::rowmajor(19, 11);
  a.fill_random(rng);
  b.fill_random(rng);
  Tensor base = gemm(a, b, 8, 8, 8);
  const int tilings[3][3] = {{1, 1, 1}, {16, 32, 8}, {3, 5, 7}};
  for (const auto& t : tilings) {
    const int tm = t[0], tn = t[1], tk = t[2];
    Tensor other = gemm(a, b, tm, tn, tk);
    for (std::int64_t i = 0; i < base.size(); ++i) {
      CHECK(base.data()[i] == other.data()[i]);
    }
  }
}

TEST_CASE("gemm rejects dim mismatch") {
  Tensor a = Tensor::rowmajor(2, 3), b = Tensor::rowmajor(4, 2);
  CHECK_THROWS_AS(gemm(a, b, 8, 8, 8), ShapeError);
}

TEST_CASE("im2col_conv matches oracle and pins conv4.x analytic bytes") {
  ConvShape small = make_shape(4, 8, 6, 6);
  Problem p = random_problem(small, 31);
  AlgoConfig cfg;
  cfg.algorithm = AlgoKind::im2col;
  cfg.gemm_tile_m = cfg.gemm_tile_n = cfg.gemm_tile_k = 8;
  AlgoResult r = im2col_conv(p.input, p.filters, small, cfg);
  Tensor want = oracle_conv(p.input, p.filters, small).output;
  CHECK(max_rel_err(r.output, want) <= 1e-4);

  // Full-scale conv4.x analytic counts (exact integers).
  ConvShape conv4 = make_shape(256, 256, 14, 14);
  auto rows = analytic_stage_traffic(cfg, conv4);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].stage == "im2col_im2col");
  CHECK(rows[0].write_bytes == 1806336);
  CHECK(rows[0].read_bytes == 200704);
  CHECK(rows[0].multiplies == 0);
}

// ---------------------------------------------------------------------------
// fused unroll

TEST_CASE("fused unroll writes exactly the output bytes") {
  const int cases[2][3] = {{4, 8, 6}, {3, 16, 14}};
  for (const auto& t : cases) {
    const int c = t[0], k = t[1], h = t[2];
    ConvShape sh = make_shape(c, k, h, h);
    Problem p = random_problem(sh, 40 + h);
    AlgoConfig cfg;
    cfg.algorithm = AlgoKind::fused_unroll;
    cfg.tile_x = 8;
    cfg.gemm_tile_m = 8;
    AlgoResult r = fused_unroll_conv(p.input, p.filters, sh, cfg);
    auto [oh, ow] = sh.output_shape();
    CHECK(r.counts.global_write_bytes ==
          static_cast<std::uint64_t>(k) * oh * ow * 4);
    Tensor want = oracle_conv(p.input, p.filters, sh).output;
    CHECK(max_rel_err(r.output, want) <= 1e-4);
  }
}

TEST_CASE("fused unroll duplicates unrolling work across channel blocks") {
  ConvShape sh = make_shape(8, 16, 14, 14);
  AlgoConfig cfg;
  cfg.algorithm = AlgoKind::fused_unroll;
  cfg.tile_x = 14;
  cfg.gemm_tile_m = 8;  // two channel blocks share every tile
  const FusedGeom g = fused_geom(sh, cfg);
  CHECK(g.kblocks == 2);
  // Total on-the-fly unroll constructions exceed the one-shot im2col element
  // count exactly when more than one workgroup shares a tile.
  auto [oh, ow] = sh.output_shape();
  const std::uint64_t im2col_elems =
      static_cast<std::uint64_t>(sh.in_channels) * 9 * oh * ow;
  const std::uint64_t unroll_elems =
      static_cast<std::uint64_t>(sh.in_channels) * 9 * oh * g.xblocks *
      cfg.tile_x * g.kblocks;
  CHECK(unroll_elems > im2col_elems);
}

// ---------------------------------------------------------------------------
// direct (both variants)

TEST_CASE("direct conv matches oracle for both variants") {
  ConvShape sh = make_shape(8, 16, 14, 14);
  Problem p = random_problem(sh, 50);
  Tensor want = oracle_conv(p.input, p.filters, sh).output;
  for (bool cache : {true, false}) {
    AlgoConfig cfg;
    cfg.algorithm = cache ? AlgoKind::direct_cache : AlgoKind::direct_nocache;
    cfg.cache_filter = cache;
    cfg.tile_x = 7;
    cfg.tile_y = 7;
    cfg.out_channels_per_thread = 4;
    AlgoResult r = direct_conv(p.input, p.filters, sh, cfg);
    CHECK(max_rel_err(r.output, want) <= 1e-4);
    CHECK(r.counts.multiplies == 16ull * 14 * 14 * 8 * 9);
  }
}

TEST_CASE("direct nocache filter traffic strictly exceeds cache variant") {
  ConvShape sh = make_shape(16, 32, 14, 14);
  AlgoConfig cache_cfg;
  cache_cfg.algorithm = AlgoKind::direct_cache;
  cache_cfg.cache_filter = true;
  cache_cfg.tile_x = cache_cfg.tile_y = 14;
  cache_cfg.out_channels_per_thread = 4;
  AlgoConfig nocache_cfg = cache_cfg;
  nocache_cfg.algorithm = AlgoKind::direct_nocache;
  nocache_cfg.cache_filter = false;

  auto cache_rows = analytic_stage_traffic(cache_cfg, sh);
  auto nocache_rows = analytic_stage_traffic(nocache_cfg, sh);
  CHECK(nocache_rows[0].read_bytes > cache_rows[0].read_bytes);

  // And nocache strictly exceeds ILP-M's duplication-free filter reads
  // whenever the workgroup spans more than one warp.
  AlgoConfig ilpm_cfg;
  ilpm_cfg.algorithm = AlgoKind::ilpm;
  ilpm_cfg.tile_x = ilpm_cfg.tile_y = 14;
  const IlpmReads ir = ilpm_analytic_reads(sh, ilpm_cfg);
  const std::uint64_t filter_bytes =
      static_cast<std::uint64_t>(sh.filter_elems()) * 4;
  CHECK(ir.filter_bytes == filter_bytes);
  const std::uint64_t nocache_filters =
      nocache_rows[0].read_bytes -
      cache_rows[0].read_bytes + 1 * filter_bytes;  // cache reads filters once here
  CHECK(nocache_filters > ir.filter_bytes);
}

// ---------------------------------------------------------------------------
// ILP-M

TEST_CASE("ilpm matches oracle with and without output transpose") {
  ConvShape sh = make_shape(8, 16, 14, 14);
  Problem p = random_problem(sh, 60);
  Tensor want = oracle_conv(p.input, p.filters, sh).output;
  Tensor crsk = convert_layout(p.filters, Layout::CRSK);
  for (bool tr : {false, true}) {
    AlgoConfig cfg;
    cfg.algorithm = AlgoKind::ilpm;
    cfg.tile_x = cfg.tile_y = 7;
    cfg.transpose_output = tr;
    AlgoResult r = ilpm_conv(p.input, crsk, sh, cfg);
    CHECK(max_rel_err(r.output, want) <= 1e-4);
  }
}

TEST_CASE("ilpm rejects KCRS filters") {
  ConvShape sh = make_shape(2, 4, 6, 6);
  Problem p = random_problem(sh, 61);
  AlgoConfig cfg;
  cfg.algorithm = AlgoKind::ilpm;
  cfg.tile_x = cfg.tile_y = 6;
  CHECK_THROWS_AS(ilpm_conv(p.input, p.filters, sh, cfg), LayoutError);
}

TEST_CASE("ilpm conv4.x analytic reads: filters once plus staged halo") {
  ConvShape sh = make_shape(256, 256, 14, 14);
  AlgoConfig cfg;
  cfg.algorithm = AlgoKind::ilpm;
  cfg.tile_x = cfg.tile_y = 14;
  const IlpmReads r = ilpm_analytic_reads(sh, cfg);
  CHECK(r.filter_bytes == 2359296);  // K*C*R*S*4, zero duplication
  const double total_mib =
      static_cast<double>(r.filter_bytes + r.image_bytes) / (1024.0 * 1024.0);
  CHECK(std::abs(total_mib / 2.46 - 1.0) <= 0.05);
}

TEST_CASE("ilpm per-thread loop trip ratios at tiny config") {
  // C=2, R=S=3, tile 4x4: 288 FMAs and 18 filter loads per thread,
  // arithmetic-to-filter-load ratio equals the tile pixel count.
  ConvShape sh = make_shape(2, 4, 4, 4);
  AlgoConfig cfg;
  cfg.algorithm = AlgoKind::ilpm;
  cfg.tile_x = cfg.tile_y = 4;
  const std::uint64_t per_thread_fma = 2ull * 9 * 16;
  const std::uint64_t per_thread_loads = 2ull * 9;
  CHECK(per_thread_fma == 288);
  CHECK(per_thread_loads == 18);
  CHECK(per_thread_fma / per_thread_loads == 16);
  // The analytic multiply count follows the same full-tile trip convention.
  auto rows = analytic_stage_traffic(cfg, sh);
  CHECK(rows[0].multiplies == 4ull * per_thread_fma);
}

// ---------------------------------------------------------------------------
// all algorithms vs oracle across Table-2 geometries (scaled channels)

TEST_CASE("all algorithms agree with oracle on scaled Table-2 geometries") {
  const int spatial[4] = {56, 28, 14, 7};
  Rng seeds(1000);
  for (int geom = 0; geom < 4; ++geom) {
    const int hw = spatial[geom];
    for (int scale : {8, 16}) {
      ConvShape sh = make_shape(scale, scale, hw, hw);
      Problem p = random_problem(sh, seeds.next_u64());
      Tensor want = oracle_conv(p.input, p.filters, sh).output;
      for (AlgoKind a : {AlgoKind::im2col, AlgoKind::fused_unroll,
                         AlgoKind::winograd, AlgoKind::direct_cache,
                         AlgoKind::direct_nocache, AlgoKind::ilpm}) {
        AlgoConfig cfg;
        cfg.algorithm = a;
        cfg.tile_x = cfg.tile_y = 7;
        cfg.gemm_tile_m = cfg.gemm_tile_n = cfg.gemm_tile_k = 8;
        cfg.out_channels_per_thread = 2;
        AlgoResult r = run_algorithm(cfg, p.input, p.filters, sh);
        const double tol = (a == AlgoKind::winograd) ? 1e-3 : 1e-4;
        CHECK(max_rel_err(r.output, want) <= tol);
      }
    }
  }
}
