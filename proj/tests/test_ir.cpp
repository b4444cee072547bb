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

#include "convlab/algos.hpp"
#include "convlab/analysis.hpp"
#include "convlab/interp.hpp"
#include "convlab/ir.hpp"
#include "convlab/oracle.hpp"
#include "doctest.h"

using namespace convlab;

namespace {

ConvShape make_shape(int c, int k, int h, int w, int pad = 1, int stride = 1) {
  ConvShape sh;
  sh.in_channels = c;
  sh.out_channels = k;
  sh.height = h;
  sh.width = w;
  sh.filter_h = sh.filter_w = 3;
  sh.pad = pad;
  sh.stride = stride;
  return sh;
}

struct Problem {
  ConvShape shape;
  Tensor input;
  Tensor filters;
};

Problem random_problem(const ConvShape& sh, std::uint64_t seed) {
  Rng rng(seed);
  Problem p{sh, Tensor::chw(sh.in_channels, sh.height, sh.width),
            Tensor::kcrs(sh.out_channels, sh.in_channels, sh.filter_h, sh.filter_w)};
  p.input.fill_random(rng);
  p.filters.fill_random(rng);
  return p;
}

AlgoConfig cfg_for(AlgoKind a) {
  AlgoConfig cfg;
  cfg.algorithm = a;
  cfg.tile_x = cfg.tile_y = 7;
  cfg.gemm_tile_m = cfg.gemm_tile_n = cfg.gemm_tile_k = 8;
  cfg.out_channels_per_thread = 2;
  cfg.cache_filter = (a == AlgoKind::direct_cache);
  return cfg;
}

}  // namespace

TEST_CASE("interpreted pipelines reproduce the host algorithms bit-exactly") {
  const ConvShape sh = make_shape(4, 8, 14, 14);
  const Problem p = random_problem(sh, 11);
  for (AlgoKind a : {AlgoKind::im2col, AlgoKind::fused_unroll, AlgoKind::winograd,
                     AlgoKind::direct_cache, AlgoKind::direct_nocache,
                     AlgoKind::ilpm}) {
    CAPTURE(algo_name(a));
    AlgoConfig cfg = cfg_for(a);
    const AlgoResult host = run_algorithm(cfg, p.input, p.filters, sh);
    const LoweredPipeline pl = lower(cfg, sh);
    const Tensor sim = interpret_pipeline(pl, p.input, p.filters);
    REQUIRE(sim.size() == host.output.size());
    for (std::int64_t i = 0; i < sim.size(); ++i) {
      if (sim.data()[i] != host.output.data()[i]) {
        CAPTURE(i);
        CHECK(sim.data()[i] == host.output.data()[i]);
        break;
      }
    }
    CHECK(sim.data() == host.output.data());
  }
}

TEST_CASE("interpreter handles transpose_output and odd tile edges") {
  const ConvShape sh = make_shape(3, 8, 7, 7);
  const Problem p = random_problem(sh, 12);
  for (bool tr : {false, true}) {
    AlgoConfig cfg = cfg_for(AlgoKind::ilpm);
    cfg.tile_x = 4;  // does not divide 7: edge tiles masked
    cfg.tile_y = 4;
    cfg.transpose_output = tr;
    const AlgoResult host = run_algorithm(cfg, p.input, p.filters, sh);
    const Tensor sim = interpret_pipeline(lower(cfg, sh), p.input, p.filters);
    CHECK(sim.data() == host.output.data());
  }
}

TEST_CASE("interpreter matches host algorithms on strided non-square shapes") {
  ConvShape sh = make_shape(3, 4, 9, 7, 1, 2);
  const Problem p = random_problem(sh, 13);
  for (AlgoKind a : {AlgoKind::im2col, AlgoKind::direct_cache,
                     AlgoKind::direct_nocache, AlgoKind::ilpm}) {
    CAPTURE(algo_name(a));
    AlgoConfig cfg = cfg_for(a);
    cfg.tile_x = cfg.tile_y = 2;
    const AlgoResult host = run_algorithm(cfg, p.input, p.filters, sh);
    const Tensor sim = interpret_pipeline(lower(cfg, sh), p.input, p.filters);
    CHECK(sim.data() == host.output.data());
  }
}

// ---------------------------------------------------------------------------
// Dynamic counts

TEST_CASE("ilpm lowering: barriers and per-thread FMA trips at tiny config") {
  ConvShape sh = make_shape(2, 4, 4, 4);
  AlgoConfig cfg;
  cfg.algorithm = AlgoKind::ilpm;
  cfg.tile_x = cfg.tile_y = 4;
  const LoweredPipeline pl = lower(cfg, sh);
  REQUIRE(pl.stages.size() == 1);
  CHECK(barrier_census(pl.stages[0]) == 2);  // one per input channel
  const DynCounts dc = dynamic_lane_counts(pl.stages[0]);
  // 288 FMAs per thread, 4 threads (output channels), one workgroup
  CHECK(dc.fma == 288ull * 4);
  // 18 filter loads per thread; the halo staging adds image loads
  const std::uint64_t filter_loads = 18ull * 4;
  CHECK(dc.ld_global >= filter_loads);
  // analytic multiply count equals the lowered dynamic FMA count
  auto rows = analytic_stage_traffic(cfg, sh);
  CHECK(rows[0].multiplies == dc.fma);
}

TEST_CASE("direct_cache lowering: barrier census is C * OCPT") {
  ConvShape sh = make_shape(4, 4, 6, 6);
  AlgoConfig cfg;
  cfg.algorithm = AlgoKind::direct_cache;
  cfg.cache_filter = true;
  cfg.tile_x = cfg.tile_y = 6;
  cfg.out_channels_per_thread = 2;
  const LoweredPipeline pl = lower(cfg, sh);
  CHECK(barrier_census(pl.stages[0]) == 8);  // 4 channels * 2 ocpt trips
  // nocache: once per channel
  cfg.algorithm = AlgoKind::direct_nocache;
  cfg.cache_filter = false;
  const LoweredPipeline pl2 = lower(cfg, sh);
  CHECK(barrier_census(pl2.stages[0]) == 4);
}

TEST_CASE("direct lowering dynamic FMA count equals analytic multiplies") {
  ConvShape sh = make_shape(3, 4, 7, 7);
  for (AlgoKind a : {AlgoKind::direct_cache, AlgoKind::direct_nocache}) {
    AlgoConfig cfg;
    cfg.algorithm = a;
    cfg.cache_filter = (a == AlgoKind::direct_cache);
    cfg.tile_x = cfg.tile_y = 4;  // edge tiles masked
    cfg.out_channels_per_thread = 2;
    const LoweredPipeline pl = lower(cfg, sh);
    const DynCounts dc = dynamic_lane_counts(pl.stages[0]);
    CHECK(dc.fma == 4ull * 7 * 7 * 3 * 9);
  }
}

TEST_CASE("im2col stage is copy-only: zero FMA, no barriers, no shared") {
  ConvShape sh = make_shape(2, 4, 6, 6);
  AlgoConfig cfg;
  cfg.algorithm = AlgoKind::im2col;
  cfg.gemm_tile_m = cfg.gemm_tile_n = cfg.gemm_tile_k = 8;
  const LoweredPipeline pl = lower(cfg, sh);
  REQUIRE(pl.stages.size() == 2);
  const KernelProgram& stage = pl.stages[0];
  CHECK(stage.name == "im2col_im2col");
  CHECK(stage.shared_bytes == 0);
  CHECK(barrier_census(stage) == 0);
  const DynCounts dc = dynamic_lane_counts(stage);
  CHECK(dc.fma == 0);
  CHECK(dc.mul == 0);
  CHECK(dc.add == 0);
  CHECK(dc.ialu > 0);
  // one store per unrolled element; loads skip the padded taps
  auto [oh, ow] = sh.output_shape();
  CHECK(dc.st_global == 2ull * 9 * oh * ow);
  CHECK(dc.ld_global < dc.st_global);
  CHECK(dc.ld_global > 0);
  // the gemm stage carries the multiplies
  const DynCounts dg = dynamic_lane_counts(pl.stages[1]);
  CHECK(dg.fma == 4ull * 36 * (2 * 9));
}

TEST_CASE("winograd pipeline shape: 1 + 16 + 1 stages") {
  ConvShape sh = make_shape(2, 2, 6, 6);
  AlgoConfig cfg;
  cfg.algorithm = AlgoKind::winograd;
  cfg.gemm_tile_m = cfg.gemm_tile_n = cfg.gemm_tile_k = 8;
  const LoweredPipeline pl = lower(cfg, sh);
  REQUIRE(pl.stages.size() == 3);
  CHECK(pl.stages[0].name == "winograd_trans_from_image");
  CHECK(pl.stages[1].name == "winograd_gemm");
  CHECK(pl.stages[2].name == "winograd_trans_to_output");
  // Hadamard-stage FMA lanes across the 16-plane batched GEMM
  CHECK(pl.stages[1].grid_z == 16);
  const std::uint64_t fma = dynamic_lane_counts(pl.stages[1]).fma;
  CHECK(fma == 9ull * 16 * 2 * 2);  // tiles * 16 * C * K
}

// ---------------------------------------------------------------------------
// Register pressure

namespace {

// Micro-program in the shape of the paper's latency-hiding figure: variant
// (a) reuses one register for every load, variant (b) loads into distinct
// registers before accumulating.
KernelProgram fig2_program(bool independent, int n) {
  KernelBuilder b(independent ? "fig2b" : "fig2a", 32, 1);
  b.grid(1, 1, 1);
  const int acc = b.decl("r0", 1, RegClass::accumulator);
  if (independent) {
    std::vector<int> regs;
    for (int i = 0; i < n; ++i) {
      regs.push_back(b.decl("r" + std::to_string(i + 1), 1, RegClass::value));
    }
    for (int i = 0; i < n; ++i) {
      b.ld_global(RegRef{regs[i], AffineExpr(0)}, AffineExpr(4ll * i).tx(4ll * n));
    }
    for (int i = 0; i < n; ++i) {
      b.add(RegRef{acc, AffineExpr(0)}, RegRef{acc, AffineExpr(0)},
            RegRef{regs[i], AffineExpr(0)});
    }
  } else {
    const int r1 = b.decl("r1", 1, RegClass::value);  // reused, not renamable
    for (int i = 0; i < n; ++i) {
      b.ld_global(RegRef{r1, AffineExpr(0)}, AffineExpr(4ll * i).tx(4ll * n));
      b.add(RegRef{acc, AffineExpr(0)}, RegRef{acc, AffineExpr(0)},
            RegRef{r1, AffineExpr(0)});
    }
  }
  return b.take();
}

}  // namespace

TEST_CASE("register pressure reproduces the two latency-hiding micro shapes") {
  // (a) load/accumulate chain through one register at depth 1 -> 2 registers
  const KernelProgram a = fig2_program(false, 10);
  const RegisterReport ra = register_pressure(a, 1);
  CHECK(ra.max_live == 2);
  // (b) four independent loads then the adds at depth 4 -> 5 registers
  const KernelProgram b = fig2_program(true, 4);
  const RegisterReport rb = register_pressure(b, 4);
  CHECK(rb.max_live == 5);
}

TEST_CASE("filter-value registers: 1 for ilpm, R*S for direct_nocache") {
  ConvShape sh = make_shape(4, 8, 7, 7);
  AlgoConfig icfg;
  icfg.algorithm = AlgoKind::ilpm;
  icfg.tile_x = icfg.tile_y = 7;
  const LoweredPipeline ipl = lower(icfg, sh);
  const RegisterReport ir = register_pressure(ipl.stages[0], 9);
  CHECK(ir.live(RegClass::filter_val) == 1);
  CHECK(ir.max_live >= 49);  // at least the tile accumulators

  AlgoConfig dcfg;
  dcfg.algorithm = AlgoKind::direct_nocache;
  dcfg.cache_filter = false;
  dcfg.tile_x = dcfg.tile_y = 7;
  dcfg.out_channels_per_thread = 2;
  const LoweredPipeline dpl = lower(dcfg, sh);
  const RegisterReport dr = register_pressure(dpl.stages[0], 9);
  CHECK(dr.live(RegClass::filter_val) == 9);
  // at depth 4 only four filter loads may be in flight
  const RegisterReport dr4 = register_pressure(dpl.stages[0], 4);
  CHECK(dr4.live(RegClass::filter_val) <= 5);
  CHECK(dr4.live(RegClass::filter_val) >= 4);
}

// ---------------------------------------------------------------------------
// Hazards

TEST_CASE("lowered programs are hazard-free; removing any barrier is flagged") {
  ConvShape sh = make_shape(2, 4, 6, 6);
  for (AlgoKind a : {AlgoKind::ilpm, AlgoKind::direct_cache,
                     AlgoKind::direct_nocache, AlgoKind::fused_unroll,
                     AlgoKind::winograd}) {
    CAPTURE(algo_name(a));
    AlgoConfig cfg = cfg_for(a);
    cfg.tile_x = cfg.tile_y = 6;
    const LoweredPipeline pl = lower(cfg, sh);
    for (const KernelProgram& stage : pl.stages) {
      CHECK(check_cooperative_hazards(stage).empty());
      const int nb = count_static_barriers(stage);
      for (int i = 0; i < nb; ++i) {
        const KernelProgram broken = remove_barrier(stage, i);
        CHECK(!check_cooperative_hazards(broken).empty());
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Serialization

TEST_CASE("serialization golden for a tiny kernel") {
  KernelBuilder b("demo", 4, 1);
  b.grid(2, 1, 1);
  b.shared(16);
  const int acc = b.decl("acc", 2, RegClass::accumulator);
  const int v = b.decl("v", 1, RegClass::value, true);
  const int l0 = b.loop_begin(2);
  b.ld_global(RegRef{v, AffineExpr(0)},
              AffineExpr(64).tx(4).wx(32).lp(l0, 8),
              {Guard{AffineExpr(0).tx(1), 3}}, true);
  b.st_shared(RegRef{v, AffineExpr(0)}, AffineExpr(0).tx(4));
  b.barrier();
  b.fma(RegRef{acc, AffineExpr(0).lp(l0, 1)}, RegRef{v, AffineExpr(0)},
        RegRef{v, AffineExpr(0)}, RegRef{acc, AffineExpr(0).lp(l0, 1)});
  b.loop_end();
  const KernelProgram p = b.take();

  const std::string expect =
      "kernel demo wg=4x1 grid=2x1x1 shared=16\n"
      "reg acc[2] class=accumulator\n"
      "reg v[1] class=value renamable\n"
      "  loop L0 trip=2 {\n"
      "    ld_global v[0] addr=(64+4*tx+32*wx+8*L0) guard(0<=0+1*tx<3) pred_zero\n"
      "    st_shared v[0] addr=(0+4*tx)\n"
      "    barrier\n"
      "    fma acc[0+1*L0] v[0] v[0] acc[0+1*L0]\n"
      "  }\n";
  CHECK(serialize(p) == expect);
}

TEST_CASE("pipeline serialization is stable across calls") {
  ConvShape sh = make_shape(2, 4, 6, 6);
  AlgoConfig cfg = cfg_for(AlgoKind::ilpm);
  cfg.tile_x = cfg.tile_y = 6;
  const std::string s1 = serialize(lower(cfg, sh));
  const std::string s2 = serialize(lower(cfg, sh));
  CHECK(s1 == s2);
  CHECK(s1.find("kernel ilpm_conv") != std::string::npos);
}
