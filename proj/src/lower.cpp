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
#include <algorithm>

#include "convlab/algos.hpp"
#include "convlab/ir.hpp"

namespace convlab {

namespace {

AffineExpr A(std::int64_t base = 0) { return AffineExpr(base); }

Guard G(AffineExpr e, std::int64_t bound) { return Guard{std::move(e), bound}; }

RegRef R0(int id) { return RegRef{id, A(0)}; }

struct ShapeCtx {
  int C, K, H, W, R, S, pad, stride, OH, OW;
  explicit ShapeCtx(const ConvShape& s) {
    C = s.in_channels;
    K = s.out_channels;
    H = s.height;
    W = s.width;
    R = s.filter_h;
    S = s.filter_w;
    pad = s.pad;
    stride = s.stride;
    auto [oh, ow] = s.output_shape();
    OH = oh;
    OW = ow;
  }
  std::int64_t hw() const { return static_cast<std::int64_t>(H) * W; }
  std::int64_t ohow() const { return static_cast<std::int64_t>(OH) * OW; }
  std::int64_t rs() const { return static_cast<std::int64_t>(R) * S; }
};

// ---------------------------------------------------------------------------
// Shared tiled-GEMM kernel: wg (tn, tm) threads, one output element per
// thread, square shared staging tiles guarded down to the real extents.

// When batches > 1 the grid's z axis runs `batches` independent GEMMs whose
// operands are `stride` bytes apart (the Winograd plane batch).
KernelProgram lower_gemm_stage(const std::string& name, int m, int n, int kdim,
                               std::int64_t a_off, std::int64_t b_off,
                               std::int64_t c_off, int tm, int tn, int tk,
                               int batches = 1, std::int64_t a_stride = 0,
                               std::int64_t b_stride = 0,
                               std::int64_t c_stride = 0) {
  if (tm * tn > kMaxWorkgroupThreads) {
    throw ConfigError("gemm tile " + std::to_string(tm) + "x" +
                      std::to_string(tn) + " exceeds max workgroup size");
  }
  KernelBuilder b(name, tn, tm);
  b.grid(ceil_div(n, tn), ceil_div(m, tm), batches);
  const std::int64_t a_sh = 0;
  const std::int64_t b_sh = 4ll * tm * tk;
  b.shared(4ll * tm * tk + 4ll * tk * tn);

  const int acc = b.decl("acc", 1, RegClass::accumulator);
  const int av = b.decl("a_val", 1, RegClass::value, true);
  const int bv = b.decl("b_val", 1, RegClass::value, true);
  const int la = b.decl("a_stage", 1, RegClass::value, true);
  const int lb = b.decl("b_stage", 1, RegClass::value, true);
  const int adr = b.decl("idx", 1, RegClass::address, true);

  const AffineExpr row = A(0).wy(tm).ty(1);
  const AffineExpr col = A(0).wx(tn).tx(1);

  const int lk = b.loop_begin(ceil_div(kdim, tk));
  {
    b.ialu(R0(adr));
    // A[row][ks*tk + ka*tn + tx]; lanes sweep the tile in tn-wide strips.
    const int lka = b.loop_begin(ceil_div(tk, tn));
    {
      const AffineExpr acol = A(0).lp(lka, tn).tx(1);  // column within tile
      b.ld_global(R0(la),
                  A(a_off).wz(a_stride).wy(4ll * tm * kdim).ty(4ll * kdim)
                      .lp(lk, 4ll * tk).lp(lka, 4ll * tn).tx(4),
                  {G(acol, tk), G(row, m),
                   G(A(0).lp(lk, tk).lp(lka, tn).tx(1), kdim)},
                  /*pred_zero=*/true);
      b.st_shared(R0(la), A(a_sh).ty(4ll * tk).lp(lka, 4ll * tn).tx(4),
                  {G(acol, tk)});
    }
    b.loop_end();
    // B[ks*tk + kb*tm + ty][col]
    const int lkb = b.loop_begin(ceil_div(tk, tm));
    {
      const AffineExpr brow = A(0).lp(lkb, tm).ty(1);  // row within tile
      b.ld_global(R0(lb),
                  A(b_off).wz(b_stride).lp(lk, 4ll * tk * n)
                      .lp(lkb, 4ll * tm * n).ty(4ll * n).wx(4ll * tn).tx(4),
                  {G(brow, tk), G(A(0).lp(lk, tk).lp(lkb, tm).ty(1), kdim),
                   G(col, n)},
                  /*pred_zero=*/true);
      b.st_shared(R0(lb), A(b_sh).lp(lkb, 4ll * tm * tn).ty(4ll * tn).tx(4),
                  {G(brow, tk)});
    }
    b.loop_end();
    b.barrier();
    const int lkk = b.loop_begin(tk);
    {
      b.ld_shared(R0(av), A(a_sh).ty(4ll * tk).lp(lkk, 4));
      b.ld_shared(R0(bv), A(b_sh).lp(lkk, 4ll * tn).tx(4));
      b.fma(R0(acc), R0(av), R0(bv), R0(acc),
            {G(row, m), G(col, n), G(A(0).lp(lk, tk).lp(lkk, 1), kdim)});
    }
    b.loop_end();
  }
  b.loop_end();

  b.ialu(R0(adr));
  b.st_global(R0(acc),
              A(c_off).wz(c_stride).wy(4ll * tm * n).ty(4ll * n).wx(4ll * tn).tx(4),
              {G(row, m), G(col, n)});
  return b.take();
}

// ---------------------------------------------------------------------------
// im2col: index-calculation + copy kernel, then GEMM.

KernelProgram lower_im2col_stage(const ShapeCtx& s, std::int64_t in_off,
                                 std::int64_t um_off) {
  const int wg_w = std::min(s.OW, kMaxWorkgroupThreads);
  KernelBuilder b("im2col_im2col", wg_w, 1);
  b.grid(ceil_div(s.OW, wg_w), s.OH, 1);

  const int t = b.decl("elem", 1, RegClass::value, true);
  const int adr = b.decl("idx", 1, RegClass::address, true);

  const AffineExpr ox = A(0).wx(wg_w).tx(1);

  const int lc = b.loop_begin(s.C);
  const int lr = b.loop_begin(s.R);
  const int ls = b.loop_begin(s.S);
  {
    // iy = oy*stride + r - pad, ix = ox*stride + s - pad
    const AffineExpr iy = A(-s.pad).wy(s.stride).lp(lr, 1);
    const AffineExpr ix = A(-s.pad).wx(static_cast<std::int64_t>(wg_w) * s.stride)
                              .tx(s.stride)
                              .lp(ls, 1);
    b.ialu(R0(adr));
    b.ialu(R0(adr));
    b.ld_global(R0(t),
                A(in_off - 4ll * s.pad * s.W - 4ll * s.pad)
                    .lp(lc, 4ll * s.hw())
                    .wy(4ll * s.stride * s.W)
                    .lp(lr, 4ll * s.W)
                    .wx(4ll * wg_w * s.stride)
                    .tx(4ll * s.stride)
                    .lp(ls, 4),
                {G(iy, s.H), G(ix, s.W), G(ox, s.OW)}, /*pred_zero=*/true);
    b.ialu(R0(adr));
    // row (c*R + r)*S + s, column oy*OW + ox
    b.st_global(R0(t),
                A(um_off)
                    .lp(lc, 4ll * s.rs() * s.ohow())
                    .lp(lr, 4ll * s.S * s.ohow())
                    .lp(ls, 4ll * s.ohow())
                    .wy(4ll * s.OW)
                    .wx(4ll * wg_w)
                    .tx(4),
                {G(ox, s.OW)});
  }
  b.loop_end();
  b.loop_end();
  b.loop_end();
  return b.take();
}

// ---------------------------------------------------------------------------
// Fused unroll (libdnn style): wg (tile_x, tm), one output row segment per
// workgroup across tm output channels; the unrolled tile lives only in
// shared memory.

KernelProgram lower_fused_stage(const ShapeCtx& s, const AlgoConfig& cfg,
                                std::int64_t in_off, std::int64_t f_off,
                                std::int64_t out_off) {
  const int tm = cfg.gemm_tile_m;
  const int tx = cfg.tile_x;
  if (tx * tm > kMaxWorkgroupThreads) {
    throw ConfigError("fused tile_x * gemm_tile_m exceeds max workgroup size");
  }
  KernelBuilder b("fused_unroll_conv", tx, tm);
  b.grid(ceil_div(s.OW, tx), s.OH, ceil_div(s.K, tm));

  const std::int64_t a_sh = 0;                       // tm x RS filter block
  const std::int64_t b_sh = 4ll * tm * s.rs();       // RS x tile_x unrolled tile
  b.shared(4ll * tm * s.rs() + 4ll * s.rs() * tx);

  const int acc = b.decl("acc", 1, RegClass::accumulator);
  const int av = b.decl("a_val", 1, RegClass::filter_val, true);
  const int bv = b.decl("b_val", 1, RegClass::image_val, true);
  const int la = b.decl("a_stage", 1, RegClass::value, true);
  const int lb = b.decl("b_stage", 1, RegClass::value, true);
  const int adr = b.decl("idx", 1, RegClass::address, true);

  const AffineExpr col = A(0).wx(tx).tx(1);          // output x
  const AffineExpr krow = A(0).wz(tm).ty(1);         // output channel

  const int lc = b.loop_begin(s.C);
  {
    // Filter block staged by the tx==0 thread column.
    const int lw = b.loop_begin(s.rs());
    {
      b.ialu(R0(adr), {}, {G(A(0).tx(1), 1)});
      b.ld_global(R0(la),
                  A(f_off).wz(4ll * tm * s.C * s.rs()).ty(4ll * s.C * s.rs())
                      .lp(lc, 4ll * s.rs()).lp(lw, 4),
                  {G(A(0).tx(1), 1), G(krow, s.K)}, /*pred_zero=*/true);
      b.st_shared(R0(la), A(a_sh).ty(4ll * s.rs()).lp(lw, 4),
                  {G(A(0).tx(1), 1)});
    }
    b.loop_end();
    // Unrolled tile constructed on the fly by the ty==0 thread row; the
    // index arithmetic below is the cost im2col pays once but fused pays
    // per channel block.
    const int lr = b.loop_begin(s.R);
    const int ls = b.loop_begin(s.S);
    {
      const AffineExpr iy = A(-s.pad).wy(s.stride).lp(lr, 1);
      const AffineExpr ix =
          A(-s.pad).wx(static_cast<std::int64_t>(tx) * s.stride).tx(s.stride).lp(ls, 1);
      b.ialu(R0(adr), {}, {G(A(0).ty(1), 1)});
      b.ialu(R0(adr), {}, {G(A(0).ty(1), 1)});
      b.ld_global(R0(lb),
                  A(in_off - 4ll * s.pad * s.W - 4ll * s.pad)
                      .lp(lc, 4ll * s.hw())
                      .wy(4ll * s.stride * s.W)
                      .lp(lr, 4ll * s.W)
                      .wx(4ll * tx * s.stride)
                      .tx(4ll * s.stride)
                      .lp(ls, 4),
                  {G(A(0).ty(1), 1), G(iy, s.H), G(ix, s.W)},
                  /*pred_zero=*/true);
      b.st_shared(R0(lb),
                  A(b_sh).lp(lr, 4ll * s.S * tx).lp(ls, 4ll * tx).tx(4),
                  {G(A(0).ty(1), 1)});
    }
    b.loop_end();
    b.loop_end();
    b.barrier();
    const int lw2 = b.loop_begin(s.rs());
    {
      b.ld_shared(R0(av), A(a_sh).ty(4ll * s.rs()).lp(lw2, 4));
      b.ld_shared(R0(bv), A(b_sh).lp(lw2, 4ll * tx).tx(4));
      b.fma(R0(acc), R0(av), R0(bv), R0(acc), {G(col, s.OW), G(krow, s.K)});
    }
    b.loop_end();
  }
  b.loop_end();

  b.ialu(R0(adr));
  b.st_global(R0(acc),
              A(out_off).wz(4ll * tm * s.ohow()).ty(4ll * s.ohow())
                  .wy(4ll * s.OW).wx(4ll * tx).tx(4),
              {G(col, s.OW), G(krow, s.K)});
  return b.take();
}

// ---------------------------------------------------------------------------
// Winograd transform stages.

KernelProgram lower_wino_input_stage(const ShapeCtx& s, const WinogradPlan& plan,
                                     std::int64_t in_off, std::int64_t v_off) {
  const int T = plan.tiles_y * plan.tiles_x;
  // Full-width workgroups: lanes cover tile columns, rows of tiles stack in
  // tid_y so the plane-major stores coalesce.
  const int rows = std::max(1, std::min(plan.tiles_y,
                                        kMaxWorkgroupThreads / plan.tiles_x));
  KernelBuilder b("winograd_trans_from_image", plan.tiles_x, rows);
  b.grid(1, ceil_div(plan.tiles_y, rows), s.C);
  // The 4x4 patches overlap by two pixels, so the workgroup stages its input
  // strip once and the transforms read the overlaps from shared memory.
  const int threads = plan.tiles_x * rows;
  const int strip_rows = 2 * rows + 2;
  const int strip_cols = 2 * plan.tiles_x + 2;
  b.shared(4ll * strip_rows * strip_cols);

  int d[16], w[16], v[16];
  for (int i = 0; i < 16; ++i) d[i] = b.decl("d" + std::to_string(i), 1, RegClass::image_val);
  for (int i = 0; i < 16; ++i) w[i] = b.decl("w" + std::to_string(i), 1, RegClass::value);
  for (int i = 0; i < 16; ++i) v[i] = b.decl("v" + std::to_string(i), 1, RegClass::value);
  const int lt = b.decl("strip", 1, RegClass::value, true);
  const int adr = b.decl("idx", 1, RegClass::address, true);

  const AffineExpr tile_row = A(0).wy(rows).ty(1);  // tyi
  const int lh = b.loop_begin(strip_rows);
  const int lhx = b.loop_begin(ceil_div(strip_cols, threads));
  {
    const AffineExpr col = A(0).lp(lhx, threads).ty(plan.tiles_x).tx(1);
    const AffineExpr iy = A(-s.pad).wy(2ll * rows).lp(lh, 1);
    const AffineExpr ix = A(-s.pad).lp(lhx, threads).ty(plan.tiles_x).tx(1);
    b.ialu(R0(adr), {}, {G(col, strip_cols)});
    b.ld_global(R0(lt),
                A(in_off - 4ll * s.pad * s.W - 4ll * s.pad)
                    .wz(4ll * s.hw())
                    .wy(4ll * 2 * rows * s.W)
                    .lp(lh, 4ll * s.W)
                    .lp(lhx, 4ll * threads)
                    .ty(4ll * plan.tiles_x)
                    .tx(4),
                {G(col, strip_cols), G(iy, s.H), G(ix, s.W)},
                /*pred_zero=*/true);
    b.st_shared(R0(lt),
                A(0).lp(lh, 4ll * strip_cols).lp(lhx, 4ll * threads)
                    .ty(4ll * plan.tiles_x).tx(4),
                {G(col, strip_cols)});
  }
  b.loop_end();
  b.loop_end();
  b.barrier();
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      b.ld_shared(R0(d[i * 4 + j]),
                  A(4ll * (i * strip_cols + j)).ty(4ll * 2 * strip_cols).tx(4ll * 2));
    }
  }
  // w = BT d ; v = w BT^T   (each element one signed add)
  for (int j = 0; j < 4; ++j) {
    b.add(R0(w[0 * 4 + j]), R0(d[0 * 4 + j]), R0(d[2 * 4 + j]), false, true);
    b.add(R0(w[1 * 4 + j]), R0(d[1 * 4 + j]), R0(d[2 * 4 + j]), false, false);
    b.add(R0(w[2 * 4 + j]), R0(d[2 * 4 + j]), R0(d[1 * 4 + j]), false, true);
    b.add(R0(w[3 * 4 + j]), R0(d[1 * 4 + j]), R0(d[3 * 4 + j]), false, true);
  }
  for (int i = 0; i < 4; ++i) {
    b.add(R0(v[i * 4 + 0]), R0(w[i * 4 + 0]), R0(w[i * 4 + 2]), false, true);
    b.add(R0(v[i * 4 + 1]), R0(w[i * 4 + 1]), R0(w[i * 4 + 2]), false, false);
    b.add(R0(v[i * 4 + 2]), R0(w[i * 4 + 2]), R0(w[i * 4 + 1]), false, true);
    b.add(R0(v[i * 4 + 3]), R0(w[i * 4 + 1]), R0(w[i * 4 + 3]), false, true);
  }
  b.ialu(R0(adr));
  for (int p = 0; p < 16; ++p) {
    // V[p][c][t], t = tyi*tiles_x + txi: consecutive lanes, dense rows
    b.st_global(R0(v[p]),
                A(v_off + 4ll * p * s.C * T).wz(4ll * T)
                    .wy(4ll * rows * plan.tiles_x).ty(4ll * plan.tiles_x).tx(4),
                {G(tile_row, plan.tiles_y)});
  }
  return b.take();
}

KernelProgram lower_wino_output_stage(const ShapeCtx& s, const WinogradPlan& plan,
                                      std::int64_t m_off, std::int64_t out_off) {
  const int T = plan.tiles_y * plan.tiles_x;
  const int rows = std::max(1, std::min(plan.tiles_y,
                                        kMaxWorkgroupThreads / plan.tiles_x));
  KernelBuilder b("winograd_trans_to_output", plan.tiles_x, rows);
  b.grid(1, ceil_div(plan.tiles_y, rows), s.K);

  int m[16], w[8], o[4];
  for (int i = 0; i < 16; ++i) m[i] = b.decl("m" + std::to_string(i), 1, RegClass::value);
  for (int i = 0; i < 8; ++i) w[i] = b.decl("w" + std::to_string(i), 1, RegClass::value);
  for (int i = 0; i < 4; ++i) o[i] = b.decl("o" + std::to_string(i), 1, RegClass::value);
  const int adr = b.decl("idx", 1, RegClass::address, true);

  const AffineExpr tile_row = A(0).wy(rows).ty(1);
  b.ialu(R0(adr));
  for (int p = 0; p < 16; ++p) {
    b.ld_global(R0(m[p]),
                A(m_off + 4ll * p * s.K * T).wz(4ll * T)
                    .wy(4ll * rows * plan.tiles_x).ty(4ll * plan.tiles_x).tx(4),
                {G(tile_row, plan.tiles_y)}, /*pred_zero=*/true);
  }
  // w = AT m (rows of three taps: two adds each), o = w AT^T
  for (int j = 0; j < 4; ++j) {
    b.add(R0(w[0 * 4 + j]), R0(m[0 * 4 + j]), R0(m[1 * 4 + j]), false, false);
    b.add(R0(w[0 * 4 + j]), R0(w[0 * 4 + j]), R0(m[2 * 4 + j]), false, false);
    b.add(R0(w[1 * 4 + j]), R0(m[1 * 4 + j]), R0(m[2 * 4 + j]), false, true);
    b.add(R0(w[1 * 4 + j]), R0(w[1 * 4 + j]), R0(m[3 * 4 + j]), false, true);
  }
  for (int i = 0; i < 2; ++i) {
    b.add(R0(o[i * 2 + 0]), R0(w[i * 4 + 0]), R0(w[i * 4 + 1]), false, false);
    b.add(R0(o[i * 2 + 0]), R0(o[i * 2 + 0]), R0(w[i * 4 + 2]), false, false);
    b.add(R0(o[i * 2 + 1]), R0(w[i * 4 + 1]), R0(w[i * 4 + 2]), false, true);
    b.add(R0(o[i * 2 + 1]), R0(o[i * 2 + 1]), R0(w[i * 4 + 3]), false, true);
  }
  b.ialu(R0(adr));
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      const AffineExpr oy = A(i).wy(2ll * rows).ty(2);
      const AffineExpr ox = A(j).tx(2);
      b.st_global(R0(o[i * 2 + j]),
                  A(out_off + 4ll * (i * s.OW + j)).wz(4ll * s.ohow())
                      .wy(4ll * 2 * rows * s.OW).ty(4ll * 2 * s.OW).tx(4ll * 2),
                  {G(tile_row, plan.tiles_y), G(oy, s.OH), G(ox, s.OW)});
    }
  }
  return b.take();
}

// ---------------------------------------------------------------------------
// Direct convolution, Algorithm-1 structure (cache / nocache variants).

KernelProgram lower_direct_stage(const ShapeCtx& s, const AlgoConfig& cfg) {
  const DirectGeom g = direct_geom(
      {s.C, s.K, s.H, s.W, s.R, s.S, s.pad, s.stride}, cfg);
  const int ocpt = cfg.out_channels_per_thread;
  const std::int64_t in_off = 0;
  const std::int64_t f_off = 4ll * s.C * s.hw();
  const std::int64_t out_off = f_off + 4ll * s.K * s.C * s.rs();

  KernelBuilder b("direct_conv", cfg.tile_x, cfg.tile_y);
  b.grid(g.tiles_x, g.tiles_y, g.channel_blocks);
  const std::int64_t img_sh = 0;
  const std::int64_t img_sh_bytes = 4ll * g.halo_y * g.halo_x;
  const std::int64_t f_sh = img_sh_bytes;
  b.shared(cfg.cache_filter ? img_sh_bytes + 4ll * s.rs() : img_sh_bytes);

  const int acc = b.decl("out_reg", ocpt, RegClass::accumulator);
  const int iv = b.decl("img_val", 1, RegClass::image_val, true);
  const int lt = b.decl("img_stage", 1, RegClass::value, true);
  const int adr = b.decl("idx", 1, RegClass::address, true);
  int fv = -1;
  std::vector<int> fregs;
  if (cfg.cache_filter) {
    fv = b.decl("filter_val", 1, RegClass::filter_val, true);
  } else {
    // One architectural register per tap: the price of pipelining the
    // uncached dot product.
    for (int t = 0; t < s.rs(); ++t) {
      fregs.push_back(b.decl("filter_w" + std::to_string(t), 1,
                             RegClass::filter_val, false));
    }
  }
  const int ftmp = cfg.cache_filter ? b.decl("f_stage", 1, RegClass::value, true) : -1;

  const AffineExpr oy = A(0).wy(cfg.tile_y).ty(1);
  const AffineExpr ox = A(0).wx(cfg.tile_x).tx(1);
  const AffineExpr flat = A(0).ty(cfg.tile_x).tx(1);

  const int lc = b.loop_begin(s.C);
  {
    // Cooperative halo staging: quadrant offsets cover (halo_y, halo_x).
    for (int dy = 0; dy < g.halo_y; dy += cfg.tile_y) {
      for (int dx = 0; dx < g.halo_x; dx += cfg.tile_x) {
        std::vector<Guard> gs = {G(A(dy).ty(1), g.halo_y),
                                 G(A(dx).tx(1), g.halo_x)};
        const AffineExpr iy =
            A(dy - s.pad).wy(static_cast<std::int64_t>(cfg.tile_y) * s.stride).ty(1);
        const AffineExpr ix =
            A(dx - s.pad).wx(static_cast<std::int64_t>(cfg.tile_x) * s.stride).tx(1);
        std::vector<Guard> lgs = gs;
        lgs.push_back(G(iy, s.H));
        lgs.push_back(G(ix, s.W));
        b.ld_global(R0(lt),
                    A(in_off + 4ll * ((dy - s.pad) * s.W + dx - s.pad))
                        .lp(lc, 4ll * s.hw())
                        .wy(4ll * cfg.tile_y * s.stride * s.W)
                        .ty(4ll * s.W)
                        .wx(4ll * cfg.tile_x * s.stride)
                        .tx(4),
                    lgs, /*pred_zero=*/true);
        b.st_shared(R0(lt),
                    A(img_sh + 4ll * (dy * g.halo_x + dx)).ty(4ll * g.halo_x).tx(4),
                    gs);
      }
    }
    if (cfg.cache_filter) {
      const int lj = b.loop_begin(ocpt);
      {
        // Filters staged cooperatively (strip-mined when the workgroup has
        // fewer threads than taps), then the barrier the pseudocode places
        // before the dot product.
        const int threads = cfg.tile_x * cfg.tile_y;
        const int lf = b.loop_begin(ceil_div(static_cast<int>(s.rs()), threads));
        {
          const AffineExpr word = A(0).lp(lf, threads).ty(cfg.tile_x).tx(1);
          b.ialu(R0(adr), {}, {G(word, s.rs())});
          b.ld_global(R0(ftmp),
                      A(f_off).wz(4ll * ocpt * s.C * s.rs()).lp(lj, 4ll * s.C * s.rs())
                          .lp(lc, 4ll * s.rs()).lp(lf, 4ll * threads)
                          .ty(4ll * cfg.tile_x).tx(4),
                      {G(word, s.rs())}, /*pred_zero=*/true);
          b.st_shared(R0(ftmp),
                      A(f_sh).lp(lf, 4ll * threads).ty(4ll * cfg.tile_x).tx(4),
                      {G(word, s.rs())});
        }
        b.loop_end();
        b.barrier();
        const int lr = b.loop_begin(s.R);
        const int ls = b.loop_begin(s.S);
        {
          b.ld_shared(R0(fv), A(f_sh).lp(lr, 4ll * s.S).lp(ls, 4));  // broadcast
          b.ld_shared(R0(iv),
                      A(img_sh).ty(4ll * s.stride * g.halo_x).lp(lr, 4ll * g.halo_x)
                          .tx(4ll * s.stride).lp(ls, 4));
          b.fma(RegRef{acc, A(0).lp(lj, 1)}, R0(fv), R0(iv),
                RegRef{acc, A(0).lp(lj, 1)}, {G(oy, s.OH), G(ox, s.OW)});
        }
        b.loop_end();
        b.loop_end();
      }
      b.loop_end();
    } else {
      b.barrier();
      const int lj = b.loop_begin(ocpt);
      {
        for (int t = 0; t < s.rs(); ++t) {
          const int r = t / s.S, ss = t % s.S;
          b.ld_global(R0(fregs[t]),
                      A(f_off + 4ll * t).wz(4ll * ocpt * s.C * s.rs())
                          .lp(lj, 4ll * s.C * s.rs()).lp(lc, 4ll * s.rs()));
          b.ld_shared(R0(iv),
                      A(img_sh + 4ll * (r * g.halo_x + ss))
                          .ty(4ll * s.stride * g.halo_x).tx(4ll * s.stride));
          b.fma(RegRef{acc, A(0).lp(lj, 1)}, R0(fregs[t]), R0(iv),
                RegRef{acc, A(0).lp(lj, 1)}, {G(oy, s.OH), G(ox, s.OW)});
        }
      }
      b.loop_end();
    }
  }
  b.loop_end();

  const int lj2 = b.loop_begin(ocpt);
  {
    b.ialu(R0(adr));
    b.st_global(RegRef{acc, A(0).lp(lj2, 1)},
                A(out_off).wz(4ll * ocpt * s.ohow()).lp(lj2, 4ll * s.ohow())
                    .wy(4ll * cfg.tile_y * s.OW).ty(4ll * s.OW)
                    .wx(4ll * cfg.tile_x).tx(4),
                {G(oy, s.OH), G(ox, s.OW)});
  }
  b.loop_end();
  return b.take();
}

// ---------------------------------------------------------------------------
// ILP-M: threads own output channels, iterate pixels; one filter weight in a
// register per (r, s) step; filters in CRSK so the loads coalesce.

KernelProgram lower_ilpm_stage(const ShapeCtx& s, const AlgoConfig& cfg) {
  const IlpmGeom g = ilpm_geom({s.C, s.K, s.H, s.W, s.R, s.S, s.pad, s.stride}, cfg);
  const std::int64_t in_off = 0;
  const std::int64_t f_off = 4ll * s.C * s.hw();
  const std::int64_t out_off = f_off + 4ll * s.K * s.C * s.rs();
  const int kwg = g.wg_threads;
  const int tp = cfg.tile_y * cfg.tile_x;

  KernelBuilder b("ilpm_conv", kwg, 1);
  b.grid(g.tiles_x, g.tiles_y, g.channel_blocks);
  const std::int64_t img_bytes = 4ll * g.halo_y * g.halo_x;
  const std::int64_t tr_bytes =
      cfg.transpose_output ? 4ll * cfg.tile_x * (kwg + 1) : 0;
  b.shared(std::max(img_bytes, tr_bytes));

  const int acc = b.decl("out_reg", tp, RegClass::accumulator);
  const int fval = b.decl("filter_reg", 1, RegClass::filter_val, true);
  const int iv = b.decl("img_val", 1, RegClass::image_val, true);
  const int lt = b.decl("img_stage", 1, RegClass::value, true);
  const int adr = b.decl("idx", 1, RegClass::address, true);
  const int tv = cfg.transpose_output ? b.decl("tr_val", 1, RegClass::value, true) : -1;

  const int lc = b.loop_begin(s.C);
  {
    // Cooperative halo staging, one row of the halo per step; lanes sweep
    // the row in workgroup-wide strips when the row is wider than the wg.
    const int lh = b.loop_begin(g.halo_y);
    const int lhx = b.loop_begin(ceil_div(g.halo_x, kwg));
    {
      const AffineExpr hcol = A(0).lp(lhx, kwg).tx(1);
      const AffineExpr iy =
          A(-s.pad).wy(static_cast<std::int64_t>(cfg.tile_y) * s.stride).lp(lh, 1);
      const AffineExpr ix = A(-s.pad)
                                .wx(static_cast<std::int64_t>(cfg.tile_x) * s.stride)
                                .lp(lhx, kwg)
                                .tx(1);
      b.ialu(R0(adr), {}, {G(hcol, g.halo_x)});
      b.ld_global(R0(lt),
                  A(in_off - 4ll * s.pad * s.W - 4ll * s.pad)
                      .lp(lc, 4ll * s.hw())
                      .wy(4ll * cfg.tile_y * s.stride * s.W)
                      .lp(lh, 4ll * s.W)
                      .wx(4ll * cfg.tile_x * s.stride)
                      .lp(lhx, 4ll * kwg)
                      .tx(4),
                  {G(hcol, g.halo_x), G(iy, s.H), G(ix, s.W)},
                  /*pred_zero=*/true);
      b.st_shared(R0(lt), A(0).lp(lh, 4ll * g.halo_x).lp(lhx, 4ll * kwg).tx(4),
                  {G(hcol, g.halo_x)});
    }
    b.loop_end();
    b.loop_end();
    b.barrier();
    const int lr = b.loop_begin(s.R);
    const int ls = b.loop_begin(s.S);
    {
      b.ialu(R0(adr));
      // filter[c][r][s][k], k = wgz*kwg + tid: consecutive lanes read
      // consecutive addresses (the coalescing the CRSK layout buys).
      b.ld_global(R0(fval),
                  A(f_off).lp(lc, 4ll * s.rs() * s.K).lp(lr, 4ll * s.S * s.K)
                      .lp(ls, 4ll * s.K).wz(4ll * kwg).tx(4));
      const int lwy = b.loop_begin(cfg.tile_y);
      const int lwx = b.loop_begin(cfg.tile_x);
      {
        // Every thread reads the same shared word: broadcast, no conflicts.
        b.ld_shared(R0(iv),
                    A(0).lp(lwy, 4ll * s.stride * g.halo_x).lp(lr, 4ll * g.halo_x)
                        .lp(lwx, 4ll * s.stride).lp(ls, 4));
        b.fma(RegRef{acc, A(0).lp(lwy, cfg.tile_x).lp(lwx, 1)}, R0(fval),
              R0(iv), RegRef{acc, A(0).lp(lwy, cfg.tile_x).lp(lwx, 1)});
      }
      b.loop_end();
      b.loop_end();
    }
    b.loop_end();
    b.loop_end();
  }
  b.loop_end();

  if (!cfg.transpose_output) {
    // Straight per-thread store: lanes are output channels, so consecutive
    // lanes write strided addresses (uncoalesced, the trade-off the
    // transpose option removes).
    const int lwy = b.loop_begin(cfg.tile_y);
    const int lwx = b.loop_begin(cfg.tile_x);
    {
      const AffineExpr oy = A(0).wy(cfg.tile_y).lp(lwy, 1);
      const AffineExpr ox = A(0).wx(cfg.tile_x).lp(lwx, 1);
      b.ialu(R0(adr));
      b.st_global(RegRef{acc, A(0).lp(lwy, cfg.tile_x).lp(lwx, 1)},
                  A(out_off).wz(4ll * kwg * s.ohow()).tx(4ll * s.ohow())
                      .wy(4ll * cfg.tile_y * s.OW).lp(lwy, 4ll * s.OW)
                      .wx(4ll * cfg.tile_x).lp(lwx, 4),
                  {G(oy, s.OH), G(ox, s.OW)});
    }
    b.loop_end();
    b.loop_end();
  } else {
    // Stage one tile row through shared memory so lanes become pixels and
    // the global write coalesces. Buffer stride kwg+1 keeps the transposed
    // reads off a single bank.
    const int lwy = b.loop_begin(cfg.tile_y);
    {
      const int lq = b.loop_begin(cfg.tile_x);
      {
        b.st_shared(RegRef{acc, A(0).lp(lwy, cfg.tile_x).lp(lq, 1)},
                    A(0).lp(lq, 4ll * (kwg + 1)).tx(4));
      }
      b.loop_end();
      b.barrier();
      const int lk = b.loop_begin(kwg);
      const int lqb = b.loop_begin(ceil_div(cfg.tile_x, kwg));
      {
        const AffineExpr px = A(0).lp(lqb, kwg).tx(1);  // pixel within row
        const AffineExpr oy = A(0).wy(cfg.tile_y).lp(lwy, 1);
        const AffineExpr ox = A(0).wx(cfg.tile_x).lp(lqb, kwg).tx(1);
        b.ld_shared(R0(tv),
                    A(0).lp(lqb, 4ll * kwg * (kwg + 1)).tx(4ll * (kwg + 1)).lp(lk, 4),
                    {G(px, cfg.tile_x)});
        b.ialu(R0(adr), {}, {G(px, cfg.tile_x)});
        b.st_global(R0(tv),
                    A(out_off).wz(4ll * kwg * s.ohow()).lp(lk, 4ll * s.ohow())
                        .wy(4ll * cfg.tile_y * s.OW).lp(lwy, 4ll * s.OW)
                        .wx(4ll * cfg.tile_x).lp(lqb, 4ll * kwg).tx(4),
                    {G(px, cfg.tile_x), G(oy, s.OH), G(ox, s.OW)});
      }
      b.loop_end();
      b.loop_end();
    }
    b.loop_end();
  }
  return b.take();
}

}  // namespace

// ---------------------------------------------------------------------------

LoweredPipeline lower(const AlgoConfig& cfg, const ConvShape& shape) {
  cfg.validate(shape);
  const ShapeCtx s(shape);

  LoweredPipeline pl;
  pl.shape = shape;
  pl.cfg = cfg;
  pl.input_off = 0;
  const std::int64_t in_b = 4ll * s.C * s.hw();
  const std::int64_t f_b = 4ll * s.K * s.C * s.rs();
  const std::int64_t out_b = 4ll * s.K * s.ohow();

  switch (cfg.algorithm) {
    case AlgoKind::im2col: {
      pl.filter_off = in_b;
      const std::int64_t um_off = in_b + f_b;
      const std::int64_t um_b = 4ll * s.C * s.rs() * s.ohow();
      pl.output_off = um_off + um_b;
      pl.arena_bytes = pl.output_off + out_b;
      pl.filter_prep = FilterPrep::kcrs;
      pl.stages.push_back(lower_im2col_stage(s, pl.input_off, um_off));
      pl.stages.push_back(lower_gemm_stage(
          "im2col_gemm", s.K, static_cast<int>(s.ohow()),
          static_cast<int>(s.C * s.rs()), pl.filter_off, um_off, pl.output_off,
          cfg.gemm_tile_m, cfg.gemm_tile_n, cfg.gemm_tile_k));
      break;
    }
    case AlgoKind::fused_unroll: {
      pl.filter_off = in_b;
      pl.output_off = in_b + f_b;
      pl.arena_bytes = pl.output_off + out_b;
      pl.filter_prep = FilterPrep::kcrs;
      pl.stages.push_back(
          lower_fused_stage(s, cfg, pl.input_off, pl.filter_off, pl.output_off));
      break;
    }
    case AlgoKind::winograd: {
      const WinogradPlan plan = WinogradPlan::for_shape(shape);
      const std::int64_t T = static_cast<std::int64_t>(plan.tiles_y) * plan.tiles_x;
      const std::int64_t u_b = 16ll * s.K * s.C * 4;
      const std::int64_t v_b = 16ll * s.C * T * 4;
      const std::int64_t m_b = 16ll * s.K * T * 4;
      pl.filter_off = in_b;  // U lives where filters would
      const std::int64_t v_off = in_b + u_b;
      const std::int64_t m_off = v_off + v_b;
      pl.output_off = m_off + m_b;
      pl.arena_bytes = pl.output_off + out_b;
      pl.filter_prep = FilterPrep::winograd_u;
      pl.stages.push_back(lower_wino_input_stage(s, plan, pl.input_off, v_off));
      // The 16 independent plane GEMMs batch into one launch along grid z.
      pl.stages.push_back(lower_gemm_stage(
          "winograd_gemm", s.K, static_cast<int>(T), s.C, pl.filter_off, v_off,
          m_off, cfg.gemm_tile_m, cfg.gemm_tile_n, cfg.gemm_tile_k,
          /*batches=*/16, 4ll * s.K * s.C, 4ll * s.C * T, 4ll * s.K * T));
      pl.stages.push_back(lower_wino_output_stage(s, plan, m_off, pl.output_off));
      break;
    }
    case AlgoKind::direct_cache:
    case AlgoKind::direct_nocache: {
      AlgoConfig c = cfg;
      c.cache_filter = (cfg.algorithm == AlgoKind::direct_cache);
      pl.cfg = c;
      pl.filter_off = in_b;
      pl.output_off = in_b + f_b;
      pl.arena_bytes = pl.output_off + out_b;
      pl.filter_prep = FilterPrep::kcrs;
      pl.stages.push_back(lower_direct_stage(s, c));
      break;
    }
    case AlgoKind::ilpm: {
      pl.filter_off = in_b;
      pl.output_off = in_b + f_b;
      pl.arena_bytes = pl.output_off + out_b;
      pl.filter_prep = FilterPrep::crsk;
      pl.stages.push_back(lower_ilpm_stage(s, cfg));
      break;
    }
    case AlgoKind::oracle:
      throw ConfigError("oracle has no kernel lowering");
  }
  return pl;
}

}  // namespace convlab
