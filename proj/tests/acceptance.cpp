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
//
// Acceptance suite: one pass/fail line per criterion, nonzero exit if any
// criterion fails. Criteria marked "ordering" compare model-level cycle
// counts; absolute speedups are hardware measurements and are out of scope.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "convlab/algos.hpp"
#include "convlab/analysis.hpp"
#include "convlab/interp.hpp"
#include "convlab/machine.hpp"
#include "convlab/oracle.hpp"
#include "convlab/report.hpp"
#include "convlab/sim.hpp"
#include "convlab/tuner.hpp"

using namespace convlab;

namespace {

int g_failures = 0;

void report(int criterion, const char* name, bool pass, const std::string& detail) {
  std::printf("%s  %2d  %-28s %s\n", pass ? "PASS" : "FAIL", criterion, name,
              detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

ConvShape shape_ck(int ck, int hw) {
  ConvShape s;
  s.in_channels = s.out_channels = ck;
  s.height = s.width = hw;
  s.filter_h = s.filter_w = 3;
  s.pad = 1;
  s.stride = 1;
  return s;
}

double max_rel_err(const Tensor& got, const Tensor& want) {
  double m = 0;
  for (std::int64_t i = 0; i < got.size(); ++i) {
    const double w = want.data()[i];
    m = std::max(m, std::abs(got.data()[i] - w) / std::max(1.0, std::abs(w)));
  }
  return m;
}

// ---- criterion 1 -----------------------------------------------------------

void criterion_oracle_equivalence() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng seeds(20260808);
  double worst = 0, worst_wino = 0;
  bool ok = true;
  std::string worst_case = "-";
  for (const LayerSpec& layer : resnet_layers()) {
    for (int scale : {8, 16, 32}) {
      const ConvShape sh = shape_ck(scale, layer.spatial);
      Rng rng(seeds.next_u64());
      Tensor input = Tensor::chw(scale, sh.height, sh.width);
      Tensor filters = Tensor::kcrs(scale, scale, 3, 3);
      input.fill_random(rng);
      filters.fill_random(rng);
      const Tensor want = oracle_conv(input, filters, sh).output;
      for (AlgoKind a : {AlgoKind::im2col, AlgoKind::fused_unroll,
                         AlgoKind::winograd, AlgoKind::direct_cache,
                         AlgoKind::direct_nocache, AlgoKind::ilpm}) {
        const AlgoConfig cfg = default_config(a, sh);
        const AlgoResult r = run_algorithm(cfg, input, filters, sh);
        const double err = max_rel_err(r.output, want);
        const double tol = a == AlgoKind::winograd ? 1e-3 : 1e-4;
        if (a == AlgoKind::winograd) {
          worst_wino = std::max(worst_wino, err);
        } else {
          worst = std::max(worst, err);
        }
        if (err > tol) {
          ok = false;
          worst_case = layer.name + "/" + algo_name(a) + " scale " +
                       std::to_string(scale);
        }
      }
    }
  }
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(
                        std::chrono::steady_clock::now() - t0)
                        .count();
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "max_rel_err=%.2e (winograd %.2e), runtime %llds (< 120s: %s)%s%s",
                worst, worst_wino, static_cast<long long>(secs),
                secs < 120 ? "yes" : "NO",
                ok ? "" : ", first breach: ", ok ? "" : worst_case.c_str());
  report(1, "oracle-equivalence", ok && secs < 120, buf);
}

// ---- criteria 2-5: paper-anchored analytic traffic -------------------------

void criterion_im2col_traffic() {
  const ConvShape conv4 = shape_ck(256, 14);
  Rng rng(5);
  Tensor input = Tensor::chw(256, 14, 14);
  input.fill_random(rng);
  const UnrolledMatrix um = im2col_unroll(input, conv4);
  AlgoConfig cfg = default_config(AlgoKind::im2col, conv4);
  const auto rows = analytic_stage_traffic(cfg, conv4);
  const bool ok = um.bytes == 1806336ull && rows[0].write_bytes == 1806336ull &&
                  rows[0].read_bytes == 200704ull;
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "unrolled=%llu B (want 1806336), stage read=%llu B (want 200704)",
                static_cast<unsigned long long>(um.bytes),
                static_cast<unsigned long long>(rows[0].read_bytes));
  report(2, "im2col-traffic-exact", ok, buf);
}

void criterion_winograd_traffic() {
  const ConvShape conv4 = shape_ck(256, 14);
  const AlgoConfig cfg = default_config(AlgoKind::winograd, conv4);
  const auto rows = analytic_stage_traffic(cfg, conv4);
  const bool ok = rows[0].write_bytes == 802816ull;
  char buf[96];
  std::snprintf(buf, sizeof(buf), "transformed-input write=%llu B (want 802816)",
                static_cast<unsigned long long>(rows[0].write_bytes));
  report(3, "winograd-transform-traffic", ok, buf);
}

void criterion_winograd_multiplies() {
  bool ok = true;
  std::string detail;
  for (int hw : {14, 56}) {  // tile-aligned conv4.x and conv2.x geometries
    const ConvShape sh = shape_ck(hw == 14 ? 256 : 64, hw);
    const AlgoConfig cfg = default_config(AlgoKind::winograd, sh);
    const auto rows = analytic_stage_traffic(cfg, sh);
    auto [oh, ow] = sh.output_shape();
    const std::uint64_t macs = static_cast<std::uint64_t>(sh.out_channels) *
                               oh * ow * sh.in_channels * 9;
    ok = ok && rows[1].multiplies * 36 == macs * 16;
    if (hw == 14) {
      char buf[160];
      std::snprintf(buf, sizeof(buf),
                    "hadamard=%llu oracle_macs=%llu ratio=16/36 exact: %s",
                    static_cast<unsigned long long>(rows[1].multiplies),
                    static_cast<unsigned long long>(macs),
                    rows[1].multiplies * 36 == macs * 16 ? "yes" : "no");
      detail = buf;
    }
  }
  report(4, "winograd-multiply-reduction", ok, detail);
}

void criterion_ilpm_traffic() {
  const ConvShape conv4 = shape_ck(256, 14);
  // The profiled configuration: one workgroup owns the whole 14x14 image
  // (1 KiB staged tile), so every filter byte is read exactly once.
  AlgoConfig cfg;
  cfg.algorithm = AlgoKind::ilpm;
  cfg.tile_x = cfg.tile_y = 14;
  const IlpmReads r = ilpm_analytic_reads(conv4, cfg);
  const double total_mib = static_cast<double>(r.filter_bytes + r.image_bytes) /
                           (1024.0 * 1024.0);
  const bool ok = r.filter_bytes == 2359296ull &&
                  std::abs(total_mib / 2.46 - 1.0) <= 0.05;
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "filters=%llu B (exact once), total=%.3f MiB vs 2.46 (|dev| %.1f%%)",
                static_cast<unsigned long long>(r.filter_bytes), total_mib,
                std::abs(total_mib / 2.46 - 1.0) * 100.0);
  report(5, "ilpm-traffic", ok, buf);
}

// ---- criterion 6: barrier census --------------------------------------------

void criterion_barriers() {
  const ConvShape conv4 = shape_ck(256, 14);
  AlgoConfig il;  // plain form: one barrier per input channel, no epilogue
  il.algorithm = AlgoKind::ilpm;
  il.tile_x = il.tile_y = 14;
  AlgoConfig dn = default_config(AlgoKind::direct_nocache, conv4);
  dn.out_channels_per_thread = 4;
  AlgoConfig dc = default_config(AlgoKind::direct_cache, conv4);
  dc.out_channels_per_thread = 4;
  const std::uint64_t b_il = barrier_census(lower(il, conv4).stages[0]);
  const std::uint64_t b_dn = barrier_census(lower(dn, conv4).stages[0]);
  const std::uint64_t b_dc = barrier_census(lower(dc, conv4).stages[0]);
  const bool ok = b_il == 256 && b_dn == 256 && b_dc == 1024;
  char buf[128];
  std::snprintf(buf, sizeof(buf), "ilpm=%llu nocache=%llu (want 256), cache=%llu (want 1024)",
                static_cast<unsigned long long>(b_il),
                static_cast<unsigned long long>(b_dn),
                static_cast<unsigned long long>(b_dc));
  report(6, "barrier-census", ok, buf);
}

// ---- criterion 7: register pressure -----------------------------------------

KernelProgram fig2(bool independent, int n) {
  KernelBuilder b(independent ? "fig2b" : "fig2a", 32, 1);
  b.grid(1, 1, 1);
  const int acc = b.decl("r0", 1, RegClass::accumulator);
  if (independent) {
    std::vector<int> regs;
    for (int i = 0; i < n; ++i)
      regs.push_back(b.decl("r" + std::to_string(i + 1), 1, RegClass::value));
    for (int i = 0; i < n; ++i)
      b.ld_global(RegRef{regs[i], AffineExpr(0)}, AffineExpr(4096ll * i).tx(4));
    for (int i = 0; i < n; ++i)
      b.add(RegRef{acc, AffineExpr(0)}, RegRef{acc, AffineExpr(0)},
            RegRef{regs[i], AffineExpr(0)});
  } else {
    const int r1 = b.decl("r1", 1, RegClass::value);
    for (int i = 0; i < n; ++i) {
      b.ld_global(RegRef{r1, AffineExpr(0)}, AffineExpr(4096ll * i).tx(4));
      b.add(RegRef{acc, AffineExpr(0)}, RegRef{acc, AffineExpr(0)},
            RegRef{r1, AffineExpr(0)});
    }
  }
  return b.take();
}

void criterion_register_pressure() {
  const ConvShape sh = shape_ck(64, 14);
  AlgoConfig il = default_config(AlgoKind::ilpm, sh);
  AlgoConfig dn = default_config(AlgoKind::direct_nocache, sh);
  const int depth = sh.filter_h * sh.filter_w;  // R*S = 9
  const RegisterReport ri = register_pressure(lower(il, sh).stages[0], depth);
  const RegisterReport rd = register_pressure(lower(dn, sh).stages[0], depth);
  const RegisterReport fa = register_pressure(fig2(false, 10), 1);
  const RegisterReport fb = register_pressure(fig2(true, 4), 4);
  const bool ok = ri.live(RegClass::filter_val) == 1 &&
                  rd.live(RegClass::filter_val) == 9 && fa.max_live == 2 &&
                  fb.max_live == 5;
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "filter regs: ilpm=%d (want 1) nocache=%d (want 9); micro a=%d (want 2) b=%d (want 5)",
                ri.live(RegClass::filter_val), rd.live(RegClass::filter_val),
                fa.max_live, fb.max_live);
  report(7, "register-pressure", ok, buf);
}

// ---- criterion 8: scoreboard latency hiding ---------------------------------

KernelProgram chain_prog(bool independent, int n, int grid) {
  KernelBuilder b(independent ? "indep" : "chain", 32, 1);
  b.grid(grid, 1, 1);
  const int acc = b.decl("r0", 1, RegClass::accumulator);
  if (independent) {
    std::vector<int> regs;
    for (int i = 0; i < n; ++i)
      regs.push_back(b.decl("r" + std::to_string(i + 1), 1, RegClass::value));
    for (int i = 0; i < n; ++i)
      b.ld_global(RegRef{regs[i], AffineExpr(0)},
                  AffineExpr(4096ll * i).tx(4).wx(1 << 20));
    for (int i = 0; i < n; ++i)
      b.add(RegRef{acc, AffineExpr(0)}, RegRef{acc, AffineExpr(0)},
            RegRef{regs[i], AffineExpr(0)});
  } else {
    const int r1 = b.decl("r1", 1, RegClass::value);
    for (int i = 0; i < n; ++i) {
      b.ld_global(RegRef{r1, AffineExpr(0)},
                  AffineExpr(4096ll * i).tx(4).wx(1 << 20));
      b.add(RegRef{acc, AffineExpr(0)}, RegRef{acc, AffineExpr(0)},
            RegRef{r1, AffineExpr(0)});
    }
  }
  return b.take();
}

void criterion_scoreboard() {
  MachineConfig m;
  m.name = "micro";
  m.num_cus = 1;
  m.schedulers_per_cu = 1;
  m.alus_per_cu = 32;
  m.max_warps_per_cu = 16;
  m.lat_global = 400;
  m.global_bytes_per_cycle = 1e9;
  m.l2_lines = 4;
  const int n = 10;
  const SimMetrics indep = simulate(chain_prog(true, n, 1), m);
  const SimMetrics chain = simulate(chain_prog(false, n, 1), m);
  const double ratio = static_cast<double>(chain.cycles) / indep.cycles;

  bool monotone = true;
  std::uint64_t prev = 0;
  const KernelProgram tlp = chain_prog(false, n, 8);
  for (int warps : {1, 2, 4, 8}) {
    MachineConfig mw = m;
    mw.max_warps_per_cu = warps;
    const std::uint64_t c = simulate(tlp, mw).cycles;
    if (warps > 1 && c > prev) monotone = false;
    prev = c;
  }
  const bool ok = indep.cycles <= static_cast<std::uint64_t>(
                                      m.lat_global + n * (m.lat_alu + 2) + 50) &&
                  chain.cycles >= static_cast<std::uint64_t>(n * m.lat_global) &&
                  ratio >= 5.0 && monotone;
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "independent=%llu (~N+lat), chain=%llu (~N*lat), ratio=%.1fx (>=5), TLP monotone 1..8: %s",
                static_cast<unsigned long long>(indep.cycles),
                static_cast<unsigned long long>(chain.cycles), ratio,
                monotone ? "yes" : "no");
  report(8, "scoreboard-latency-hiding", ok, buf);
}

// ---- criterion 9: bank conflicts --------------------------------------------

void criterion_bank_conflicts() {
  std::vector<std::int64_t> same(32, 1024), strided;
  for (int t = 0; t < 32; ++t) strided.push_back(4ll * 32 * t);
  const int broadcast = bank_conflict_extra(same, 32);
  const int serial = bank_conflict_extra(strided, 32);
  const ConvShape sh = shape_ck(32, 14);
  const AlgoConfig cfg = default_config(AlgoKind::ilpm, sh);
  const SimMetrics r = simulate(lower(cfg, sh).stages[0], preset_integrated());
  const bool ok = broadcast == 0 && serial == 31 &&
                  r.bank_conflict_extra_cycles == 0;
  char buf[140];
  std::snprintf(buf, sizeof(buf),
                "broadcast=%d (want 0), bank-stride=%d (want 31), ilpm main loop extra=%llu (want 0)",
                broadcast, serial,
                static_cast<unsigned long long>(r.bank_conflict_extra_cycles));
  report(9, "bank-conflicts", ok, buf);
}

// ---- criterion 10: end-to-end ordering --------------------------------------

void criterion_ordering() {
  const ConvShape sh = shape_ck(64, 14);  // conv4.x at C=K=64 scale
  bool ok = true;
  std::string detail;
  for (const MachineConfig& m : {preset_embedded(), preset_integrated()}) {
    const TuneResult ilpm = tune(AlgoKind::ilpm, sh, m);
    const TuneResult direct = tune(AlgoKind::direct_cache, sh, m);
    const auto fused = simulate_pipeline(
        lower(default_config(AlgoKind::fused_unroll, sh), sh), m);
    const auto wino = simulate_pipeline(
        lower(default_config(AlgoKind::winograd, sh), sh), m);
    const auto im2col = simulate_pipeline(
        lower(default_config(AlgoKind::im2col, sh), sh), m);
    const std::uint64_t c_ilpm = ilpm.best_metrics.cycles;
    const std::uint64_t c_direct = direct.best_metrics.cycles;
    const std::uint64_t c_fused = pipeline_cycles(fused);
    const std::uint64_t c_wino = pipeline_cycles(wino);
    const std::uint64_t c_im2col = pipeline_cycles(im2col);
    const bool here = c_ilpm < c_direct && c_direct < c_fused && c_wino < c_im2col;
    ok = ok && here;
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "[%s ilpm=%llu < direct=%llu < fused=%llu; winograd=%llu < im2col=%llu]",
                  m.name.c_str(), static_cast<unsigned long long>(c_ilpm),
                  static_cast<unsigned long long>(c_direct),
                  static_cast<unsigned long long>(c_fused),
                  static_cast<unsigned long long>(c_wino),
                  static_cast<unsigned long long>(c_im2col));
    detail += buf;
  }
  report(10, "cycle-ordering", ok, detail);
}

// ---- criterion 11: golden CSV ------------------------------------------------

void criterion_golden_csv() {
  ReportRequest req;
  req.layers = {"conv4.x"};
  req.algorithms = {AlgoKind::ilpm, AlgoKind::winograd};
  req.machine = preset_integrated();
  req.sim_channel_scale = 16;
  const std::string a = generate_report_csv(req);
  const std::string b = generate_report_csv(req);
  const bool ok = !a.empty() && a == b;
  char buf[96];
  std::snprintf(buf, sizeof(buf), "two runs, %zu bytes, byte-identical: %s",
                a.size(), ok ? "yes" : "no");
  report(11, "golden-csv-stability", ok, buf);
}

}  // namespace

int main() {
  std::printf("convlab acceptance suite\n");
  criterion_oracle_equivalence();
  criterion_im2col_traffic();
  criterion_winograd_traffic();
  criterion_winograd_multiplies();
  criterion_ilpm_traffic();
  criterion_barriers();
  criterion_register_pressure();
  criterion_scoreboard();
  criterion_bank_conflicts();
  criterion_ordering();
  criterion_golden_csv();
  if (g_failures > 0) {
    std::printf("%d criterion(s) FAILED\n", g_failures);
    return 1;
  }
  std::printf("all 11 criteria passed\n");
  return 0;
}
