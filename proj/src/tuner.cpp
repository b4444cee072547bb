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
#include "convlab/tuner.hpp"

#include <sstream>

#include "convlab/ir.hpp"

namespace convlab {

namespace {

std::vector<AlgoConfig> enumerate(AlgoKind algorithm, const SearchSpace& sp) {
  std::vector<AlgoConfig> out;
  AlgoConfig base;
  switch (algorithm) {
    case AlgoKind::ilpm: {
      for (int ty : sp.tiles)
        for (int tx : sp.tiles)
          for (bool tr : sp.transpose_output) {
            base.algorithm = AlgoKind::ilpm;
            base.tile_x = tx;
            base.tile_y = ty;
            base.transpose_output = tr;
            out.push_back(base);
          }
      break;
    }
    case AlgoKind::direct_cache:
    case AlgoKind::direct_nocache: {
      for (int ty : sp.tiles)
        for (int tx : sp.tiles)
          for (int ocpt : sp.out_channels_per_thread)
            for (bool cache : sp.cache_filter) {
              base.algorithm =
                  cache ? AlgoKind::direct_cache : AlgoKind::direct_nocache;
              base.cache_filter = cache;
              base.tile_x = tx;
              base.tile_y = ty;
              base.out_channels_per_thread = ocpt;
              out.push_back(base);
            }
      break;
    }
    case AlgoKind::fused_unroll: {
      for (int tx : sp.tiles)
        for (int tm : sp.gemm_tiles) {
          base.algorithm = AlgoKind::fused_unroll;
          base.tile_x = tx;
          base.gemm_tile_m = tm;
          out.push_back(base);
        }
      break;
    }
    case AlgoKind::im2col:
    case AlgoKind::winograd: {
      for (int tm : sp.gemm_tiles)
        for (int tn : sp.gemm_tiles)
          for (int tk : sp.gemm_tiles) {
            base.algorithm = algorithm;
            base.gemm_tile_m = tm;
            base.gemm_tile_n = tn;
            base.gemm_tile_k = tk;
            out.push_back(base);
          }
      break;
    }
    case AlgoKind::oracle:
      throw ConfigError("oracle is not tunable");
  }
  return out;
}

}  // namespace

SimMetrics aggregate_metrics(const std::vector<StageMetrics>& stages) {
  SimMetrics r;
  for (const auto& s : stages) {
    r.global_read_bytes_raw += s.metrics.global_read_bytes_raw;
    r.global_read_bytes_post_l2 += s.metrics.global_read_bytes_post_l2;
    r.global_write_bytes += s.metrics.global_write_bytes;
    r.shared_bytes_per_wg =
        std::max(r.shared_bytes_per_wg, s.metrics.shared_bytes_per_wg);
    r.bank_conflict_extra_cycles += s.metrics.bank_conflict_extra_cycles;
    r.barrier_count += s.metrics.barrier_count;
    r.vector_inst += s.metrics.vector_inst;
    r.scalar_inst += s.metrics.scalar_inst;
    r.max_live_regs = std::max(r.max_live_regs, s.metrics.max_live_regs);
    r.cycles += s.metrics.cycles;
    r.alu_busy = std::max(r.alu_busy, s.metrics.alu_busy);
    r.mem_busy = std::max(r.mem_busy, s.metrics.mem_busy);
  }
  return r;
}

TuneResult tune(AlgoKind algorithm, const ConvShape& shape,
                const MachineConfig& machine, const SearchSpace& space) {
  const std::vector<AlgoConfig> candidates = enumerate(algorithm, space);
  if (candidates.empty()) throw ConfigError("empty search space");

  TuneResult result;
  bool have_best = false;
  for (const AlgoConfig& cfg : candidates) {
    Trial t;
    t.cfg = cfg;
    try {
      const LoweredPipeline pl = lower(cfg, shape);
      const auto stages = simulate_pipeline(pl, machine);
      t.cycles = pipeline_cycles(stages);
      if (!have_best || t.cycles < result.best_metrics.cycles) {
        have_best = true;
        result.best = cfg;
        result.best_stages = stages;
        result.best_metrics = aggregate_metrics(stages);
      }
    } catch (const Error& e) {
      t.skipped = true;
      t.skip_reason = e.what();
    }
    result.trials.push_back(std::move(t));
  }
  if (!have_best) {
    throw ConfigError("every candidate in the search space was invalid");
  }
  return result;
}

std::string tune_audit_csv(const TuneResult& r) {
  std::ostringstream os;
  os << "config,status,cycles,reason\n";
  for (const Trial& t : r.trials) {
    os << '"' << t.cfg.describe() << '"' << ','
       << (t.skipped ? "skipped" : "ok") << ','
       << (t.skipped ? 0 : t.cycles) << ',' << '"' << t.skip_reason << '"'
       << '\n';
  }
  return os.str();
}

}  // namespace convlab
