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
#ifndef CONVLAB_SIM_HPP_
#define CONVLAB_SIM_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "convlab/ir.hpp"
#include "convlab/machine.hpp"

namespace convlab {

struct SimMetrics {
  // Global traffic at 64-byte line granularity: raw is what leaves the CUs,
  // post_l2 the line fills that reach DRAM (post_l2 <= raw by construction).
  std::uint64_t global_read_bytes_raw = 0;
  std::uint64_t global_read_bytes_post_l2 = 0;
  std::uint64_t global_write_bytes = 0;
  std::int64_t shared_bytes_per_wg = 0;
  std::uint64_t bank_conflict_extra_cycles = 0;
  std::uint64_t barrier_count = 0;  // dynamic barriers per workgroup
  std::uint64_t vector_inst = 0;    // warp-level vector instructions issued
  std::uint64_t scalar_inst = 0;    // warp-level scalar instructions issued
  int max_live_regs = 0;
  std::uint64_t cycles = 0;
  double alu_busy = 0.0;  // vector-unit busy fraction over active CUs
  double mem_busy = 0.0;  // LSU busy fraction over active CUs
};

// Number of 128-byte transactions a warp's global access coalesces into
// (distinct aligned segments over the active lanes).
int coalesce_transactions(const std::vector<std::int64_t>& byte_addrs);

// Extra serialization cycles of a shared-memory warp access: conflict degree
// minus one. Lanes reading the same word broadcast for free.
int bank_conflict_extra(const std::vector<std::int64_t>& byte_addrs, int banks);

// Bytes that reach DRAM after a fully-associative LRU L2 filters an ordered
// (address, size) access stream; fills are line-granular.
std::uint64_t l2_filter(
    const std::vector<std::pair<std::int64_t, int>>& accesses,
    const MachineConfig& m);

// Deterministic scoreboard execution of one kernel over the machine model.
// In-order per warp with non-blocking loads; a stalled warp may issue its
// next program-order load early (bounded by pipeline_depth in flight, never
// across a barrier, and never past another access of a non-renamable
// destination register), modeling compiler scheduling within barrier-free
// regions. Workgroups are assigned to CUs round-robin and limited by shared
// memory, register file and warp slots. resident_images replicates the grid,
// modeling batched inference occupancy.
SimMetrics simulate(const KernelProgram& p, const MachineConfig& m,
                    int resident_images = 1);

struct StageMetrics {
  std::string kernel;
  SimMetrics metrics;
};

std::vector<StageMetrics> simulate_pipeline(const LoweredPipeline& pl,
                                            const MachineConfig& m,
                                            int resident_images = 1);

std::uint64_t pipeline_cycles(const std::vector<StageMetrics>& stages);

// Fixed CSV column order for reports and golden files.
std::string sim_csv_header();
std::string sim_csv_row(const std::string& kernel, const SimMetrics& m);

}  // namespace convlab

#endif  // CONVLAB_SIM_HPP_
