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
#ifndef CONVLAB_ANALYSIS_HPP_
#define CONVLAB_ANALYSIS_HPP_

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "convlab/ir.hpp"

namespace convlab {

// Dynamic barrier executions per workgroup (loop trips multiplied out;
// barriers are never lane-guarded).
std::uint64_t barrier_census(const KernelProgram& p);

// Lane-exact dynamic operation counts over the whole grid, guards evaluated.
// Exhaustive over workgroups, loop iterations and lanes: meant for desk-scale
// shapes and tests, not full Table-2 problems.
struct DynCounts {
  std::uint64_t fma = 0, mul = 0, add = 0, ialu = 0;
  std::uint64_t ld_global = 0, st_global = 0, ld_shared = 0, st_shared = 0;
};
DynCounts dynamic_lane_counts(const KernelProgram& p);

// Live-register analysis after software-pipelining loads by pipeline_depth.
//
// Loads may hoist toward the start of their barrier/loop-delimited region
// past independent instructions, keeping at most `depth` loads in flight,
// never past an access of their own destination register (no renaming here:
// reusing one architectural register serializes, which is exactly the
// Figure-2(a)-versus-(b) contrast). A register is counted live from its
// (hoisted) definition to its last use; accumulators are live for the whole
// kernel.
struct RegisterReport {
  int max_live = 0;
  // Peak simultaneous live registers per class (indexed by RegClass).
  std::array<int, 5> class_live = {};
  // loop id -> peak live inside that loop's span
  std::vector<std::pair<int, int>> per_loop;

  int live(RegClass c) const { return class_live[static_cast<int>(c)]; }
};
RegisterReport register_pressure(const KernelProgram& p, int pipeline_depth);

// Cooperative-load invariant detector. Expands the dynamic stream of one
// workgroup and flags every shared-memory read whose producing cooperative
// write (by another thread) is not separated from it by a barrier: the value
// would not be guaranteed visible. Returns human-readable findings, empty
// when the program is hazard-free.
std::vector<std::string> check_cooperative_hazards(const KernelProgram& p);

// Clone with the idx-th barrier (preorder) removed; helpers for the
// "every barrier is load-bearing" property.
int count_static_barriers(const KernelProgram& p);
KernelProgram remove_barrier(const KernelProgram& p, int idx);

// Line-oriented text form, one instruction per line, affine coefficients
// explicit. Stable: golden files depend on it.
std::string serialize(const KernelProgram& p);
std::string serialize(const LoweredPipeline& pl);

}  // namespace convlab

#endif  // CONVLAB_ANALYSIS_HPP_
