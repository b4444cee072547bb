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
#ifndef CONVLAB_MACHINE_HPP_
#define CONVLAB_MACHINE_HPP_

#include <cstdint>
#include <string>

#include "convlab/common.hpp"

namespace convlab {

// Simulated GPU. The three presets mirror the dedicated / integrated /
// embedded device classes: real compute-unit counts, ALUs per CU and the
// bandwidth ratios between them, normalized to one cycle == 1 ns at 1 GHz.
// Cache capacities are scaled to desk-size working sets.
struct MachineConfig {
  std::string name = "custom";
  int warp_size = 32;
  int schedulers_per_cu = 4;   // issue slots per CU per cycle
  int max_warps_per_cu = 40;
  int max_workgroup_threads = 256;
  std::int64_t regfile_per_cu = 65536;  // 32-bit registers
  std::int64_t shared_per_cu = 65536;   // bytes
  int num_cus = 60;
  int alus_per_cu = 64;
  int lat_alu = 4;
  int lat_shared = 24;
  int lat_global = 400;   // DRAM round trip
  int lat_l2 = 100;       // L2 hit
  double global_bytes_per_cycle = 1024.0;  // DRAM bandwidth, all CUs shared
  int banks = 32;            // shared memory banks, 4-byte words
  int l2_lines = 512;
  int l2_line_bytes = 64;
  int issue_width = 1;       // instructions per scheduler per cycle
  int pipeline_depth = 16;   // loads the compiler keeps in flight per warp

  void validate() const;
};

MachineConfig preset_dedicated();
MachineConfig preset_integrated();
MachineConfig preset_embedded();

// Resolves a preset name (dedicated|integrated|embedded) or a path to a
// key=value config file.
MachineConfig machine_from_arg(const std::string& arg);

// key=value form, one field per line.
std::string machine_to_text(const MachineConfig& m);
MachineConfig machine_from_text(const std::string& text);

}  // namespace convlab

#endif  // CONVLAB_MACHINE_HPP_
