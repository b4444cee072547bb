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
#include "convlab/machine.hpp"

#include <fstream>
#include <sstream>

namespace convlab {

void MachineConfig::validate() const {
  if (warp_size < 1 || schedulers_per_cu < 1 || max_warps_per_cu < 1 ||
      max_workgroup_threads < 1 || regfile_per_cu < 1 || shared_per_cu < 1 ||
      num_cus < 1 || alus_per_cu < 1 || lat_alu < 1 || lat_shared < 1 ||
      lat_global < 1 || lat_l2 < 1 || global_bytes_per_cycle <= 0 ||
      banks < 1 || l2_lines < 1 || l2_line_bytes < 4 || issue_width < 1 ||
      pipeline_depth < 1) {
    throw ConfigError("machine config fields must be positive");
  }
}

MachineConfig preset_dedicated() {
  MachineConfig m;
  m.name = "dedicated";
  m.num_cus = 60;            // Radeon VII class
  m.alus_per_cu = 64;
  m.global_bytes_per_cycle = 1024.0;  // HBM2
  m.schedulers_per_cu = 4;
  m.max_warps_per_cu = 40;
  m.lat_shared = 24;
  m.l2_lines = 512;          // 32 KiB desk-scale L2
  m.pipeline_depth = 32;     // big-GPU memory queues run deeper
  return m;
}

MachineConfig preset_integrated() {
  MachineConfig m;
  m.name = "integrated";
  m.num_cus = 8;             // Vega 8 class
  m.alus_per_cu = 64;
  m.global_bytes_per_cycle = 25.0;  // single-channel DDR4
  m.schedulers_per_cu = 4;
  m.max_warps_per_cu = 40;
  m.l2_lines = 256;          // 16 KiB
  return m;
}

MachineConfig preset_embedded() {
  MachineConfig m;
  m.name = "embedded";
  m.num_cus = 10;            // Mali-G76 MP10 class
  m.alus_per_cu = 24;        // narrow compute units
  m.global_bytes_per_cycle = 33.3;  // dual-channel LPDDR4
  m.schedulers_per_cu = 1;
  m.max_warps_per_cu = 16;
  m.shared_per_cu = 32768;
  m.l2_lines = 256;          // 16 KiB
  return m;
}

MachineConfig machine_from_arg(const std::string& arg) {
  if (arg == "dedicated") return preset_dedicated();
  if (arg == "integrated") return preset_integrated();
  if (arg == "embedded") return preset_embedded();
  std::ifstream f(arg);
  if (!f) throw ConfigError("unknown machine preset or unreadable file: " + arg);
  std::stringstream ss;
  ss << f.rdbuf();
  return machine_from_text(ss.str());
}

std::string machine_to_text(const MachineConfig& m) {
  std::ostringstream os;
  os << "name=" << m.name << "\n"
     << "warp_size=" << m.warp_size << "\n"
     << "schedulers_per_cu=" << m.schedulers_per_cu << "\n"
     << "max_warps_per_cu=" << m.max_warps_per_cu << "\n"
     << "max_workgroup_threads=" << m.max_workgroup_threads << "\n"
     << "regfile_per_cu=" << m.regfile_per_cu << "\n"
     << "shared_per_cu=" << m.shared_per_cu << "\n"
     << "num_cus=" << m.num_cus << "\n"
     << "alus_per_cu=" << m.alus_per_cu << "\n"
     << "lat_alu=" << m.lat_alu << "\n"
     << "lat_shared=" << m.lat_shared << "\n"
     << "lat_global=" << m.lat_global << "\n"
     << "lat_l2=" << m.lat_l2 << "\n"
     << "global_bytes_per_cycle=" << m.global_bytes_per_cycle << "\n"
     << "banks=" << m.banks << "\n"
     << "l2_lines=" << m.l2_lines << "\n"
     << "l2_line_bytes=" << m.l2_line_bytes << "\n"
     << "issue_width=" << m.issue_width << "\n"
     << "pipeline_depth=" << m.pipeline_depth << "\n";
  return os.str();
}

MachineConfig machine_from_text(const std::string& text) {
  MachineConfig m;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("machine config line " + std::to_string(lineno) +
                        ": expected key=value");
    }
    const std::string key = line.substr(0, eq);
    const std::string val = line.substr(eq + 1);
    auto as_int = [&] { return std::stoll(val); };
    if (key == "name") m.name = val;
    else if (key == "warp_size") m.warp_size = static_cast<int>(as_int());
    else if (key == "schedulers_per_cu") m.schedulers_per_cu = static_cast<int>(as_int());
    else if (key == "max_warps_per_cu") m.max_warps_per_cu = static_cast<int>(as_int());
    else if (key == "max_workgroup_threads") m.max_workgroup_threads = static_cast<int>(as_int());
    else if (key == "regfile_per_cu") m.regfile_per_cu = as_int();
    else if (key == "shared_per_cu") m.shared_per_cu = as_int();
    else if (key == "num_cus") m.num_cus = static_cast<int>(as_int());
    else if (key == "alus_per_cu") m.alus_per_cu = static_cast<int>(as_int());
    else if (key == "lat_alu") m.lat_alu = static_cast<int>(as_int());
    else if (key == "lat_shared") m.lat_shared = static_cast<int>(as_int());
    else if (key == "lat_global") m.lat_global = static_cast<int>(as_int());
    else if (key == "lat_l2") m.lat_l2 = static_cast<int>(as_int());
    else if (key == "global_bytes_per_cycle") m.global_bytes_per_cycle = std::stod(val);
    else if (key == "banks") m.banks = static_cast<int>(as_int());
    else if (key == "l2_lines") m.l2_lines = static_cast<int>(as_int());
    else if (key == "l2_line_bytes") m.l2_line_bytes = static_cast<int>(as_int());
    else if (key == "issue_width") m.issue_width = static_cast<int>(as_int());
    else if (key == "pipeline_depth") m.pipeline_depth = static_cast<int>(as_int());
    else throw ConfigError("machine config: unknown key '" + key + "'");
  }
  m.validate();
  return m;
}

}  // namespace convlab
