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
#include "convlab/report.hpp"

#include <sstream>

#include "convlab/algos.hpp"
#include "convlab/ir.hpp"
#include "convlab/sim.hpp"

namespace convlab {

const std::vector<LayerSpec>& resnet_layers() {
  static const std::vector<LayerSpec> layers = {
      {"conv2.x", 64, 56, {{{2, 2}, {2, 3}, {1, 3}, {1, 3}, {1, 3}}}},
      {"conv3.x", 128, 28, {{{2, 2}, {2, 4}, {1, 4}, {1, 4}, {1, 8}}}},
      {"conv4.x", 256, 14, {{{2, 2}, {2, 6}, {1, 6}, {1, 23}, {1, 36}}}},
      {"conv5.x", 512, 7, {{{2, 2}, {2, 4}, {1, 3}, {1, 3}, {1, 3}}}},
  };
  return layers;
}

const LayerSpec& layer_by_name(const std::string& name) {
  for (const LayerSpec& l : resnet_layers()) {
    if (l.name == name) return l;
  }
  throw ConfigError("unknown layer: " + name +
                    " (expected conv2.x, conv3.x, conv4.x or conv5.x)");
}

ConvShape layer_shape(const LayerSpec& layer, int channel_scale) {
  ConvShape s;
  s.in_channels = s.out_channels =
      channel_scale > 0 ? channel_scale : layer.channels;
  s.height = s.width = layer.spatial;
  s.filter_h = s.filter_w = 3;
  s.pad = 1;
  s.stride = 1;
  return s;
}

AlgoConfig default_config(AlgoKind algorithm, const ConvShape& shape) {
  auto [oh, ow] = shape.output_shape();
  AlgoConfig cfg;
  cfg.algorithm = algorithm;
  cfg.tile_x = ow <= 16 ? ow : 14;
  cfg.tile_y = oh <= 16 ? oh : 14;
  cfg.gemm_tile_m = cfg.gemm_tile_n = cfg.gemm_tile_k = 16;
  switch (algorithm) {
    case AlgoKind::direct_cache:
      cfg.cache_filter = true;
      cfg.out_channels_per_thread = shape.out_channels % 4 == 0 ? 4 : 1;
      break;
    case AlgoKind::direct_nocache:
      cfg.cache_filter = false;
      cfg.out_channels_per_thread = shape.out_channels % 4 == 0 ? 4 : 1;
      break;
    case AlgoKind::fused_unroll:
      // threads = tile_x * gemm_tile_m must fit a workgroup
      while (cfg.tile_x * cfg.gemm_tile_m > kMaxWorkgroupThreads) {
        cfg.gemm_tile_m /= 2;
      }
      break;
    case AlgoKind::ilpm:
      // Row tiles spread pixel-tile workgroups across compute units (a
      // single whole-image workgroup would leave most of the machine idle),
      // and staging the output makes the global write coalesced.
      cfg.tile_y = oh <= 2 ? oh : 2;
      cfg.transpose_output = true;
      break;
    default:
      break;
  }
  return cfg;
}

namespace {

std::string csv_u64(std::uint64_t v) { return std::to_string(v); }

}  // namespace

std::string generate_report_csv(const ReportRequest& req) {
  std::ostringstream os;
  os << "# convlab report v1 machine=" << req.machine.name
     << " sim_channel_scale=" << req.sim_channel_scale << "\n";
  os << sim_csv_header()
     << ",analytic_read_bytes,analytic_write_bytes,analytic_multiplies\n";
  for (const std::string& lname : req.layers) {
    const LayerSpec& layer = layer_by_name(lname);
    const ConvShape full = layer_shape(layer, 0);
    const ConvShape scaled = layer_shape(layer, req.sim_channel_scale);
    for (AlgoKind a : req.algorithms) {
      const AlgoConfig sim_cfg = default_config(a, scaled);
      const AlgoConfig full_cfg = default_config(a, full);
      const LoweredPipeline pl = lower(sim_cfg, scaled);
      const auto stages = simulate_pipeline(pl, req.machine);
      const auto traffic = analytic_stage_traffic(full_cfg, full);
      // Stage rows; the analytic columns are full-scale and are aligned by
      // kernel name (winograd's 16 GEMM launches share one analytic row).
      for (const StageMetrics& sm : stages) {
        const StageTraffic* t = nullptr;
        for (const StageTraffic& cand : traffic) {
          if (cand.stage == sm.kernel) {
            t = &cand;
            break;
          }
        }
        os << lname << '.' << sim_csv_row(sm.kernel, sm.metrics);
        if (t != nullptr) {
          os << ',' << csv_u64(t->read_bytes) << ',' << csv_u64(t->write_bytes)
             << ',' << csv_u64(t->multiplies);
        } else {
          os << ",0,0,0";
        }
        os << '\n';
      }
    }
  }
  return os.str();
}

std::string generate_plot_data(const ReportRequest& req) {
  std::ostringstream os;
  for (const std::string& lname : req.layers) {
    const LayerSpec& layer = layer_by_name(lname);
    const ConvShape scaled = layer_shape(layer, req.sim_channel_scale);
    os << "# " << lname << "\n";
    for (AlgoKind a : req.algorithms) {
      const AlgoConfig cfg = default_config(a, scaled);
      const LoweredPipeline pl = lower(cfg, scaled);
      const auto stages = simulate_pipeline(pl, req.machine);
      os << algo_name(a) << ' ' << pipeline_cycles(stages) << "\n";
    }
  }
  return os.str();
}

}  // namespace convlab
