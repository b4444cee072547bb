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
#ifndef CONVLAB_REPORT_HPP_
#define CONVLAB_REPORT_HPP_

#include <array>
#include <string>
#include <vector>

#include "convlab/machine.hpp"
#include "convlab/tensor.hpp"

namespace convlab {

// The four 3x3 ResNet layer families and their repeat counts per depth
// (ResNet 18/34/50/101/152).
struct LayerSpec {
  std::string name;
  int channels;  // C == K
  int spatial;   // H == W
  std::array<std::pair<int, int>, 5> repeats;
};

const std::vector<LayerSpec>& resnet_layers();
const LayerSpec& layer_by_name(const std::string& name);

// Shape for a layer; channel_scale <= 0 keeps the full channel count,
// otherwise C = K = channel_scale (spatial size is never scaled).
ConvShape layer_shape(const LayerSpec& layer, int channel_scale);

// Sensible per-algorithm default configuration for a shape (whole-image
// pixel tiles where they fit, 16x16 GEMM staging).
AlgoConfig default_config(AlgoKind algorithm, const ConvShape& shape);

struct ReportRequest {
  std::vector<std::string> layers;
  std::vector<AlgoKind> algorithms;
  MachineConfig machine;
  int sim_channel_scale = 64;  // simulation runs scaled channels
};

// CSV: the fixed simulator columns plus analytic columns, the latter always
// computed at the layer's full Table scale. Deterministic byte-for-byte.
std::string generate_report_csv(const ReportRequest& req);

// Two-column plot data: one "algorithm cycles" line per algorithm under a
// per-layer comment header.
std::string generate_plot_data(const ReportRequest& req);

}  // namespace convlab

#endif  // CONVLAB_REPORT_HPP_
