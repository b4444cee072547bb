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
#ifndef CONVLAB_TUNER_HPP_
#define CONVLAB_TUNER_HPP_

#include <optional>
#include <string>
#include <vector>

#include "convlab/machine.hpp"
#include "convlab/sim.hpp"
#include "convlab/tensor.hpp"

namespace convlab {

// Candidate values per tunable parameter. The grid is exhausted; anything
// that fails validation or launch is kept as a skipped trial with its
// reason. Direct convolution explores both filter-caching variants.
struct SearchSpace {
  std::vector<int> tiles = {2, 4, 7, 8, 14, 16};
  std::vector<int> out_channels_per_thread = {1, 2, 4, 8};
  std::vector<int> gemm_tiles = {8, 16, 32};
  std::vector<bool> cache_filter = {true, false};
  std::vector<bool> transpose_output = {false, true};

  static SearchSpace defaults() { return SearchSpace{}; }
};

struct Trial {
  AlgoConfig cfg;
  bool skipped = false;
  std::string skip_reason;
  std::uint64_t cycles = 0;
};

struct TuneResult {
  AlgoConfig best;
  SimMetrics best_metrics;               // aggregated over pipeline stages
  std::vector<StageMetrics> best_stages;
  std::vector<Trial> trials;             // exhaustive over the space
};

// Exhaustive grid search minimizing simulated cycles; deterministic
// tie-break by enumeration (lexicographic) order.
TuneResult tune(AlgoKind algorithm, const ConvShape& shape,
                const MachineConfig& machine,
                const SearchSpace& space = SearchSpace::defaults());

// Trial rows for audit files: config, status, cycles.
std::string tune_audit_csv(const TuneResult& r);

// Sums a pipeline's stage metrics into one row.
SimMetrics aggregate_metrics(const std::vector<StageMetrics>& stages);

}  // namespace convlab

#endif  // CONVLAB_TUNER_HPP_
