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
#ifndef CONVLAB_INTERP_HPP_
#define CONVLAB_INTERP_HPP_

#include "convlab/ir.hpp"
#include "convlab/tensor.hpp"

namespace convlab {

// Functional SIMT interpreter: runs every stage of the pipeline lockstep
// (instruction by instruction across the threads of a workgroup), resolving
// affine addresses into a flat global arena. The result is bit-identical to
// the host-side algorithm implementations; the IR is semantics-preserving.
//
// `filters` is always the KCRS bank; the interpreter prepares the arena form
// the pipeline asks for (KCRS, CRSK, or precomputed Winograd U planes).
Tensor interpret_pipeline(const LoweredPipeline& pl, const Tensor& input,
                          const Tensor& filters_kcrs);

}  // namespace convlab

#endif  // CONVLAB_INTERP_HPP_
