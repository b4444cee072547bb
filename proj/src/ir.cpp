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
#include "convlab/ir.hpp"

namespace convlab {

const char* reg_class_name(RegClass c) {
  switch (c) {
    case RegClass::accumulator: return "accumulator";
    case RegClass::filter_val: return "filter";
    case RegClass::image_val: return "image";
    case RegClass::address: return "address";
    case RegClass::value: return "value";
  }
  return "?";
}

const char* op_name(Op op) {
  switch (op) {
    case Op::LD_GLOBAL: return "ld_global";
    case Op::ST_GLOBAL: return "st_global";
    case Op::LD_SHARED: return "ld_shared";
    case Op::ST_SHARED: return "st_shared";
    case Op::FMA: return "fma";
    case Op::MUL: return "mul";
    case Op::ADD: return "add";
    case Op::IALU: return "ialu";
    case Op::BARRIER: return "barrier";
    case Op::LOOP: return "loop";
  }
  return "?";
}

}  // namespace convlab
