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
#ifndef CONVLAB_IR_HPP_
#define CONVLAB_IR_HPP_

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "convlab/tensor.hpp"

namespace convlab {

// Abstract GPU kernel representation: per-thread instruction streams with
// affine address expressions, cooperative loads, barriers and symbolic
// loops. Loops are kept symbolic (trip counts, not unrolled) so desk-scale
// programs stay small; dynamic counts multiply out the trips.

// Affine expression over thread ids, workgroup ids and loop variables.
// Memory addresses are in bytes; register indices in elements.
struct AffineExpr {
  std::int64_t base = 0;
  std::int64_t c_tid_x = 0, c_tid_y = 0;
  std::int64_t c_wg_x = 0, c_wg_y = 0, c_wg_z = 0;
  std::vector<std::pair<int, std::int64_t>> loops;  // (loop id, coefficient)

  AffineExpr() = default;
  explicit AffineExpr(std::int64_t b) : base(b) {}

  AffineExpr& tx(std::int64_t c) { c_tid_x += c; return *this; }
  AffineExpr& ty(std::int64_t c) { c_tid_y += c; return *this; }
  AffineExpr& wx(std::int64_t c) { c_wg_x += c; return *this; }
  AffineExpr& wy(std::int64_t c) { c_wg_y += c; return *this; }
  AffineExpr& wz(std::int64_t c) { c_wg_z += c; return *this; }
  AffineExpr& lp(int loop_id, std::int64_t c) {
    if (c != 0) loops.emplace_back(loop_id, c);
    return *this;
  }

  bool constant() const {
    return c_tid_x == 0 && c_tid_y == 0 && c_wg_x == 0 && c_wg_y == 0 &&
           c_wg_z == 0 && loops.empty();
  }
  bool thread_invariant() const { return c_tid_x == 0 && c_tid_y == 0; }
};

// Evaluation context for one lane.
struct EvalCtx {
  int tid_x = 0, tid_y = 0;
  int wg_x = 0, wg_y = 0, wg_z = 0;
  const std::vector<std::int64_t>* loop_vals = nullptr;

  std::int64_t eval(const AffineExpr& e) const {
    std::int64_t v = e.base + e.c_tid_x * tid_x + e.c_tid_y * tid_y +
                     e.c_wg_x * wg_x + e.c_wg_y * wg_y + e.c_wg_z * wg_z;
    for (const auto& [id, c] : e.loops) v += c * (*loop_vals)[id];
    return v;
  }
};

// Lane predicate: active iff 0 <= expr < bound for every guard.
struct Guard {
  AffineExpr expr;
  std::int64_t bound = 1;
};

enum class RegClass { accumulator, filter_val, image_val, address, value };

const char* reg_class_name(RegClass c);

// A virtual register array, private to each thread. Scalars have size 1;
// the index expression of a RegRef may involve loop variables but never
// thread ids. `renamable` marks staging registers the compiler may rotate
// while pipelining loads (the simulator's hoisting honours it, the register
// report does not need it).
struct RegDecl {
  int id = 0;
  int size = 1;
  RegClass cls = RegClass::value;
  bool renamable = false;
  std::string name;
};

struct RegRef {
  int id = -1;
  AffineExpr index;

  bool valid() const { return id >= 0; }
};

enum class Op {
  LD_GLOBAL,
  ST_GLOBAL,
  LD_SHARED,
  ST_SHARED,
  FMA,   // dst = s0 * s1 + s2  (s2 aliases dst for accumulation)
  MUL,   // dst = s0 * s1
  ADD,   // dst = (+-)s0 + (+-)s1
  IALU,  // scalar address/index arithmetic; no numeric effect in the model
  BARRIER,
  LOOP,
};

const char* op_name(Op op);

struct Instr {
  Op op = Op::IALU;
  RegRef dst;
  std::array<RegRef, 3> srcs = {};
  int nsrcs = 0;
  AffineExpr addr;            // memory ops only, byte units
  std::vector<Guard> guards;  // lane active iff all guards hold
  bool pred_zero = false;     // guarded-off load writes 0 instead of skipping
  bool neg0 = false, neg1 = false;  // ADD operand signs

  // LOOP payload
  int loop_id = -1;
  std::int64_t trip = 0;
  std::vector<Instr> body;
};

struct KernelProgram {
  std::string name;
  int wg_x = 1, wg_y = 1;               // threads per workgroup
  int grid_x = 1, grid_y = 1, grid_z = 1;  // workgroups
  std::int64_t shared_bytes = 0;
  std::vector<RegDecl> regs;
  std::vector<Instr> body;
  int num_loops = 0;

  int threads_per_wg() const { return wg_x * wg_y; }
  std::int64_t workgroups() const {
    return static_cast<std::int64_t>(grid_x) * grid_y * grid_z;
  }
  // Total register elements per thread (occupancy accounting).
  int regs_per_thread() const {
    int n = 0;
    for (const auto& r : regs) n += r.size;
    return n;
  }
};

// How the interpreter fills the filter section of the global arena.
enum class FilterPrep { kcrs, crsk, winograd_u };

// A lowered algorithm: one or more kernels sharing a global memory plan.
struct LoweredPipeline {
  ConvShape shape;
  AlgoConfig cfg;
  std::vector<KernelProgram> stages;
  std::int64_t arena_bytes = 0;
  std::int64_t input_off = 0;    // CHW input, byte offset
  std::int64_t filter_off = 0;   // filters (layout per filter_prep)
  std::int64_t output_off = 0;   // CHW output
  FilterPrep filter_prep = FilterPrep::kcrs;
};

// Lowers an algorithm configuration to its kernel pipeline.
// Throws ConfigError / LaunchError for configs that cannot be expressed.
LoweredPipeline lower(const AlgoConfig& cfg, const ConvShape& shape);

// Builder used by the lowerings (and by tests constructing micro-programs).
class KernelBuilder {
 public:
  KernelBuilder(std::string name, int wg_x, int wg_y) {
    p_.name = std::move(name);
    p_.wg_x = wg_x;
    p_.wg_y = wg_y;
    bodies_.push_back(&p_.body);
  }

  void grid(int gx, int gy, int gz = 1) {
    p_.grid_x = gx;
    p_.grid_y = gy;
    p_.grid_z = gz;
  }
  void shared(std::int64_t bytes) { p_.shared_bytes = bytes; }

  int decl(const std::string& name, int size, RegClass cls,
           bool renamable = false) {
    const int id = static_cast<int>(p_.regs.size());
    p_.regs.push_back({id, size, cls, renamable, name});
    return id;
  }

  int loop_begin(std::int64_t trip) {
    Instr l;
    l.op = Op::LOOP;
    l.loop_id = p_.num_loops++;
    l.trip = trip;
    bodies_.back()->push_back(std::move(l));
    bodies_.push_back(&bodies_.back()->back().body);
    return p_.num_loops - 1;
  }
  void loop_end() { bodies_.pop_back(); }

  void barrier() {
    Instr i;
    i.op = Op::BARRIER;
    emit(std::move(i));
  }

  void ld_global(RegRef dst, AffineExpr addr, std::vector<Guard> guards = {},
                 bool pred_zero = false) {
    Instr i;
    i.op = Op::LD_GLOBAL;
    i.dst = dst;
    i.addr = std::move(addr);
    i.guards = std::move(guards);
    i.pred_zero = pred_zero;
    emit(std::move(i));
  }
  void st_global(RegRef src, AffineExpr addr, std::vector<Guard> guards = {}) {
    Instr i;
    i.op = Op::ST_GLOBAL;
    i.srcs[0] = src;
    i.nsrcs = 1;
    i.addr = std::move(addr);
    i.guards = std::move(guards);
    emit(std::move(i));
  }
  void ld_shared(RegRef dst, AffineExpr addr, std::vector<Guard> guards = {},
                 bool pred_zero = false) {
    Instr i;
    i.op = Op::LD_SHARED;
    i.dst = dst;
    i.addr = std::move(addr);
    i.guards = std::move(guards);
    i.pred_zero = pred_zero;
    emit(std::move(i));
  }
  void st_shared(RegRef src, AffineExpr addr, std::vector<Guard> guards = {}) {
    Instr i;
    i.op = Op::ST_SHARED;
    i.srcs[0] = src;
    i.nsrcs = 1;
    i.addr = std::move(addr);
    i.guards = std::move(guards);
    emit(std::move(i));
  }
  void fma(RegRef dst, RegRef a, RegRef b, RegRef c,
           std::vector<Guard> guards = {}) {
    Instr i;
    i.op = Op::FMA;
    i.dst = dst;
    i.srcs = {a, b, c};
    i.nsrcs = 3;
    i.guards = std::move(guards);
    emit(std::move(i));
  }
  void mul(RegRef dst, RegRef a, RegRef b, std::vector<Guard> guards = {}) {
    Instr i;
    i.op = Op::MUL;
    i.dst = dst;
    i.srcs = {a, b};
    i.nsrcs = 2;
    i.guards = std::move(guards);
    emit(std::move(i));
  }
  void add(RegRef dst, RegRef a, RegRef b, bool neg0 = false, bool neg1 = false,
           std::vector<Guard> guards = {}) {
    Instr i;
    i.op = Op::ADD;
    i.dst = dst;
    i.srcs = {a, b};
    i.nsrcs = 2;
    i.neg0 = neg0;
    i.neg1 = neg1;
    i.guards = std::move(guards);
    emit(std::move(i));
  }
  void ialu(RegRef dst, std::vector<RegRef> srcs = {},
            std::vector<Guard> guards = {}) {
    Instr i;
    i.op = Op::IALU;
    i.dst = dst;
    for (std::size_t k = 0; k < srcs.size() && k < 3; ++k) {
      i.srcs[k] = srcs[k];
      i.nsrcs = static_cast<int>(k) + 1;
    }
    i.guards = std::move(guards);
    emit(std::move(i));
  }

  KernelProgram take() { return std::move(p_); }

 private:
  void emit(Instr i) { bodies_.back()->push_back(std::move(i)); }

  KernelProgram p_;
  std::vector<std::vector<Instr>*> bodies_;
};

}  // namespace convlab

#endif  // CONVLAB_IR_HPP_
