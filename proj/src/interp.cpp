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
#include "convlab/interp.hpp"

#include <vector>

#include "convlab/algos.hpp"

namespace convlab {

namespace {

class WorkgroupExec {
 public:
  WorkgroupExec(const KernelProgram& p, std::vector<float>& arena)
      : p_(p), arena_(arena), shared_(p.shared_bytes / 4, 0.0f) {
    reg_off_.reserve(p.regs.size());
    int total = 0;
    for (const auto& r : p.regs) {
      reg_off_.push_back(total);
      total += r.size;
    }
    regs_per_thread_ = total;
    regs_.assign(static_cast<std::size_t>(p.threads_per_wg()) * total, 0.0f);
    loop_vals_.assign(p.num_loops, 0);
  }

  void run(int wg_x, int wg_y, int wg_z) {
    std::fill(shared_.begin(), shared_.end(), 0.0f);
    std::fill(regs_.begin(), regs_.end(), 0.0f);
    wg_x_ = wg_x;
    wg_y_ = wg_y;
    wg_z_ = wg_z;
    exec(p_.body);
  }

 private:
  float& reg(int thread, const RegRef& ref, const EvalCtx& ctx) {
    const std::int64_t idx = ctx.eval(ref.index);
    const RegDecl& d = p_.regs[ref.id];
    if (idx < 0 || idx >= d.size) {
      throw LaunchError("register index out of range in " + p_.name);
    }
    return regs_[static_cast<std::size_t>(thread) * regs_per_thread_ +
                 reg_off_[ref.id] + idx];
  }

  float load(std::vector<float>& mem, std::int64_t byte_addr,
             std::int64_t limit_bytes) {
    if (byte_addr < 0 || byte_addr % 4 != 0 || byte_addr >= limit_bytes) {
      throw LaunchError("out-of-range address in " + p_.name);
    }
    return mem[byte_addr / 4];
  }
  void store(std::vector<float>& mem, std::int64_t byte_addr,
             std::int64_t limit_bytes, float v) {
    if (byte_addr < 0 || byte_addr % 4 != 0 || byte_addr >= limit_bytes) {
      throw LaunchError("out-of-range address in " + p_.name);
    }
    mem[byte_addr / 4] = v;
  }

  bool active(const Instr& in, const EvalCtx& ctx) const {
    for (const Guard& g : in.guards) {
      const std::int64_t v = ctx.eval(g.expr);
      if (v < 0 || v >= g.bound) return false;
    }
    return true;
  }

  void exec(const std::vector<Instr>& body) {
    for (const Instr& in : body) {
      if (in.op == Op::LOOP) {
        for (std::int64_t v = 0; v < in.trip; ++v) {
          loop_vals_[in.loop_id] = v;
          exec(in.body);
        }
        continue;
      }
      if (in.op == Op::BARRIER || in.op == Op::IALU) {
        continue;  // no dataflow effect under lockstep execution
      }
      for (int ty = 0; ty < p_.wg_y; ++ty) {
        for (int tx = 0; tx < p_.wg_x; ++tx) {
          EvalCtx ctx{tx, ty, wg_x_, wg_y_, wg_z_, &loop_vals_};
          const bool on = active(in, ctx);
          const int thread = ty * p_.wg_x + tx;
          switch (in.op) {
            case Op::LD_GLOBAL:
              if (on) {
                reg(thread, in.dst, ctx) =
                    load(arena_, ctx.eval(in.addr),
                         static_cast<std::int64_t>(arena_.size()) * 4);
              } else if (in.pred_zero) {
                reg(thread, in.dst, ctx) = 0.0f;
              }
              break;
            case Op::LD_SHARED:
              if (on) {
                reg(thread, in.dst, ctx) =
                    load(shared_, ctx.eval(in.addr), p_.shared_bytes);
              } else if (in.pred_zero) {
                reg(thread, in.dst, ctx) = 0.0f;
              }
              break;
            case Op::ST_GLOBAL:
              if (on) {
                store(arena_, ctx.eval(in.addr),
                      static_cast<std::int64_t>(arena_.size()) * 4,
                      reg(thread, in.srcs[0], ctx));
              }
              break;
            case Op::ST_SHARED:
              if (on) {
                store(shared_, ctx.eval(in.addr), p_.shared_bytes,
                      reg(thread, in.srcs[0], ctx));
              }
              break;
            case Op::FMA:
              if (on) {
                reg(thread, in.dst, ctx) =
                    reg(thread, in.srcs[0], ctx) * reg(thread, in.srcs[1], ctx) +
                    reg(thread, in.srcs[2], ctx);
              }
              break;
            case Op::MUL:
              if (on) {
                reg(thread, in.dst, ctx) =
                    reg(thread, in.srcs[0], ctx) * reg(thread, in.srcs[1], ctx);
              }
              break;
            case Op::ADD:
              if (on) {
                const float a = reg(thread, in.srcs[0], ctx);
                const float b = reg(thread, in.srcs[1], ctx);
                reg(thread, in.dst, ctx) =
                    (in.neg0 ? -a : a) + (in.neg1 ? -b : b);
              }
              break;
            default:
              break;
          }
        }
      }
    }
  }

  const KernelProgram& p_;
  std::vector<float>& arena_;
  std::vector<float> shared_;
  std::vector<float> regs_;
  std::vector<int> reg_off_;
  std::vector<std::int64_t> loop_vals_;
  int regs_per_thread_ = 0;
  int wg_x_ = 0, wg_y_ = 0, wg_z_ = 0;
};

}  // namespace

Tensor interpret_pipeline(const LoweredPipeline& pl, const Tensor& input,
                          const Tensor& filters_kcrs) {
  const ConvShape& s = pl.shape;
  if (input.layout() != Layout::CHW) throw LayoutError("expected CHW input");
  if (filters_kcrs.layout() != Layout::KCRS) {
    throw LayoutError("expected KCRS filters");
  }

  std::vector<float> arena(pl.arena_bytes / 4, 0.0f);
  std::copy(input.data().begin(), input.data().end(),
            arena.begin() + pl.input_off / 4);

  switch (pl.filter_prep) {
    case FilterPrep::kcrs:
      std::copy(filters_kcrs.data().begin(), filters_kcrs.data().end(),
                arena.begin() + pl.filter_off / 4);
      break;
    case FilterPrep::crsk: {
      Tensor crsk = convert_layout(filters_kcrs, Layout::CRSK);
      std::copy(crsk.data().begin(), crsk.data().end(),
                arena.begin() + pl.filter_off / 4);
      break;
    }
    case FilterPrep::winograd_u: {
      // U[p][k][c], transformed offline as inference would.
      const int K = s.out_channels, C = s.in_channels;
      float u[16];
      for (int k = 0; k < K; ++k) {
        for (int c = 0; c < C; ++c) {
          winograd_filter_transform(
              &filters_kcrs.data()[filters_kcrs.index(k, c, 0, 0)], u);
          for (int p = 0; p < 16; ++p) {
            arena[pl.filter_off / 4 +
                  (static_cast<std::int64_t>(p) * K + k) * C + c] = u[p];
          }
        }
      }
      break;
    }
  }

  for (const KernelProgram& stage : pl.stages) {
    WorkgroupExec exec(stage, arena);
    for (int wz = 0; wz < stage.grid_z; ++wz) {
      for (int wy = 0; wy < stage.grid_y; ++wy) {
        for (int wx = 0; wx < stage.grid_x; ++wx) {
          exec.run(wx, wy, wz);
        }
      }
    }
  }

  auto [oh, ow] = s.output_shape();
  Tensor out = Tensor::chw(s.out_channels, oh, ow);
  std::copy(arena.begin() + pl.output_off / 4,
            arena.begin() + pl.output_off / 4 + out.size(), out.data().begin());
  return out;
}

}  // namespace convlab
