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
#include "convlab/analysis.hpp"

#include <algorithm>
#include <map>
#include <sstream>

namespace convlab {

// ---------------------------------------------------------------------------
// Census and dynamic counts

namespace {

std::uint64_t census_walk(const std::vector<Instr>& body) {
  std::uint64_t n = 0;
  for (const Instr& in : body) {
    if (in.op == Op::BARRIER) {
      ++n;
    } else if (in.op == Op::LOOP) {
      n += static_cast<std::uint64_t>(in.trip) * census_walk(in.body);
    }
  }
  return n;
}

struct CountWalker {
  const KernelProgram& p;
  DynCounts counts;
  std::vector<std::int64_t> loop_vals;
  int wg_x = 0, wg_y = 0, wg_z = 0;

  explicit CountWalker(const KernelProgram& prog)
      : p(prog), loop_vals(prog.num_loops, 0) {}

  std::uint64_t active_lanes(const Instr& in) {
    if (in.guards.empty()) {
      return static_cast<std::uint64_t>(p.threads_per_wg());
    }
    std::uint64_t n = 0;
    for (int ty = 0; ty < p.wg_y; ++ty) {
      for (int tx = 0; tx < p.wg_x; ++tx) {
        EvalCtx ctx{tx, ty, wg_x, wg_y, wg_z, &loop_vals};
        bool on = true;
        for (const Guard& g : in.guards) {
          const std::int64_t v = ctx.eval(g.expr);
          if (v < 0 || v >= g.bound) {
            on = false;
            break;
          }
        }
        n += on ? 1 : 0;
      }
    }
    return n;
  }

  void walk(const std::vector<Instr>& body) {
    for (const Instr& in : body) {
      switch (in.op) {
        case Op::LOOP:
          for (std::int64_t v = 0; v < in.trip; ++v) {
            loop_vals[in.loop_id] = v;
            walk(in.body);
          }
          break;
        case Op::BARRIER:
          break;
        case Op::FMA: counts.fma += active_lanes(in); break;
        case Op::MUL: counts.mul += active_lanes(in); break;
        case Op::ADD: counts.add += active_lanes(in); break;
        case Op::IALU: counts.ialu += active_lanes(in); break;
        case Op::LD_GLOBAL: counts.ld_global += active_lanes(in); break;
        case Op::ST_GLOBAL: counts.st_global += active_lanes(in); break;
        case Op::LD_SHARED: counts.ld_shared += active_lanes(in); break;
        case Op::ST_SHARED: counts.st_shared += active_lanes(in); break;
      }
    }
  }
};

}  // namespace

std::uint64_t barrier_census(const KernelProgram& p) {
  return census_walk(p.body);
}

DynCounts dynamic_lane_counts(const KernelProgram& p) {
  CountWalker w(p);
  for (int wz = 0; wz < p.grid_z; ++wz) {
    for (int wy = 0; wy < p.grid_y; ++wy) {
      for (int wx = 0; wx < p.grid_x; ++wx) {
        w.wg_x = wx;
        w.wg_y = wy;
        w.wg_z = wz;
        w.walk(p.body);
      }
    }
  }
  return w.counts;
}

// ---------------------------------------------------------------------------
// Register pressure

namespace {

struct Access {
  int pos;
  bool is_def;
};

struct LoadSite {
  int reg;
  int pos;        // original position
  int first_use;  // next read of reg after pos (or pos if none)
  int hoisted;    // def position after pipelining
};

struct PressureWalker {
  const KernelProgram& p;
  int depth;
  int pos = 0;
  int region_start = 0;
  std::vector<std::vector<Access>> acc;            // per reg id
  std::vector<std::pair<int, int>> loop_spans;     // loop id -> [first, last]
  std::vector<LoadSite> loads;
  std::vector<std::vector<LoadSite*>> region_loads_stack;

  PressureWalker(const KernelProgram& prog, int d)
      : p(prog), depth(std::max(1, d)), acc(prog.regs.size()) {
    loop_spans.assign(prog.num_loops, {0, -1});
    loads.reserve(64);
  }

  void touch(const RegRef& r, bool is_def) {
    if (r.valid()) acc[r.id].push_back({pos, is_def});
  }

  void walk(const std::vector<Instr>& body) {
    std::vector<std::size_t> region;  // indices into loads
    auto close_region = [&]() {
      // In-flight pipelining: the i-th load of the region may hoist no
      // earlier than the first use of the (i-depth)-th one.
      for (std::size_t i = 0; i < region.size(); ++i) {
        LoadSite& l = loads[region[i]];
        int h = l.hoisted;  // already bounded by WAR and region start
        if (i >= static_cast<std::size_t>(depth)) {
          h = std::max(h, loads[region[i - depth]].first_use);
        }
        l.hoisted = std::min(l.pos, h);
      }
      region.clear();
    };

    const int saved_region_start = region_start;
    region_start = pos;
    for (const Instr& in : body) {
      if (in.op == Op::LOOP) {
        close_region();
        const int first = pos;
        walk(in.body);
        loop_spans[in.loop_id] = {first, pos - 1};
        region_start = pos;
        continue;
      }
      if (in.op == Op::BARRIER) {
        close_region();
        ++pos;
        region_start = pos;
        continue;
      }
      if (in.op == Op::LD_GLOBAL) {
        // Only long-latency global loads take part in pipelining; shared
        // loads stay put.
        LoadSite l;
        l.reg = in.dst.id;
        l.pos = pos;
        l.first_use = pos;
        // WAR/WAW: cannot hoist past an earlier access of the destination.
        int war = region_start;
        for (const Access& a : acc[in.dst.id]) {
          if (a.pos >= region_start && a.pos < pos) war = a.pos + 1;
        }
        l.hoisted = war;
        loads.push_back(l);
        region.push_back(loads.size() - 1);
        touch(in.dst, true);
        ++pos;
        continue;
      }
      // reads then def
      for (int i = 0; i < in.nsrcs; ++i) {
        touch(in.srcs[i], false);
        // record first use of pending loads
        if (in.srcs[i].valid()) {
          for (auto it = loads.rbegin(); it != loads.rend(); ++it) {
            if (it->reg == in.srcs[i].id && it->first_use == it->pos &&
                it->pos < pos) {
              it->first_use = pos;
              break;
            }
          }
        }
      }
      touch(in.dst, true);
      ++pos;
    }
    close_region();
    region_start = saved_region_start;
  }
};

}  // namespace

RegisterReport register_pressure(const KernelProgram& p, int pipeline_depth) {
  PressureWalker w(p, pipeline_depth);
  w.walk(p.body);
  const int npos = w.pos + 1;

  // Interval per register array: from earliest definition (after hoisting)
  // to last access; accumulators live for the whole kernel.
  std::vector<int> lo(p.regs.size(), -1), hi(p.regs.size(), -1);
  for (std::size_t r = 0; r < p.regs.size(); ++r) {
    for (const Access& a : w.acc[r]) {
      if (lo[r] < 0 || a.pos < lo[r]) lo[r] = a.pos;
      hi[r] = std::max(hi[r], a.pos);
    }
  }
  for (const LoadSite& l : w.loads) {
    if (lo[l.reg] < 0 || l.hoisted < lo[l.reg]) lo[l.reg] = l.hoisted;
    hi[l.reg] = std::max(hi[l.reg], l.first_use);
  }
  for (const RegDecl& d : p.regs) {
    if (d.cls == RegClass::accumulator && hi[d.id] >= 0) lo[d.id] = 0;
  }

  // Sweep.
  std::vector<int> delta(npos + 1, 0);
  std::array<std::vector<int>, 5> class_delta;
  for (auto& cd : class_delta) cd.assign(npos + 1, 0);
  for (const RegDecl& d : p.regs) {
    if (lo[d.id] < 0) continue;
    delta[lo[d.id]] += d.size;
    delta[hi[d.id] + 1] -= d.size;
    auto& cd = class_delta[static_cast<int>(d.cls)];
    cd[lo[d.id]] += d.size;
    cd[hi[d.id] + 1] -= d.size;
  }

  RegisterReport rep;
  std::vector<int> live(npos, 0);
  int cur = 0;
  for (int i = 0; i < npos; ++i) {
    cur += delta[i];
    live[i] = cur;
    rep.max_live = std::max(rep.max_live, cur);
  }
  for (int c = 0; c < 5; ++c) {
    int cc = 0;
    for (int i = 0; i < npos; ++i) {
      cc += class_delta[c][i];
      rep.class_live[c] = std::max(rep.class_live[c], cc);
    }
  }
  for (int l = 0; l < p.num_loops; ++l) {
    const auto [first, last] = w.loop_spans[l];
    int peak = 0;
    for (int i = first; i <= last && i < npos; ++i) peak = std::max(peak, live[i]);
    rep.per_loop.emplace_back(l, peak);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Cooperative-load hazard detector (read-before-visible check)

namespace {

struct HazardWalker {
  const KernelProgram& p;
  std::vector<std::int64_t> loop_vals;
  std::vector<int> epoch_written;   // per shared word, epoch of last write
  std::vector<int> writer_thread;   // per shared word
  int epoch = 0;
  std::vector<std::string> findings;

  explicit HazardWalker(const KernelProgram& prog)
      : p(prog),
        loop_vals(prog.num_loops, 0),
        epoch_written(prog.shared_bytes / 4, -1),
        writer_thread(prog.shared_bytes / 4, -1) {}

  bool lane_active(const Instr& in, const EvalCtx& ctx) const {
    for (const Guard& g : in.guards) {
      const std::int64_t v = ctx.eval(g.expr);
      if (v < 0 || v >= g.bound) return false;
    }
    return true;
  }

  void walk(const std::vector<Instr>& body) {
    for (const Instr& in : body) {
      if (!findings.empty() && findings.size() > 8) return;
      switch (in.op) {
        case Op::LOOP:
          for (std::int64_t v = 0; v < in.trip; ++v) {
            loop_vals[in.loop_id] = v;
            walk(in.body);
          }
          break;
        case Op::BARRIER:
          ++epoch;
          break;
        case Op::ST_SHARED:
          for (int ty = 0; ty < p.wg_y; ++ty) {
            for (int tx = 0; tx < p.wg_x; ++tx) {
              EvalCtx ctx{tx, ty, 0, 0, 0, &loop_vals};
              if (!lane_active(in, ctx)) continue;
              const std::int64_t w = ctx.eval(in.addr) / 4;
              epoch_written[w] = epoch;
              writer_thread[w] = ty * p.wg_x + tx;
            }
          }
          break;
        case Op::LD_SHARED:
          for (int ty = 0; ty < p.wg_y; ++ty) {
            for (int tx = 0; tx < p.wg_x; ++tx) {
              EvalCtx ctx{tx, ty, 0, 0, 0, &loop_vals};
              if (!lane_active(in, ctx)) continue;
              const std::int64_t w = ctx.eval(in.addr) / 4;
              const int reader = ty * p.wg_x + tx;
              if (epoch_written[w] == epoch && writer_thread[w] != reader) {
                std::ostringstream os;
                os << p.name << ": shared word " << w
                   << " read by thread " << reader
                   << " in the epoch thread " << writer_thread[w]
                   << " wrote it (no barrier in between)";
                findings.push_back(os.str());
                return;
              }
            }
          }
          break;
        default:
          break;
      }
    }
  }
};

int remove_walk(std::vector<Instr>& body, int& idx) {
  for (std::size_t i = 0; i < body.size(); ++i) {
    if (body[i].op == Op::BARRIER) {
      if (idx == 0) {
        body.erase(body.begin() + static_cast<std::ptrdiff_t>(i));
        return 1;
      }
      --idx;
    } else if (body[i].op == Op::LOOP) {
      if (remove_walk(body[i].body, idx)) return 1;
    }
  }
  return 0;
}

int count_walk(const std::vector<Instr>& body) {
  int n = 0;
  for (const Instr& in : body) {
    if (in.op == Op::BARRIER) ++n;
    if (in.op == Op::LOOP) n += count_walk(in.body);
  }
  return n;
}

}  // namespace

std::vector<std::string> check_cooperative_hazards(const KernelProgram& p) {
  HazardWalker w(p);
  w.walk(p.body);
  return w.findings;
}

int count_static_barriers(const KernelProgram& p) { return count_walk(p.body); }

KernelProgram remove_barrier(const KernelProgram& p, int idx) {
  KernelProgram q = p;
  int i = idx;
  if (!remove_walk(q.body, i)) {
    throw ConfigError("barrier index out of range");
  }
  return q;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

void format_affine(std::ostringstream& os, const AffineExpr& e) {
  os << e.base;
  auto term = [&os](std::int64_t c, const char* sym) {
    if (c == 0) return;
    os << (c > 0 ? "+" : "-") << (c > 0 ? c : -c) << "*" << sym;
  };
  term(e.c_tid_x, "tx");
  term(e.c_tid_y, "ty");
  term(e.c_wg_x, "wx");
  term(e.c_wg_y, "wy");
  term(e.c_wg_z, "wz");
  for (const auto& [id, c] : e.loops) {
    if (c == 0) continue;
    os << (c > 0 ? "+" : "-") << (c > 0 ? c : -c) << "*L" << id;
  }
}

void format_ref(std::ostringstream& os, const KernelProgram& p, const RegRef& r) {
  os << p.regs[r.id].name << "[";
  format_affine(os, r.index);
  os << "]";
}

void serialize_body(std::ostringstream& os, const KernelProgram& p,
                    const std::vector<Instr>& body, int indent) {
  const std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
  for (const Instr& in : body) {
    if (in.op == Op::LOOP) {
      os << pad << "loop L" << in.loop_id << " trip=" << in.trip << " {\n";
      serialize_body(os, p, in.body, indent + 1);
      os << pad << "}\n";
      continue;
    }
    os << pad << op_name(in.op);
    if (in.op == Op::BARRIER) {
      os << "\n";
      continue;
    }
    if (in.dst.valid()) {
      os << " ";
      format_ref(os, p, in.dst);
    }
    if (in.op == Op::ADD) {
      os << " =" << (in.neg0 ? " -" : " ");
      format_ref(os, p, in.srcs[0]);
      os << (in.neg1 ? " - " : " + ");
      format_ref(os, p, in.srcs[1]);
    } else {
      for (int i = 0; i < in.nsrcs; ++i) {
        os << " ";
        format_ref(os, p, in.srcs[i]);
      }
    }
    if (in.op == Op::LD_GLOBAL || in.op == Op::ST_GLOBAL ||
        in.op == Op::LD_SHARED || in.op == Op::ST_SHARED) {
      os << " addr=(";
      format_affine(os, in.addr);
      os << ")";
    }
    for (const Guard& g : in.guards) {
      os << " guard(0<=";
      format_affine(os, g.expr);
      os << "<" << g.bound << ")";
    }
    if (in.pred_zero) os << " pred_zero";
    os << "\n";
  }
}

}  // namespace

std::string serialize(const KernelProgram& p) {
  std::ostringstream os;
  os << "kernel " << p.name << " wg=" << p.wg_x << "x" << p.wg_y << " grid="
     << p.grid_x << "x" << p.grid_y << "x" << p.grid_z
     << " shared=" << p.shared_bytes << "\n";
  for (const RegDecl& r : p.regs) {
    os << "reg " << r.name << "[" << r.size << "] class=" << reg_class_name(r.cls);
    if (r.renamable) os << " renamable";
    os << "\n";
  }
  serialize_body(os, p, p.body, 1);
  return os.str();
}

std::string serialize(const LoweredPipeline& pl) {
  std::ostringstream os;
  os << "pipeline algorithm=" << algo_name(pl.cfg.algorithm)
     << " stages=" << pl.stages.size() << " arena_bytes=" << pl.arena_bytes
     << "\n";
  for (const KernelProgram& p : pl.stages) os << serialize(p);
  return os.str();
}

}  // namespace convlab
