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
#include "convlab/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <list>
#include <sstream>
#include <unordered_map>

#include "convlab/analysis.hpp"

namespace convlab {

// ---------------------------------------------------------------------------
// Standalone access models (also used by the simulator core).

int coalesce_transactions(const std::vector<std::int64_t>& byte_addrs) {
  std::vector<std::int64_t> segs;
  segs.reserve(byte_addrs.size());
  for (std::int64_t a : byte_addrs) segs.push_back(a >> 7);  // 128 B segments
  std::sort(segs.begin(), segs.end());
  segs.erase(std::unique(segs.begin(), segs.end()), segs.end());
  return static_cast<int>(segs.size());
}

int bank_conflict_extra(const std::vector<std::int64_t>& byte_addrs, int banks) {
  // degree = max over banks of distinct words mapped to that bank;
  // lanes hitting the same word broadcast at no cost.
  std::vector<std::int64_t> words;
  words.reserve(byte_addrs.size());
  for (std::int64_t a : byte_addrs) words.push_back(a >> 2);
  std::sort(words.begin(), words.end());
  words.erase(std::unique(words.begin(), words.end()), words.end());
  std::vector<int> per_bank(static_cast<std::size_t>(banks), 0);
  int degree = words.empty() ? 1 : 0;
  for (std::int64_t w : words) {
    const int b = static_cast<int>(((w % banks) + banks) % banks);
    degree = std::max(degree, ++per_bank[b]);
  }
  return std::max(0, degree - 1);
}

namespace {

class LruCache {
 public:
  LruCache(int lines, int line_bytes) : capacity_(lines), line_bytes_(line_bytes) {}

  bool access(std::int64_t line) {
    auto it = map_.find(line);
    if (it != map_.end()) {
      order_.splice(order_.begin(), order_, it->second);
      return true;
    }
    if (static_cast<int>(order_.size()) >= capacity_) {
      map_.erase(order_.back());
      order_.pop_back();
    }
    order_.push_front(line);
    map_[line] = order_.begin();
    return false;
  }

  int line_bytes() const { return line_bytes_; }

 private:
  int capacity_;
  int line_bytes_;
  std::list<std::int64_t> order_;
  std::unordered_map<std::int64_t, std::list<std::int64_t>::iterator> map_;
};

}  // namespace

std::uint64_t l2_filter(
    const std::vector<std::pair<std::int64_t, int>>& accesses,
    const MachineConfig& m) {
  LruCache l2(m.l2_lines, m.l2_line_bytes);
  std::uint64_t dram = 0;
  for (const auto& [addr, size] : accesses) {
    const std::int64_t first = addr / m.l2_line_bytes;
    const std::int64_t last = (addr + std::max(1, size) - 1) / m.l2_line_bytes;
    for (std::int64_t line = first; line <= last; ++line) {
      if (!l2.access(line)) dram += static_cast<std::uint64_t>(m.l2_line_bytes);
    }
  }
  return dram;
}

// ---------------------------------------------------------------------------
// Dynamic trace: loops expanded, loop variables folded into affine bases.
// One trace shared by every warp; thread/workgroup coefficients resolve at
// issue time.

namespace {

struct DynAffine {
  std::int64_t base = 0;
  std::int64_t tx = 0, ty = 0, wx = 0, wy = 0, wz = 0;

  std::int64_t at(int t_x, int t_y, int w_x, int w_y, int w_z) const {
    return base + tx * t_x + ty * t_y + wx * w_x + wy * w_y + wz * w_z;
  }
};

struct DynGuard {
  DynAffine e;
  std::int64_t bound;
};

constexpr int kMaxGuards = 4;

struct DynOp {
  Op op;
  DynAffine addr;
  DynGuard guards[kMaxGuards];
  int nguards = 0;
  std::int32_t src_key[3] = {-1, -1, -1};
  std::int32_t dst_key = -1;
  std::int32_t war_prev = -1;  // last access of dst before this load
  bool renamable = false;
  bool uniform = false;  // address and guards identical across lanes

  bool is_load() const { return op == Op::LD_GLOBAL || op == Op::LD_SHARED; }
};

// Loads are hoisted ahead of a stalled head per memory space: global and
// shared loads each keep up to pipeline_depth in flight, may not cross a
// barrier, a store to their own space, or another access of a non-renamable
// destination. Program order within each class is preserved.
struct Trace {
  std::vector<DynOp> ops;
  std::vector<std::int32_t> loads_global;
  std::vector<std::int32_t> loads_shared;
  std::vector<std::int32_t> next_barrier;
  std::vector<std::int32_t> next_stg;  // next ST_GLOBAL at/after i
  std::vector<std::int32_t> next_sts;  // next ST_SHARED at/after i
  int num_keys = 0;
};

class TraceBuilder {
 public:
  explicit TraceBuilder(const KernelProgram& p)
      : p_(p), loop_vals_(p.num_loops, 0) {
    int total = 0;
    for (const auto& r : p.regs) {
      reg_off_.push_back(total);
      total += r.size;
    }
    trace_.num_keys = total;
    last_access_.assign(static_cast<std::size_t>(total), -1);
  }

  Trace build() {
    walk(p_.body);
    const auto n = static_cast<std::int32_t>(trace_.ops.size());
    trace_.next_barrier.assign(trace_.ops.size(), n);
    trace_.next_stg.assign(trace_.ops.size(), n);
    trace_.next_sts.assign(trace_.ops.size(), n);
    std::int32_t nb = n, ng = n, ns = n;
    for (std::int32_t i = n - 1; i >= 0; --i) {
      if (trace_.ops[i].op == Op::BARRIER) nb = i;
      if (trace_.ops[i].op == Op::ST_GLOBAL) ng = i;
      if (trace_.ops[i].op == Op::ST_SHARED) ns = i;
      trace_.next_barrier[i] = nb;
      trace_.next_stg[i] = ng;
      trace_.next_sts[i] = ns;
    }
    return std::move(trace_);
  }

 private:
  DynAffine fold(const AffineExpr& e) const {
    DynAffine d;
    d.base = e.base;
    d.tx = e.c_tid_x;
    d.ty = e.c_tid_y;
    d.wx = e.c_wg_x;
    d.wy = e.c_wg_y;
    d.wz = e.c_wg_z;
    for (const auto& [id, c] : e.loops) d.base += c * loop_vals_[id];
    return d;
  }

  std::int32_t key(const RegRef& r) const {
    if (!r.valid()) return -1;
    if (r.index.c_tid_x != 0 || r.index.c_tid_y != 0) {
      throw LaunchError("register index depends on thread id");
    }
    return reg_off_[r.id] + static_cast<std::int32_t>(fold(r.index).base);
  }

  void walk(const std::vector<Instr>& body) {
    for (const Instr& in : body) {
      if (in.op == Op::LOOP) {
        for (std::int64_t v = 0; v < in.trip; ++v) {
          loop_vals_[in.loop_id] = v;
          walk(in.body);
        }
        continue;
      }
      DynOp d;
      d.op = in.op;
      const auto idx = static_cast<std::int32_t>(trace_.ops.size());
      if (in.op != Op::BARRIER) {
        d.addr = fold(in.addr);
        if (in.guards.size() > static_cast<std::size_t>(kMaxGuards)) {
          throw LaunchError("instruction carries too many guards");
        }
        for (const Guard& g : in.guards) {
          d.guards[d.nguards++] = {fold(g.expr), g.bound};
        }
        for (int i = 0; i < in.nsrcs; ++i) d.src_key[i] = key(in.srcs[i]);
        d.dst_key = key(in.dst);
        if (in.dst.valid()) d.renamable = p_.regs[in.dst.id].renamable;
        if (d.is_load() && d.dst_key >= 0) d.war_prev = last_access_[d.dst_key];
        for (int i = 0; i < 3; ++i) {
          if (d.src_key[i] >= 0) last_access_[d.src_key[i]] = idx;
        }
        if (d.dst_key >= 0) last_access_[d.dst_key] = idx;
        d.uniform = d.addr.tx == 0 && d.addr.ty == 0;
        for (int i = 0; i < d.nguards; ++i) {
          d.uniform = d.uniform && d.guards[i].e.tx == 0 && d.guards[i].e.ty == 0;
        }
      }
      if (d.op == Op::LD_GLOBAL) trace_.loads_global.push_back(idx);
      if (d.op == Op::LD_SHARED) trace_.loads_shared.push_back(idx);
      trace_.ops.push_back(std::move(d));
    }
  }

  const KernelProgram& p_;
  Trace trace_;
  std::vector<std::int64_t> loop_vals_;
  std::vector<std::int32_t> reg_off_;
  std::vector<std::int32_t> last_access_;
};

// ---------------------------------------------------------------------------
// Scoreboard machine.

constexpr std::int64_t kFar = std::numeric_limits<std::int64_t>::max() / 4;

struct PendingHoist {
  std::int32_t idx;
  std::int32_t key;
  std::int64_t done;
  bool shared;
};

struct WarpState {
  int wg = -1;
  int cu = -1;
  int lane0 = 0;
  int lanes = 0;
  std::int32_t head = 0;
  std::size_t g_ptr = 0;  // next unissued global load
  std::size_t s_ptr = 0;  // next unissued shared load
  int inflight_g = 0;
  int inflight_s = 0;
  std::int64_t next_try = 0;  // earliest cycle this warp could issue
  std::vector<std::int64_t> reg_ready;
  std::vector<PendingHoist> hoists;  // sorted by idx
  std::int32_t arrived_barrier = -1;
  bool done = false;
  bool counted = false;
};

struct WgState {
  int wx = 0, wy = 0, wz = 0;
  int warps = 0;
  int warps_done = 0;
  std::int32_t barrier_idx = -1;
  int barrier_arrivals = 0;
  std::int64_t barrier_release = -1;
  std::int64_t sts_done_max = 0;
  std::vector<int> warp_ids;
};

struct CuState {
  std::vector<int> resident;
  std::size_t rr = 0;
  std::int64_t vec_free_ticks = 0;
  std::int64_t lsu_free = 0;
  std::int64_t sca_free = 0;
  std::uint64_t vec_busy_ticks = 0;
  std::uint64_t lsu_busy = 0;
  std::vector<int> queue;
  std::size_t queue_next = 0;
  std::int64_t shared_used = 0;
  std::int64_t regs_used = 0;
  int warps_used = 0;
  bool used = false;
  bool done_dirty = false;  // a resident warp finished since the last retire
  std::int64_t horizon = 0;  // earliest cycle any resident warp could issue
};

class Machine {
 public:
  Machine(const KernelProgram& p, const MachineConfig& m, int resident_images)
      : p_(p), m_(m), trace_(TraceBuilder(p).build()),
        l2_(m.l2_lines, m.l2_line_bytes) {
    const int threads = p.threads_per_wg();
    if (threads > m.max_workgroup_threads) {
      throw LaunchError("workgroup of " + std::to_string(threads) +
                        " threads exceeds machine limit of " +
                        std::to_string(m.max_workgroup_threads));
    }
    if (p.shared_bytes > m.shared_per_cu) {
      throw LaunchError("shared memory request of " +
                        std::to_string(p.shared_bytes) + " B exceeds CU capacity");
    }
    warps_per_wg_ = (threads + m.warp_size - 1) / m.warp_size;
    regs_per_warp_ = static_cast<std::int64_t>(p.regs_per_thread()) * m.warp_size;
    if (static_cast<std::int64_t>(warps_per_wg_) * regs_per_warp_ > m.regfile_per_cu) {
      throw LaunchError("register demand exceeds the CU register file");
    }
    if (warps_per_wg_ > m.max_warps_per_cu) {
      throw LaunchError("workgroup needs more warp slots than a CU has");
    }

    lane_tx_.resize(static_cast<std::size_t>(threads));
    lane_ty_.resize(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) {
      lane_tx_[t] = t % p.wg_x;
      lane_ty_[t] = t / p.wg_x;
    }

    const std::int64_t grid = p.workgroups() * resident_images;
    cus_.resize(static_cast<std::size_t>(m.num_cus));
    wgs_.reserve(static_cast<std::size_t>(grid));
    for (std::int64_t i = 0; i < grid; ++i) {
      const std::int64_t g = i % p.workgroups();
      WgState wg;
      wg.wx = static_cast<int>(g % p.grid_x);
      wg.wy = static_cast<int>((g / p.grid_x) % p.grid_y);
      wg.wz = static_cast<int>(g / (static_cast<std::int64_t>(p.grid_x) * p.grid_y));
      wg.warps = warps_per_wg_;
      wgs_.push_back(wg);
      cus_[static_cast<std::size_t>(i % m.num_cus)].queue.push_back(
          static_cast<int>(i));
    }
    pending_wgs_ = static_cast<int>(grid);
    bank_count_.assign(static_cast<std::size_t>(m.banks), 0);
    touched_banks_.reserve(static_cast<std::size_t>(m.banks));
  }

  SimMetrics run() {
    for (auto& cu : cus_) admit(cu);

    std::int64_t now = 0;
    while (pending_wgs_ > 0) {
      bool issued_any = false;
      std::int64_t next_event = kFar;
      for (auto& cu : cus_) {
        if (cu.resident.empty()) continue;
        if (cu.horizon > now && !cu.done_dirty) {
          next_event = std::min(next_event, cu.horizon);
          continue;
        }
        const std::size_t n = cu.resident.size();
        const std::size_t base = cu.rr % n;
        int slots = m_.schedulers_per_cu * m_.issue_width;
        std::size_t last_issued = base;
        std::int64_t cu_next = kFar;
        bool cu_issued = false;
        for (std::size_t off = 0; off < n && slots > 0; ++off) {
          const std::size_t pick = (base + off) % n;
          WarpState& w = warps_[static_cast<std::size_t>(cu.resident[pick])];
          if (w.done) continue;
          if (w.next_try > now) {
            cu_next = std::min(cu_next, w.next_try);
            continue;
          }
          std::int64_t when = kFar;
          if (try_issue(cu, w, now, when)) {
            issued_any = true;
            cu_issued = true;
            --slots;
            last_issued = pick;
          } else if (!w.done) {
            if (w.next_try <= now) {
              w.next_try = (when != kFar && when > now) ? when : now + 1;
            }
            cu_next = std::min(cu_next, w.next_try);
          }
        }
        cu.rr = (last_issued + 1) % n;
        if (cu.done_dirty) {
          retire(cu);
          cu.horizon = now + 1;
        } else {
          cu.horizon = cu_issued ? now + 1 : cu_next;
        }
        if (cu.horizon != kFar) next_event = std::min(next_event, cu.horizon);
      }
      if (pending_wgs_ == 0) break;
      if (issued_any) {
        ++now;
      } else {
        now = (next_event != kFar && next_event > now) ? next_event : now + 1;
      }
      end_ = std::max(end_, now);
    }

    SimMetrics r = metrics_;
    r.cycles = static_cast<std::uint64_t>(std::max<std::int64_t>(end_, 1));
    r.shared_bytes_per_wg = p_.shared_bytes;
    r.barrier_count = barrier_census(p_);
    r.max_live_regs = register_pressure(p_, m_.pipeline_depth).max_live;
    int active_cus = 0;
    std::uint64_t vec_ticks = 0, lsu = 0;
    for (const auto& cu : cus_) {
      if (!cu.used) continue;
      ++active_cus;
      vec_ticks += cu.vec_busy_ticks;
      lsu += cu.lsu_busy;
    }
    if (active_cus > 0) {
      r.alu_busy = std::min(
          1.0, static_cast<double>(vec_ticks) /
                   (static_cast<double>(r.cycles) * m_.alus_per_cu * active_cus));
      r.mem_busy = std::min(
          1.0, static_cast<double>(lsu) /
                   (static_cast<double>(r.cycles) * active_cus));
    }
    return r;
  }

 private:
  void admit(CuState& cu) {
    while (cu.queue_next < cu.queue.size()) {
      const int wg_id = cu.queue[cu.queue_next];
      WgState& wg = wgs_[static_cast<std::size_t>(wg_id)];
      if (cu.warps_used + wg.warps > m_.max_warps_per_cu) return;
      if (cu.shared_used + p_.shared_bytes > m_.shared_per_cu) return;
      if (cu.regs_used + wg.warps * regs_per_warp_ > m_.regfile_per_cu) return;
      cu.warps_used += wg.warps;
      cu.shared_used += p_.shared_bytes;
      cu.regs_used += wg.warps * regs_per_warp_;
      cu.used = true;
      ++cu.queue_next;
      for (int w = 0; w < wg.warps; ++w) {
        WarpState ws;
        ws.wg = wg_id;
        ws.cu = static_cast<int>(&cu - cus_.data());
        ws.lane0 = w * m_.warp_size;
        ws.lanes = std::min(m_.warp_size, p_.threads_per_wg() - ws.lane0);
        ws.reg_ready.assign(static_cast<std::size_t>(trace_.num_keys), 0);
        warps_.push_back(std::move(ws));
        const int wid = static_cast<int>(warps_.size()) - 1;
        cu.resident.push_back(wid);
        wg.warp_ids.push_back(wid);
      }
    }
  }

  void retire(CuState& cu) {
    cu.done_dirty = false;
    bool freed = false;
    for (int wi : cu.resident) {
      WarpState& w = warps_[static_cast<std::size_t>(wi)];
      if (w.done && !w.counted) {
        w.counted = true;
        WgState& wg = wgs_[static_cast<std::size_t>(w.wg)];
        if (++wg.warps_done == wg.warps) {
          --pending_wgs_;
          cu.warps_used -= wg.warps;
          cu.shared_used -= p_.shared_bytes;
          cu.regs_used -= wg.warps * regs_per_warp_;
          freed = true;
        }
      }
    }
    if (freed) {
      auto& v = cu.resident;
      v.erase(std::remove_if(v.begin(), v.end(),
                             [this](int wi) {
                               return warps_[static_cast<std::size_t>(wi)].done;
                             }),
              v.end());
      cu.rr = 0;
      admit(cu);
    }
  }

  bool lane_active(const DynOp& d, const WgState& wg, int tx, int ty) const {
    for (int i = 0; i < d.nguards; ++i) {
      const DynGuard& g = d.guards[i];
      const std::int64_t v = g.e.at(tx, ty, wg.wx, wg.wy, wg.wz);
      if (v < 0 || v >= g.bound) return false;
    }
    return true;
  }

  void collect_addrs(const DynOp& d, const WarpState& w, const WgState& wg) {
    scratch_.clear();
    if (d.uniform) {
      // one shared evaluation: either every lane accesses the same word or
      // none does
      if (lane_active(d, wg, 0, 0)) {
        scratch_.push_back(d.addr.at(0, 0, wg.wx, wg.wy, wg.wz));
      }
      return;
    }
    for (int l = 0; l < w.lanes; ++l) {
      const int flat = w.lane0 + l;
      const int tx = lane_tx_[static_cast<std::size_t>(flat)];
      const int ty = lane_ty_[static_cast<std::size_t>(flat)];
      if (!lane_active(d, wg, tx, ty)) continue;
      scratch_.push_back(d.addr.at(tx, ty, wg.wx, wg.wy, wg.wz));
    }
  }

  bool sources_ready(const DynOp& d, const WarpState& w, std::int64_t now,
                     std::int64_t& when) const {
    std::int64_t t = 0;
    for (int i = 0; i < 3; ++i) {
      if (d.src_key[i] >= 0) {
        t = std::max(t, w.reg_ready[static_cast<std::size_t>(d.src_key[i])]);
      }
    }
    if (t > now) {
      when = std::min(when, t);
      return false;
    }
    return true;
  }

  void set_ready(WarpState& w, std::int32_t key, std::int64_t t) {
    if (key >= 0) w.reg_ready[static_cast<std::size_t>(key)] = t;
    end_ = std::max(end_, t);
  }

  bool try_hoist(CuState& cu, WarpState& w, WgState& wg, std::int64_t now,
                 std::int64_t& when, bool shared) {
    const auto& list = shared ? trace_.loads_shared : trace_.loads_global;
    std::size_t& ptr = shared ? w.s_ptr : w.g_ptr;
    const int inflight = shared ? w.inflight_s : w.inflight_g;
    if (inflight >= m_.pipeline_depth) return false;
    while (ptr < list.size() && list[ptr] < w.head) ++ptr;
    if (ptr >= list.size()) return false;
    const std::int32_t j = list[ptr];
    if (j <= w.head) return false;
    const DynOp& ld = trace_.ops[static_cast<std::size_t>(j)];
    if (j >= trace_.next_barrier[static_cast<std::size_t>(w.head)]) return false;
    // never cross a store to the same memory space
    const auto& next_store = shared ? trace_.next_sts : trace_.next_stg;
    const std::size_t from = static_cast<std::size_t>(w.head) + 1;
    if (from < trace_.ops.size() && next_store[from] < j) return false;
    if (!ld.renamable && ld.war_prev >= w.head) return false;
    if (!sources_ready(ld, w, now, when)) return false;
    if (!issue_op(cu, w, wg, ld, now, when, /*hoisted=*/true, j)) return false;
    ++ptr;
    (shared ? w.inflight_s : w.inflight_g) += 1;
    return true;
  }

  bool try_issue(CuState& cu, WarpState& w, std::int64_t now, std::int64_t& when) {
    while (!w.hoists.empty() && w.hoists.front().idx == w.head) {
      set_ready(w, w.hoists.front().key, w.hoists.front().done);
      (w.hoists.front().shared ? w.inflight_s : w.inflight_g) -= 1;
      w.hoists.erase(w.hoists.begin());
      ++w.head;
    }
    if (w.head >= static_cast<std::int32_t>(trace_.ops.size())) {
      w.done = true;
      cu.done_dirty = true;
      return false;
    }
    const DynOp& d = trace_.ops[static_cast<std::size_t>(w.head)];
    WgState& wg = wgs_[static_cast<std::size_t>(w.wg)];

    if (d.op == Op::BARRIER) {
      if (w.arrived_barrier != w.head) {
        w.arrived_barrier = w.head;
        if (wg.barrier_idx != w.head) {
          wg.barrier_idx = w.head;
          wg.barrier_arrivals = 0;
          wg.barrier_release = -1;
        }
        if (++wg.barrier_arrivals == wg.warps) {
          wg.barrier_release = std::max(now + 1, wg.sts_done_max);
          end_ = std::max(end_, wg.barrier_release);
          // wake the siblings parked on this barrier
          for (int wid : wg.warp_ids) {
            WarpState& sib = warps_[static_cast<std::size_t>(wid)];
            if (!sib.done && sib.arrived_barrier == w.head) {
              sib.next_try = wg.barrier_release;
              CuState& scu = cus_[static_cast<std::size_t>(sib.cu)];
              scu.horizon = std::min(scu.horizon, wg.barrier_release);
            }
          }
        }
      }
      if (wg.barrier_release >= 0 && now >= wg.barrier_release) {
        ++w.head;
        return try_issue(cu, w, now, when);
      }
      // park until the release wake-up (or forever if arrivals are pending;
      // the releasing warp resets next_try)
      w.next_try = wg.barrier_release >= 0 ? wg.barrier_release : kFar;
      when = std::min(when, w.next_try);
      return false;
    }

    // cheap unit pre-check: a busy LSU blocks the head and every hoist
    switch (d.op) {
      case Op::LD_GLOBAL:
      case Op::ST_GLOBAL:
      case Op::LD_SHARED:
      case Op::ST_SHARED:
        if (cu.lsu_free > now) {
          when = std::min(when, cu.lsu_free);
          return false;
        }
        break;
      case Op::FMA:
      case Op::MUL:
      case Op::ADD:
        if (cu.vec_free_ticks > now * m_.alus_per_cu) {
          when = std::min(when, cu.vec_free_ticks / m_.alus_per_cu + 1);
          if (cu.lsu_free > now) {
            when = std::min(when, cu.lsu_free);
            return false;  // no hoist can issue either
          }
          // vector unit busy but the LSU is free: fall through to hoists
          if (try_hoist(cu, w, wg, now, when, /*shared=*/false)) return true;
          if (try_hoist(cu, w, wg, now, when, /*shared=*/true)) return true;
          return false;
        }
        break;
      case Op::IALU:
        if (cu.sca_free > now) {
          when = std::min(when, cu.sca_free);
          if (cu.lsu_free > now) {
            when = std::min(when, cu.lsu_free);
            return false;
          }
          if (try_hoist(cu, w, wg, now, when, /*shared=*/false)) return true;
          if (try_hoist(cu, w, wg, now, when, /*shared=*/true)) return true;
          return false;
        }
        break;
      default:
        break;
    }

    if (sources_ready(d, w, now, when) && issue_op(cu, w, wg, d, now, when)) {
      if (d.op == Op::LD_GLOBAL && w.g_ptr < trace_.loads_global.size() &&
          trace_.loads_global[w.g_ptr] == w.head) {
        ++w.g_ptr;
      }
      if (d.op == Op::LD_SHARED && w.s_ptr < trace_.loads_shared.size() &&
          trace_.loads_shared[w.s_ptr] == w.head) {
        ++w.s_ptr;
      }
      ++w.head;
      if (w.head >= static_cast<std::int32_t>(trace_.ops.size()) &&
          w.hoists.empty()) {
        w.done = true;
        cu.done_dirty = true;
      }
      return true;
    }

    // Head stalled: compiler-style pipelining issues the next program-order
    // load of either space early.
    if (cu.lsu_free > now) {
      when = std::min(when, cu.lsu_free);
      return false;
    }
    if (try_hoist(cu, w, wg, now, when, /*shared=*/false)) return true;
    if (try_hoist(cu, w, wg, now, when, /*shared=*/true)) return true;
    return false;
  }

  bool issue_op(CuState& cu, WarpState& w, WgState& wg, const DynOp& d,
                std::int64_t now, std::int64_t& when, bool hoisted = false,
                std::int32_t idx = -1) {
    switch (d.op) {
      case Op::FMA:
      case Op::MUL:
      case Op::ADD: {
        const std::int64_t tick = now * m_.alus_per_cu;
        if (cu.vec_free_ticks > tick) {
          when = std::min(when, cu.vec_free_ticks / m_.alus_per_cu + 1);
          return false;
        }
        cu.vec_free_ticks = tick + m_.warp_size;
        cu.vec_busy_ticks += static_cast<std::uint64_t>(m_.warp_size);
        ++metrics_.vector_inst;
        set_ready(w, d.dst_key, now + m_.lat_alu);
        return true;
      }
      case Op::IALU: {
        if (cu.sca_free > now) {
          when = std::min(when, cu.sca_free);
          return false;
        }
        cu.sca_free = now + 1;
        ++metrics_.scalar_inst;
        set_ready(w, d.dst_key, now + 1);
        return true;
      }
      case Op::LD_SHARED:
      case Op::ST_SHARED: {
        if (cu.lsu_free > now) {
          when = std::min(when, cu.lsu_free);
          return false;
        }
        collect_addrs(d, w, wg);
        const int extra = shared_conflict_extra();
        const int cost = 1 + extra;
        cu.lsu_free = now + cost;
        cu.lsu_busy += static_cast<std::uint64_t>(cost);
        metrics_.bank_conflict_extra_cycles += static_cast<std::uint64_t>(extra);
        ++metrics_.vector_inst;
        const std::int64_t done = now + cost - 1 + m_.lat_shared;
        if (d.op == Op::LD_SHARED) {
          if (hoisted) {
            push_hoist(w, {idx, d.dst_key, done, /*shared=*/true});
            end_ = std::max(end_, done);
          } else {
            set_ready(w, d.dst_key, done);
          }
        } else {
          wg.sts_done_max = std::max(wg.sts_done_max, done);
          end_ = std::max(end_, done);
        }
        return true;
      }
      case Op::LD_GLOBAL:
      case Op::ST_GLOBAL: {
        if (cu.lsu_free > now) {
          when = std::min(when, cu.lsu_free);
          return false;
        }
        collect_addrs(d, w, wg);
        int transactions = 1;
        std::int64_t done = now + 1;
        if (!scratch_.empty()) {
          std::sort(scratch_.begin(), scratch_.end());
          transactions = 0;
          std::uint64_t raw = 0;
          bool miss = false;
          std::int64_t prev_seg = -1, prev_line = -1;
          for (std::int64_t a : scratch_) {
            const std::int64_t seg = a >> 7;
            if (seg != prev_seg) {
              ++transactions;
              prev_seg = seg;
            }
            const std::int64_t line = a >> 6;
            if (line == prev_line) continue;
            prev_line = line;
            raw += 64;
            if (d.op == Op::LD_GLOBAL && !l2_.access(line)) {
              miss = true;
              metrics_.global_read_bytes_post_l2 += 64;
              bw_free_ = std::max(bw_free_, static_cast<double>(now)) +
                         64.0 / m_.global_bytes_per_cycle;
            }
          }
          if (d.op == Op::LD_GLOBAL) {
            metrics_.global_read_bytes_raw += raw;
            done = now + (miss ? m_.lat_global : m_.lat_l2);
            if (miss) {
              done = std::max(done,
                              static_cast<std::int64_t>(std::llround(std::ceil(bw_free_))));
            }
          } else {
            metrics_.global_write_bytes += raw;
            bw_free_ = std::max(bw_free_, static_cast<double>(now)) +
                       static_cast<double>(raw) / m_.global_bytes_per_cycle;
            done = now + 1;
            end_ = std::max(end_, static_cast<std::int64_t>(std::llround(std::ceil(bw_free_))));
          }
        }
        cu.lsu_free = now + transactions;
        cu.lsu_busy += static_cast<std::uint64_t>(transactions);
        ++metrics_.vector_inst;
        if (d.op == Op::LD_GLOBAL) {
          if (hoisted) {
            push_hoist(w, {idx, d.dst_key, done, /*shared=*/false});
            end_ = std::max(end_, done);
          } else {
            set_ready(w, d.dst_key, done);
          }
        }
        return true;
      }
      default:
        return false;
    }
  }

  // Conflict degree minus one over the member scratch, allocation-free.
  int shared_conflict_extra() {
    const std::size_t n = scratch_.size();
    if (n <= 1) return 0;
    std::sort(scratch_.begin(), scratch_.end());
    int degree = 0;
    std::int64_t prev_word = -1;
    for (std::size_t i = 0; i < n; ++i) {
      const std::int64_t word = scratch_[i] >> 2;
      if (word == prev_word) continue;  // broadcast
      prev_word = word;
      const int b = static_cast<int>(((word % m_.banks) + m_.banks) % m_.banks);
      degree = std::max(degree, ++bank_count_[static_cast<std::size_t>(b)]);
      touched_banks_.push_back(b);
    }
    for (int b : touched_banks_) bank_count_[static_cast<std::size_t>(b)] = 0;
    touched_banks_.clear();
    return std::max(0, degree - 1);
  }

  static void push_hoist(WarpState& w, PendingHoist h) {
    auto it = w.hoists.begin();
    while (it != w.hoists.end() && it->idx < h.idx) ++it;
    w.hoists.insert(it, h);
  }

  const KernelProgram& p_;
  const MachineConfig& m_;
  Trace trace_;
  LruCache l2_;
  std::vector<WgState> wgs_;
  std::vector<WarpState> warps_;
  std::vector<CuState> cus_;
  std::vector<int> lane_tx_, lane_ty_;
  std::vector<std::int64_t> scratch_;
  std::vector<int> bank_count_;
  std::vector<int> touched_banks_;
  SimMetrics metrics_;
  double bw_free_ = 0.0;
  std::int64_t end_ = 0;
  int warps_per_wg_ = 0;
  std::int64_t regs_per_warp_ = 0;
  int pending_wgs_ = 0;
};

}  // namespace

SimMetrics simulate(const KernelProgram& p, const MachineConfig& m,
                    int resident_images) {
  m.validate();
  if (resident_images < 1) throw ConfigError("resident_images must be >= 1");
  Machine machine(p, m, resident_images);
  return machine.run();
}

std::vector<StageMetrics> simulate_pipeline(const LoweredPipeline& pl,
                                            const MachineConfig& m,
                                            int resident_images) {
  std::vector<StageMetrics> out;
  out.reserve(pl.stages.size());
  for (const KernelProgram& stage : pl.stages) {
    out.push_back({stage.name, simulate(stage, m, resident_images)});
  }
  return out;
}

std::uint64_t pipeline_cycles(const std::vector<StageMetrics>& stages) {
  std::uint64_t c = 0;
  for (const auto& s : stages) c += s.metrics.cycles;
  return c;
}

std::string sim_csv_header() {
  return "kernel,global_read_raw,global_read_post_l2,global_write,"
         "shared_per_wg,bank_extra_cycles,barriers,vector_inst,scalar_inst,"
         "max_live_regs,cycles,alu_busy,mem_busy";
}

std::string sim_csv_row(const std::string& kernel, const SimMetrics& m) {
  std::ostringstream os;
  os << kernel << ',' << m.global_read_bytes_raw << ','
     << m.global_read_bytes_post_l2 << ',' << m.global_write_bytes << ','
     << m.shared_bytes_per_wg << ',' << m.bank_conflict_extra_cycles << ','
     << m.barrier_count << ',' << m.vector_inst << ',' << m.scalar_inst << ','
     << m.max_live_regs << ',' << m.cycles << ',';
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", m.alu_busy);
  os << buf << ',';
  std::snprintf(buf, sizeof(buf), "%.4f", m.mem_busy);
  os << buf;
  return os.str();
}

}  // namespace convlab
