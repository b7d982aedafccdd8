// stencilforge - tiled kernel execution, staging, and schedules
// Copyright (c) 2026 the stencilforge authors
// Distributed under the MIT license; see the LICENSE file.

#ifndef SFORGE_EXECUTOR_HPP
#define SFORGE_EXECUTOR_HPP

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <functional>
#include <future>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "stencilforge/codegen.hpp"
#include "stencilforge/exchange.hpp"
#include "stencilforge/field.hpp"
#include "stencilforge/reductions.hpp"
#include "stencilforge/workers.hpp"

namespace sforge::exec {

using grid::distributed_field;
using grid::index_t;

class exec_error : public std::runtime_error {
public:
  explicit exec_error(const std::string& what) : std::runtime_error(what) {}
};

// Which cells of a local block a kernel run covers.  "interior" is the set
// computable before any ghost arrives: points at least a stencil halo away
// from every block face.  "boundary" is the complementary shell.
enum class region { all, interior, boundary };

enum class run_mode { plain, overlap };

// The binding and parameter names a point function expects, in the order it
// will index them.  Checked against the plan at registration.
struct kernel_signature {
  std::vector<std::string> fields;
  std::vector<std::string> params;
};

// Bytes moved through tile staging, the stand-in for host/device traffic.
// bytes_in counts staged read windows of cached bindings; bytes_out charges
// one tile volume per cached written binding (stores land directly, but a
// device copy-back would move exactly that much).
struct transfer_ledger {
  std::int64_t bytes_in = 0;
  std::int64_t bytes_out = 0;
  std::int64_t tiles = 0;

  transfer_ledger& operator+=(const transfer_ledger& o) {
    bytes_in += o.bytes_in;
    bytes_out += o.bytes_out;
    tiles += o.tiles;
    return *this;
  }
  bool operator==(const transfer_ledger&) const = default;
};

namespace detail {

struct worker_pass;

struct box3 {
  std::array<index_t, 3> lo{};
  std::array<index_t, 3> hi{};

  bool empty() const { return hi[0] <= lo[0] || hi[1] <= lo[1] || hi[2] <= lo[2]; }
  index_t volume() const { return (hi[0] - lo[0]) * (hi[1] - lo[1]) * (hi[2] - lo[2]); }
};

inline std::vector<box3> region_boxes(const std::array<index_t, 3>& dims,
                                      const std::array<int, 6>& halo, region reg) {
  box3 all{{0, 0, 0}, dims};
  if (reg == region::all) return {all};

  std::array<index_t, 3> il{}, ih{};
  bool have_interior = true;
  for (int a = 0; a < 3; ++a) {
    auto as = static_cast<std::size_t>(a);
    il[as] = std::min<index_t>(halo[static_cast<std::size_t>(2 * a)], dims[as]);
    ih[as] = std::max<index_t>(il[as], dims[as] - halo[static_cast<std::size_t>(2 * a + 1)]);
    if (il[as] >= ih[as]) have_interior = false;
  }
  if (reg == region::interior) {
    if (!have_interior) return {};
    return {box3{il, ih}};
  }
  if (!have_interior) return {all};
  std::vector<box3> out = {
      {{0, 0, 0}, {dims[0], dims[1], il[2]}},
      {{0, 0, ih[2]}, {dims[0], dims[1], dims[2]}},
      {{0, 0, il[2]}, {dims[0], il[1], ih[2]}},
      {{0, ih[1], il[2]}, {dims[0], dims[1], ih[2]}},
      {{0, il[1], il[2]}, {il[0], ih[1], ih[2]}},
      {{ih[0], il[1], il[2]}, {dims[0], ih[1], ih[2]}},
  };
  std::erase_if(out, [](const box3& b) { return b.empty(); });
  return out;
}

// Fixed per-binding facts, shared by every worker and (in debug mode) used
// to police point-function accesses.
struct binding_state {
  distributed_field* field = nullptr;
  bool cached = false;
  bool readable = true;
  bool writable = false;
  bool to_back = false;      // SEPARATEINOUT: reads front, writes back
  bool center_only = false;  // written in place, so reads must stay at (0,0,0)
  const std::string* kernel = nullptr;
  std::array<int, 6> halo{};
};

}  // namespace detail

// Stencil window onto one bound field at the point being evaluated.
// operator()(di,dj,dk) reads at an offset inside the declared halo; store()
// writes the center.  Views are only valid during the point-function call
// that received them.
class cell_view {
public:
  double operator()(int di, int dj, int dk) const {
    if (dbg_) check_read(di, dj, dk);
    return planes_[dk + hzl_][off_ + static_cast<index_t>(dj) * sy_ + di];
  }
  double load() const { return (*this)(0, 0, 0); }
  void store(double v) const {
    if (dbg_) check_write();
    *wr_ = v;
  }

private:
  friend struct detail::worker_pass;
  friend struct row_ctx;

  const double* const* planes_ = nullptr;  // indexed by dk + hzl
  double* wr_ = nullptr;
  index_t off_ = 0;
  index_t sy_ = 0;
  int hzl_ = 0;
  const detail::binding_state* dbg_ = nullptr;

  void check_read(int di, int dj, int dk) const {
    const auto& b = *dbg_;
    if (!b.readable)
      throw exec_error("kernel '" + *b.kernel + "': read of write-only binding '" +
                       b.field->name() + "'");
    if (b.center_only && (di != 0 || dj != 0 || dk != 0))
      throw exec_error("kernel '" + *b.kernel + "': non-center read of in-place binding '" +
                       b.field->name() + "'");
    if (di < -b.halo[0] || di > b.halo[1] || dj < -b.halo[2] || dj > b.halo[3] ||
        dk < -b.halo[4] || dk > b.halo[5])
      throw exec_error("kernel '" + *b.kernel + "': read offset (" + std::to_string(di) + "," +
                       std::to_string(dj) + "," + std::to_string(dk) +
                       ") outside the declared stencil of '" + b.field->name() + "'");
  }
  void check_write() const {
    const auto& b = *dbg_;
    if (!b.writable)
      throw exec_error("kernel '" + *b.kernel + "': store to read-only binding '" +
                       b.field->name() + "'");
  }
};

// What a point function receives: one view per binding in plan declaration
// order, parameter values in plan order, and the global cell index.
struct point_ctx {
  const cell_view* f = nullptr;
  const double* p = nullptr;
  index_t i = 0, j = 0, k = 0;

  const cell_view& field(int slot) const { return f[static_cast<std::size_t>(slot)]; }
  double param(int slot) const { return p[static_cast<std::size_t>(slot)]; }
};

// What a row function receives: one contiguous x-run of n cells starting at
// global index (i0, j, k).  in(slot, dj, dk) points at the first cell's
// (0, dj, dk) neighbour and is indexable over [0, n) plus the declared x
// halo; out(slot) is the matching write pointer.  Row functions trade the
// per-access policing of cell_view for an inner loop the compiler can
// vectorize, so keep them to straight-line stencil math and pin them to a
// point-function twin with an equivalence test.
struct row_ctx {
  const cell_view* f = nullptr;
  const double* p = nullptr;
  index_t i0 = 0, j = 0, k = 0;
  index_t n = 0;

  const double* in(int slot, int dj = 0, int dk = 0) const {
    const cell_view& v = f[static_cast<std::size_t>(slot)];
    return v.planes_[dk + v.hzl_] + v.off_ + static_cast<index_t>(dj) * v.sy_;
  }
  double* out(int slot) const { return f[static_cast<std::size_t>(slot)].wr_; }
  double param(int slot) const { return p[static_cast<std::size_t>(slot)]; }
};

namespace detail {

// Per-worker machinery for one kernel run over one region: region boxes,
// tile marching, plane staging for cached bindings, and the view array the
// point function indexes.  Staging keeps a ring of stencil-depth planes per
// cached binding and loads one new plane per z step, the streaming pattern
// a shared-memory tile would use.
struct worker_pass {
  const codegen::execution_plan* plan = nullptr;
  const std::vector<binding_state>* binds = nullptr;
  int w = 0;
  bool debug = false;
  std::vector<box3> boxes;

  point_ctx ctx;
  std::int64_t bytes_in = 0;
  std::int64_t bytes_out = 0;
  std::int64_t tiles = 0;

  void init(const codegen::execution_plan& p, const std::vector<binding_state>& bs,
            const double* params, region reg, bool dbg, int worker) {
    plan = &p;
    binds = &bs;
    w = worker;
    debug = dbg;
    auto& lb0 = bs.front().field->local(worker);
    lo_ = lb0.lo;
    boxes = region_boxes(lb0.dims, p.halo, reg);

    hxl_ = p.halo[0];
    hyl_ = p.halo[2];
    hzl_ = p.halo[4];
    depth_ = p.halo[4] + p.halo[5] + 1;
    txw_ = p.tile[0] + p.halo[0] + p.halo[1];
    tyw_ = p.tile[1] + p.halo[2] + p.halo[3];
    plane_sz_ = static_cast<index_t>(txw_) * tyw_;

    const std::size_t n = bs.size();
    slots_.resize(n);
    views_.assign(n, cell_view{});
    table_.assign(n * static_cast<std::size_t>(depth_), nullptr);
    for (std::size_t s = 0; s < n; ++s) {
      auto& sl = slots_[s];
      sl.lb = &bs[s].field->local(worker);
      sl.rbase = sl.lb->front;
      sl.wbase = bs[s].writable ? (bs[s].to_back ? sl.lb->back : sl.lb->front) : nullptr;
      sl.stage = bs[s].cached && bs[s].readable;
      if (sl.stage) sl.scratch.assign(static_cast<std::size_t>(plane_sz_ * depth_), 0.0);
      auto& v = views_[s];
      v.planes_ = table_.data() + s * static_cast<std::size_t>(depth_);
      v.sy_ = sl.stage ? txw_ : sl.lb->ld[0];
      v.hzl_ = hzl_;
      v.dbg_ = debug ? &bs[s] : nullptr;
    }
    ctx.f = views_.data();
    ctx.p = params;
  }

  void begin_tile(const box3& t) {
    cur_ = t;
    first_ = true;
    tiles += 1;
    for (std::size_t s = 0; s < slots_.size(); ++s)
      if ((*binds)[s].cached && (*binds)[s].writable) bytes_out += t.volume() * 8;
  }

  void begin_plane(index_t kz) {
    kz_ = kz;
    ctx.k = lo_[2] + kz;
    for (std::size_t s = 0; s < slots_.size(); ++s) {
      auto& sl = slots_[s];
      const double** row = table_.data() + s * static_cast<std::size_t>(depth_);
      if (sl.stage) {
        if (first_)
          for (int t = 0; t < depth_; ++t) stage_plane(s, kz + t - hzl_);
        else
          stage_plane(s, kz + depth_ - 1 - hzl_);
        for (int t = 0; t < depth_; ++t)
          row[t] = sl.scratch.data() + ring_slot(kz + t - hzl_) * plane_sz_;
      } else {
        const auto& lb = *sl.lb;
        for (int t = 0; t < depth_; ++t)
          row[t] = sl.rbase + (kz + t - hzl_ + lb.ghost) * lb.ld[0] * lb.ld[1];
      }
    }
    first_ = false;
  }

  void begin_row(index_t j) {
    ctx.j = lo_[1] + j;
    ctx.i = lo_[0] + cur_.lo[0];
    for (std::size_t s = 0; s < slots_.size(); ++s) {
      auto& sl = slots_[s];
      auto& v = views_[s];
      if (sl.stage)
        v.off_ = (j - cur_.lo[1] + hyl_) * static_cast<index_t>(txw_) + hxl_;
      else
        v.off_ = (j + sl.lb->ghost) * sl.lb->ld[0] + cur_.lo[0] + sl.lb->ghost;
      v.wr_ = sl.wbase ? sl.wbase + sl.lb->offset(cur_.lo[0], j, kz_) : nullptr;
    }
  }

  void advance() {
    ++ctx.i;
    for (auto& v : views_) {
      ++v.off_;
      if (v.wr_) ++v.wr_;
    }
  }

private:
  struct slot_rt {
    distributed_field::local_block* lb = nullptr;
    const double* rbase = nullptr;
    double* wbase = nullptr;
    bool stage = false;
    std::vector<double> scratch;
  };

  std::array<index_t, 3> lo_{};
  std::vector<slot_rt> slots_;
  std::vector<cell_view> views_;
  std::vector<const double*> table_;
  box3 cur_{};
  index_t kz_ = 0;
  index_t plane_sz_ = 0;
  int hxl_ = 0, hyl_ = 0, hzl_ = 0;
  int depth_ = 0, txw_ = 0, tyw_ = 0;
  bool first_ = true;

  index_t ring_slot(index_t kk) const {
    index_t m = kk % depth_;
    return m < 0 ? m + depth_ : m;
  }

  // Copies one field plane's tile window into the scratch ring.
  void stage_plane(std::size_t s, index_t kk) {
    auto& sl = slots_[s];
    const auto& lb = *sl.lb;
    const index_t i0 = cur_.lo[0] - hxl_;
    const index_t cols = (cur_.hi[0] - cur_.lo[0]) + plan->halo[0] + plan->halo[1];
    const index_t j0 = cur_.lo[1] - hyl_;
    const index_t j1 = cur_.hi[1] + plan->halo[3];
    double* dst = sl.scratch.data() + ring_slot(kk) * plane_sz_;
    for (index_t jj = j0; jj < j1; ++jj) {
      const double* src = sl.rbase + lb.offset(i0, jj, kk);
      std::memcpy(dst + (jj - cur_.lo[1] + hyl_) * static_cast<index_t>(txw_), src,
                  static_cast<std::size_t>(cols) * sizeof(double));
    }
    bytes_in += cols * (j1 - j0) * 8;
  }
};

// The only templated layer: marches tiles, planes, and rows, invoking the
// point function inline at every cell of the pass's region.
template <class F>
void drive(worker_pass& wp, const F& fn) {
  const auto& tile = wp.plan->tile;
  for (const box3& bx : wp.boxes)
    for (index_t tz = bx.lo[2]; tz < bx.hi[2]; tz += tile[2])
      for (index_t ty = bx.lo[1]; ty < bx.hi[1]; ty += tile[1])
        for (index_t tx = bx.lo[0]; tx < bx.hi[0]; tx += tile[0]) {
          box3 t{{tx, ty, tz},
                 {std::min<index_t>(tx + tile[0], bx.hi[0]),
                  std::min<index_t>(ty + tile[1], bx.hi[1]),
                  std::min<index_t>(tz + tile[2], bx.hi[2])}};
          wp.begin_tile(t);
          for (index_t kz = t.lo[2]; kz < t.hi[2]; ++kz) {
            wp.begin_plane(kz);
            for (index_t j = t.lo[1]; j < t.hi[1]; ++j) {
              wp.begin_row(j);
              for (index_t i = t.lo[0]; i < t.hi[0]; ++i) {
                fn(static_cast<const point_ctx&>(wp.ctx));
                wp.advance();
              }
            }
          }
        }
}

// Row-function twin of drive: the identical tile/plane/row march, but each
// x-run goes to the kernel as one call instead of one call per cell.
template <class F>
void drive_rows(worker_pass& wp, const F& fn) {
  const auto& tile = wp.plan->tile;
  row_ctx rc;
  rc.f = wp.ctx.f;
  rc.p = wp.ctx.p;
  for (const box3& bx : wp.boxes)
    for (index_t tz = bx.lo[2]; tz < bx.hi[2]; tz += tile[2])
      for (index_t ty = bx.lo[1]; ty < bx.hi[1]; ty += tile[1])
        for (index_t tx = bx.lo[0]; tx < bx.hi[0]; tx += tile[0]) {
          box3 t{{tx, ty, tz},
                 {std::min<index_t>(tx + tile[0], bx.hi[0]),
                  std::min<index_t>(ty + tile[1], bx.hi[1]),
                  std::min<index_t>(tz + tile[2], bx.hi[2])}};
          wp.begin_tile(t);
          rc.n = t.hi[0] - t.lo[0];
          for (index_t kz = t.lo[2]; kz < t.hi[2]; ++kz) {
            wp.begin_plane(kz);
            rc.k = wp.ctx.k;
            for (index_t j = t.lo[1]; j < t.hi[1]; ++j) {
              wp.begin_row(j);
              rc.i0 = wp.ctx.i;
              rc.j = wp.ctx.j;
              fn(static_cast<const row_ctx&>(rc));
            }
          }
        }
}

}  // namespace detail

// One step of a kernel schedule.  Steps name kernels and fields; the
// executor resolves them when the schedule runs.
struct schedule_step {
  enum class kind { run, exchange, physical_bc, refresh, reduce };

  kind what = kind::run;
  std::string kernel;
  region reg = region::all;
  std::vector<std::string> fields;
  grid::reduce_op op = grid::reduce_op::max_abs;
  std::string source;
  std::string target;

  static schedule_step run(std::string kernel, region r = region::all) {
    schedule_step s;
    s.what = kind::run;
    s.kernel = std::move(kernel);
    s.reg = r;
    return s;
  }
  static schedule_step exchange(std::vector<std::string> fields) {
    schedule_step s;
    s.what = kind::exchange;
    s.fields = std::move(fields);
    return s;
  }
  static schedule_step physical_bc(std::vector<std::string> fields) {
    schedule_step s;
    s.what = kind::physical_bc;
    s.fields = std::move(fields);
    return s;
  }
  static schedule_step refresh(std::vector<std::string> fields) {
    schedule_step s;
    s.what = kind::refresh;
    s.fields = std::move(fields);
    return s;
  }
  static schedule_step reduce(std::string source, grid::reduce_op op, std::string target) {
    schedule_step s;
    s.what = kind::reduce;
    s.source = std::move(source);
    s.op = op;
    s.target = std::move(target);
    return s;
  }
};

struct schedule {
  std::vector<schedule_step> steps;
};

// Runs registered kernels over the distributed fields of one store.  Owns
// the ghost-validity bookkeeping that backs the schedule dry-run: a field's
// ghosts are valid after an exchange or refresh and stale after any kernel
// writes it.  Host-side writes bypass the executor, so callers doing their
// own fills should invalidate_ghosts() the touched fields.
class executor {
public:
  executor(grid::worker_group& g, grid::field_store& store, grid::boundary_spec bc)
      : group_(&g), store_(&store), bc_(bc), ex_(g, store.decomp()) {}

  grid::boundary_spec& boundary() { return bc_; }

  template <class F>
  void register_kernel(const codegen::execution_plan& plan, const kernel_signature& sig, F fn) {
    kernel_entry& e = register_common(plan, sig);
    e.driver = [fn](detail::worker_pass& wp) { detail::drive(wp, fn); };
  }

  // Same contract as register_kernel except the function consumes whole
  // rows (see row_ctx): scheduling, regions, staging, and the transfer
  // ledger are identical, only the inner-loop interface differs.
  template <class F>
  void register_row_kernel(const codegen::execution_plan& plan, const kernel_signature& sig,
                           F fn) {
    kernel_entry& e = register_common(plan, sig);
    e.driver = [fn](detail::worker_pass& wp) { detail::drive_rows(wp, fn); };
  }

  void run_kernel(const std::string& name, const std::map<std::string, double>& params,
                  region reg = region::all) {
    kernel_entry& k = lookup(name);
    const std::vector<double> pv = resolve_params(k, params);
    const bool dbg = debug_enabled();
    if (dbg) check_ghosts(k, reg);
    ledger_acc acc;
    group_->run([&](int w) { run_region_worker(k, pv.data(), reg, dbg, w, acc); });
    finish_run(k, reg, acc);
  }

  void exchange(const std::vector<std::string>& fields) {
    ex_.exchange(resolve_fields(fields));
    for (const auto& f : fields) ghosts_ok_[f] = true;
  }

  void physical_bc(const std::vector<std::string>& fields) {
    ex_.apply_bc(resolve_fields(fields), bc_);
  }

  void refresh(const std::vector<std::string>& fields) {
    ex_.refresh(resolve_fields(fields), bc_);
    for (const auto& f : fields) ghosts_ok_[f] = true;
  }

  double reduce(const std::string& field, grid::reduce_op op) {
    return grid::reduce(*group_, store_->at(field), op);
  }

  // Validates the schedule's exchange-before-ghost-read invariant against
  // the current ghost state, then runs it `steps` times.  In overlap mode a
  // comm step directly followed by a full-region kernel run executes as:
  // interior tiles concurrent with the communication, then boundary tiles.
  void run_schedule(const schedule& s, const std::map<std::string, double>& params, int steps,
                    run_mode mode = run_mode::plain,
                    std::map<std::string, double>* results = nullptr) {
    dry_run(s, steps);
    for (int pass = 0; pass < steps; ++pass)
      for (std::size_t i = 0; i < s.steps.size(); ++i) {
        const schedule_step& st = s.steps[i];
        if (mode == run_mode::overlap && i + 1 < s.steps.size() &&
            (st.what == schedule_step::kind::exchange ||
             st.what == schedule_step::kind::refresh)) {
          const schedule_step& nx = s.steps[i + 1];
          if (nx.what == schedule_step::kind::run && nx.reg == region::all &&
              splittable(lookup(nx.kernel), st.fields)) {
            run_pair(st, lookup(nx.kernel), params);
            ++i;
            continue;
          }
        }
        execute_step(st, params, results);
      }
  }

  // Walks the schedule against a copy of the ghost-validity state and
  // throws if any full- or boundary-region kernel would read ghosts that no
  // prior exchange filled.  Stops early once a pass leaves the state where
  // it found it, since later passes then repeat exactly.
  void dry_run(const schedule& s, int steps) const {
    auto ok = ghosts_ok_;
    const int passes = std::min(steps, 4);
    for (int pass = 0; pass < passes; ++pass) {
      const auto before = ok;
      for (std::size_t i = 0; i < s.steps.size(); ++i) {
        const schedule_step& st = s.steps[i];
        const std::string where = "schedule step " + std::to_string(i + 1);
        switch (st.what) {
          case schedule_step::kind::exchange:
          case schedule_step::kind::refresh:
            for (const auto& f : st.fields) {
              require_field(f, where);
              ok[f] = true;
            }
            break;
          case schedule_step::kind::physical_bc:
            for (const auto& f : st.fields) require_field(f, where);
            break;
          case schedule_step::kind::reduce:
            require_field(st.source, where);
            break;
          case schedule_step::kind::run: {
            auto it = kernels_.find(st.kernel);
            if (it == kernels_.end())
              throw exec_error(where + ": unknown kernel '" + st.kernel + "'");
            const kernel_entry& k = it->second;
            if (k.plan.max_halo() > 0 && st.reg != region::interior)
              for (std::size_t b = 0; b < k.binds.size(); ++b) {
                const auto& name = k.plan.bindings[b].field;
                if (k.binds[b].readable && !map_get(ok, name))
                  throw exec_error(where + ": kernel '" + st.kernel + "' reads ghosts of '" +
                                   name + "' that were never exchanged");
              }
            for (std::size_t b = 0; b < k.binds.size(); ++b)
              if (k.binds[b].writable) ok[k.plan.bindings[b].field] = false;
            break;
          }
        }
      }
      if (ok == before) break;
    }
  }

  const transfer_ledger& last_ledger(const std::string& kernel) const {
    return lookup_const(kernel).last;
  }
  const transfer_ledger& total_ledger(const std::string& kernel) const {
    return lookup_const(kernel).total;
  }

  bool ghosts_valid(const std::string& field) const { return map_get(ghosts_ok_, field); }
  void set_ghosts_valid(const std::string& field) { ghosts_ok_[field] = true; }
  void invalidate_ghosts(const std::string& field) { ghosts_ok_[field] = false; }
  void invalidate_all_ghosts() { ghosts_ok_.clear(); }

  const std::map<std::string, double>& results() const { return results_; }

private:
  struct kernel_entry {
    codegen::execution_plan plan;
    std::vector<detail::binding_state> binds;
    std::vector<distributed_field*> swap_fields;
    std::vector<std::string> in_place_writes;
    std::function<void(detail::worker_pass&)> driver;
    transfer_ledger last, total;
    std::string name;
  };

  struct ledger_acc {
    std::atomic<std::int64_t> bytes_in{0}, bytes_out{0}, tiles{0};
  };

  grid::worker_group* group_;
  grid::field_store* store_;
  grid::boundary_spec bc_;
  grid::exchanger ex_;
  std::map<std::string, kernel_entry> kernels_;
  std::map<std::string, bool> ghosts_ok_;
  std::map<std::string, double> results_;

  static bool map_get(const std::map<std::string, bool>& m, const std::string& k) {
    auto it = m.find(k);
    return it != m.end() && it->second;
  }

  static bool debug_enabled() {
    const char* e = std::getenv("SF_DEBUG_BOUNDS");
    return e && *e && std::string_view(e) != "0";
  }

  kernel_entry& register_common(const codegen::execution_plan& plan,
                                const kernel_signature& sig) {
    if (kernels_.count(plan.kernel))
      throw exec_error("kernel '" + plan.kernel + "' is already registered");
    if (plan.bindings.empty())
      throw exec_error("kernel '" + plan.kernel + "' has no field bindings");
    for (int a = 0; a < 3; ++a)
      if (plan.tile[static_cast<std::size_t>(a)] < 1)
        throw exec_error("kernel '" + plan.kernel + "': tile extents must be positive");
    check_signature(plan, sig);

    kernel_entry e;
    e.plan = plan;
    const int ghost = store_->decomp().ghost;
    if (plan.max_halo() > ghost)
      throw exec_error("kernel '" + plan.kernel + "': stencil needs " +
                       std::to_string(plan.max_halo()) + " ghost layers but fields carry " +
                       std::to_string(ghost));
    for (const auto& b : plan.bindings) {
      distributed_field* f = store_->find(b.field);
      if (!f) throw exec_error("kernel '" + plan.kernel + "' binds unknown field '" + b.field + "'");
      detail::binding_state bs;
      bs.field = f;
      bs.cached = b.cached;
      bs.readable = ccl::readable(b.io);
      bs.writable = ccl::writable(b.io);
      bs.to_back = b.io == ccl::intent::separate_inout;
      bs.center_only = bs.writable && !bs.to_back;
      bs.halo = plan.halo;
      e.binds.push_back(bs);
      if (bs.to_back) {
        f->ensure_back();
        e.swap_fields.push_back(f);
      }
      if (bs.writable && !bs.to_back) e.in_place_writes.push_back(b.field);
    }

    auto [it, ok] = kernels_.emplace(plan.kernel, std::move(e));
    it->second.name = plan.kernel;
    for (auto& bs : it->second.binds) bs.kernel = &it->second.name;
    (void)ok;
    return it->second;
  }

  kernel_entry& lookup(const std::string& name) {
    auto it = kernels_.find(name);
    if (it == kernels_.end()) throw exec_error("unknown kernel '" + name + "'");
    return it->second;
  }
  const kernel_entry& lookup_const(const std::string& name) const {
    auto it = kernels_.find(name);
    if (it == kernels_.end()) throw exec_error("unknown kernel '" + name + "'");
    return it->second;
  }

  void require_field(const std::string& name, const std::string& where) const {
    if (!store_->find(name)) throw exec_error(where + ": unknown field '" + name + "'");
  }

  std::vector<distributed_field*> resolve_fields(const std::vector<std::string>& names) {
    std::vector<distributed_field*> out;
    for (const auto& n : names) out.push_back(&store_->at(n));
    return out;
  }

  void check_signature(const codegen::execution_plan& plan, const kernel_signature& sig) const {
    const std::string head = "kernel '" + plan.kernel + "': ";
    for (std::size_t i = 0; i < std::max(plan.bindings.size(), sig.fields.size()); ++i) {
      if (i >= sig.fields.size())
        throw exec_error(head + "function is missing binding '" + plan.bindings[i].field + "'");
      if (i >= plan.bindings.size())
        throw exec_error(head + "function declares unknown binding '" + sig.fields[i] + "'");
      if (plan.bindings[i].field != sig.fields[i])
        throw exec_error(head + "slot " + std::to_string(i) + " binds '" +
                         plan.bindings[i].field + "' but the function declares '" +
                         sig.fields[i] + "'");
    }
    for (std::size_t i = 0; i < std::max(plan.parameters.size(), sig.params.size()); ++i) {
      if (i >= sig.params.size())
        throw exec_error(head + "function is missing parameter '" + plan.parameters[i] + "'");
      if (i >= plan.parameters.size())
        throw exec_error(head + "function declares unknown parameter '" + sig.params[i] + "'");
      if (plan.parameters[i] != sig.params[i])
        throw exec_error(head + "parameter slot " + std::to_string(i) + " is '" +
                         plan.parameters[i] + "' but the function declares '" + sig.params[i] +
                         "'");
    }
  }

  std::vector<double> resolve_params(const kernel_entry& k,
                                     const std::map<std::string, double>& params) const {
    std::vector<double> pv;
    for (const auto& name : k.plan.parameters) {
      auto it = params.find(name);
      if (it == params.end())
        throw exec_error("kernel '" + k.name + "': parameter '" + name + "' not supplied");
      pv.push_back(it->second);
    }
    return pv;
  }

  void check_ghosts(const kernel_entry& k, region reg) const {
    if (k.plan.max_halo() == 0 || reg == region::interior) return;
    for (std::size_t b = 0; b < k.binds.size(); ++b)
      if (k.binds[b].readable && !map_get(ghosts_ok_, k.plan.bindings[b].field))
        throw exec_error("kernel '" + k.name + "' reads ghosts of '" +
                         k.plan.bindings[b].field + "' that were never exchanged");
  }

  void run_region_worker(kernel_entry& k, const double* pv, region reg, bool dbg, int w,
                         ledger_acc& acc) {
    detail::worker_pass wp;
    wp.init(k.plan, k.binds, pv, reg, dbg, w);
    k.driver(wp);
    acc.bytes_in += wp.bytes_in;
    acc.bytes_out += wp.bytes_out;
    acc.tiles += wp.tiles;
  }

  void finish_run(kernel_entry& k, region reg, const ledger_acc& acc) {
    k.last = {acc.bytes_in.load(), acc.bytes_out.load(), acc.tiles.load()};
    k.total += k.last;
    if (reg != region::interior) {
      for (auto* f : k.swap_fields) f->swap_buffers();
      for (std::size_t b = 0; b < k.binds.size(); ++b)
        if (k.binds[b].writable) ghosts_ok_[k.plan.bindings[b].field] = false;
    } else {
      for (const auto& name : k.in_place_writes) ghosts_ok_[name] = false;
    }
  }

  bool splittable(const kernel_entry& k, const std::vector<std::string>& comm_fields) const {
    for (const auto& name : k.in_place_writes)
      if (std::find(comm_fields.begin(), comm_fields.end(), name) != comm_fields.end())
        return false;
    return true;
  }

  void execute_step(const schedule_step& st, const std::map<std::string, double>& params,
                    std::map<std::string, double>* results) {
    switch (st.what) {
      case schedule_step::kind::run:
        run_kernel(st.kernel, params, st.reg);
        break;
      case schedule_step::kind::exchange:
        exchange(st.fields);
        break;
      case schedule_step::kind::physical_bc:
        physical_bc(st.fields);
        break;
      case schedule_step::kind::refresh:
        refresh(st.fields);
        break;
      case schedule_step::kind::reduce: {
        const double v = reduce(st.source, st.op);
        results_[st.target] = v;
        if (results) (*results)[st.target] = v;
        break;
      }
    }
  }

  // Overlapped comm/compute pair: every worker pins its owned wall planes,
  // then runs interior tiles while a second lane per worker carries the
  // ghost traffic (and ghost-only boundary fills for refresh steps).  A
  // barrier separates that from the boundary tiles, which read the fresh
  // ghosts.  Any failure is held until all barriers are crossed so no
  // worker strands the others.
  void run_pair(const schedule_step& comm, kernel_entry& k,
                const std::map<std::string, double>& params) {
    const auto fields = resolve_fields(comm.fields);
    const bool refresh_step = comm.what == schedule_step::kind::refresh;
    if (refresh_step) ex_.validate_bc(fields, bc_);
    const std::vector<double> pv = resolve_params(k, params);
    const bool dbg = debug_enabled();
    ledger_acc acc;
    group_->run([&](int w) {
      std::exception_ptr err;
      if (refresh_step) {
        try {
          ex_.pin_owned_worker(w, fields, bc_);
        } catch (...) {
          err = std::current_exception();
        }
      }
      auto lane = std::async(std::launch::async, [&] {
        if (refresh_step)
          ex_.refresh_worker(w, fields, bc_, grid::bc_scope::ghosts_only);
        else
          ex_.exchange_worker(w, fields);
      });
      if (!err) try {
          run_region_worker(k, pv.data(), region::interior, dbg, w, acc);
        } catch (...) {
          err = std::current_exception();
        }
      try {
        lane.get();
      } catch (...) {
        if (!err) err = std::current_exception();
      }
      group_->sync();
      if (!err) try {
          run_region_worker(k, pv.data(), region::boundary, dbg, w, acc);
        } catch (...) {
          err = std::current_exception();
        }
      if (err) std::rethrow_exception(err);
    });
    for (const auto& f : comm.fields) ghosts_ok_[f] = true;
    finish_run(k, region::all, acc);
  }
};

}  // namespace sforge::exec

#endif  // SFORGE_EXECUTOR_HPP
