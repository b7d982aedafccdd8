// stencilforge - ghost exchange and physical boundary conditions
// Copyright (c) 2026 the stencilforge authors
// Distributed under the MIT license; see the LICENSE file.

#ifndef SFORGE_EXCHANGE_HPP
#define SFORGE_EXCHANGE_HPP

#include <algorithm>
#include <deque>
#include <mutex>
#include <vector>

#include "stencilforge/field.hpp"
#include "stencilforge/workers.hpp"

namespace sforge::grid {

struct face_bc {
  enum class kind { unset, wall, symmetry, outflow };
  kind k = kind::unset;
  std::array<double, 3> velocity{};  // wall velocity; ignored otherwise

  static face_bc wall(std::array<double, 3> v = {0, 0, 0}) { return {kind::wall, v}; }
  static face_bc symmetry() { return {kind::symmetry, {}}; }
  static face_bc outflow() { return {kind::outflow, {}}; }
};

// One condition per physical face, indexed 2*axis + side (side 0 low, 1
// high).  Faces removed by periodic topology never consult this.
struct boundary_spec {
  std::array<face_bc, 6> faces{};

  face_bc& at(int axis, int side) { return faces[static_cast<std::size_t>(2 * axis + side)]; }
  const face_bc& at(int axis, int side) const {
    return faces[static_cast<std::size_t>(2 * axis + side)];
  }
  static boundary_spec uniform(face_bc fb) {
    boundary_spec b;
    b.faces.fill(fb);
    return b;
  }
};

// Restricts which cells a boundary application may write.  Wall and symmetry
// conditions on a face-normal staggered field pin one owned plane (the wall
// face itself); everything else they touch is ghost storage.  Splitting the
// two lets a scheduler pin owned planes up front and run the ghost writes
// concurrently with interior compute.
enum class bc_scope { all, ghosts_only, owned_only };

// Fills ghost shells in three axis phases (x, then y, then z).  Each phase
// sends slabs widened along the axes already done, so processor-edge and
// corner ghosts arrive in two hops without diagonal messages.  Physical
// faces are filled from the boundary spec inside the same per-axis sweep,
// which makes mixed physical/processor corners consistent.
class exchanger {
public:
  exchanger(worker_group& g, const decomposition& d) : group_(&g), decomp_(&d) {
    if (g.size() != d.workers)
      throw grid_error("worker group size does not match the decomposition");
    boxes_.resize(static_cast<std::size_t>(d.workers));
    for (int i = 0; i < d.workers; ++i) locks_.emplace_back();
  }

  void exchange(const std::vector<distributed_field*>& fields) {
    validate(fields);
    group_->run([&](int w) { exchange_worker(w, fields); });
  }

  void apply_bc(const std::vector<distributed_field*>& fields, const boundary_spec& bc) {
    validate(fields);
    validate_bc(fields, bc);
    group_->run([&](int w) { bc_worker(w, fields, bc); });
  }

  void refresh(const std::vector<distributed_field*>& fields, const boundary_spec& bc) {
    validate(fields);
    validate_bc(fields, bc);
    group_->run([&](int w) { refresh_worker(w, fields, bc); });
  }

  // Throws before any worker phase starts if a physical face lacks a
  // condition.  Worker bodies sit between barriers, so an error discovered
  // mid-phase could strand the other workers; this check keeps the throw on
  // the calling thread.
  void validate_bc(const std::vector<distributed_field*>& fields, const boundary_spec& bc) const {
    for (int axis = 0; axis < 3; ++axis) {
      if (decomp_->periodic[static_cast<std::size_t>(axis)]) continue;
      for (int side = 0; side < 2; ++side)
        if (bc.at(axis, side).k == face_bc::kind::unset && !fields.empty())
          throw grid_error("field '" + fields.front()->name() +
                           "': no boundary condition on axis " + std::to_string(axis) +
                           (side == 0 ? " low" : " high") + " face");
    }
  }

  // Per-worker bodies, callable from inside an existing collective phase.
  void exchange_worker(int w, const std::vector<distributed_field*>& fields) {
    for (int axis = 0; axis < 3; ++axis) {
      pack_axis(w, axis, fields);
      group_->sync();
      unpack(w);
      group_->sync();
    }
  }

  void refresh_worker(int w, const std::vector<distributed_field*>& fields,
                      const boundary_spec& bc, bc_scope scope = bc_scope::all) {
    for (int axis = 0; axis < 3; ++axis) {
      pack_axis(w, axis, fields);
      group_->sync();
      unpack(w);
      for (auto* f : fields)
        for (int side = 0; side < 2; ++side)
          if (decomp_->face_physical(w, axis, side))
            bc_face(w, *f, axis, side, bc.at(axis, side), scope);
      group_->sync();
    }
  }

  void bc_worker(int w, const std::vector<distributed_field*>& fields,
                 const boundary_spec& bc, bc_scope scope = bc_scope::all) {
    for (int axis = 0; axis < 3; ++axis)
      for (auto* f : fields)
        for (int side = 0; side < 2; ++side)
          if (decomp_->face_physical(w, axis, side))
            bc_face(w, *f, axis, side, bc.at(axis, side), scope);
  }

  // Writes just the owned wall planes (the bc_scope::owned_only subset), so a
  // later ghosts_only refresh can run concurrently with compute that reads
  // owned cells.
  void pin_owned_worker(int w, const std::vector<distributed_field*>& fields,
                        const boundary_spec& bc) {
    bc_worker(w, fields, bc, bc_scope::owned_only);
  }

private:
  struct message {
    distributed_field* field = nullptr;
    std::array<index_t, 3> lo{};    // destination box, receiver-local coords
    std::array<index_t, 3> dims{};
    std::vector<double> data;       // x fastest within the box
  };

  worker_group* group_;
  const decomposition* decomp_;
  std::vector<std::vector<message>> boxes_;
  std::deque<std::mutex> locks_;

  void validate(const std::vector<distributed_field*>& fields) const {
    for (auto* f : fields)
      if (&f->decomp() != decomp_)
        throw grid_error("field '" + f->name() + "' lives on a different decomposition");
  }

  void post(int to, message m) {
    std::lock_guard lk(locks_[static_cast<std::size_t>(to)]);
    boxes_[static_cast<std::size_t>(to)].push_back(std::move(m));
  }

  // Source range along `axis` covers the g owned layers nearest the face;
  // axes before `axis` are widened into the ghost shell (already filled in
  // earlier phases), later axes stay interior.
  void pack_axis(int w, int axis, const std::vector<distributed_field*>& fields) {
    const index_t g = decomp_->ghost;
    if (g == 0) return;
    for (auto* f : fields) {
      auto& lb = f->local(w);
      for (int side = 0; side < 2; ++side) {
        int nb = decomp_->neighbor(w, axis, side);
        if (nb < 0) continue;
        const index_t b = lb.dims[static_cast<std::size_t>(axis)];
        const index_t nb_b =
            decomp_->blocks[static_cast<std::size_t>(nb)].size()[static_cast<std::size_t>(axis)];
        message m;
        m.field = f;
        std::array<index_t, 3> lo{}, hi{};
        for (int t = 0; t < 3; ++t) {
          auto ts = static_cast<std::size_t>(t);
          if (t == axis) {
            lo[ts] = side == 0 ? 0 : b - g;
            hi[ts] = lo[ts] + g;
          } else if (t < axis) {
            lo[ts] = -g;
            hi[ts] = lb.dims[ts] + g;
          } else {
            lo[ts] = 0;
            hi[ts] = lb.dims[ts];
          }
          m.dims[ts] = hi[ts] - lo[ts];
        }
        m.lo = lo;
        // My low layers become the neighbor's high ghosts and vice versa.
        m.lo[static_cast<std::size_t>(axis)] = side == 0 ? nb_b : -g;
        m.data.resize(static_cast<std::size_t>(m.dims[0] * m.dims[1] * m.dims[2]));
        double* out = m.data.data();
        for (index_t k = lo[2]; k < hi[2]; ++k)
          for (index_t j = lo[1]; j < hi[1]; ++j) {
            const double* row = lb.front + lb.offset(lo[0], j, k);
            out = std::copy(row, row + m.dims[0], out);
          }
        post(nb, std::move(m));
      }
    }
  }

  void unpack(int w) {
    std::vector<message> mine;
    {
      std::lock_guard lk(locks_[static_cast<std::size_t>(w)]);
      mine.swap(boxes_[static_cast<std::size_t>(w)]);
    }
    for (auto& m : mine) {
      auto& lb = m.field->local(w);
      const double* in = m.data.data();
      for (index_t k = m.lo[2]; k < m.lo[2] + m.dims[2]; ++k)
        for (index_t j = m.lo[1]; j < m.lo[1] + m.dims[1]; ++j) {
          double* row = lb.front + lb.offset(m.lo[0], j, k);
          std::copy(in, in + m.dims[0], row);
          in += m.dims[0];
        }
    }
  }

  // Ghost fill on one physical face.  Tangential ranges match the exchange
  // widening for the same axis phase.  For a field staggered along the face
  // axis, local index -1 (low side) and dims-1 (high side) hold the value on
  // the wall itself; walls and symmetry planes pin that face and reflect
  // deeper layers, so wall-normal velocities are boundary-owned.
  void bc_face(int w, distributed_field& f, int axis, int side, const face_bc& fb,
               bc_scope scope = bc_scope::all) {
    if (fb.k == face_bc::kind::unset)
      throw grid_error("field '" + f.name() + "': no boundary condition on axis " +
                       std::to_string(axis) + (side == 0 ? " low" : " high") + " face");
    auto& lb = f.local(w);
    const index_t g = lb.ghost;
    if (g == 0) return;
    const index_t b = lb.dims[static_cast<std::size_t>(axis)];
    const bool normal = static_cast<int>(f.stag()) == axis;
    // The only owned cells any condition writes are the high-side wall plane
    // of a face-normal staggered field; everything else lands in ghosts.
    const bool pins_owned = normal && side == 1 &&
                            (fb.k == face_bc::kind::wall || fb.k == face_bc::kind::symmetry);
    if (scope == bc_scope::owned_only && !pins_owned) return;
    const bool velocity = f.stag() != stagger::none;
    const double vwall =
        velocity ? fb.velocity[static_cast<std::size_t>(static_cast<int>(f.stag()))] : 0.0;

    std::array<index_t, 3> tlo{}, thi{};
    for (int t = 0; t < 3; ++t) {
      auto ts = static_cast<std::size_t>(t);
      if (t == axis) continue;
      if (t < axis) {
        tlo[ts] = -g;
        thi[ts] = lb.dims[ts] + g;
      } else {
        tlo[ts] = 0;
        thi[ts] = lb.dims[ts];
      }
    }
    const int t1 = axis == 0 ? 1 : 0;
    const int t2 = axis == 2 ? 1 : 2;
    const auto a = static_cast<std::size_t>(axis);

    // y and z faces run whole contiguous x rows instead of cell-at-a-time
    // index math; that keeps quasi-2D refreshes cheap, whose z ghost planes
    // span the entire field.  The values written match the element path
    // below exactly.  x faces stay on the element path: their lines are
    // strided and ghost-thin.
    if (axis != 0) {
      const auto t2s = static_cast<std::size_t>(t2);
      const index_t x0 = tlo[0], nr = thi[0] - tlo[0];
      for (index_t c2 = tlo[t2s]; c2 < thi[t2s]; ++c2) {
        auto row = [&](index_t pos) -> double* {
          return axis == 1 ? &lb.at(x0, pos, c2) : &lb.at(x0, c2, pos);
        };
        auto reflect = [&](index_t dst, index_t src, double v) {
          double* d = row(dst);
          const double* s = row(src);
          for (index_t i = 0; i < nr; ++i) d[i] = 2.0 * v - s[i];
        };
        auto copy_row = [&](index_t dst, index_t src) {
          double* d = row(dst);
          const double* s = row(src);
          std::copy(s, s + nr, d);
        };
        if (normal) {
          switch (fb.k) {
            case face_bc::kind::wall:
            case face_bc::kind::symmetry: {
              const double v = fb.k == face_bc::kind::wall ? vwall : 0.0;
              if (side == 0) {
                std::fill_n(row(-1), nr, v);
                for (index_t m = 2; m <= g; ++m) reflect(-m, m - 2, v);
              } else {
                // the wall plane is owned where both tangential coordinates
                // are, ghost storage in the widened shell; honor the scope
                const bool c2_owned =
                    c2 >= 0 && c2 < lb.dims[t2s];
                const index_t o0 = -x0, o1 = o0 + lb.dims[0];  // owned x range
                double* d = row(b - 1);
                if (scope == bc_scope::all) {
                  std::fill_n(d, nr, v);
                } else if (scope == bc_scope::owned_only) {
                  if (c2_owned) std::fill(d + o0, d + o1, v);
                } else if (c2_owned) {
                  std::fill(d, d + o0, v);
                  std::fill(d + o1, d + nr, v);
                } else {
                  std::fill_n(d, nr, v);
                }
                if (scope != bc_scope::owned_only)
                  for (index_t m = 1; m <= g; ++m) reflect(b - 1 + m, b - 1 - m, v);
              }
              break;
            }
            case face_bc::kind::outflow: {
              if (side == 0)
                for (index_t m = 1; m <= g; ++m) copy_row(-m, 0);
              else
                for (index_t m = 1; m <= g; ++m) copy_row(b - 1 + m, b - 1);
              break;
            }
            case face_bc::kind::unset: break;
          }
        } else {
          switch (fb.k) {
            case face_bc::kind::wall: {
              if (velocity) {
                if (side == 0)
                  for (index_t m = 1; m <= g; ++m) reflect(-m, m - 1, vwall);
                else
                  for (index_t m = 1; m <= g; ++m) reflect(b - 1 + m, b - m, vwall);
              } else {
                if (side == 0)
                  for (index_t m = 1; m <= g; ++m) copy_row(-m, m - 1);
                else
                  for (index_t m = 1; m <= g; ++m) copy_row(b - 1 + m, b - m);
              }
              break;
            }
            case face_bc::kind::symmetry: {
              if (side == 0)
                for (index_t m = 1; m <= g; ++m) copy_row(-m, m - 1);
              else
                for (index_t m = 1; m <= g; ++m) copy_row(b - 1 + m, b - m);
              break;
            }
            case face_bc::kind::outflow: {
              if (side == 0)
                for (index_t m = 1; m <= g; ++m) copy_row(-m, 0);
              else
                for (index_t m = 1; m <= g; ++m) copy_row(b - 1 + m, b - 1);
              break;
            }
            case face_bc::kind::unset: break;
          }
        }
      }
      return;
    }

    std::array<index_t, 3> c{};
    for (c[static_cast<std::size_t>(t2)] = tlo[static_cast<std::size_t>(t2)];
         c[static_cast<std::size_t>(t2)] < thi[static_cast<std::size_t>(t2)];
         ++c[static_cast<std::size_t>(t2)]) {
      for (c[static_cast<std::size_t>(t1)] = tlo[static_cast<std::size_t>(t1)];
           c[static_cast<std::size_t>(t1)] < thi[static_cast<std::size_t>(t1)];
           ++c[static_cast<std::size_t>(t1)]) {
        auto line = [&](index_t pos) -> double& {
          c[a] = pos;
          return lb.at(c[0], c[1], c[2]);
        };
        auto read = [&](index_t pos) -> double {
          c[a] = pos;
          return lb.at(c[0], c[1], c[2]);
        };
        if (normal) {
          switch (fb.k) {
            case face_bc::kind::wall:
            case face_bc::kind::symmetry: {
              const double v = fb.k == face_bc::kind::wall ? vwall : 0.0;
              if (side == 0) {
                line(-1) = v;
                for (index_t m = 2; m <= g; ++m) {
                  const double src = read(m - 2);
                  line(-m) = 2.0 * v - src;
                }
              } else {
                // The wall plane itself is owned storage where the tangential
                // coordinates are, and ghost storage where they run into the
                // widened shell; honor the requested scope per cell.
                const bool tang_owned =
                    c[static_cast<std::size_t>(t1)] >= 0 &&
                    c[static_cast<std::size_t>(t1)] < lb.dims[static_cast<std::size_t>(t1)] &&
                    c[static_cast<std::size_t>(t2)] >= 0 &&
                    c[static_cast<std::size_t>(t2)] < lb.dims[static_cast<std::size_t>(t2)];
                if (scope == bc_scope::all || (scope == bc_scope::owned_only && tang_owned) ||
                    (scope == bc_scope::ghosts_only && !tang_owned))
                  line(b - 1) = v;
                if (scope != bc_scope::owned_only)
                  for (index_t m = 1; m <= g; ++m) {
                    const double src = read(b - 1 - m);
                    line(b - 1 + m) = 2.0 * v - src;
                  }
              }
              break;
            }
            case face_bc::kind::outflow: {
              if (side == 0) {
                const double v0 = read(0);
                for (index_t m = 1; m <= g; ++m) line(-m) = v0;
              } else {
                const double v0 = read(b - 1);
                for (index_t m = 1; m <= g; ++m) line(b - 1 + m) = v0;
              }
              break;
            }
            case face_bc::kind::unset: break;
          }
        } else {
          switch (fb.k) {
            case face_bc::kind::wall: {
              if (velocity) {
                // Tangential velocity: reflect about the wall value.
                if (side == 0)
                  for (index_t m = 1; m <= g; ++m) {
                    const double src = read(m - 1);
                    line(-m) = 2.0 * vwall - src;
                  }
                else
                  for (index_t m = 1; m <= g; ++m) {
                    const double src = read(b - m);
                    line(b - 1 + m) = 2.0 * vwall - src;
                  }
              } else {
                // Cell-centered scalars take the zero-gradient mirror.
                if (side == 0)
                  for (index_t m = 1; m <= g; ++m) {
                    const double src = read(m - 1);
                    line(-m) = src;
                  }
                else
                  for (index_t m = 1; m <= g; ++m) {
                    const double src = read(b - m);
                    line(b - 1 + m) = src;
                  }
              }
              break;
            }
            case face_bc::kind::symmetry: {
              if (side == 0)
                for (index_t m = 1; m <= g; ++m) {
                  const double src = read(m - 1);
                  line(-m) = src;
                }
              else
                for (index_t m = 1; m <= g; ++m) {
                  const double src = read(b - m);
                  line(b - 1 + m) = src;
                }
              break;
            }
            case face_bc::kind::outflow: {
              if (side == 0) {
                const double v0 = read(0);
                for (index_t m = 1; m <= g; ++m) line(-m) = v0;
              } else {
                const double v0 = read(b - 1);
                for (index_t m = 1; m <= g; ++m) line(b - 1 + m) = v0;
              }
              break;
            }
            case face_bc::kind::unset: break;
          }
        }
      }
    }
  }
};

inline void exchange_ghosts(worker_group& g, const decomposition& d,
                            const std::vector<distributed_field*>& fields) {
  exchanger(g, d).exchange(fields);
}

inline void apply_physical_boundary(worker_group& g, distributed_field& f,
                                    const boundary_spec& bc) {
  exchanger(g, f.decomp()).apply_bc({&f}, bc);
}

inline void refresh_ghosts(worker_group& g, const std::vector<distributed_field*>& fields,
                           const boundary_spec& bc) {
  if (fields.empty()) return;
  exchanger(g, fields[0]->decomp()).refresh(fields, bc);
}

}  // namespace sforge::grid

#endif  // SFORGE_EXCHANGE_HPP
