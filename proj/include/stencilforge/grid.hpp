// stencilforge - domain geometry and worker decomposition
// Copyright (c) 2026 the stencilforge authors
// Distributed under the MIT license; see the LICENSE file.

#ifndef SFORGE_GRID_HPP
#define SFORGE_GRID_HPP

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace sforge::grid {

using index_t = std::int64_t;

class grid_error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// A rectangular domain of nx*ny*nz cells with uniform spacing.  `origin` is
// the physical coordinate of the low corner of cell (0,0,0).
struct domain {
  std::array<index_t, 3> extents{};
  std::array<double, 3> spacing{};
  std::array<double, 3> origin{};

  index_t cells() const { return extents[0] * extents[1] * extents[2]; }
};

struct block {
  std::array<index_t, 3> lo{};  // first owned cell, global coordinates
  std::array<index_t, 3> hi{};  // one past the last owned cell

  std::array<index_t, 3> size() const {
    return {hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]};
  }
};

// Balanced 1-d split: every block gets n/p cells and the remainder goes one
// cell each to the lowest-indexed blocks.
inline std::vector<index_t> split_axis(index_t n, int p) {
  std::vector<index_t> sizes(static_cast<std::size_t>(p));
  index_t base = n / p, rem = n % p;
  for (int i = 0; i < p; ++i)
    sizes[static_cast<std::size_t>(i)] = base + (i < rem ? 1 : 0);
  return sizes;
}

struct decomposition {
  domain dom;
  int workers = 1;
  int ghost = 0;
  std::array<int, 3> proc_grid{1, 1, 1};
  std::array<bool, 3> periodic{false, false, false};
  std::vector<block> blocks;  // indexed by worker id

  // Worker ids enumerate the process grid with z fastest.
  std::array<int, 3> coords_of(int w) const {
    int pz = proc_grid[2], py = proc_grid[1];
    return {w / (py * pz), (w / pz) % py, w % pz};
  }
  int id_of(const std::array<int, 3>& c) const {
    return (c[0] * proc_grid[1] + c[1]) * proc_grid[2] + c[2];
  }

  // Worker across face (axis, side) of w, or -1 when the face is physical.
  // side 0 is the low face, side 1 the high face.
  int neighbor(int w, int axis, int side) const {
    auto c = coords_of(w);
    int& ca = c[static_cast<std::size_t>(axis)];
    ca += side == 0 ? -1 : 1;
    int p = proc_grid[static_cast<std::size_t>(axis)];
    if (ca < 0 || ca >= p) {
      if (!periodic[static_cast<std::size_t>(axis)]) return -1;
      ca = (ca + p) % p;
    }
    return id_of(c);
  }

  bool face_physical(int w, int axis, int side) const {
    return neighbor(w, axis, side) < 0;
  }
};

// Chooses the process grid that minimizes total cut surface
// sum_axis (p_axis - 1) * (product of the other two extents), breaking ties
// toward larger px, then larger py.  Every block must be strictly larger
// than the ghost width along every axis; otherwise the split is infeasible.
inline decomposition decompose(const domain& dom, int workers, int ghost,
                               std::array<bool, 3> periodic = {false, false, false}) {
  if (workers < 1) throw grid_error("worker count must be >= 1");
  if (ghost < 0) throw grid_error("ghost width must be >= 0");
  for (int a = 0; a < 3; ++a) {
    if (dom.extents[static_cast<std::size_t>(a)] < 1)
      throw grid_error("domain extents must be >= 1");
    if (!(dom.spacing[static_cast<std::size_t>(a)] > 0.0))
      throw grid_error("grid spacing must be positive");
  }

  auto feasible = [&](int p, index_t n) {
    return p <= n && n / p > ghost;  // smallest block is floor(n/p)
  };

  bool found = false;
  std::array<int, 3> best{1, 1, 1};
  index_t best_area = 0;
  for (int px = 1; px <= workers; ++px) {
    if (workers % px) continue;
    int rest = workers / px;
    for (int py = 1; py <= rest; ++py) {
      if (rest % py) continue;
      int pz = rest / py;
      if (!feasible(px, dom.extents[0]) || !feasible(py, dom.extents[1]) ||
          !feasible(pz, dom.extents[2]))
        continue;
      index_t area = static_cast<index_t>(px - 1) * dom.extents[1] * dom.extents[2] +
                     static_cast<index_t>(py - 1) * dom.extents[0] * dom.extents[2] +
                     static_cast<index_t>(pz - 1) * dom.extents[0] * dom.extents[1];
      bool better = !found || area < best_area ||
                    (area == best_area &&
                     (px > best[0] || (px == best[0] && py > best[1])));
      if (better) {
        found = true;
        best = {px, py, pz};
        best_area = area;
      }
    }
  }
  if (!found)
    throw grid_error("no feasible decomposition: " + std::to_string(workers) +
                     " workers on " + std::to_string(dom.extents[0]) + "x" +
                     std::to_string(dom.extents[1]) + "x" + std::to_string(dom.extents[2]) +
                     " cells with ghost width " + std::to_string(ghost) +
                     " (blocks must exceed the ghost width)");

  decomposition d;
  d.dom = dom;
  d.workers = workers;
  d.ghost = ghost;
  d.proc_grid = best;
  d.periodic = periodic;
  std::array<std::vector<index_t>, 3> sizes;
  for (int a = 0; a < 3; ++a)
    sizes[static_cast<std::size_t>(a)] =
        split_axis(dom.extents[static_cast<std::size_t>(a)], best[static_cast<std::size_t>(a)]);
  d.blocks.resize(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    auto c = d.coords_of(w);
    block b;
    for (int a = 0; a < 3; ++a) {
      const auto& s = sizes[static_cast<std::size_t>(a)];
      index_t lo = 0;
      for (int i = 0; i < c[static_cast<std::size_t>(a)]; ++i) lo += s[static_cast<std::size_t>(i)];
      b.lo[static_cast<std::size_t>(a)] = lo;
      b.hi[static_cast<std::size_t>(a)] = lo + s[static_cast<std::size_t>(c[static_cast<std::size_t>(a)])];
    }
    d.blocks[static_cast<std::size_t>(w)] = b;
  }
  return d;
}

}  // namespace sforge::grid

#endif  // SFORGE_GRID_HPP
