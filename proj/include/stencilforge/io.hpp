// stencilforge - gather/scatter and field serialization
// Copyright (c) 2026 the stencilforge authors
// Distributed under the MIT license; see the LICENSE file.

#ifndef SFORGE_IO_HPP
#define SFORGE_IO_HPP

#include <bit>
#include <cstdint>
#include <cstring>
#include <iostream>
#include <string>
#include <vector>

#include "stencilforge/field.hpp"
#include "stencilforge/workers.hpp"

namespace sforge::grid {

static_assert(std::endian::native == std::endian::little,
              "field serialization assumes a little-endian host");

// Collects owned cells from every worker into one global array, x fastest.
// Ghost values never appear in the result.
inline std::vector<double> gather(worker_group& group, const distributed_field& f) {
  const decomposition& d = f.decomp();
  if (group.size() != d.workers)
    throw grid_error("worker group size does not match the decomposition");
  const auto n = d.dom.extents;
  std::vector<double> global(static_cast<std::size_t>(d.dom.cells()));
  group.run([&](int w) {
    const auto& lb = f.local(w);
    for (index_t k = 0; k < lb.dims[2]; ++k)
      for (index_t j = 0; j < lb.dims[1]; ++j) {
        const double* row = lb.front + lb.offset(0, j, k);
        const index_t gk = lb.lo[2] + k, gj = lb.lo[1] + j, gi = lb.lo[0];
        std::memcpy(global.data() + (gk * n[1] + gj) * n[0] + gi, row,
                    static_cast<std::size_t>(lb.dims[0]) * sizeof(double));
      }
  });
  return global;
}

// Distributes a global array into the owned cells of every worker; the
// inverse of gather.  Ghosts are left untouched.
inline void scatter(worker_group& group, distributed_field& f,
                    const std::vector<double>& global) {
  const decomposition& d = f.decomp();
  if (group.size() != d.workers)
    throw grid_error("worker group size does not match the decomposition");
  if (global.size() != static_cast<std::size_t>(d.dom.cells()))
    throw grid_error("scatter: global array has " + std::to_string(global.size()) +
                     " values, domain has " + std::to_string(d.dom.cells()) + " cells");
  const auto n = d.dom.extents;
  group.run([&](int w) {
    auto& lb = f.local(w);
    for (index_t k = 0; k < lb.dims[2]; ++k)
      for (index_t j = 0; j < lb.dims[1]; ++j) {
        double* row = lb.front + lb.offset(0, j, k);
        const index_t gk = lb.lo[2] + k, gj = lb.lo[1] + j, gi = lb.lo[0];
        std::memcpy(row, global.data() + (gk * n[1] + gj) * n[0] + gi,
                    static_cast<std::size_t>(lb.dims[0]) * sizeof(double));
      }
  });
}

// SFG1 stream: the 4 magic bytes "SFG1", then nx, ny, nz as little-endian
// int64, then nx*ny*nz little-endian float64 values, x fastest.
inline constexpr char sfg1_magic[4] = {'S', 'F', 'G', '1'};

inline void write_sfg1(std::ostream& out, const std::array<index_t, 3>& extents,
                       const std::vector<double>& data) {
  if (data.size() != static_cast<std::size_t>(extents[0] * extents[1] * extents[2]))
    throw grid_error("SFG1 write: data size does not match extents");
  out.write(sfg1_magic, 4);
  for (index_t e : extents) {
    std::int64_t v = e;
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
  }
  out.write(reinterpret_cast<const char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(double)));
  if (!out) throw grid_error("SFG1 write failed");
}

inline std::vector<double> read_sfg1(std::istream& in, std::array<index_t, 3>& extents) {
  char magic[4] = {};
  in.read(magic, 4);
  if (!in || std::memcmp(magic, sfg1_magic, 4) != 0)
    throw grid_error("not an SFG1 stream");
  for (auto& e : extents) {
    std::int64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!in || v < 1) throw grid_error("SFG1 read: bad extents");
    e = v;
  }
  std::vector<double> data(static_cast<std::size_t>(extents[0] * extents[1] * extents[2]));
  in.read(reinterpret_cast<char*>(data.data()),
          static_cast<std::streamsize>(data.size() * sizeof(double)));
  if (!in) throw grid_error("SFG1 read: truncated payload");
  return data;
}

// One plane of a gathered field as CSV rows `i,j,k,value`, x fastest, with
// full round-trip precision.
inline void write_csv_plane(std::ostream& out, const std::array<index_t, 3>& extents,
                            const std::vector<double>& data, int axis, index_t plane) {
  if (axis < 0 || axis > 2) throw grid_error("csv plane: axis must be 0, 1, or 2");
  if (plane < 0 || plane >= extents[static_cast<std::size_t>(axis)])
    throw grid_error("csv plane: plane index out of range");
  out << "i,j,k,value\n";
  char buf[64];
  std::array<index_t, 3> c{};
  const int t1 = axis == 0 ? 1 : 0;
  const int t2 = axis == 2 ? 1 : 2;
  c[static_cast<std::size_t>(axis)] = plane;
  for (c[static_cast<std::size_t>(t2)] = 0;
       c[static_cast<std::size_t>(t2)] < extents[static_cast<std::size_t>(t2)];
       ++c[static_cast<std::size_t>(t2)])
    for (c[static_cast<std::size_t>(t1)] = 0;
         c[static_cast<std::size_t>(t1)] < extents[static_cast<std::size_t>(t1)];
         ++c[static_cast<std::size_t>(t1)]) {
      const double v = data[static_cast<std::size_t>((c[2] * extents[1] + c[1]) * extents[0] + c[0])];
      std::snprintf(buf, sizeof buf, "%lld,%lld,%lld,%.17g\n", static_cast<long long>(c[0]),
                    static_cast<long long>(c[1]), static_cast<long long>(c[2]), v);
      out << buf;
    }
}

}  // namespace sforge::grid

#endif  // SFORGE_IO_HPP
