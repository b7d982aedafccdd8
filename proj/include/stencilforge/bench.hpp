// stencilforge - strong-scaling benchmark harness for the cavity solver
// Copyright (c) 2026 the stencilforge authors
// Distributed under the MIT license; see the LICENSE file.

#ifndef SFORGE_BENCH_HPP
#define SFORGE_BENCH_HPP

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "stencilforge/cfd.hpp"
#include "stencilforge/config.hpp"
#include "stencilforge/io.hpp"

namespace sforge::cli {

// FNV-1a over the gathered bytes of vx, vy, vz, p.  Any single bit of any
// owned cell changes the sum, and gathering removes the worker layout, so
// equal checksums mean bitwise-equal global fields.
inline std::uint64_t field_checksum(cfd::simulation& sim) {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&](const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 1099511628211ull;
    }
  };
  for (const char* name : {"vx", "vy", "vz", "p"}) {
    mix(name, std::string_view(name).size());
    auto g = grid::gather(sim.group(), sim.store().at(name));
    mix(g.data(), g.size() * sizeof(double));
  }
  return h;
}

inline std::string checksum_hex(std::uint64_t h) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

struct bench_row {
  int workers = 1;
  exec::run_mode mode = exec::run_mode::plain;
  std::array<grid::index_t, 3> extents{};
  long steps = 0;
  double wall_seconds = 0.0;
  double updates_per_second = 0.0;  // owned-cell updates per wall second
  double speedup = 1.0;             // vs the same-mode smallest-worker row
  std::uint64_t bytes_staged = 0;   // modeled tile-staging traffic, all kernels
  std::string checksum;             // final-field checksum, mode-invariant
};

struct bench_report {
  std::vector<bench_row> rows;
};

// Runs the fixed-step cavity problem once per (workers, mode) pair.  The
// clock covers only the stepping loop; construction and initialization are
// excluded.  Speedups are relative to the smallest worker count of the same
// mode, so a worker list starting at 1 reports the 1-worker baseline as
// exactly 1.0.
inline bench_report run_bench(const run_config& rc, const std::vector<int>& worker_list,
                              const std::vector<exec::run_mode>& modes, long steps) {
  if (worker_list.empty() || modes.empty() || steps < 1)
    throw config_error("bench needs at least one worker count, one mode, and one step");
  bench_report rep;
  for (int workers : worker_list) {
    for (exec::run_mode mode : modes) {
      cfd::simulation sim(rc.solver(), rc.fluid(), workers, mode, rc.tile, rc.ghost);
      sim.init_cavity();
      const auto start = std::chrono::steady_clock::now();
      sim.advance(static_cast<int>(steps));
      const auto stop = std::chrono::steady_clock::now();

      bench_row row;
      row.workers = workers;
      row.mode = mode;
      row.extents = sim.config().dom.extents;
      row.steps = steps;
      row.wall_seconds = std::chrono::duration<double>(stop - start).count();
      const double updates =
          static_cast<double>(sim.config().dom.cells()) * static_cast<double>(steps);
      row.updates_per_second = row.wall_seconds > 0.0 ? updates / row.wall_seconds : 0.0;
      for (const char* kernel : {"UPDATE_VELOCITY", "DIVERGENCE", "PRESSURE_SWEEP"}) {
        const auto& ledger = sim.engine().total_ledger(kernel);
        row.bytes_staged += ledger.bytes_in + ledger.bytes_out;
      }
      row.checksum = checksum_hex(field_checksum(sim));
      rep.rows.push_back(row);
    }
  }
  for (auto& row : rep.rows) {
    const bench_row* base = nullptr;
    for (const auto& other : rep.rows)
      if (other.mode == row.mode && (!base || other.workers < base->workers)) base = &other;
    row.speedup = (base && row.wall_seconds > 0.0) ? base->wall_seconds / row.wall_seconds : 1.0;
    if (base == &row) row.speedup = 1.0;  // the baseline is 1.0 by definition, not by division
  }
  return rep;
}

inline const char* mode_name(exec::run_mode m) {
  return m == exec::run_mode::plain ? "plain" : "overlap";
}

inline void write_bench_csv(std::ostream& out, const bench_report& rep) {
  out << "workers,mode,nx,ny,nz,steps,wall_seconds,updates_per_second,speedup,bytes_staged,"
         "checksum\n";
  char buf[240];
  for (const auto& r : rep.rows) {
    std::snprintf(buf, sizeof buf, "%d,%s,%lld,%lld,%lld,%ld,%.6f,%.6g,%.4f,%llu,%s\n", r.workers,
                  mode_name(r.mode), static_cast<long long>(r.extents[0]),
                  static_cast<long long>(r.extents[1]), static_cast<long long>(r.extents[2]),
                  r.steps, r.wall_seconds, r.updates_per_second, r.speedup,
                  static_cast<unsigned long long>(r.bytes_staged), r.checksum.c_str());
    out << buf;
  }
}

inline void write_bench_table(std::ostream& out, const bench_report& rep) {
  char buf[240];
  std::snprintf(buf, sizeof buf, "%8s %8s %14s %7s %10s %14s %8s %14s  %s\n", "workers", "mode",
                "grid", "steps", "wall[s]", "updates/s", "speedup", "bytes staged", "checksum");
  out << buf;
  for (const auto& r : rep.rows) {
    char gridtext[40];
    std::snprintf(gridtext, sizeof gridtext, "%lldx%lldx%lld", static_cast<long long>(r.extents[0]),
                  static_cast<long long>(r.extents[1]), static_cast<long long>(r.extents[2]));
    std::snprintf(buf, sizeof buf, "%8d %8s %14s %7ld %10.3f %14.4g %8.2f %14llu  %s\n", r.workers,
                  mode_name(r.mode), gridtext, r.steps, r.wall_seconds, r.updates_per_second,
                  r.speedup, static_cast<unsigned long long>(r.bytes_staged), r.checksum.c_str());
    out << buf;
  }
}

}  // namespace sforge::cli

#endif  // SFORGE_BENCH_HPP
