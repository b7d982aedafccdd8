// stencilforge - deterministic global reductions over distributed fields
// Copyright (c) 2026 the stencilforge authors
// Distributed under the MIT license; see the LICENSE file.

#ifndef SFORGE_REDUCTIONS_HPP
#define SFORGE_REDUCTIONS_HPP

#include <cmath>
#include <limits>
#include <vector>

#include "stencilforge/field.hpp"
#include "stencilforge/workers.hpp"

namespace sforge::grid {

enum class reduce_op {
  max_abs,       // max |front| over owned cells
  sum,           // sum of front over owned cells
  sum_sq,        // sum of front^2 over owned cells
  max_abs_diff,  // max |front - back| over owned cells
};

// Each worker folds its owned cells serially (x fastest), then the partials
// combine in worker-id order, so a result is reproducible for a fixed
// decomposition.  NaN is sticky in the max ops, which makes max_abs double
// as a finiteness probe.
inline double reduce(worker_group& group, const distributed_field& f, reduce_op op) {
  const decomposition& d = f.decomp();
  if (group.size() != d.workers)
    throw grid_error("worker group size does not match the decomposition");
  if (op == reduce_op::max_abs_diff && !f.double_buffered())
    throw grid_error("field '" + f.name() + "' has no back buffer to diff against");

  std::vector<double> partial(static_cast<std::size_t>(d.workers), 0.0);
  group.run([&](int w) {
    const auto& lb = f.local(w);
    double acc = 0.0;
    // the max ops keep the running max and the NaN hit apart: max of
    // nonnegative values is order-free, so the pair vectorizes, and folding
    // the hit back in afterwards keeps NaN sticky
    int nanhit = 0;
    for (index_t k = 0; k < lb.dims[2]; ++k)
      for (index_t j = 0; j < lb.dims[1]; ++j) {
        const double* row = lb.front + lb.offset(0, j, k);
        const double* brow = op == reduce_op::max_abs_diff ? lb.back + lb.offset(0, j, k) : nullptr;
        const index_t n = lb.dims[0];
        switch (op) {
          case reduce_op::max_abs:
            for (index_t i = 0; i < n; ++i) {
              const double a = std::fabs(row[i]);
              acc = a > acc ? a : acc;
              nanhit |= a != a;
            }
            break;
          case reduce_op::sum:
            for (index_t i = 0; i < n; ++i) acc += row[i];
            break;
          case reduce_op::sum_sq:
            for (index_t i = 0; i < n; ++i) acc += row[i] * row[i];
            break;
          case reduce_op::max_abs_diff:
            for (index_t i = 0; i < n; ++i) {
              const double a = std::fabs(row[i] - brow[i]);
              acc = a > acc ? a : acc;
              nanhit |= a != a;
            }
            break;
        }
      }
    if (nanhit) acc = std::numeric_limits<double>::quiet_NaN();
    partial[static_cast<std::size_t>(w)] = acc;
  });

  double out = partial[0];
  for (int w = 1; w < d.workers; ++w) {
    const double p = partial[static_cast<std::size_t>(w)];
    switch (op) {
      case reduce_op::max_abs:
      case reduce_op::max_abs_diff:
        if (p > out || std::isnan(p)) out = p;
        break;
      case reduce_op::sum:
      case reduce_op::sum_sq:
        out += p;
        break;
    }
  }
  return out;
}

inline double reduce_max_abs(worker_group& g, const distributed_field& f) {
  return reduce(g, f, reduce_op::max_abs);
}

}  // namespace sforge::grid

#endif  // SFORGE_REDUCTIONS_HPP
