// stencilforge - distributed grid fields with ghost layers
// Copyright (c) 2026 the stencilforge authors
// Distributed under the MIT license; see the LICENSE file.

#ifndef SFORGE_FIELD_HPP
#define SFORGE_FIELD_HPP

#include <cassert>
#include <memory>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "stencilforge/grid.hpp"

namespace sforge::grid {

// Placement of a field's values on the staggered mesh.  `none` is a cell
// center; x/y/z mark the value stored at local index i on the high face of
// cell i along that axis, so index -1 holds the face on the low wall and
// index n-1 the face on the high wall.
enum class stagger : int { none = -1, x = 0, y = 1, z = 2 };

class distributed_field {
public:
  // One worker's slab: owned cells plus a ghost shell, x fastest in memory.
  // Local coordinates run over [-ghost, dims + ghost); (0,0,0) is the first
  // owned cell.  `front` is the live buffer; `back` exists only for fields
  // that asked for double buffering.
  struct local_block {
    std::array<index_t, 3> dims{};
    std::array<index_t, 3> lo{};  // global coordinates of local (0,0,0)
    int ghost = 0;
    std::array<index_t, 3> ld{};  // padded extents, dims + 2*ghost
    double* front = nullptr;
    double* back = nullptr;

    index_t offset(index_t i, index_t j, index_t k) const {
      assert(i >= -ghost && i < dims[0] + ghost);
      assert(j >= -ghost && j < dims[1] + ghost);
      assert(k >= -ghost && k < dims[2] + ghost);
      return ((k + ghost) * ld[1] + (j + ghost)) * ld[0] + (i + ghost);
    }
    double& at(index_t i, index_t j, index_t k) { return front[offset(i, j, k)]; }
    double at(index_t i, index_t j, index_t k) const { return front[offset(i, j, k)]; }
    double& back_at(index_t i, index_t j, index_t k) { return back[offset(i, j, k)]; }
    index_t padded_cells() const { return ld[0] * ld[1] * ld[2]; }

    std::vector<double> front_store;
    std::vector<double> back_store;
  };

  distributed_field(const decomposition& d, std::string name, stagger s)
      : decomp_(&d), name_(std::move(name)), stagger_(s) {
    blocks_.resize(static_cast<std::size_t>(d.workers));
    for (int w = 0; w < d.workers; ++w) {
      local_block& b = blocks_[static_cast<std::size_t>(w)];
      b.dims = d.blocks[static_cast<std::size_t>(w)].size();
      b.lo = d.blocks[static_cast<std::size_t>(w)].lo;
      b.ghost = d.ghost;
      for (int a = 0; a < 3; ++a)
        b.ld[static_cast<std::size_t>(a)] = b.dims[static_cast<std::size_t>(a)] + 2 * d.ghost;
      b.front_store.assign(static_cast<std::size_t>(b.padded_cells()), 0.0);
      b.front = b.front_store.data();
    }
  }

  const decomposition& decomp() const { return *decomp_; }
  const std::string& name() const { return name_; }
  stagger stag() const { return stagger_; }
  int ghost() const { return decomp_->ghost; }

  local_block& local(int w) { return blocks_[static_cast<std::size_t>(w)]; }
  const local_block& local(int w) const { return blocks_[static_cast<std::size_t>(w)]; }

  bool double_buffered() const { return double_buffered_; }

  // Allocates the back buffers (zero-filled) on first use.
  void ensure_back() {
    if (double_buffered_) return;
    for (auto& b : blocks_) {
      b.back_store.assign(static_cast<std::size_t>(b.padded_cells()), 0.0);
      b.back = b.back_store.data();
    }
    double_buffered_ = true;
  }

  void swap_buffers() {
    if (!double_buffered_)
      throw grid_error("field '" + name_ + "' is not double buffered");
    for (auto& b : blocks_) std::swap(b.front, b.back);
  }

private:
  const decomposition* decomp_;
  std::string name_;
  stagger stagger_;
  bool double_buffered_ = false;
  std::vector<local_block> blocks_;
};

// Owns every field living on one decomposition, looked up by name.
class field_store {
public:
  explicit field_store(const decomposition& d) : decomp_(&d) {}

  distributed_field& create(const std::string& name, stagger s) {
    if (find(name)) throw grid_error("field '" + name + "' already exists");
    fields_.push_back(std::make_unique<distributed_field>(*decomp_, name, s));
    return *fields_.back();
  }

  distributed_field* find(const std::string& name) {
    for (auto& f : fields_)
      if (f->name() == name) return f.get();
    return nullptr;
  }

  distributed_field& at(const std::string& name) {
    if (auto* f = find(name)) return *f;
    throw grid_error("no field named '" + name + "'");
  }

  std::set<std::string> names() const {
    std::set<std::string> out;
    for (const auto& f : fields_) out.insert(f->name());
    return out;
  }

  const decomposition& decomp() const { return *decomp_; }

private:
  const decomposition* decomp_;
  std::vector<std::unique_ptr<distributed_field>> fields_;
};

}  // namespace sforge::grid

#endif  // SFORGE_FIELD_HPP
