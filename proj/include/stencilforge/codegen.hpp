// stencilforge - kernel code generation: execution plans and header rendering
// Copyright (c) 2026 the stencilforge authors
// Distributed under the MIT license; see the LICENSE file.

#ifndef SFORGE_CODEGEN_HPP
#define SFORGE_CODEGEN_HPP

#include <array>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "stencilforge/descriptor.hpp"

namespace sforge::codegen {

enum class template_id { threedblock };

inline std::vector<template_id> list_templates() { return {template_id::threedblock}; }

inline std::string_view template_name(template_id t) {
  switch (t) {
    case template_id::threedblock: return "3DBLOCK";
  }
  return "";
}

struct binding {
  std::string field;
  ccl::intent io = ccl::intent::in;
  bool cached = false;
  bool operator==(const binding&) const = default;
};

// Everything the executor needs to run a kernel: tile shape, per-face halo
// widths (taken verbatim from the descriptor stencil, ordered
// -x +x -y +y -z +z), field bindings in declaration order, and parameters.
struct execution_plan {
  std::string kernel;
  template_id tmpl = template_id::threedblock;
  std::array<int, 3> tile{};
  std::array<int, 6> halo{};
  std::vector<binding> bindings;
  std::vector<std::string> parameters;

  int halo_lo(int axis) const { return halo[static_cast<std::size_t>(2 * axis)]; }
  int halo_hi(int axis) const { return halo[static_cast<std::size_t>(2 * axis + 1)]; }
  int max_halo() const {
    int m = 0;
    for (int h : halo) m = std::max(m, h);
    return m;
  }
  bool operator==(const execution_plan&) const = default;
};

inline execution_plan build_plan(const ccl::kernel_descriptor& k) {
  execution_plan p;
  p.kernel = k.name;
  p.tmpl = template_id::threedblock;
  p.tile = k.tile;
  p.halo = k.stencil;
  for (const auto& v : k.variables) p.bindings.push_back({v.name, v.io, v.cached});
  for (const auto& prm : k.parameters) p.parameters.push_back(prm.name);
  return p;
}

struct signature_entry {
  enum class kind { field, parameter, index };
  std::string name;
  kind what = kind::field;
  bool operator==(const signature_entry&) const = default;
};

struct rendered_header {
  std::string kernel;
  std::string text;
  std::vector<signature_entry> signature;
};

// Renders the macro interface a host toolchain would compile against.  The
// output is a pure function of the descriptor, so repeated calls are
// byte-identical.
inline rendered_header render_header(const ccl::kernel_descriptor& k, template_id tmpl) {
  if (tmpl != template_id::threedblock)
    throw std::invalid_argument("unsupported template for kernel '" + k.name + "'");
  rendered_header h;
  h.kernel = k.name;
  std::string& s = h.text;
  const char* axis = "XYZ";
  s += "/* Generated tile-kernel interface for " + k.name + ".  Do not edit. */\n";
  s += "#ifndef SFORGE_GEN_" + k.name + "_H\n";
  s += "#define SFORGE_GEN_" + k.name + "_H\n\n";
  s += "/* template " + std::string(template_name(tmpl)) + " */\n";
  for (int a = 0; a < 3; ++a)
    s += "#define " + k.name + "_TILE_" + axis[a] + std::string(" ") +
         std::to_string(k.tile[static_cast<std::size_t>(a)]) + "\n";
  for (int a = 0; a < 3; ++a) {
    s += "#define " + k.name + "_HALO_" + axis[a] + std::string("L ") +
         std::to_string(k.stencil[static_cast<std::size_t>(2 * a)]) + "\n";
    s += "#define " + k.name + "_HALO_" + axis[a] + std::string("H ") +
         std::to_string(k.stencil[static_cast<std::size_t>(2 * a + 1)]) + "\n";
  }
  s += "\n";
  for (const auto& v : k.variables) {
    s += "/* " + v.name + ": " + std::string(ccl::to_string(v.io)) +
         (v.cached ? ", cached in tile-local storage */\n" : " */\n");
    if (ccl::readable(v.io))
      s += "#define " + k.name + "_LOAD_" + v.name + "(di, dj, dk) SFORGE_FIELD_LOAD(" +
           v.name + ", di, dj, dk)\n";
    if (ccl::writable(v.io))
      s += "#define " + k.name + "_STORE_" + v.name + "(value) SFORGE_FIELD_STORE(" +
           v.name + ", value)\n";
    h.signature.push_back({v.name, signature_entry::kind::field});
  }
  for (const auto& prm : k.parameters) {
    s += "#define " + k.name + "_PARAM_" + prm.name + " SFORGE_PARAM(" + prm.name + ")\n";
    h.signature.push_back({prm.name, signature_entry::kind::parameter});
  }
  s += "#define " + k.name + "_INDEX3 SFORGE_TILE_INDEX3()\n";
  h.signature.push_back({"INDEX3", signature_entry::kind::index});
  s += "\n#endif\n";
  return h;
}

// Writes one `<kernel>.h.generated` per descriptor plus a `plans.txt`
// manifest summarizing every plan, and returns the paths written.
inline std::vector<std::filesystem::path> write_generated(
    const std::vector<ccl::kernel_descriptor>& kernels, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> written;
  std::string manifest;
  for (const auto& k : kernels) {
    execution_plan plan = build_plan(k);
    rendered_header h = render_header(k, plan.tmpl);
    std::filesystem::path file = dir / (k.name + ".h.generated");
    std::ofstream out(file, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + file.string());
    out << h.text;
    written.push_back(file);

    manifest += "kernel " + k.name + "\n";
    manifest += "  template " + std::string(template_name(plan.tmpl)) + "\n";
    manifest += "  tile";
    for (int t : plan.tile) manifest += ' ' + std::to_string(t);
    manifest += "\n  halo";
    for (int hh : plan.halo) manifest += ' ' + std::to_string(hh);
    manifest += "\n";
    for (const auto& b : plan.bindings)
      manifest += "  binding " + b.field + " intent=" + std::string(ccl::to_string(b.io)) +
                  " cached=" + (b.cached ? "YES" : "NO") + "\n";
    for (const auto& prm : plan.parameters) manifest += "  parameter " + prm + "\n";
    manifest += "  header " + (k.name + ".h.generated") + "\n\n";
  }
  std::filesystem::path manifest_path = dir / "plans.txt";
  std::ofstream out(manifest_path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + manifest_path.string());
  out << manifest;
  written.push_back(manifest_path);
  return written;
}

}  // namespace sforge::codegen

#endif  // SFORGE_CODEGEN_HPP
