// stencilforge - kernel descriptor language: parsing, validation, rendering
// Copyright (c) 2026 the stencilforge authors
// Distributed under the MIT license; see the LICENSE file.

#ifndef SFORGE_DESCRIPTOR_HPP
#define SFORGE_DESCRIPTOR_HPP

#include <array>
#include <charconv>
#include <cstddef>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "stencilforge/peg.hpp"

namespace sforge::ccl {

class parse_error : public std::runtime_error {
public:
  parse_error(const std::string& what, peg::source_pos pos)
      : std::runtime_error(what + " at line " + std::to_string(pos.line) +
                           ", column " + std::to_string(pos.column)),
        pos_(pos) {}
  peg::source_pos pos() const { return pos_; }

private:
  peg::source_pos pos_;
};

class descriptor_error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Attribute values keep their surface form so rendering can reproduce it.
struct attr_value {
  std::string text;
  bool quoted = false;
  bool operator==(const attr_value&) const = default;
};

using attr_list = std::vector<std::pair<std::string, attr_value>>;

struct raw_group {
  bool parameter = false;  // CCTK_CUDA_KERNEL_PARAMETER vs _VARIABLE
  attr_list attrs;
  std::vector<std::string> names;
  std::string description;
  bool operator==(const raw_group&) const = default;
};

struct raw_kernel {
  std::string name;
  attr_list attrs;
  std::vector<raw_group> groups;
  bool operator==(const raw_kernel&) const = default;
};

// Grammar for descriptor files.  Attribute values are either quoted strings
// or bare tokens; bare tokens admit a leading digit (TYPE=3DBLOCK).
inline const peg::grammar& descriptor_grammar() {
  static const peg::grammar g = peg::compile_grammar(
      "file <- ws (kernel ws)*\n"
      "kernel <- 'CCTK_CUDA_KERNEL' ws ident ws attrs '{' ws item* '}'\n"
      "attrs <- (attr ws)*\n"
      "attr <- key ws? '=' ws? value\n"
      "key <- ident\n"
      "item <- vargroup / paramgroup\n"
      "vargroup <- 'CCTK_CUDA_KERNEL_VARIABLE' ws attrs '{' ws namelist ws '}' ws string ws\n"
      "paramgroup <- 'CCTK_CUDA_KERNEL_PARAMETER' ws '{' ws namelist ws '}' ws string ws\n"
      "namelist <- ident (ws? ',' ws? ident)*\n"
      "value <- string / valtok\n"
      "ident <- [A-Za-z_] [A-Za-z0-9_]*\n"
      "valtok <- [A-Za-z0-9_]+\n"
      "string <- '\"' (!'\"' .)* '\"'\n"
      "ws <- (space / comment)*\n"
      "space <- [ \\t\\r\\n]\n"
      "comment <- '#' (![\\r\\n] .)*\n");
  return g;
}

namespace detail {

inline std::string_view node_text(std::string_view input, const peg::parse_node& n) {
  return input.substr(n.begin, n.end - n.begin);
}

inline std::vector<const peg::parse_node*> named_children(const peg::grammar& g,
                                                          const peg::parse_node& n,
                                                          std::string_view rule) {
  std::vector<const peg::parse_node*> out;
  for (const auto& c : n.children)
    if (g.rule_name(c->rule) == rule) out.push_back(c.get());
  return out;
}

inline const peg::parse_node* first_child(const peg::grammar& g, const peg::parse_node& n,
                                          std::string_view rule) {
  for (const auto& c : n.children)
    if (g.rule_name(c->rule) == rule) return c.get();
  return nullptr;
}

inline attr_list read_attrs(const peg::grammar& g, std::string_view input,
                            const peg::parse_node& attrs_node) {
  attr_list out;
  for (const auto* attr : named_children(g, attrs_node, "attr")) {
    const auto* key = first_child(g, *attr, "key");
    const auto* value = first_child(g, *attr, "value");
    std::string key_text(node_text(input, *key));
    for (const auto& [k, v] : out) {
      if (k == key_text)
        throw parse_error("duplicate attribute key '" + key_text + "'",
                          peg::line_col(input, key->begin));
    }
    attr_value av;
    if (const auto* s = first_child(g, *value, "string")) {
      av.quoted = true;
      av.text = std::string(node_text(input, *s).substr(1, s->end - s->begin - 2));
    } else {
      av.text = std::string(node_text(input, *first_child(g, *value, "valtok")));
    }
    out.emplace_back(std::move(key_text), std::move(av));
  }
  return out;
}

inline std::vector<std::string> read_names(const peg::grammar& g, std::string_view input,
                                           const peg::parse_node& namelist) {
  std::vector<std::string> out;
  for (const auto* id : named_children(g, namelist, "ident"))
    out.emplace_back(node_text(input, *id));
  return out;
}

inline std::string read_string(std::string_view input, const peg::parse_node& s) {
  return std::string(node_text(input, s).substr(1, s.end - s.begin - 2));
}

}  // namespace detail

// Parses a descriptor file into raw kernels.  Besides grammar violations,
// duplicate attribute keys and duplicate kernel names are parse errors.
inline std::vector<raw_kernel> parse_descriptors(std::string_view text) {
  const peg::grammar& g = descriptor_grammar();
  auto r = peg::match(g, "file", text);
  if (!r || r.end != text.size()) {
    std::size_t at = r ? std::max(r.end, r.farthest) : r.farthest;
    throw parse_error("descriptor syntax error", peg::line_col(text, at));
  }
  std::vector<raw_kernel> out;
  for (const auto* kernel : detail::named_children(g, *r.root, "kernel")) {
    raw_kernel rk;
    const auto* name = detail::first_child(g, *kernel, "ident");
    rk.name = std::string(detail::node_text(text, *name));
    for (const auto& prev : out) {
      if (prev.name == rk.name)
        throw parse_error("kernel '" + rk.name + "' defined twice",
                          peg::line_col(text, name->begin));
    }
    rk.attrs = detail::read_attrs(g, text, *detail::first_child(g, *kernel, "attrs"));
    for (const auto* item : detail::named_children(g, *kernel, "item")) {
      raw_group rg;
      const peg::parse_node* group = detail::first_child(g, *item, "vargroup");
      if (group == nullptr) {
        group = detail::first_child(g, *item, "paramgroup");
        rg.parameter = true;
      } else {
        rg.attrs = detail::read_attrs(g, text, *detail::first_child(g, *group, "attrs"));
      }
      rg.names = detail::read_names(g, text, *detail::first_child(g, *group, "namelist"));
      rg.description = detail::read_string(text, *detail::first_child(g, *group, "string"));
      rk.groups.push_back(std::move(rg));
    }
    out.push_back(std::move(rk));
  }
  return out;
}

// Canonical text form.  parse(render(parse(text))) reproduces the same raw
// kernels, including attribute quoting.
inline std::string render(const raw_kernel& k) {
  auto attr_text = [](const attr_value& value) {
    return value.quoted ? '"' + value.text + '"' : value.text;
  };
  std::string s = "CCTK_CUDA_KERNEL " + k.name + "\n";
  for (const auto& [key, value] : k.attrs) s += "   " + key + "=" + attr_text(value) + "\n";
  s += "{\n";
  for (const auto& g : k.groups) {
    s += g.parameter ? "  CCTK_CUDA_KERNEL_PARAMETER" : "  CCTK_CUDA_KERNEL_VARIABLE";
    for (const auto& [key, value] : g.attrs) s += " " + key + "=" + attr_text(value);
    s += "\n  {\n    ";
    for (std::size_t i = 0; i < g.names.size(); ++i) {
      if (i) s += ", ";
      s += g.names[i];
    }
    s += "\n  } \"" + g.description + "\"\n";
  }
  s += "}\n";
  return s;
}

inline std::string render(const std::vector<raw_kernel>& kernels) {
  std::string s;
  for (std::size_t i = 0; i < kernels.size(); ++i) {
    if (i) s += '\n';
    s += render(kernels[i]);
  }
  return s;
}

enum class intent { in, out, inout, separate_inout };
enum class kernel_type { threedblock };

inline std::string_view to_string(intent i) {
  switch (i) {
    case intent::in: return "IN";
    case intent::out: return "OUT";
    case intent::inout: return "INOUT";
    case intent::separate_inout: return "SEPARATEINOUT";
  }
  return "";
}

// Whether a kernel may read (resp. write) a binding with this intent.
inline bool readable(intent i) { return i != intent::out; }
inline bool writable(intent i) { return i != intent::in; }

struct variable_binding {
  std::string name;
  bool cached = false;
  intent io = intent::in;
  std::string description;
  bool operator==(const variable_binding&) const = default;
};

struct parameter_decl {
  std::string name;
  std::string description;
  bool operator==(const parameter_decl&) const = default;
};

// A validated kernel descriptor: attributes resolved to typed fields,
// variable groups flattened in declaration order, defaults applied
// (CACHED=NO, INTENT=IN).
struct kernel_descriptor {
  std::string name;
  kernel_type type = kernel_type::threedblock;
  std::array<int, 6> stencil{};  // -x +x -y +y -z +z
  std::array<int, 3> tile{};
  std::vector<variable_binding> variables;
  std::vector<parameter_decl> parameters;
};

namespace detail {

inline std::vector<long> parse_int_list(const std::string& kernel, const char* attr,
                                        const std::string& text) {
  std::vector<long> out;
  std::size_t at = 0;
  while (at <= text.size()) {
    std::size_t comma = text.find(',', at);
    if (comma == std::string::npos) comma = text.size();
    std::size_t b = at, e = comma;
    while (b < e && (text[b] == ' ' || text[b] == '\t')) ++b;
    while (e > b && (text[e - 1] == ' ' || text[e - 1] == '\t')) --e;
    long v = 0;
    auto [p, ec] = std::from_chars(text.data() + b, text.data() + e, v);
    if (ec != std::errc() || p != text.data() + e)
      throw descriptor_error("kernel '" + kernel + "': " + attr +
                             " entry is not an integer: '" + text.substr(at, comma - at) + "'");
    out.push_back(v);
    if (comma == text.size()) break;
    at = comma + 1;
  }
  return out;
}

}  // namespace detail

// Validates one raw kernel against the set of grid fields the application
// declares.  Produces the typed descriptor or throws descriptor_error.
inline kernel_descriptor validate(const raw_kernel& raw,
                                  const std::set<std::string>& known_fields) {
  kernel_descriptor k;
  k.name = raw.name;
  bool saw_type = false, saw_stencil = false, saw_tile = false;
  for (const auto& [key, value] : raw.attrs) {
    if (key == "TYPE") {
      saw_type = true;
      if (value.text != "3DBLOCK")
        throw descriptor_error("kernel '" + k.name + "': unsupported TYPE '" + value.text + "'");
      k.type = kernel_type::threedblock;
    } else if (key == "STENCIL") {
      saw_stencil = true;
      auto v = detail::parse_int_list(k.name, "STENCIL", value.text);
      if (v.size() != 6)
        throw descriptor_error("kernel '" + k.name + "': STENCIL needs 6 entries, got " +
                               std::to_string(v.size()));
      for (std::size_t i = 0; i < 6; ++i) {
        if (v[i] < 0)
          throw descriptor_error("kernel '" + k.name + "': STENCIL entries must be >= 0");
        k.stencil[i] = static_cast<int>(v[i]);
      }
    } else if (key == "TILE") {
      saw_tile = true;
      auto v = detail::parse_int_list(k.name, "TILE", value.text);
      if (v.size() != 3)
        throw descriptor_error("kernel '" + k.name + "': TILE needs 3 entries, got " +
                               std::to_string(v.size()));
      for (std::size_t i = 0; i < 3; ++i) {
        if (v[i] < 1)
          throw descriptor_error("kernel '" + k.name + "': TILE entries must be >= 1");
        k.tile[i] = static_cast<int>(v[i]);
      }
    } else {
      throw descriptor_error("kernel '" + k.name + "': unknown attribute '" + key + "'");
    }
  }
  if (!saw_type) throw descriptor_error("kernel '" + k.name + "': missing TYPE");
  if (!saw_stencil) throw descriptor_error("kernel '" + k.name + "': missing STENCIL");
  if (!saw_tile) throw descriptor_error("kernel '" + k.name + "': missing TILE");

  std::set<std::string> seen;
  for (const auto& g : raw.groups) {
    if (g.parameter) {
      for (const auto& n : g.names) {
        if (!seen.insert(n).second)
          throw descriptor_error("kernel '" + k.name + "': name '" + n + "' declared twice");
        k.parameters.push_back({n, g.description});
      }
      continue;
    }
    bool cached = false;
    intent io = intent::in;
    for (const auto& [key, value] : g.attrs) {
      if (key == "CACHED") {
        if (value.text == "YES")
          cached = true;
        else if (value.text == "NO")
          cached = false;
        else
          throw descriptor_error("kernel '" + k.name + "': CACHED must be YES or NO, got '" +
                                 value.text + "'");
      } else if (key == "INTENT") {
        if (value.text == "IN")
          io = intent::in;
        else if (value.text == "OUT")
          io = intent::out;
        else if (value.text == "INOUT")
          io = intent::inout;
        else if (value.text == "SEPARATEINOUT")
          io = intent::separate_inout;
        else
          throw descriptor_error("kernel '" + k.name + "': bad INTENT '" + value.text + "'");
      } else {
        throw descriptor_error("kernel '" + k.name + "': unknown variable attribute '" + key + "'");
      }
    }
    for (const auto& n : g.names) {
      if (known_fields.find(n) == known_fields.end())
        throw descriptor_error("kernel '" + k.name + "': unknown variable '" + n + "'");
      if (!seen.insert(n).second)
        throw descriptor_error("kernel '" + k.name + "': name '" + n + "' declared twice");
      k.variables.push_back({n, cached, io, g.description});
    }
  }
  return k;
}

inline std::vector<kernel_descriptor> validate_all(const std::vector<raw_kernel>& raw,
                                                   const std::set<std::string>& known_fields) {
  std::vector<kernel_descriptor> out;
  out.reserve(raw.size());
  for (const auto& r : raw) out.push_back(validate(r, known_fields));
  return out;
}

}  // namespace sforge::ccl

#endif  // SFORGE_DESCRIPTOR_HPP
