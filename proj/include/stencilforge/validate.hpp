// stencilforge - centerline profile files and reference comparison
// Copyright (c) 2026 the stencilforge authors
// Distributed under the MIT license; see the LICENSE file.

#ifndef SFORGE_VALIDATE_HPP
#define SFORGE_VALIDATE_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "stencilforge/cfd.hpp"

namespace sforge::cli {

class validate_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Profile files carry two sections: a `y,u` header followed by rows of the
// u(y) centerline, then an `x,v` header and the v(x) centerline.  `#` lines
// are comments.  Coordinates must be strictly increasing within a section.
inline cfd::profile_tables read_profiles(std::istream& in, const std::string& what) {
  cfd::profile_tables out;
  std::vector<std::array<double, 2>>* section = nullptr;
  std::string raw;
  int line = 0;
  auto fail = [&](const std::string& why) -> void {
    throw validate_error(what + ", line " + std::to_string(line) + ": " + why);
  };
  while (std::getline(in, raw)) {
    ++line;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    std::string_view text = raw;
    while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
    while (!text.empty() && (text.back() == ' ' || text.back() == '\t')) text.remove_suffix(1);
    if (text.empty() || text.front() == '#') continue;
    if (text == "y,u") {
      section = &out.u_of_y;
      continue;
    }
    if (text == "x,v") {
      section = &out.v_of_x;
      continue;
    }
    if (!section) fail("expected a 'y,u' or 'x,v' header before data rows");
    const auto comma = text.find(',');
    if (comma == std::string_view::npos) fail("expected 'coordinate,value'");
    double c = 0.0, v = 0.0;
    try {
      std::size_t used = 0;
      std::string first(text.substr(0, comma)), second(text.substr(comma + 1));
      c = std::stod(first, &used);
      if (used != first.size()) fail("trailing characters in coordinate");
      v = std::stod(second, &used);
      if (used != second.size()) fail("trailing characters in value");
    } catch (const validate_error&) {
      throw;
    } catch (const std::exception&) {
      fail("malformed number in '" + std::string(text) + "'");
    }
    if (!section->empty() && !(c > section->back()[0]))
      fail("coordinates must be strictly increasing");
    section->push_back({c, v});
  }
  if (out.u_of_y.size() < 2 || out.v_of_x.size() < 2)
    throw validate_error(what + ": each section needs at least two rows");
  return out;
}

inline cfd::profile_tables load_profiles(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw validate_error("cannot open profile file '" + path + "'");
  return read_profiles(in, path);
}

// Writes the two-section profile format read back by read_profiles.  Comment
// lines, if any, go first.
inline void write_profiles(std::ostream& out, const cfd::profile_tables& t,
                           const std::vector<std::string>& comments = {}) {
  char buf[80];
  for (const auto& c : comments) out << "# " << c << "\n";
  out << "y,u\n";
  for (const auto& r : t.u_of_y) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", r[0], r[1]);
    out << buf;
  }
  out << "x,v\n";
  for (const auto& r : t.v_of_x) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", r[0], r[1]);
    out << buf;
  }
}

struct deviation_row {
  char section = 'u';  // 'u' for u(y), 'v' for v(x)
  double coord = 0.0;
  double computed = 0.0;
  double reference = 0.0;
  double diff = 0.0;  // |computed - reference|
};

struct deviation_report {
  std::vector<deviation_row> rows;
  double max_abs = 0.0;
};

namespace detail {

// Piecewise-linear sample of a strictly increasing table.  The query must lie
// inside the table's coordinate range.
inline double interp(const std::vector<std::array<double, 2>>& table, double x,
                     const std::string& what) {
  if (x < table.front()[0] || x > table.back()[0])
    throw validate_error(what + ": reference coordinate " + std::to_string(x) +
                         " is outside the computed profile range");
  auto it = std::lower_bound(table.begin(), table.end(), x,
                             [](const std::array<double, 2>& r, double q) { return r[0] < q; });
  if (it->at(0) == x) return it->at(1);
  const auto& hi = *it;
  const auto& lo = *(it - 1);
  const double t = (x - lo[0]) / (hi[0] - lo[0]);
  return lo[1] + t * (hi[1] - lo[1]);
}

}  // namespace detail

// Samples the computed profiles at every reference coordinate and records the
// absolute deviation.  Pure: the result depends only on the two tables.
inline deviation_report compare_profiles(const cfd::profile_tables& computed,
                                         const cfd::profile_tables& reference) {
  deviation_report rep;
  auto section = [&](const std::vector<std::array<double, 2>>& comp,
                     const std::vector<std::array<double, 2>>& ref, char tag,
                     const std::string& what) {
    for (const auto& r : ref) {
      deviation_row row;
      row.section = tag;
      row.coord = r[0];
      row.reference = r[1];
      row.computed = detail::interp(comp, r[0], what);
      row.diff = std::abs(row.computed - row.reference);
      rep.max_abs = std::max(rep.max_abs, row.diff);
      rep.rows.push_back(row);
    }
  };
  section(computed.u_of_y, reference.u_of_y, 'u', "u(y) section");
  section(computed.v_of_x, reference.v_of_x, 'v', "v(x) section");
  return rep;
}

inline void write_deviations(std::ostream& out, const deviation_report& rep) {
  char buf[120];
  out << "section,coord,computed,reference,abs_deviation\n";
  for (const auto& r : rep.rows) {
    std::snprintf(buf, sizeof buf, "%c,%.6g,%.9g,%.9g,%.9g\n", r.section, r.coord, r.computed,
                  r.reference, r.diff);
    out << buf;
  }
  std::snprintf(buf, sizeof buf, "max abs deviation: %.9g\n", rep.max_abs);
  out << buf;
}

}  // namespace sforge::cli

#endif  // SFORGE_VALIDATE_HPP
