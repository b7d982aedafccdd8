// stencilforge - command-line front end
// Copyright (c) 2026 the stencilforge authors
// Distributed under the MIT license; see the LICENSE file.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "stencilforge/bench.hpp"
#include "stencilforge/cfd.hpp"
#include "stencilforge/codegen.hpp"
#include "stencilforge/config.hpp"
#include "stencilforge/descriptor.hpp"
#include "stencilforge/io.hpp"
#include "stencilforge/validate.hpp"

namespace {

namespace fs = std::filesystem;
using namespace sforge;

constexpr int exit_ok = 0, exit_failure = 1, exit_usage = 2;

class usage_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void print_synopsis(std::ostream& out) {
  out << "usage: sforge <command> [options]\n"
         "\n"
         "commands:\n"
         "  gen <file.ccl> -o <dir>\n"
         "      parse kernel descriptors, write <kernel>.h.generated files and plans.txt\n"
         "  cavity --config <file> [--workers N] [--mode plain|overlap] [--tile tx,ty,tz]\n"
         "      run the lid-driven cavity to steady state, write profile and residual CSVs\n"
         "  validate --profiles <csv> --reference <csv> --tol <t>\n"
         "      compare centerline profiles against a reference table\n"
         "  bench --config <file> [--workers 1,2,4] [--modes plain,overlap] [--steps N]\n"
         "        [--out bench.csv]\n"
         "      fixed-step strong-scaling benchmark\n"
         "\n"
         "exit status: 0 success, 1 run or validation failure, 2 usage error\n";
}

std::string_view flag_value(const std::vector<std::string_view>& args, std::size_t& i,
                            std::string_view flag) {
  if (i + 1 >= args.size()) throw usage_error(std::string(flag) + " needs a value");
  return args[++i];
}

long parse_long(std::string_view v, std::string_view what) {
  std::size_t used = 0;
  long out = 0;
  try {
    out = std::stol(std::string(v), &used);
  } catch (const std::exception&) {
    throw usage_error("bad " + std::string(what) + " '" + std::string(v) + "'");
  }
  if (used != v.size())
    throw usage_error("bad " + std::string(what) + " '" + std::string(v) + "'");
  return out;
}

double parse_double(std::string_view v, std::string_view what) {
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(std::string(v), &used);
  } catch (const std::exception&) {
    throw usage_error("bad " + std::string(what) + " '" + std::string(v) + "'");
  }
  if (used != v.size())
    throw usage_error("bad " + std::string(what) + " '" + std::string(v) + "'");
  return out;
}

std::vector<std::string_view> split_commas(std::string_view v) {
  std::vector<std::string_view> out;
  while (true) {
    const auto comma = v.find(',');
    out.push_back(v.substr(0, comma));
    if (comma == std::string_view::npos) break;
    v.remove_prefix(comma + 1);
  }
  return out;
}

exec::run_mode parse_mode(std::string_view v) {
  if (v == "plain") return exec::run_mode::plain;
  if (v == "overlap") return exec::run_mode::overlap;
  throw usage_error("mode must be plain or overlap, got '" + std::string(v) + "'");
}

std::array<int, 3> parse_tile(std::string_view v) {
  const auto parts = split_commas(v);
  if (parts.size() != 3) throw usage_error("--tile needs tx,ty,tz");
  std::array<int, 3> out{};
  for (std::size_t a = 0; a < 3; ++a) {
    out[a] = static_cast<int>(parse_long(parts[a], "tile extent"));
    if (out[a] < 0) throw usage_error("tile extents must be non-negative");
  }
  return out;
}

// ---- gen -----------------------------------------------------------------

int cmd_gen(const std::vector<std::string_view>& args) {
  std::string input;
  fs::path outdir;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "-o" || args[i] == "--out") {
      outdir = fs::path(std::string(flag_value(args, i, args[i])));
    } else if (!args[i].empty() && args[i].front() == '-') {
      throw usage_error("unknown option '" + std::string(args[i]) + "'");
    } else if (input.empty()) {
      input = std::string(args[i]);
    } else {
      throw usage_error("unexpected argument '" + std::string(args[i]) + "'");
    }
  }
  if (input.empty()) throw usage_error("gen needs a descriptor file");
  if (outdir.empty()) throw usage_error("gen needs -o <dir>");

  std::ifstream in(input, std::ios::binary);
  if (!in) {
    std::cerr << "sforge: cannot open '" << input << "'\n";
    return exit_failure;
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();

  const auto raw = ccl::parse_descriptors(text);
  std::set<std::string> fields;
  for (const auto& k : raw)
    for (const auto& g : k.groups)
      if (!g.parameter) fields.insert(g.names.begin(), g.names.end());
  const auto kernels = ccl::validate_all(raw, fields);
  const auto written = codegen::write_generated(kernels, outdir);
  for (const auto& p : written) std::cout << "wrote " << p.string() << "\n";
  std::cout << kernels.size() << " kernel" << (kernels.size() == 1 ? "" : "s") << ", "
            << written.size() << " files\n";
  return exit_ok;
}

// ---- cavity ----------------------------------------------------------------

struct residual_log {
  struct row {
    long step;
    cfd::step_stats st;
  };
  std::vector<row> rows;

  void write(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw cli::config_error("cannot write '" + path + "'");
    out << "step,dt,max_div,sweeps\n";
    char buf[96];
    for (const auto& r : rows) {
      std::snprintf(buf, sizeof buf, "%ld,%.17g,%.17g,%d\n", r.step, r.st.dt, r.st.residual,
                    r.st.sweeps);
      out << buf;
    }
  }
};

void dump_fields(cfd::simulation& sim, const fs::path& dir) {
  fs::create_directories(dir);
  for (const char* name : {"vx", "vy", "vz", "p"}) {
    auto g = grid::gather(sim.group(), sim.store().at(name));
    const fs::path file = dir / (std::string(name) + ".sfg1");
    std::ofstream out(file, std::ios::binary);
    if (!out) throw cli::config_error("cannot write '" + file.string() + "'");
    grid::write_sfg1(out, sim.config().dom.extents, g);
    std::cout << "wrote " << file.string() << "\n";
  }
}

int cmd_cavity(const std::vector<std::string_view>& args) {
  std::string config_path;
  int workers_override = 0;
  bool mode_set = false;
  exec::run_mode mode_override = exec::run_mode::plain;
  bool tile_set = false;
  std::array<int, 3> tile_override{};
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      config_path = std::string(flag_value(args, i, "--config"));
    } else if (args[i] == "--workers") {
      workers_override = static_cast<int>(parse_long(flag_value(args, i, "--workers"), "--workers"));
      if (workers_override < 1) throw usage_error("--workers must be at least 1");
    } else if (args[i] == "--mode") {
      mode_override = parse_mode(flag_value(args, i, "--mode"));
      mode_set = true;
    } else if (args[i] == "--tile") {
      tile_override = parse_tile(flag_value(args, i, "--tile"));
      tile_set = true;
    } else {
      throw usage_error("unknown option '" + std::string(args[i]) + "'");
    }
  }
  if (config_path.empty()) throw usage_error("cavity needs --config <file>");

  cli::run_config rc = cli::load_run_config(config_path);
  if (workers_override) rc.workers = workers_override;
  if (mode_set) rc.mode = mode_override;
  if (tile_set) rc.tile = tile_override;

  cfd::simulation sim(rc.solver(), rc.fluid(), rc.workers, rc.mode, rc.tile, rc.ghost);
  sim.init_cavity();
  std::printf("cavity %ldx%ldx%ld  Re=%g  workers=%d  mode=%s\n", rc.nx, rc.ny, rc.nz, rc.re,
              rc.workers, cli::mode_name(rc.mode));

  residual_log log;
  const double stop_rate = rc.steady_tol * rc.lid_speed;  // unit box edge
  const auto summary =
      sim.run_to_steady(rc.max_steps, stop_rate, [&](long n, const cfd::step_stats& st, double rate) {
        log.rows.push_back({n, st});
        if (rc.output_cadence > 0 && n % rc.output_cadence == 0)
          std::printf("  step %ld  t=%.4f  dt=%.3e  sweeps=%d  div=%.3e  rate=%.3e\n", n,
                      sim.time(), st.dt, st.sweeps, st.residual, rate);
      });

  log.write(rc.residuals_out);
  std::cout << "wrote " << rc.residuals_out << "\n";

  const auto profiles = sim.centerline_profiles();
  char comment[160];
  std::snprintf(comment, sizeof comment,
                "lid-driven cavity centerline profiles: %ldx%ldx%ld, Re=%g, t=%.6g, steps=%ld",
                rc.nx, rc.ny, rc.nz, rc.re, sim.time(), summary.steps);
  std::ofstream pout(rc.profiles_out, std::ios::binary);
  if (!pout) throw cli::config_error("cannot write '" + rc.profiles_out + "'");
  cli::write_profiles(pout, profiles, {comment});
  pout.flush();
  if (!pout) throw cli::config_error("cannot write '" + rc.profiles_out + "'");
  std::cout << "wrote " << rc.profiles_out << "\n";

  if (!rc.fields_out.empty()) dump_fields(sim, rc.fields_out);

  std::printf("steps=%ld  t=%.6g  rate=%.3e  max|div|=%.3e\n", summary.steps, summary.time,
              summary.rate, sim.last().residual);
  if (!summary.converged) {
    std::cerr << "sforge: not steady after " << summary.steps << " steps (rate " << summary.rate
              << " > " << stop_rate << ")\n";
    return exit_failure;
  }
  std::cout << "steady state reached\n";
  return exit_ok;
}

// ---- validate --------------------------------------------------------------

int cmd_validate(const std::vector<std::string_view>& args) {
  std::string profiles_path, reference_path;
  double tol = -1.0;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--profiles") {
      profiles_path = std::string(flag_value(args, i, "--profiles"));
    } else if (args[i] == "--reference") {
      reference_path = std::string(flag_value(args, i, "--reference"));
    } else if (args[i] == "--tol") {
      tol = parse_double(flag_value(args, i, "--tol"), "--tol");
      if (!(tol >= 0.0)) throw usage_error("--tol must be non-negative");
    } else {
      throw usage_error("unknown option '" + std::string(args[i]) + "'");
    }
  }
  if (profiles_path.empty() || reference_path.empty() || tol < 0.0)
    throw usage_error("validate needs --profiles, --reference, and --tol");

  const auto computed = cli::load_profiles(profiles_path);
  const auto reference = cli::load_profiles(reference_path);
  const auto rep = cli::compare_profiles(computed, reference);
  cli::write_deviations(std::cout, rep);
  std::printf("tolerance: %g\n", tol);
  if (rep.max_abs <= tol) {
    std::cout << "PASS\n";
    return exit_ok;
  }
  std::cout << "FAIL\n";
  return exit_failure;
}

// ---- bench -----------------------------------------------------------------

int cmd_bench(const std::vector<std::string_view>& args) {
  std::string config_path, out_path = "bench.csv";
  std::vector<int> workers{1, 2, 4};
  std::vector<exec::run_mode> modes{exec::run_mode::plain, exec::run_mode::overlap};
  long steps = 20;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      config_path = std::string(flag_value(args, i, "--config"));
    } else if (args[i] == "--workers") {
      workers.clear();
      for (auto part : split_commas(flag_value(args, i, "--workers"))) {
        const long w = parse_long(part, "--workers");
        if (w < 1) throw usage_error("--workers entries must be at least 1");
        workers.push_back(static_cast<int>(w));
      }
    } else if (args[i] == "--modes") {
      modes.clear();
      for (auto part : split_commas(flag_value(args, i, "--modes")))
        modes.push_back(parse_mode(part));
    } else if (args[i] == "--steps") {
      steps = parse_long(flag_value(args, i, "--steps"), "--steps");
      if (steps < 1) throw usage_error("--steps must be at least 1");
    } else if (args[i] == "--out") {
      out_path = std::string(flag_value(args, i, "--out"));
    } else {
      throw usage_error("unknown option '" + std::string(args[i]) + "'");
    }
  }
  if (config_path.empty()) throw usage_error("bench needs --config <file>");
  if (workers.empty() || modes.empty()) throw usage_error("bench needs workers and modes");

  const cli::run_config rc = cli::load_run_config(config_path);
  const auto rep = cli::run_bench(rc, workers, modes, steps);
  cli::write_bench_table(std::cout, rep);
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw cli::config_error("cannot write '" + out_path + "'");
  cli::write_bench_csv(out, rep);
  out.flush();
  if (!out) throw cli::config_error("cannot write '" + out_path + "'");
  std::cout << "wrote " << out_path << "\n";

  // Final fields must not depend on the execution mode.
  bool mismatch = false;
  for (const auto& a : rep.rows)
    for (const auto& b : rep.rows)
      if (a.workers == b.workers && a.checksum != b.checksum) {
        std::cerr << "sforge: checksum mismatch at " << a.workers << " workers: "
                  << cli::mode_name(a.mode) << "=" << a.checksum << " vs "
                  << cli::mode_name(b.mode) << "=" << b.checksum << "\n";
        mismatch = true;
      }
  return mismatch ? exit_failure : exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string_view> args(argv + 1, argv + argc);
  if (args.empty()) {
    print_synopsis(std::cerr);
    return exit_usage;
  }
  const std::string_view cmd = args.front();
  args.erase(args.begin());
  try {
    if (cmd == "gen") return cmd_gen(args);
    if (cmd == "cavity") return cmd_cavity(args);
    if (cmd == "validate") return cmd_validate(args);
    if (cmd == "bench") return cmd_bench(args);
    if (cmd == "--help" || cmd == "-h" || cmd == "help") {
      print_synopsis(std::cout);
      return exit_ok;
    }
    throw usage_error("unknown command '" + std::string(cmd) + "'");
  } catch (const usage_error& e) {
    std::cerr << "sforge: " << e.what() << "\n\n";
    print_synopsis(std::cerr);
    return exit_usage;
  } catch (const std::exception& e) {
    std::cerr << "sforge: " << e.what() << "\n";
    return exit_failure;
  }
}
