// stencilforge - tests for run configs, profile validation, bench, and the CLI
// Copyright (c) 2026 the stencilforge authors
// Distributed under the MIT license; see the LICENSE file.

#include <sys/wait.h>

#include <catch2/catch_amalgamated.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "stencilforge/bench.hpp"
#include "stencilforge/config.hpp"
#include "stencilforge/io.hpp"
#include "stencilforge/validate.hpp"

using namespace sforge;
using Catch::Approx;
using Catch::Matchers::ContainsSubstring;

namespace {

cli::run_config parse(const std::string& text) {
  std::istringstream in(text);
  return cli::parse_run_config(in);
}

namespace fs = std::filesystem;

// Temporary directory removed when the test section ends.
struct temp_dir {
  fs::path path;
  temp_dir() {
    static std::mt19937_64 rng(std::random_device{}());
    path = fs::temp_directory_path() /
           ("sforge_test_" + std::to_string(rng()));
    fs::create_directories(path);
  }
  ~temp_dir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  REQUIRE(out.good());
  out << text;
  REQUIRE(out.good());
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

struct cmd_result {
  int status = -1;
  std::string text;  // stdout and stderr, merged
};

cmd_result run_cmd(const std::string& cmd) {
  cmd_result r;
  FILE* pipe = popen((cmd + " 2>&1").c_str(), "r");
  REQUIRE(pipe != nullptr);
  char buf[512];
  std::size_t n = 0;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.text.append(buf, n);
  const int rc = pclose(pipe);
  REQUIRE(WIFEXITED(rc));
  r.status = WEXITSTATUS(rc);
  return r;
}

const std::string sforge_bin = SF_SFORGE_BIN;

}  // namespace

// ---- run configuration -----------------------------------------------------

TEST_CASE("empty config carries the documented defaults") {
  const cli::run_config rc = parse("");
  CHECK(rc.nx == 33);
  CHECK(rc.ny == 33);
  CHECK(rc.nz == 3);
  CHECK(rc.re == 100.0);
  CHECK(rc.sigma == 0.5);
  CHECK(rc.omega == 1.7);
  CHECK(rc.tolerance == 1e-6);
  CHECK(rc.max_sweeps == 500);
  CHECK(rc.alpha == 0.0);
  CHECK(rc.workers == 1);
  CHECK(rc.mode == exec::run_mode::plain);
  CHECK(rc.tile == std::array<int, 3>{0, 0, 0});
  CHECK(rc.ghost == 1);
  CHECK(rc.symmetry_z);
  CHECK(rc.profiles_out == "profiles.csv");
  CHECK(rc.residuals_out == "residuals.csv");
  CHECK(rc.fields_out.empty());
  CHECK(rc.fluid().viscosity == Approx(0.01));
  CHECK_NOTHROW(rc.solver().validate());
}

TEST_CASE("the Reynolds number fixes the viscosity") {
  CHECK(parse("re = 100\n").fluid().viscosity == Approx(0.01));
  CHECK(parse("re = 400\n").fluid().viscosity == Approx(0.0025));
  // doubling the lid speed at fixed Re doubles the viscosity
  CHECK(parse("re = 100\nlid_speed = 2\n").fluid().viscosity == Approx(0.02));
}

TEST_CASE("out-of-range values are rejected with their line number") {
  CHECK_THROWS_WITH(parse("nx = 17\nomega = 2.5\n"),
                    ContainsSubstring("line 2") && ContainsSubstring("omega") &&
                        ContainsSubstring("[1,2)"));
  CHECK_THROWS_WITH(parse("nx = 0\n"), ContainsSubstring("line 1"));
  CHECK_THROWS_WITH(parse("sigma = 1.0\n"), ContainsSubstring("(0,1)"));
  CHECK_THROWS_WITH(parse("\n\nworkers = 0\n"), ContainsSubstring("line 3"));
  CHECK_THROWS_WITH(parse("ghost = 0\n"), ContainsSubstring("ghost"));
  CHECK_THROWS_WITH(parse("alpha = 1.5\n"), ContainsSubstring("[0,1]"));
  CHECK_THROWS_WITH(parse("steady_tol = -1\n"), ContainsSubstring("positive"));
  CHECK_THROWS_WITH(parse("max_steps = 0\n"), ContainsSubstring("at least 1"));
}

TEST_CASE("unknown and duplicate keys are rejected") {
  CHECK_THROWS_WITH(parse("foo = 1\n"),
                    ContainsSubstring("line 1") && ContainsSubstring("unknown key 'foo'"));
  CHECK_THROWS_WITH(parse("nx = 17\nnx = 18\n"),
                    ContainsSubstring("line 2") && ContainsSubstring("duplicate key 'nx'"));
}

TEST_CASE("comments and blank lines are skipped") {
  const cli::run_config rc = parse(
      "# a full-line comment\n"
      "\n"
      "nx = 65   # trailing comment\n"
      "   re = 400\n"
      "mode = overlap\n");
  CHECK(rc.nx == 65);
  CHECK(rc.re == 400.0);
  CHECK(rc.mode == exec::run_mode::overlap);
}

TEST_CASE("malformed lines carry line numbers") {
  CHECK_THROWS_WITH(parse("nx 17\n"),
                    ContainsSubstring("line 1") && ContainsSubstring("key = value"));
  CHECK_THROWS_WITH(parse("nx = seventeen\n"), ContainsSubstring("expected an integer"));
  CHECK_THROWS_WITH(parse("nx = 17x\n"), ContainsSubstring("trailing characters"));
  CHECK_THROWS_WITH(parse("re = 1e\n"), ContainsSubstring("line 1"));
  CHECK_THROWS_WITH(parse("= 5\n"), ContainsSubstring("missing key"));
  CHECK_THROWS_WITH(parse("mode = turbo\n"), ContainsSubstring("plain or overlap"));
  CHECK_THROWS_WITH(parse("symmetry_z = maybe\n"), ContainsSubstring("true/false"));
  CHECK_THROWS_WITH(parse("tile = 8,8\n"), ContainsSubstring("three comma-separated"));
  CHECK_THROWS_WITH(parse("tile = 8,8,8,8\n"), ContainsSubstring("three comma-separated"));
}

TEST_CASE("decomposition and output knobs parse") {
  const cli::run_config rc = parse(
      "workers = 4\n"
      "tile = 8,4,2\n"
      "ghost = 2\n"
      "symmetry_z = false\n"
      "profiles_out = out/p.csv\n"
      "residuals_out = out/r.csv\n"
      "fields_out = out/fields\n"
      "output_cadence = 50\n");
  CHECK(rc.workers == 4);
  CHECK(rc.tile == std::array<int, 3>{8, 4, 2});
  CHECK(rc.ghost == 2);
  CHECK_FALSE(rc.symmetry_z);
  CHECK(rc.profiles_out == "out/p.csv");
  CHECK(rc.residuals_out == "out/r.csv");
  CHECK(rc.fields_out == "out/fields");
  CHECK(rc.output_cadence == 50);
}

TEST_CASE("loading a missing config names the path") {
  CHECK_THROWS_WITH(cli::load_run_config("/nonexistent/run.cfg"),
                    ContainsSubstring("/nonexistent/run.cfg"));
}

// ---- profile files and comparison -------------------------------------------

namespace {

cfd::profile_tables sample_tables() {
  cfd::profile_tables t;
  t.u_of_y = {{0.0, 0.0}, {0.25, -0.125}, {0.5, -0.25}, {0.75, 0.25}, {1.0, 1.0}};
  t.v_of_x = {{0.0, 0.0}, {0.5, 0.0625}, {1.0, 0.0}};
  return t;
}

}  // namespace

TEST_CASE("profile tables round-trip through the csv form") {
  const cfd::profile_tables t = sample_tables();
  std::ostringstream out;
  cli::write_profiles(out, t, {"synthetic fixture", "second comment line"});
  std::istringstream in(out.str());
  const cfd::profile_tables back = cli::read_profiles(in, "fixture");
  REQUIRE(back.u_of_y.size() == t.u_of_y.size());
  REQUIRE(back.v_of_x.size() == t.v_of_x.size());
  for (std::size_t i = 0; i < t.u_of_y.size(); ++i) CHECK(back.u_of_y[i] == t.u_of_y[i]);
  for (std::size_t i = 0; i < t.v_of_x.size(); ++i) CHECK(back.v_of_x[i] == t.v_of_x[i]);
}

TEST_CASE("linear interpolation is exact on dyadic linear data") {
  cfd::profile_tables comp;
  comp.u_of_y = {{0.0, 0.0}, {0.5, 1.0}, {1.0, 2.0}};  // u = 2 y
  comp.v_of_x = {{0.0, 0.0}, {1.0, -4.0}};             // v = -4 x
  cfd::profile_tables ref;
  ref.u_of_y = {{0.25, 0.5}, {0.5, 1.0}, {0.75, 1.5}};
  ref.v_of_x = {{0.125, -0.5}, {0.875, -3.5}};
  const auto rep = cli::compare_profiles(comp, ref);
  CHECK(rep.max_abs == 0.0);
  REQUIRE(rep.rows.size() == 5);
  CHECK(rep.rows[0].computed == 0.5);
  CHECK(rep.rows[4].computed == -3.5);
}

TEST_CASE("the report surfaces the worst deviation") {
  const cfd::profile_tables comp = sample_tables();
  cfd::profile_tables ref = sample_tables();
  ref.u_of_y[2][1] += 0.01;   // perturb u(0.5)
  ref.v_of_x[1][1] -= 0.025;  // perturb v(0.5) harder
  const auto rep = cli::compare_profiles(comp, ref);
  CHECK(rep.max_abs == Approx(0.025));
  // rows arrive u section first, then v
  CHECK(rep.rows.front().section == 'u');
  CHECK(rep.rows.back().section == 'v');
  // identical inputs give an identical report
  const auto again = cli::compare_profiles(comp, ref);
  REQUIRE(again.rows.size() == rep.rows.size());
  CHECK(again.max_abs == rep.max_abs);
  for (std::size_t i = 0; i < rep.rows.size(); ++i)
    CHECK(again.rows[i].diff == rep.rows[i].diff);
}

TEST_CASE("reference coordinates outside the computed range are errors") {
  cfd::profile_tables comp;
  comp.u_of_y = {{0.1, 0.0}, {0.9, 1.0}};
  comp.v_of_x = {{0.0, 0.0}, {1.0, 0.0}};
  cfd::profile_tables ref = comp;
  ref.u_of_y = {{0.05, 0.0}, {0.5, 0.5}};
  CHECK_THROWS_WITH(cli::compare_profiles(comp, ref),
                    ContainsSubstring("outside the computed profile range"));
}

TEST_CASE("malformed profile files are rejected with context") {
  auto read = [](const std::string& text) {
    std::istringstream in(text);
    return cli::read_profiles(in, "bad.csv");
  };
  CHECK_THROWS_WITH(read("0,0\n"), ContainsSubstring("line 1") && ContainsSubstring("header"));
  CHECK_THROWS_WITH(read("y,u\n0,0\n0.5,1\n0.5,2\nx,v\n0,0\n1,0\n"),
                    ContainsSubstring("strictly increasing"));
  CHECK_THROWS_WITH(read("y,u\n0,zero\nx,v\n0,0\n1,0\n"), ContainsSubstring("line 2"));
  CHECK_THROWS_WITH(read("y,u\n0,0\n1,1\nx,v\n0,0\n"), ContainsSubstring("at least two rows"));
  CHECK_THROWS_WITH(read("y,u\n0 0\nx,v\n"), ContainsSubstring("coordinate,value"));
}

TEST_CASE("the shipped reference table loads") {
  const auto ref = cli::load_profiles(std::string(SF_SOURCE_DIR) + "/data/ghia_re100.csv");
  REQUIRE(ref.u_of_y.size() == 17);
  REQUIRE(ref.v_of_x.size() == 17);
  CHECK(ref.u_of_y.front() == std::array<double, 2>{0.0, 0.0});
  CHECK(ref.u_of_y.back() == std::array<double, 2>{1.0, 1.0});
  CHECK(ref.v_of_x.front() == std::array<double, 2>{0.0, 0.0});
  CHECK(ref.v_of_x.back() == std::array<double, 2>{1.0, 0.0});
  // the primary vortex pulls the lower half backwards at Re = 100
  CHECK(ref.u_of_y[7][1] == Approx(-0.21090));
}

// ---- bench harness -----------------------------------------------------------

TEST_CASE("bench rows cover the worker/mode grid and agree bitwise") {
  cli::run_config rc = parse("nx = 16\nny = 16\nnz = 4\nsymmetry_z = false\n");
  const auto rep = cli::run_bench(rc, {1, 2}, {exec::run_mode::plain, exec::run_mode::overlap}, 2);
  REQUIRE(rep.rows.size() == 4);
  for (const auto& row : rep.rows) {
    CHECK(row.extents == std::array<grid::index_t, 3>{16, 16, 4});
    CHECK(row.steps == 2);
    CHECK(row.wall_seconds > 0.0);
    CHECK(row.updates_per_second > 0.0);
    CHECK(row.bytes_staged > 0);
    CHECK(row.checksum == rep.rows.front().checksum);
  }
  // both 1-worker rows are their mode's baseline
  CHECK(rep.rows[0].workers == 1);
  CHECK(rep.rows[0].speedup == 1.0);
  CHECK(rep.rows[1].speedup == 1.0);

  SECTION("the checksum matches a direct run") {
    cfd::simulation sim(rc.solver(), rc.fluid(), 1);
    sim.init_cavity();
    sim.advance(2);
    CHECK(cli::checksum_hex(cli::field_checksum(sim)) == rep.rows.front().checksum);
  }

  SECTION("the csv and table forms are well formed") {
    std::ostringstream csv, table;
    cli::write_bench_csv(csv, rep);
    cli::write_bench_table(table, rep);
    std::istringstream lines(csv.str());
    std::string line;
    REQUIRE(std::getline(lines, line));
    CHECK(line ==
          "workers,mode,nx,ny,nz,steps,wall_seconds,updates_per_second,speedup,bytes_staged,"
          "checksum");
    int rows = 0;
    while (std::getline(lines, line)) ++rows;
    CHECK(rows == 4);
    CHECK_THAT(table.str(), ContainsSubstring("workers") && ContainsSubstring("plain") &&
                                ContainsSubstring("overlap"));
  }
}

TEST_CASE("bench rejects empty work lists") {
  const cli::run_config rc = parse("");
  CHECK_THROWS_AS(cli::run_bench(rc, {}, {exec::run_mode::plain}, 2), cli::config_error);
  CHECK_THROWS_AS(cli::run_bench(rc, {1}, {}, 2), cli::config_error);
  CHECK_THROWS_AS(cli::run_bench(rc, {1}, {exec::run_mode::plain}, 0), cli::config_error);
}

// ---- the sforge binary -------------------------------------------------------

TEST_CASE("gen writes headers and a manifest") {
  temp_dir tmp;
  const auto r = run_cmd(sforge_bin + " gen " + std::string(SF_SOURCE_DIR) +
                         "/kernels/cfd.ccl -o " + tmp.file("out"));
  INFO(r.text);
  REQUIRE(r.status == 0);
  CHECK_THAT(r.text, ContainsSubstring("3 kernels"));
  for (const char* name : {"UPDATE_VELOCITY", "DIVERGENCE", "PRESSURE_SWEEP"})
    CHECK(fs::exists(tmp.path / "out" / (std::string(name) + ".h.generated")));
  const std::string manifest = slurp(tmp.file("out/plans.txt"));
  CHECK_THAT(manifest, ContainsSubstring("kernel UPDATE_VELOCITY") &&
                           ContainsSubstring("kernel DIVERGENCE") &&
                           ContainsSubstring("kernel PRESSURE_SWEEP"));
}

TEST_CASE("gen reports usage and input errors distinctly") {
  temp_dir tmp;
  CHECK(run_cmd(sforge_bin + " gen").status == 2);
  CHECK(run_cmd(sforge_bin + " gen missing.ccl").status == 2);  // no -o
  const auto missing = run_cmd(sforge_bin + " gen /nonexistent.ccl -o " + tmp.file("out"));
  CHECK(missing.status == 1);
  write_file(tmp.file("bad.ccl"), "CCTK_CUDA_KERNEL oops {");
  const auto bad = run_cmd(sforge_bin + " gen " + tmp.file("bad.ccl") + " -o " + tmp.file("out"));
  CHECK(bad.status == 1);
  CHECK_THAT(bad.text, ContainsSubstring("sforge:"));
}

namespace {

std::string small_cavity_config(const temp_dir& tmp) {
  return "nx = 17\nny = 17\nnz = 3\nre = 100\nsigma = 0.8\nomega = 1.8\n"
         "steady_tol = 1e-4\nmax_steps = 3000\n"
         "profiles_out = " + tmp.file("profiles.csv") + "\n"
         "residuals_out = " + tmp.file("residuals.csv") + "\n";
}

}  // namespace

TEST_CASE("cavity runs a small case end to end") {
  temp_dir tmp;
  write_file(tmp.file("run.cfg"),
             small_cavity_config(tmp) + "fields_out = " + tmp.file("fields") + "\n");
  const auto r = run_cmd(sforge_bin + " cavity --config " + tmp.file("run.cfg"));
  INFO(r.text);
  REQUIRE(r.status == 0);
  CHECK_THAT(r.text, ContainsSubstring("steady state reached"));

  const auto prof = cli::load_profiles(tmp.file("profiles.csv"));
  CHECK(prof.u_of_y.front() == std::array<double, 2>{0.0, 0.0});
  CHECK(prof.u_of_y.back() == std::array<double, 2>{1.0, 1.0});
  CHECK(prof.v_of_x.back() == std::array<double, 2>{1.0, 0.0});
  CHECK(prof.u_of_y.size() == 19);  // ny + the two wall rows

  // every step satisfied the divergence tolerance
  std::istringstream res(slurp(tmp.file("residuals.csv")));
  std::string line;
  REQUIRE(std::getline(res, line));
  CHECK(line == "step,dt,max_div,sweeps");
  int rows = 0;
  while (std::getline(res, line)) {
    ++rows;
    const auto last_comma = line.rfind(',');
    const auto prev_comma = line.rfind(',', last_comma - 1);
    const double div = std::stod(line.substr(prev_comma + 1, last_comma - prev_comma - 1));
    CHECK(div <= 1e-6);
  }
  CHECK(rows >= 10);

  // the field dump is a valid SFG1 set
  for (const char* name : {"vx", "vy", "vz", "p"}) {
    std::ifstream in(tmp.file("fields/" + std::string(name) + ".sfg1"), std::ios::binary);
    REQUIRE(in.good());
    std::array<grid::index_t, 3> ext{};
    const auto data = grid::read_sfg1(in, ext);
    CHECK(ext == std::array<grid::index_t, 3>{17, 17, 3});
    CHECK(data.size() == 17u * 17u * 3u);
  }
}

TEST_CASE("cavity honors command-line overrides") {
  temp_dir tmp;
  write_file(tmp.file("run.cfg"), small_cavity_config(tmp));
  const auto r = run_cmd(sforge_bin + " cavity --config " + tmp.file("run.cfg") +
                         " --workers 2 --mode overlap --tile 8,8,3");
  INFO(r.text);
  REQUIRE(r.status == 0);
  CHECK_THAT(r.text, ContainsSubstring("workers=2") && ContainsSubstring("mode=overlap"));
}

TEST_CASE("cavity reports usage and run failures distinctly") {
  temp_dir tmp;
  CHECK(run_cmd(sforge_bin + " cavity").status == 2);
  CHECK(run_cmd(sforge_bin + " cavity --config").status == 2);
  CHECK(run_cmd(sforge_bin + " cavity --config x.cfg --mode turbo").status == 2);
  CHECK(run_cmd(sforge_bin + " cavity --config /nonexistent.cfg").status == 1);

  write_file(tmp.file("bad.cfg"), "omega = 2.5\n");
  const auto bad = run_cmd(sforge_bin + " cavity --config " + tmp.file("bad.cfg"));
  CHECK(bad.status == 1);
  CHECK_THAT(bad.text, ContainsSubstring("line 1"));

  write_file(tmp.file("short.cfg"),
             "nx = 17\nny = 17\nnz = 3\nsteady_tol = 1e-12\nmax_steps = 2\n"
             "profiles_out = " + tmp.file("profiles.csv") + "\n"
             "residuals_out = " + tmp.file("residuals.csv") + "\n");
  const auto unsteady = run_cmd(sforge_bin + " cavity --config " + tmp.file("short.cfg"));
  CHECK(unsteady.status == 1);
  CHECK_THAT(unsteady.text, ContainsSubstring("not steady after 2 steps"));
}

TEST_CASE("validate compares computed profiles against a reference") {
  temp_dir tmp;
  cfd::profile_tables comp = sample_tables();
  {
    std::ofstream out(tmp.file("profiles.csv"), std::ios::binary);
    cli::write_profiles(out, comp, {"computed"});
  }
  cfd::profile_tables ref = sample_tables();
  ref.u_of_y[2][1] += 0.02;
  {
    std::ofstream out(tmp.file("reference.csv"), std::ios::binary);
    cli::write_profiles(out, ref, {"reference"});
  }
  const std::string base = sforge_bin + " validate --profiles " + tmp.file("profiles.csv") +
                           " --reference " + tmp.file("reference.csv") + " --tol ";

  const auto pass = run_cmd(base + "0.03");
  INFO(pass.text);
  CHECK(pass.status == 0);
  CHECK_THAT(pass.text, ContainsSubstring("PASS") && ContainsSubstring("max abs deviation"));

  const auto fail = run_cmd(base + "0.01");
  CHECK(fail.status == 1);
  CHECK_THAT(fail.text, ContainsSubstring("FAIL"));

  // pure: the same invocation prints the same bytes
  CHECK(run_cmd(base + "0.03").text == pass.text);

  CHECK(run_cmd(sforge_bin + " validate --profiles a.csv").status == 2);
  CHECK(run_cmd(sforge_bin + " validate --profiles a.csv --reference b.csv --tol -1").status == 2);
}

TEST_CASE("bench emits a table and a csv and checks mode checksums") {
  temp_dir tmp;
  write_file(tmp.file("bench.cfg"), "nx = 12\nny = 12\nnz = 4\nsymmetry_z = false\n");
  const auto r = run_cmd(sforge_bin + " bench --config " + tmp.file("bench.cfg") +
                         " --workers 1,2 --modes plain,overlap --steps 2 --out " +
                         tmp.file("bench.csv"));
  INFO(r.text);
  REQUIRE(r.status == 0);
  CHECK_THAT(r.text, ContainsSubstring("workers") && ContainsSubstring("overlap"));
  std::istringstream csv(slurp(tmp.file("bench.csv")));
  std::string line;
  REQUIRE(std::getline(csv, line));
  CHECK_THAT(line, ContainsSubstring("workers,mode,"));
  int rows = 0;
  std::set<std::string> sums;
  while (std::getline(csv, line)) {
    ++rows;
    sums.insert(line.substr(line.rfind(',') + 1));
  }
  CHECK(rows == 4);
  CHECK(sums.size() == 1);  // plain and overlap agree at every worker count

  CHECK(run_cmd(sforge_bin + " bench").status == 2);
  CHECK(run_cmd(sforge_bin + " bench --config x --steps 0").status == 2);
}

TEST_CASE("the top-level command grammar is enforced") {
  const auto none = run_cmd(sforge_bin);
  CHECK(none.status == 2);
  CHECK_THAT(none.text, ContainsSubstring("usage:") && ContainsSubstring("gen") &&
                            ContainsSubstring("cavity") && ContainsSubstring("validate") &&
                            ContainsSubstring("bench"));
  CHECK(run_cmd(sforge_bin + " frobnicate").status == 2);
  CHECK(run_cmd(sforge_bin + " --help").status == 0);
}
