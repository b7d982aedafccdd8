// stencilforge tests: execution plans and rendered kernel headers
// Copyright (c) 2026 the stencilforge authors
// Distributed under the MIT license; see the LICENSE file.

#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "stencilforge/codegen.hpp"
#include "support/sample_kernels.hpp"

using namespace sforge;
using sforge_tests::update_velocity_text;

static const std::set<std::string> cfd_fields = {"vx", "vy", "vz", "p", "divu"};

static ccl::kernel_descriptor golden_descriptor() {
  return ccl::validate(ccl::parse_descriptors(update_velocity_text)[0], cfd_fields);
}

TEST_CASE("plan carries tile, halo, bindings, and parameters from the descriptor") {
  auto plan = codegen::build_plan(golden_descriptor());
  CHECK(plan.kernel == "UPDATE_VELOCITY");
  CHECK(plan.tmpl == codegen::template_id::threedblock);
  CHECK(plan.tile == std::array<int, 3>{16, 16, 16});
  CHECK(plan.halo == std::array<int, 6>{1, 1, 1, 1, 1, 1});
  REQUIRE(plan.bindings.size() == 4);
  CHECK(plan.bindings[0] == codegen::binding{"vx", ccl::intent::separate_inout, true});
  CHECK(plan.bindings[1] == codegen::binding{"vy", ccl::intent::separate_inout, true});
  CHECK(plan.bindings[2] == codegen::binding{"vz", ccl::intent::separate_inout, true});
  CHECK(plan.bindings[3] == codegen::binding{"p", ccl::intent::in, true});
  CHECK(plan.parameters == std::vector<std::string>{"density"});
  CHECK(plan.max_halo() == 1);
  CHECK(plan.halo_lo(0) == 1);
  CHECK(plan.halo_hi(2) == 1);
}

TEST_CASE("halo comes from the stencil verbatim, per face") {
  std::string src = "CCTK_CUDA_KERNEL K TYPE=3DBLOCK STENCIL=\"1,2,0,3,4,0\" TILE=\"8,4,2\" "
                    "{ CCTK_CUDA_KERNEL_VARIABLE { p } \"X\" }\n";
  auto k = ccl::validate(ccl::parse_descriptors(src)[0], cfd_fields);
  auto plan = codegen::build_plan(k);
  CHECK(plan.halo == std::array<int, 6>{1, 2, 0, 3, 4, 0});
  CHECK(plan.tile == std::array<int, 3>{8, 4, 2});
  CHECK(plan.max_halo() == 4);
  CHECK(plan.halo_lo(1) == 0);
  CHECK(plan.halo_hi(1) == 3);
}

TEST_CASE("only the 3DBLOCK template is registered") {
  auto ts = codegen::list_templates();
  REQUIRE(ts.size() == 1);
  CHECK(ts[0] == codegen::template_id::threedblock);
  CHECK(codegen::template_name(ts[0]) == "3DBLOCK");
}

TEST_CASE("rendering is deterministic") {
  auto k = golden_descriptor();
  auto a = codegen::render_header(k, codegen::template_id::threedblock);
  auto b = codegen::render_header(k, codegen::template_id::threedblock);
  CHECK(a.text == b.text);
  CHECK(a.signature == b.signature);
  CHECK_FALSE(a.text.empty());
}

TEST_CASE("rendered header declares what the plan binds") {
  auto k = golden_descriptor();
  auto plan = codegen::build_plan(k);
  auto h = codegen::render_header(k, plan.tmpl);

  // Signature lists every plan binding as a field, every parameter, and one
  // index helper, in plan order.
  REQUIRE(h.signature.size() == plan.bindings.size() + plan.parameters.size() + 1);
  for (std::size_t i = 0; i < plan.bindings.size(); ++i) {
    CHECK(h.signature[i].name == plan.bindings[i].field);
    CHECK(h.signature[i].what == codegen::signature_entry::kind::field);
  }
  for (std::size_t i = 0; i < plan.parameters.size(); ++i) {
    const auto& e = h.signature[plan.bindings.size() + i];
    CHECK(e.name == plan.parameters[i]);
    CHECK(e.what == codegen::signature_entry::kind::parameter);
  }
  CHECK(h.signature.back().what == codegen::signature_entry::kind::index);

  // Accessor macros match intents: reads for readable intents, stores for
  // writable ones.
  CHECK(h.text.find("UPDATE_VELOCITY_LOAD_vx") != std::string::npos);
  CHECK(h.text.find("UPDATE_VELOCITY_STORE_vx") != std::string::npos);
  CHECK(h.text.find("UPDATE_VELOCITY_LOAD_p") != std::string::npos);
  CHECK(h.text.find("UPDATE_VELOCITY_STORE_p") == std::string::npos);
  CHECK(h.text.find("UPDATE_VELOCITY_PARAM_density") != std::string::npos);
  CHECK(h.text.find("UPDATE_VELOCITY_INDEX3") != std::string::npos);
  CHECK(h.text.find("_TILE_X 16") != std::string::npos);
  CHECK(h.text.find("_HALO_ZH 1") != std::string::npos);
}

TEST_CASE("an OUT binding renders a store macro but no load macro") {
  std::string src = "CCTK_CUDA_KERNEL K TYPE=3DBLOCK STENCIL=\"0,0,0,0,0,0\" TILE=\"4,4,4\" "
                    "{ CCTK_CUDA_KERNEL_VARIABLE INTENT=OUT { divu } \"D\" }\n";
  auto k = ccl::validate(ccl::parse_descriptors(src)[0], cfd_fields);
  auto h = codegen::render_header(k, codegen::template_id::threedblock);
  CHECK(h.text.find("K_STORE_divu") != std::string::npos);
  CHECK(h.text.find("K_LOAD_divu") == std::string::npos);
}

TEST_CASE("write_generated emits headers and a manifest, deterministically") {
  namespace fs = std::filesystem;
  auto read_file = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  std::string two = std::string(update_velocity_text) +
                    "CCTK_CUDA_KERNEL DIVERGENCE TYPE=3DBLOCK STENCIL=\"1,1,1,1,1,1\" "
                    "TILE=\"8,8,8\" { CCTK_CUDA_KERNEL_VARIABLE { vx, vy, vz } \"V\" "
                    "CCTK_CUDA_KERNEL_VARIABLE INTENT=OUT { divu } \"D\" }\n";
  auto kernels = ccl::validate_all(ccl::parse_descriptors(two), cfd_fields);

  fs::path dir = fs::temp_directory_path() / "sforge_codegen_test";
  fs::remove_all(dir);
  auto written = codegen::write_generated(kernels, dir);
  REQUIRE(written.size() == 3);
  CHECK(written[0].filename() == "UPDATE_VELOCITY.h.generated");
  CHECK(written[1].filename() == "DIVERGENCE.h.generated");
  CHECK(written[2].filename() == "plans.txt");
  for (const auto& p : written) CHECK(fs::exists(p));

  std::string manifest = read_file(written[2]);
  CHECK(manifest.find("kernel UPDATE_VELOCITY") != std::string::npos);
  CHECK(manifest.find("kernel DIVERGENCE") != std::string::npos);
  CHECK(manifest.find("tile 16 16 16") != std::string::npos);
  CHECK(manifest.find("halo 1 1 1 1 1 1") != std::string::npos);
  CHECK(manifest.find("binding vx intent=SEPARATEINOUT cached=YES") != std::string::npos);
  CHECK(manifest.find("binding divu intent=OUT cached=NO") != std::string::npos);
  CHECK(manifest.find("parameter density") != std::string::npos);
  CHECK(manifest.find("header DIVERGENCE.h.generated") != std::string::npos);

  std::string header_before = read_file(written[0]);
  auto again = codegen::write_generated(kernels, dir);
  CHECK(read_file(again[0]) == header_before);
  CHECK(read_file(again[2]) == manifest);
  fs::remove_all(dir);
}
