#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "cnnmap/error.hpp"
#include "cnnmap/experiments.hpp"

using namespace cnnmap;
namespace fs = std::filesystem;

namespace {

Network tiny() {
  return parse_network(
      "network tiny\n"
      "layer name=a n_if=3 n_iy=12 n_ix=12 n_ky=3 n_kx=3 n_of=16 stride=1\n"
      "layer name=b n_if=16 n_iy=8 n_ix=8 n_ky=3 n_kx=3 n_of=16 stride=1\n"
      "layer name=c n_if=16 n_iy=8 n_ix=8 n_ky=3 n_kx=3 n_of=16 stride=1\n");
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string first_line(const std::string& s) { return s.substr(0, s.find('\n')); }

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("cnnmap_test_" + name);
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("capability splits") {
  const auto c16 = capability_config(16);
  CHECK(c16.core.p_ox == 16);
  CHECK(c16.core.p_of == 8);
  CHECK(16 * 16 * 8 == kCapabilityMacs);
  const auto c128 = capability_config(128);
  CHECK(c128.core.p_ox * c128.core.p_of == 16);
  CHECK(c128.core.d_sram_words * c128.core.word_bits / 8 == 8 * 1024);
  for (int n : {2, 4, 16, 32, 64, 128}) CHECK_NOTHROW(validate_capability(capability_config(n)));
  auto bad = capability_config(16);
  bad.core.p_of = 4;
  CHECK_THROWS_AS(validate_capability(bad), ConfigError);
  CHECK_THROWS_AS(capability_config(3), ConfigError);
}

TEST_CASE("single-core report") {
  ExperimentOptions opt;
  const auto rows = run_single_core(tiny(), PlatformConfig::for_cores(1), {Objective::kMinComp, Objective::kMinDram}, opt);
  REQUIRE(rows.size() == 6);
  for (std::size_t i = 0; i < rows.size(); i += 2) {
    CHECK(rows[i].objective == Objective::kMinComp);
    CHECK(rows[i + 1].objective == Objective::kMinDram);
    CHECK(rows[i].sim.dram_words() >= rows[i + 1].sim.dram_words());
    CHECK(rows[i].runtime_ms > 0);
    CHECK(rows[i].energy_mj > 0);
  }
  const auto a = scratch("sc_a"), b = scratch("sc_b");
  emit_single_core(a, rows);
  emit_single_core(b, run_single_core(tiny(), PlatformConfig::for_cores(1), {Objective::kMinComp, Objective::kMinDram}, opt));
  const auto text = slurp(a / "single_core.csv");
  CHECK(first_line(text) == "layer,objective,runtime_ms,dram_mbyte,energy_mj");
  CHECK(text == slurp(b / "single_core.csv"));
  CHECK(fs::exists(a / "summary.txt"));
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("runtime and transfer units") {
  CHECK(runtime_ms(500000, 500e6) == doctest::Approx(1.0));
  CHECK(mbyte(int64_t{1} << 19, 16) == doctest::Approx(1.0));
}

TEST_CASE("scaling report") {
  ExperimentOptions opt;
  const auto dir = scratch("scaling");
  opt.manifest_dir = dir / "manifests";
  const auto rows = run_core_scaling(tiny(), {1, 2, 4}, CoreConfig::with_unrolling(4, 4), opt);
  REQUIRE(rows.size() == 9);
  for (const auto& r : rows) {
    CHECK(r.speedup > 0);
    CHECK(r.speedup <= r.bound * 1.01);
    CHECK(r.alloc_cores <= r.cores);
    CHECK(r.sim.flits_injected == r.sim.flits_delivered);
  }
  emit_scaling(dir, rows);
  CHECK(first_line(slurp(dir / "scaling.csv")) == "layer,cores,speedup,alloc_cores,bound");
  CHECK(!fs::is_empty(dir / "manifests"));
  fs::remove_all(dir);
}

TEST_CASE("constant-capability report") {
  ExperimentOptions opt;
  const auto rows = run_constant_capability(tiny(), {capability_config(16), capability_config(32)}, opt);
  CHECK(rows.size() == 2 * group_layers(tiny()).size());
  const auto dir = scratch("cc");
  emit_capability(dir, rows);
  CHECK(first_line(slurp(dir / "const_cap.csv")) == "group,cores,p_ox,p_of,d_sram_words,alloc_cores,runtime_ms");
  fs::remove_all(dir);
}

TEST_CASE("infeasible layers propagate") {
  auto p = PlatformConfig::for_cores(1);
  p.core.d_sram_words = 20;
  CHECK_THROWS_AS(run_single_core(tiny(), p, {Objective::kMinComp}, ExperimentOptions{}), InfeasibleError);
}
