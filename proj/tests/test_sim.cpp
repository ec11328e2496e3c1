#include <random>
#include <set>
#include <sstream>

#include "doctest.h"
#include "cnnmap/error.hpp"
#include "cnnmap/manifest.hpp"
#include "cnnmap/sim.hpp"
#include "cnnmap/traversal.hpp"

using namespace cnnmap;

namespace {

ConvLayer toy() { return ConvLayer::make("L0", 4, 10, 10, 3, 3, 8, 1); }

Mapping single(const ConvLayer& l, const PlatformConfig& p, const Tiling& t) {
  return build_mapping(l, p, 1, {l.n_of, l.n_ox}, t, Objective::kMinComp);
}

std::string csv(const SimReport& r) {
  std::ostringstream out;
  write_report_csv(out, r);
  return out.str();
}

}  // namespace

TEST_CASE("mesh sizing and roles") {
  CHECK(mesh_for_cores(1) == std::pair{3, 1});
  CHECK(mesh_for_cores(2) == std::pair{2, 2});
  CHECK(mesh_for_cores(7) == std::pair{3, 3});
  CHECK(mesh_for_cores(14) == std::pair{4, 4});
  CHECK(mesh_for_cores(23) == std::pair{5, 5});
  const auto p = PlatformConfig::for_cores(23);
  CHECK(p.core_count() == 23);
  CHECK(p.role({0, 0}) == NodeRole::kMaster);
  CHECK(p.role({2, 2}) == NodeRole::kDram);
  CHECK(p.clock_ratio() == 2);
  CHECK(p.core_config().bw_dram_words == 8);

  const auto few = PlatformConfig::for_cores(4);
  CHECK(few.core_count() == 4);
  CHECK(few.nodes() == 6);
}

TEST_CASE("platform file round trip and errors") {
  const auto p = parse_platform("cores = 14\nmax_packet_len = 20\np_ox = 8\np_of = 4\nsram_cycles = per-word\n");
  CHECK(p.core_count() == 14);
  CHECK(p.max_packet_len == 20);
  CHECK(p.core.p_ox == 8);
  CHECK(p.core.sram_model == SramCycleModel::kPerWord);
  const auto q = parse_platform(serialize_platform(p));
  CHECK(q.roles == p.roles);
  CHECK(q.core == p.core);
  CHECK(q.max_packet_len == p.max_packet_len);
  CHECK(parse_platform("mesh = 5x5\n").core_count() == 23);

  CHECK_THROWS_AS(parse_platform("cores = 2\nmesh = 3x3\n"), ParseError);
  CHECK_THROWS_AS(parse_platform("colour = red\n"), ParseError);
  CHECK_THROWS_AS(parse_platform("f_core_hz = 300e6\n"), Error);
  CHECK_THROWS_AS(parse_platform("p_ox = 3\n"), Error);
}

TEST_CASE("walker issues no psum traffic without input-channel tiling") {
  const auto l = toy();
  LoopNestWalker w(l, Tiling::make(l, 4, 4, 3), CoreConfig{});
  TraversalStep s;
  int64_t words = 0;
  while (w.next(s)) {
    if (s.type != TraversalStep::Type::kDma) continue;
    CHECK(s.kind != DmaKind::kPsumInit);
    CHECK(s.kind != DmaKind::kPsumNext);
    words += s.words;
  }
  CHECK(words == total_cycles(l, Tiling::make(l, 4, 4, 3), CoreConfig{}).n_dram());
}

TEST_CASE("compute waits for the blocking loads") {
  const auto l = toy();
  LoopNestWalker w(l, Tiling::make(l, 8, 2, 8), CoreConfig{});
  TraversalStep s;
  std::set<int64_t> pending;
  std::set<int64_t> covered;
  bool computed = false;
  while (w.next(s)) {
    if (s.type == TraversalStep::Type::kDma && is_blocking(s.kind)) pending.insert(s.seq);
    if (s.type == TraversalStep::Type::kAwait)
      for (int64_t q = s.await_first; q <= s.await_last; ++q) covered.insert(q);
    if (s.type == TraversalStep::Type::kCompute) {
      for (auto q : pending) CHECK(covered.count(q) == 1);
      computed = true;
    }
  }
  CHECK(computed);
}

TEST_CASE("ideal transport reproduces the analytical cycle count") {
  std::mt19937 rng(2);
  const auto p = PlatformConfig::for_cores(1, CoreConfig::with_unrolling(4, 4));
  const auto core = p.core_config();
  for (int n = 0; n < 40; ++n) {
    const int64_t k = rng() % 3 + 1, s = rng() % 3 + 1;
    const int64_t n_ox = rng() % 10 + 1, n_oy = rng() % 5 + 1;
    const auto l = ConvLayer::make("r", rng() % 9 + 1, (n_oy - 1) * s + k, (n_ox - 1) * s + k, k, k, rng() % 9 + 1, s);
    const auto t = Tiling::make(l, rng() % l.n_of + 1, rng() % l.n_if + 1, rng() % l.n_ox + 1);
    const auto expect = total_cycles(l, t, core).c_total;
    CHECK(zero_latency_cycles(l, t, core) == expect);
    SimOptions opt;
    opt.ideal_transport = true;
    CHECK(run_layer(p, single(l, p, t), opt).core_cycles == expect);
  }
}

TEST_CASE("single-core simulation tracks the analytical model") {
  const auto p = PlatformConfig::for_cores(1, CoreConfig::with_unrolling(4, 4));
  const auto l = toy();
  const auto sol = optimize(l, p.core_config(), Objective::kMinComp);
  const auto rep = run_layer(p, single(l, p, sol.tiling));
  const double ratio = static_cast<double>(rep.core_cycles) / static_cast<double>(sol.cost.c_total);
  CHECK(ratio >= 0.9);
  CHECK(ratio <= 1.1);
  CHECK(rep.flits_injected == rep.flits_delivered);
  CHECK(rep.hop_mismatches == 0);
  CHECK(rep.dram_max_bits_per_cycle <= 64);
  CHECK(rep.dram_words() == sol.cost.n_dram());
  REQUIRE(rep.cores.size() == 1);
  CHECK(rep.cores[0].macs == sol.cost.n_mac);
  CHECK(rep.cores[0].sram_ld_words == sol.cost.n_sram_ld);
  CHECK(rep.cores[0].sram_st_words == sol.cost.n_sram_st);
  // configuration: header + size + two descriptor flits over three routers
  CHECK(rep.cores[0].start_cycle == (4 * 3 + 4 + 1) / 2);
}

TEST_CASE("many-core simulation conserves flits and respects the DRAM bus") {
  const auto p = PlatformConfig::full_mesh(3, 3, CoreConfig::with_unrolling(4, 4));
  const auto l = ConvLayer::make("m", 6, 10, 18, 3, 3, 16, 1);
  for (int k : {1, 2, 4, 7}) {
    const auto sub = slice_to_sublayer(l, {0, 0, 4, 4});
    const auto t = optimize(sub, p.core_config(), Objective::kMinComp).tiling;
    const auto m = build_mapping(l, p, k, {4, 4}, t, Objective::kMinComp);
    const auto rep = run_layer(p, m);
    CHECK(rep.active_cores == m.active_cores());
    CHECK(rep.cores.size() == static_cast<std::size_t>(m.active_cores()));
    CHECK(rep.flits_injected == rep.flits_delivered);
    CHECK(rep.hop_mismatches == 0);
    CHECK(rep.dram_max_bits_per_cycle <= 64);
    CHECK(rep.dram_words() == m.dram_words);
    int64_t macs = 0;
    for (const auto& c : rep.cores) {
      macs += c.macs;
      const int d = manhattan(p.master(), c.node);
      CHECK(c.start_cycle * 2 >= 4 * (d + 1) + 4);
    }
    CHECK(macs > 0);
    CHECK(rep.core_cycles >= m.max_core_cycles);
    for (const auto& r : rep.routers) CHECK(r.counters.flits_in == r.counters.flits);
  }
}

TEST_CASE("simulation is deterministic and consumes the manifest") {
  const auto p = PlatformConfig::full_mesh(3, 3, CoreConfig::with_unrolling(4, 4));
  const auto l = ConvLayer::make("m", 3, 8, 14, 3, 3, 8, 1);
  const auto res = wave_allocate(l, p, Objective::kMinComp);
  const auto a = run(p, {res.best});
  const auto b = run(p, parse_manifest(write_manifest({res.best})));
  CHECK(csv(a) == csv(b));
  CHECK(a.total_noc_cycles() == b.total_noc_cycles());
}

TEST_CASE("layers run back to back") {
  const auto p = PlatformConfig::for_cores(1, CoreConfig::with_unrolling(4, 4));
  const auto l = toy();
  const auto m = single(l, p, Tiling::make(l, 8, 4, 8));
  const auto one = run(p, {m});
  const auto two = run(p, {m, m});
  REQUIRE(two.layers.size() == 2);
  CHECK(two.total_noc_cycles() == 2 * one.total_noc_cycles());
}

TEST_CASE("invalid mappings are rejected") {
  const auto p = PlatformConfig::full_mesh(3, 3, CoreConfig::with_unrolling(4, 4));
  const auto l = toy();
  auto m = build_mapping(l, p, 2, {4, 8}, Tiling::make(slice_to_sublayer(l, {0, 0, 4, 8}), 4, 4, 8), Objective::kMinComp);
  auto bad_node = m;
  bad_node.cores[0].node = p.dram();
  CHECK_THROWS_AS(run_layer(p, bad_node), ConfigError);
  auto overlap = m;
  overlap.cores[1].items = overlap.cores[0].items;
  CHECK_THROWS_AS(run_layer(p, overlap), ConfigError);
  auto missing = m;
  missing.cores.pop_back();
  CHECK_THROWS_AS(run_layer(p, missing), ConfigError);
}

TEST_CASE("packet length override") {
  const auto p = PlatformConfig::for_cores(1, CoreConfig::with_unrolling(4, 4));
  const auto l = toy();
  const auto m = single(l, p, Tiling::make(l, 8, 4, 8));
  SimOptions big;
  big.packet_len_override = 10000;
  const auto a = run_layer(p, m);
  const auto b = run_layer(p, m, big);
  CHECK(b.packets < a.packets);
  CHECK(b.dram_words() == a.dram_words());
}

TEST_CASE("flit trace") {
  const auto p = PlatformConfig::for_cores(1, CoreConfig::with_unrolling(4, 4));
  const auto l = toy();
  std::ostringstream trace;
  SimOptions opt;
  opt.trace = &trace;
  run_layer(p, single(l, p, Tiling::make(l, 8, 4, 8)), opt);
  std::istringstream in(trace.str());
  std::string line;
  int64_t lines = 0;
  while (std::getline(in, line)) ++lines;
  CHECK(lines > 0);
}
