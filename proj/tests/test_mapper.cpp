#include <algorithm>
#include <numeric>
#include <random>

#include "doctest.h"
#include "oracle.hpp"
#include "cnnmap/error.hpp"
#include "cnnmap/manifest.hpp"
#include "cnnmap/mapper.hpp"
#include "cnnmap/packet.hpp"
#include "cnnmap/traversal.hpp"

using namespace cnnmap;

namespace {

ConvLayer toy() { return ConvLayer::make("L0", 4, 10, 10, 3, 3, 8, 1); }

int64_t sum(const std::vector<int64_t>& v) { return std::accumulate(v.begin(), v.end(), int64_t{0}); }

}  // namespace

TEST_CASE("packetization") {
  const PacketRule rule;
  CHECK(rule.words_per_flit() == 4);
  CHECK(rule.max_payload_words() == 152);
  CHECK(packetize(512, rule) == std::vector<int64_t>{40, 40, 40, 16});
  CHECK(packetize(1, rule) == std::vector<int64_t>{3});
  CHECK(packetize(0, rule).empty());
  CHECK(packetize(152, rule) == std::vector<int64_t>{40});
  CHECK(packetize(153, rule) == std::vector<int64_t>{40, 3});
  for (int64_t w = 0; w < 700; ++w) {
    CHECK(packetized_flits(w, rule) == sum(packetize(w, rule)));
    CHECK(packet_count(w, rule) == static_cast<int64_t>(packetize(w, rule).size()));
  }
}

TEST_CASE("slice candidates") {
  const auto l = toy();
  const auto core = CoreConfig::with_unrolling(4, 4);
  const auto c = slice_candidates(l, core);
  CHECK(c == std::vector<SliceShape>{{4, 4}, {4, 8}, {8, 4}, {8, 8}});

  const auto narrow = ConvLayer::make("n", 1, 5, 5, 3, 3, 4, 1);
  const auto cn = slice_candidates(narrow, core);
  REQUIRE(cn.size() == 1);
  CHECK(cn[0] == SliceShape{4, 3});
}

TEST_CASE("slice counts and ragged slices") {
  const auto l = toy();
  CHECK(slice_counts(l, 8, 4).s_ox == 2);
  CHECK(slice_counts(l, 8, 4).s_of == 1);
  const auto wide = ConvLayer::make("w", 1, 3, 12, 3, 3, 8, 1);
  CHECK(slice_counts(wide, 8, 4).s_ox == 3);
  const auto slices = make_slices(wide, {8, 4});
  REQUIRE(slices.size() == 3);
  CHECK(slices.back().t_ox == 2);
  CHECK(slices.back().x0 == 8);
}

TEST_CASE("slice to sub-layer") {
  const auto l = toy();
  const auto sub = slice_to_sublayer(l, {0, 0, 4, 4});
  CHECK(sub.n_of == 4);
  CHECK(sub.n_ox == 4);
  CHECK(sub.n_ix == 6);
  CHECK(sub.n_if == l.n_if);
  CHECK(sub.n_iy == l.n_iy);
  CHECK(slice_to_sublayer(l, {0, 0, 8, 8}) == l);

  const auto wide = ConvLayer::make("w", 1, 3, 12, 3, 3, 8, 1);
  const auto last = slice_to_sublayer(wide, make_slices(wide, {8, 4}).back());
  CHECK(last.n_ox == 2);
  CHECK(last.n_ix == 4);
  CHECK_THROWS_AS(slice_to_sublayer(l, {0, 6, 4, 4}), ConfigError);
}

TEST_CASE("slices tile the output plane exactly") {
  std::mt19937 rng(3);
  for (int n = 0; n < 40; ++n) {
    const int64_t n_of = rng() % 20 + 1, n_ox = rng() % 20 + 1;
    const auto l = ConvLayer::make("p", 1, 3, n_ox + 2, 3, 3, n_of, 1);
    const SliceShape shape{static_cast<int64_t>(rng() % n_of + 1), static_cast<int64_t>(rng() % n_ox + 1)};
    std::vector<int> hit(static_cast<std::size_t>(n_of * n_ox), 0);
    for (const auto& s : make_slices(l, shape)) {
      for (int64_t o = s.of0; o < s.of0 + s.t_of; ++o)
        for (int64_t x = s.x0; x < s.x0 + s.t_ox; ++x) ++hit[static_cast<std::size_t>(o * n_ox + x)];
    }
    CHECK(std::all_of(hit.begin(), hit.end(), [](int h) { return h == 1; }));
  }
}

TEST_CASE("stitching of adjacent slices") {
  const auto l = ConvLayer::make("s", 1, 3, 18, 3, 3, 8, 1);  // n_ox = 16

  const auto four = make_slices(l, {8, 4});
  auto two = stitch_adjacent(four, 2);
  REQUIRE(two.size() == 2);
  CHECK(two[0] == std::vector<Slice>{{0, 0, 8, 8}});
  CHECK(two[1] == std::vector<Slice>{{0, 8, 8, 8}});

  auto many = stitch_adjacent(four, 7);
  REQUIRE(many.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) CHECK(many[i] == std::vector<Slice>{four[i]});

  const auto l6 = ConvLayer::make("s6", 1, 3, 14, 3, 3, 8, 1);  // n_ox = 12
  const auto six = make_slices(l6, {4, 4});
  REQUIRE(six.size() == 6);
  const auto per_core = stitch_adjacent(six, 2);
  REQUIRE(per_core.size() == 2);
  CHECK(per_core[0] == std::vector<Slice>{{0, 0, 4, 12}});
  CHECK(per_core[1] == std::vector<Slice>{{4, 0, 4, 12}});

  // one filter load per output-channel tile on each core
  const auto core = CoreConfig::with_unrolling(4, 4);
  for (const auto& regions : per_core) {
    const auto item = make_work_item(l6, regions[0], Tiling::make(slice_to_sublayer(l6, six[0]), 4, 1, 4));
    LoopNestWalker w(item.sublayer, item.tiling, core);
    TraversalStep s;
    int filters = 0;
    while (w.next(s)) filters += s.type == TraversalStep::Type::kDma && s.kind == DmaKind::kFilters;
    CHECK(filters == 1);
  }

  // remainders go to the first cores
  const auto five = make_slices(ConvLayer::make("f", 1, 3, 7, 3, 3, 1, 1), {1, 1});
  const auto r = stitch_adjacent(five, 2);
  CHECK(r[0] == std::vector<Slice>{{0, 0, 1, 3}});
  CHECK(r[1] == std::vector<Slice>{{0, 3, 1, 2}});
}

TEST_CASE("packet list of a work item") {
  CHECK(enumerate_packets({}, CoreConfig{}, PacketRule{}).empty());

  const auto l = toy();
  const auto core = CoreConfig::with_unrolling(4, 4);
  const auto item = make_work_item(l, {0, 0, 8, 8}, Tiling::make(l, 8, 4, 8));
  const auto pk = enumerate_packets({item}, core, PacketRule{});
  for (auto len : pk) {
    CHECK(len >= 3);
    CHECK(len <= 40);
  }
  const auto t = traffic_summary(item, PacketRule{});
  CHECK(t.read_words + t.write_words == total_cycles(l, item.tiling, core).n_dram());
}

TEST_CASE("closed-form traffic equals the walked packet list") {
  std::mt19937 rng(11);
  const PacketRule rule{64, 16, 12};
  for (int n = 0; n < 60; ++n) {
    const int64_t k = rng() % 3 + 1, s = rng() % 3 + 1;
    const int64_t n_ox = rng() % 9 + 1, n_oy = rng() % 4 + 1;
    const auto l = ConvLayer::make("r", rng() % 7 + 1, (n_oy - 1) * s + k, (n_ox - 1) * s + k, k, k, rng() % 7 + 1, s);
    const Slice region{0, 0, l.n_of, l.n_ox};
    const auto t = Tiling::make(l, rng() % l.n_of + 1, rng() % l.n_if + 1, rng() % l.n_ox + 1);
    const auto item = make_work_item(l, region, t);
    const auto pk = enumerate_packets({item}, CoreConfig{}, rule);
    const auto sum_t = traffic_summary(item, rule);
    CHECK(sum_t.flits == sum(pk));
    CHECK(sum_t.packets == static_cast<int64_t>(pk.size()));
    CHECK(sum_t.read_words + sum_t.write_words == total_cycles(l, t, CoreConfig{}).n_dram());
  }
}

TEST_CASE("mapping cost") {
  CHECK(mapping_cost({3200, 3000}, 800, 64, 2) == 3600);
  CHECK(mapping_cost({1234}, 0, 64, 2) == 1234);
  CHECK(mapping_cost({3200, 3000}, 1600, 64, 2) - 3200 == 2 * (3600 - 3200));
}

TEST_CASE("wave steps and schedule") {
  CHECK(wave_steps(7) == std::vector<int>{1, 2, 4, 7});
  CHECK(wave_steps(1) == std::vector<int>{1});
  CHECK(wave_steps(16) == std::vector<int>{1, 2, 4, 8, 16});

  const auto p = PlatformConfig::full_mesh(5, 5);
  const auto sched = wave_schedule(p);
  REQUIRE(sched.back().size() == 23);
  for (std::size_t i = 1; i < sched.size(); ++i) {
    CHECK(std::equal(sched[i - 1].begin(), sched[i - 1].end(), sched[i].begin()));
  }
  const auto order = p.cores_by_distance();
  for (std::size_t i = 1; i < order.size(); ++i) {
    const int da = manhattan(order[i - 1], p.dram()), db = manhattan(order[i], p.dram());
    CHECK((da < db || (da == db && p.index(order[i - 1]) < p.index(order[i]))));
  }
}

TEST_CASE("wave allocation equals an exhaustive re-evaluation") {
  const auto l = toy();
  const auto p = PlatformConfig::full_mesh(3, 3, CoreConfig::with_unrolling(4, 4));
  const CoreConfig core = p.core_config();
  const auto res = wave_allocate(l, p, Objective::kMinComp);
  const auto nodes = p.cores_by_distance();

  int64_t best = -1;
  std::size_t seen = 0;
  for (int64_t t_of : {4, 8}) {
    for (int64_t t_ox : {4, 8}) {
      const auto sub = ConvLayer::make("s", l.n_if, l.n_iy, (t_ox - 1) + 3, 3, 3, t_of, 1);
      const auto opt = oracle::brute_force(sub, core, Objective::kMinComp);
      for (int k : {1, 2, 4, 7}) {
        // block split of the (of, x)-ordered slices
        std::vector<Slice> slices;
        for (int64_t o = 0; o < l.n_of; o += t_of)
          for (int64_t x = 0; x < l.n_ox; x += t_ox) slices.push_back({o, x, std::min(t_of, l.n_of - o), std::min(t_ox, l.n_ox - x)});
        const int used = std::min<int>(k, static_cast<int>(slices.size()));
        int64_t max_cycles = 0, flits = 0;
        std::size_t next = 0;
        for (int c = 0; c < used; ++c) {
          const std::size_t n = slices.size() / used + (c < static_cast<int>(slices.size() % used));
          std::vector<Slice> mine(slices.begin() + static_cast<long>(next), slices.begin() + static_cast<long>(next + n));
          next += n;
          std::vector<Slice> merged;
          for (const auto& s : mine) {
            if (!merged.empty() && merged.back().of0 == s.of0 && merged.back().x0 + merged.back().t_ox == s.x0)
              merged.back().t_ox += s.t_ox;
            else
              merged.push_back(s);
          }
          int64_t cycles = 0;
          std::vector<WorkItem> items;
          for (const auto& r : merged) {
            const auto rsub = ConvLayer::make("r", l.n_if, l.n_iy, (r.t_ox - 1) + 3, 3, 3, r.t_of, 1);
            const int64_t tof = std::min(opt.t_of, r.t_of), tox = std::min(opt.t_ox, r.t_ox);
            cycles += oracle::evaluate(rsub, tof, opt.t_if, tox, core).c_comp_all;
            items.push_back({r, slice_to_sublayer(l, r), Tiling::make(slice_to_sublayer(l, r), tof, opt.t_if, tox)});
          }
          max_cycles = std::max(max_cycles, cycles);
          flits += sum(enumerate_packets(items, core, p.packet_rule()));
        }
        const int64_t cost = max_cycles + oracle::cdiv(flits * 64, 128);
        const auto it = std::find_if(res.candidates.begin(), res.candidates.end(), [&](const CandidateCost& c) {
          return c.k == k && c.shape == SliceShape{t_of, t_ox};
        });
        REQUIRE(it != res.candidates.end());
        CHECK(it->cost == cost);
        ++seen;
        if (best < 0 || cost < best) best = cost;
      }
    }
  }
  CHECK(seen == res.candidates.size());
  CHECK(res.best.cost == best);
  for (const auto& c : res.candidates) {
    if (c.shape == res.best.shape && c.k == 7) CHECK(res.best.cost <= c.cost);
  }
  CHECK(res.best.active_cores() <= 7);
  for (std::size_t i = 0; i < res.best.cores.size(); ++i) CHECK(res.best.cores[i].node == nodes[i]);
}

TEST_CASE("single-core platform degenerates to slice-shape search") {
  const auto l = toy();
  const auto p = PlatformConfig::for_cores(1, CoreConfig::with_unrolling(4, 4));
  const auto res = wave_allocate(l, p, Objective::kMinDram);
  CHECK(res.best.k == 1);
  CHECK(res.candidates.size() == slice_candidates(l, p.core_config()).size());
}

TEST_CASE("theoretical bound") {
  Mapping m;
  m.max_core_cycles = 3200;
  m.dram_words = 1208;
  CHECK(theoretical_bound(32520, m, 8) == doctest::Approx(10.1625));
  m.dram_words = 80000;
  CHECK(theoretical_bound(32520, m, 8) == doctest::Approx(3.252));
}

TEST_CASE("manifest round trip") {
  const auto l = toy();
  const auto p = PlatformConfig::full_mesh(3, 3, CoreConfig::with_unrolling(4, 4));
  std::vector<Mapping> ms;
  for (int k : {1, 2, 7}) ms.push_back(build_mapping(l, p, k, {4, 4}, Tiling::make(slice_to_sublayer(l, {0, 0, 4, 4}), 4, 2, 3), Objective::kMinDram));
  const auto text = write_manifest(ms);
  const auto back = parse_manifest(text);
  REQUIRE(back.size() == ms.size());
  for (std::size_t i = 0; i < ms.size(); ++i) {
    CHECK(back[i].layer == ms[i].layer);
    CHECK(back[i].k == ms[i].k);
    CHECK(back[i].cost == ms[i].cost);
    CHECK(back[i].objective == ms[i].objective);
    REQUIRE(back[i].cores.size() == ms[i].cores.size());
    for (std::size_t c = 0; c < ms[i].cores.size(); ++c) {
      CHECK(back[i].cores[c].node == ms[i].cores[c].node);
      REQUIRE(back[i].cores[c].items.size() == ms[i].cores[c].items.size());
      for (std::size_t j = 0; j < ms[i].cores[c].items.size(); ++j) {
        CHECK(back[i].cores[c].items[j].region == ms[i].cores[c].items[j].region);
        CHECK(back[i].cores[c].items[j].tiling == ms[i].cores[c].items[j].tiling);
        CHECK(back[i].cores[c].items[j].sublayer == ms[i].cores[c].items[j].sublayer);
      }
    }
  }
  CHECK(write_manifest(back) == text);
  CHECK_THROWS_AS(parse_manifest("mapping layer=x\n"), ParseError);
}
