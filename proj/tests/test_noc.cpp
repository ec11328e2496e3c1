#include <algorithm>
#include <random>
#include <sstream>

#include "doctest.h"
#include "cnnmap/noc.hpp"

using namespace cnnmap;

namespace {

int32_t send(Noc& noc, Coord src, Coord dst, int32_t len) {
  PacketInfo p;
  p.src = src;
  p.dst = dst;
  p.length = len;
  p.produced = len;
  const auto id = noc.create_packet(p);
  noc.enqueue(id);
  return id;
}

int64_t drain(Noc& noc, int64_t from = 0, int64_t limit = 100000) {
  int64_t t = from;
  while (!noc.idle() && t < limit) noc.step(t++);
  return t;
}

class Gate : public Endpoint {
 public:
  int64_t open_at = 0;
  int64_t flits = 0;
  bool accept_header(int32_t, int64_t cycle) override { return cycle >= open_at; }
  void on_flit(int32_t, int32_t, int64_t) override { ++flits; }
};

}  // namespace

TEST_CASE("XY routing") {
  CHECK(route_xy({0, 0}, {2, 1}) == kEast);
  CHECK(route_xy({2, 0}, {2, 1}) == kSouth);
  CHECK(route_xy({2, 2}, {2, 1}) == kNorth);
  CHECK(route_xy({2, 1}, {0, 2}) == kWest);
  CHECK(route_xy({1, 1}, {1, 1}) == kLocal);
}

TEST_CASE("arbiter priority ring") {
  Arbiter a;
  CHECK(a.arbitrate((1 << kWest) | (1 << kSouth)) == kWest);

  Arbiter single;
  CHECK(single.arbitrate(1 << kLocal) == kLocal);
  CHECK(single.arbitrate(0) == -1);

  Arbiter fair;
  const uint8_t all = 0x1f;
  std::vector<int> grants;
  for (int i = 0; i < kPorts; ++i) grants.push_back(fair.arbitrate(all));
  std::sort(grants.begin(), grants.end());
  CHECK(grants == std::vector<int>{0, 1, 2, 3, 4});
}

TEST_CASE("idle-mesh latency is four cycles per router plus the packet length") {
  SUBCASE("two routers, ten flits") {
    Noc noc(3, 3, 16);
    const auto id = send(noc, {0, 0}, {1, 0}, 10);
    drain(noc);
    CHECK(noc.packet(id).delivered - noc.packet(id).injected == 2 * 4 + 10);
  }
  SUBCASE("random cases") {
    std::mt19937 rng(5);
    for (int n = 0; n < 25; ++n) {
      Noc noc(5, 5, 16);
      const Coord s{static_cast<int>(rng() % 5), static_cast<int>(rng() % 5)};
      const Coord d{static_cast<int>(rng() % 5), static_cast<int>(rng() % 5)};
      const auto len = static_cast<int32_t>(rng() % 38 + 3);
      const auto id = send(noc, s, d, len);
      drain(noc);
      const auto& p = noc.packet(id);
      CHECK(p.injected == 0);
      CHECK(p.delivered - p.injected == 4 * (manhattan(s, d) + 1) + len);
      CHECK(p.hops == manhattan(s, d));
      CHECK(noc.flits_injected() == noc.flits_delivered());
    }
  }
}

TEST_CASE("distinct outputs of one router stream concurrently") {
  Noc noc(3, 3, 16);
  const auto a = send(noc, {0, 1}, {2, 1}, 20);
  const auto b = send(noc, {1, 0}, {1, 2}, 20);
  drain(noc);
  // one grant per router and cycle, then both stream side by side
  CHECK(std::min(noc.packet(a).delivered, noc.packet(b).delivered) == 4 * 3 + 20);
  CHECK(std::max(noc.packet(a).delivered, noc.packet(b).delivered) == 4 * 3 + 20 + 1);
}

TEST_CASE("shared output serializes packets") {
  Noc noc(3, 1, 16);
  const auto a = send(noc, {0, 0}, {2, 0}, 10);
  const auto b = send(noc, {1, 0}, {2, 0}, 10);
  drain(noc);
  const auto& pa = noc.packet(a);
  const auto& pb = noc.packet(b);
  CHECK(std::max(pa.delivered, pb.delivered) >= std::min(pa.delivered, pb.delivered) + 10);
  CHECK(noc.flits_delivered() == 20);
}

TEST_CASE("a refusing endpoint backpressures without loss") {
  Noc noc(4, 1, 4);
  Gate gate;
  gate.open_at = 200;
  noc.attach({3, 0}, &gate);
  std::vector<int32_t> ids;
  for (int i = 0; i < 3; ++i) ids.push_back(send(noc, {0, 0}, {3, 0}, 30));
  const auto end = drain(noc);
  CHECK(end > 200);
  CHECK(gate.flits == 90);
  CHECK(noc.flits_injected() == 90);
  CHECK(noc.flits_delivered() == 90);
  for (int x = 0; x < 4; ++x) CHECK(noc.counters({x, 0}).max_occupancy <= 4);
  CHECK(noc.counters({1, 0}).blocked_flit_cycles > 0);
}

TEST_CASE("per-router flit conservation") {
  Noc noc(4, 4, 16);
  std::mt19937 rng(9);
  for (int n = 0; n < 40; ++n) {
    const Coord s{static_cast<int>(rng() % 4), static_cast<int>(rng() % 4)};
    const Coord d{static_cast<int>(rng() % 4), static_cast<int>(rng() % 4)};
    send(noc, s, d, static_cast<int32_t>(rng() % 20 + 3));
  }
  drain(noc);
  CHECK(noc.idle());
  CHECK(noc.flits_injected() == noc.flits_delivered());
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) CHECK(noc.counters({x, y}).flits_in == noc.counters({x, y}).flits);
  for (std::size_t i = 0; i < noc.packet_count(); ++i) {
    const auto& p = noc.packet(static_cast<int32_t>(i));
    CHECK(p.hops == manhattan(p.src, p.dst));
  }
}

TEST_CASE("traces are deterministic") {
  auto run = [] {
    std::ostringstream out;
    Noc noc(3, 3, 8);
    noc.set_trace(&out);
    std::mt19937 rng(1);
    for (int n = 0; n < 12; ++n) {
      send(noc, {static_cast<int>(rng() % 3), static_cast<int>(rng() % 3)},
           {static_cast<int>(rng() % 3), static_cast<int>(rng() % 3)}, static_cast<int32_t>(rng() % 12 + 3));
    }
    drain(noc);
    return out.str();
  };
  const auto a = run();
  CHECK(!a.empty());
  CHECK(a == run());
}
