#pragma once

// Flit-level 2D-mesh network: wormhole routers with XY routing, per-port input
// buffers, credit flow control and a rotating-priority arbiter per router.
//
// Timing contract (NoC cycles). A network interface injects one flit per cycle;
// a flit sent in cycle t lands in the next buffer at t + 1 and may move again
// from t + 1 on. A header may cross a router 3 cycles after it landed there
// (so it lands in the next buffer 4 cycles after landing in this one), and
// body flits follow one per cycle. Credits freed in cycle t are usable at t + 1.
// An idle path over R routers delivers the last flit of an L-flit packet whose
// header was injected at t at t + 4R + L.

#include <array>
#include <cstdint>
#include <deque>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "cnnmap/platform.hpp"

namespace cnnmap {

enum Port : uint8_t { kEast = 0, kWest = 1, kNorth = 2, kSouth = 3, kLocal = 4 };
inline constexpr int kPorts = 5;
const char* to_string(Port p);

/// x first, then y; y grows southwards.
Port route_xy(Coord current, Coord dst);

/// Grants the first requester in ring order E, W, N, S, Local starting at the
/// current head; the head advances by one position after every grant.
class Arbiter {
 public:
  /// `requests` is a bit mask over Port; returns the granted port or -1.
  int arbitrate(uint8_t requests);
  int head() const { return head_; }

 private:
  int head_ = 0;
};

enum class PacketKind : uint8_t { kReadRequest, kWrite, kReadResponse, kService };
const char* to_string(PacketKind k);

struct PacketInfo {
  Coord src;
  Coord dst;
  PacketKind kind = PacketKind::kWrite;
  int32_t length = 0;     // flits, header and size flit included
  int64_t words = 0;      // payload words (requested words for a read request)
  int64_t tag = 0;        // correlation id chosen by the sender
  int64_t injected = -1;  // cycle the header left the interface
  int64_t delivered = -1; // cycle the tail landed at the destination interface
  int32_t hops = 0;       // router-to-router links crossed
  int32_t produced = 0;   // flits the sender has made available so far
};

/// Destination interface hooks. Ejection into an endpoint takes one flit per
/// cycle; an endpoint may refuse headers to backpressure the network.
class Endpoint {
 public:
  virtual ~Endpoint() = default;
  virtual bool accept_header(int32_t /*packet*/, int64_t /*cycle*/) { return true; }
  /// Flit `index` of `packet` lands at `cycle`.
  virtual void on_flit(int32_t packet, int32_t index, int64_t cycle) = 0;
  /// The sender's interface injected the last flit of `packet` in `cycle`.
  virtual void on_injected(int32_t /*packet*/, int64_t /*cycle*/) {}
};

struct RouterCounters {
  int64_t packets = 0;  // headers switched (one route + arbitration each)
  int64_t flits = 0;    // flits through the crossbar
  int64_t arbitrations = 0;
  int64_t blocked_flit_cycles = 0;  // ready head flits that could not move
  int64_t flits_in = 0;             // flits written into the input buffers
  int64_t max_occupancy = 0;        // largest input buffer fill seen
};

class Noc {
 public:
  Noc(int width, int height, int buffer_flits);

  int width() const { return w_; }
  int height() const { return h_; }

  /// Endpoints are owned by the caller; nodes without one accept everything.
  void attach(Coord node, Endpoint* endpoint);

  /// Registers a packet; `produced` flits are available for injection at once
  /// (pass the full length unless the sender streams them via produce()).
  int32_t create_packet(const PacketInfo& info);
  /// Appends a packet to the source node's injection queue (FIFO per node).
  void enqueue(int32_t packet);
  void produce(int32_t packet, int32_t flits);

  /// Advances one NoC cycle.
  void step(int64_t cycle);

  /// No flit buffered and nothing waiting for injection.
  bool idle() const { return buffered_ == 0 && injecting_ == 0; }
  /// Flits made available but not injected yet at `node`.
  int64_t backlog(Coord node) const;

  const PacketInfo& packet(int32_t id) const { return packets_[static_cast<std::size_t>(id)]; }
  std::size_t packet_count() const { return packets_.size(); }
  const RouterCounters& counters(Coord node) const { return routers_[index(node)].counters; }
  int64_t flits_injected() const { return flits_injected_; }
  int64_t flits_delivered() const { return flits_delivered_; }
  /// Flit movements so far (injections and crossbar traversals).
  int64_t moves() const { return moves_; }

  void set_trace(std::ostream* trace) { trace_ = trace; }
  /// Human-readable in-flight state for deadlock reports.
  std::string dump(int64_t cycle) const;

 private:
  struct Flit {
    int32_t packet;
    int32_t index;
    int64_t ready;
  };
  struct Buffer {
    std::vector<Flit> ring;
    int head = 0;
    int size = 0;
    const Flit& front() const { return ring[static_cast<std::size_t>(head)]; }
  };
  struct Router {
    std::array<Buffer, kPorts> in;
    std::array<int8_t, kPorts> in_route{};    // output wanted by the head packet, -1 when unrouted
    std::array<int8_t, kPorts> out_owner{};   // input holding the output, -1 when free
    std::array<int32_t, kPorts> credits{};    // toward the downstream buffer (Local unused)
    Arbiter arbiter;
    int buffered = 0;
    RouterCounters counters;
  };
  struct Injector {
    std::deque<int32_t> queue;
    int32_t next_flit = 0;
    int32_t credits = 0;
  };

  std::size_t index(Coord c) const { return static_cast<std::size_t>(c.y * w_ + c.x); }
  Coord coord(std::size_t i) const { return {static_cast<int>(i) % w_, static_cast<int>(i) / w_}; }
  void push(std::size_t router, int port, const Flit& f);
  void pop(std::size_t router, int port, int64_t cycle);
  bool can_send(std::size_t router, int out, const Flit& f, int64_t cycle);
  void send(std::size_t router, int in, int out, int64_t cycle);
  void step_router(std::size_t r, int64_t cycle);
  void inject(std::size_t node, int64_t cycle);

  int w_, h_, cap_;
  std::vector<Router> routers_;
  std::vector<Injector> injectors_;
  std::vector<Endpoint*> endpoints_;
  std::vector<PacketInfo> packets_;

  std::vector<std::size_t> active_routers_;  // routers with buffered flits (may hold stale entries)
  std::vector<uint8_t> in_active_;
  std::vector<std::size_t> active_injectors_;
  std::vector<uint8_t> injector_active_;
  // Credits freed in the current cycle, applied at the start of the next one.
  std::vector<std::pair<std::size_t, int>> credit_returns_;  // (router, out port) or (node, kLocal) for injectors
  int64_t buffered_ = 0;
  int64_t injecting_ = 0;  // packets queued or partially injected
  int64_t flits_injected_ = 0;
  int64_t flits_delivered_ = 0;
  int64_t moves_ = 0;
  std::ostream* trace_ = nullptr;
};

}  // namespace cnnmap
