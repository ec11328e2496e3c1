#include "cnnmap/noc.hpp"

#include <algorithm>
#include <bit>
#include <sstream>

#include "cnnmap/error.hpp"

namespace cnnmap {

const char* to_string(Port p) {
  switch (p) {
    case kEast: return "E";
    case kWest: return "W";
    case kNorth: return "N";
    case kSouth: return "S";
    case kLocal: return "L";
  }
  return "?";
}

const char* to_string(PacketKind k) {
  switch (k) {
    case PacketKind::kReadRequest: return "read-req";
    case PacketKind::kWrite: return "write";
    case PacketKind::kReadResponse: return "read-resp";
    case PacketKind::kService: return "service";
  }
  return "?";
}

Port route_xy(Coord cur, Coord dst) {
  if (dst.x > cur.x) return kEast;
  if (dst.x < cur.x) return kWest;
  if (dst.y < cur.y) return kNorth;
  if (dst.y > cur.y) return kSouth;
  return kLocal;
}

int Arbiter::arbitrate(uint8_t requests) {
  for (int i = 0; i < kPorts; ++i) {
    const int p = (head_ + i) % kPorts;
    if (requests & (1u << p)) {
      head_ = (head_ + 1) % kPorts;
      return p;
    }
  }
  return -1;
}

namespace {

constexpr int kOpposite[kPorts] = {kWest, kEast, kSouth, kNorth, kLocal};
constexpr int kDx[kPorts] = {1, -1, 0, 0, 0};
constexpr int kDy[kPorts] = {0, 0, -1, 1, 0};

}  // namespace

Noc::Noc(int width, int height, int buffer_flits) : w_(width), h_(height), cap_(buffer_flits) {
  if (w_ < 1 || h_ < 1) throw ConfigError("mesh dimensions must be positive");
  if (cap_ < 1) throw ConfigError("input buffers must hold at least one flit");
  const auto n = static_cast<std::size_t>(w_ * h_);
  routers_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& r = routers_[i];
    const Coord c = coord(i);
    for (int p = 0; p < kPorts; ++p) {
      r.in[static_cast<std::size_t>(p)].ring.resize(static_cast<std::size_t>(cap_));
      r.in_route[static_cast<std::size_t>(p)] = -1;
      r.out_owner[static_cast<std::size_t>(p)] = -1;
      const bool link = p != kLocal && c.x + kDx[p] >= 0 && c.x + kDx[p] < w_ && c.y + kDy[p] >= 0 && c.y + kDy[p] < h_;
      r.credits[static_cast<std::size_t>(p)] = link ? cap_ : 0;
    }
  }
  injectors_.resize(n);
  for (auto& inj : injectors_) inj.credits = cap_;
  endpoints_.assign(n, nullptr);
  in_active_.assign(n, 0);
  injector_active_.assign(n, 0);
}

void Noc::attach(Coord node, Endpoint* endpoint) { endpoints_[index(node)] = endpoint; }

int32_t Noc::create_packet(const PacketInfo& info) {
  if (info.length < 1) throw ConfigError("packet without flits");
  const auto in_mesh = [&](Coord c) { return c.x >= 0 && c.x < w_ && c.y >= 0 && c.y < h_; };
  if (!in_mesh(info.src) || !in_mesh(info.dst)) throw ConfigError("packet endpoint outside the mesh");
  packets_.push_back(info);
  packets_.back().injected = -1;
  packets_.back().delivered = -1;
  packets_.back().hops = 0;
  return static_cast<int32_t>(packets_.size() - 1);
}

void Noc::enqueue(int32_t packet) {
  const std::size_t node = index(packets_[static_cast<std::size_t>(packet)].src);
  injectors_[node].queue.push_back(packet);
  ++injecting_;
  if (!injector_active_[node]) {
    injector_active_[node] = 1;
    active_injectors_.push_back(node);
  }
}

void Noc::produce(int32_t packet, int32_t flits) {
  auto& p = packets_[static_cast<std::size_t>(packet)];
  p.produced = std::min(p.length, p.produced + flits);
}

int64_t Noc::backlog(Coord node) const {
  const auto& inj = injectors_[index(node)];
  int64_t n = 0;
  bool first = true;
  for (int32_t id : inj.queue) {
    n += packets_[static_cast<std::size_t>(id)].produced - (first ? inj.next_flit : 0);
    first = false;
  }
  return n;
}

void Noc::push(std::size_t r, int port, const Flit& f) {
  auto& router = routers_[r];
  auto& b = router.in[static_cast<std::size_t>(port)];
  if (b.size == cap_) throw Error("input buffer overflow at router " + to_string(coord(r)));
  b.ring[static_cast<std::size_t>((b.head + b.size) % cap_)] = f;
  ++b.size;
  ++router.buffered;
  ++buffered_;
  ++router.counters.flits_in;
  router.counters.max_occupancy = std::max<int64_t>(router.counters.max_occupancy, b.size);
  if (!in_active_[r]) {
    in_active_[r] = 1;
    active_routers_.push_back(r);
  }
}

void Noc::pop(std::size_t r, int port, int64_t) {
  auto& router = routers_[r];
  auto& b = router.in[static_cast<std::size_t>(port)];
  b.head = (b.head + 1) % cap_;
  --b.size;
  --router.buffered;
  --buffered_;
  if (port == kLocal) {
    credit_returns_.emplace_back(r, kLocal);
  } else {
    const Coord c = coord(r);
    const Coord up{c.x + kDx[port], c.y + kDy[port]};
    credit_returns_.emplace_back(index(up), kOpposite[port]);
  }
}

bool Noc::can_send(std::size_t r, int out, const Flit& f, int64_t cycle) {
  if (out != kLocal) return routers_[r].credits[static_cast<std::size_t>(out)] > 0;
  if (f.index != 0 || endpoints_[r] == nullptr) return true;
  return endpoints_[r]->accept_header(f.packet, cycle);
}

void Noc::send(std::size_t r, int in, int out, int64_t cycle) {
  auto& router = routers_[r];
  const Flit f = router.in[static_cast<std::size_t>(in)].front();
  pop(r, in, cycle);
  ++moves_;
  ++router.counters.flits;
  auto& pkt = packets_[static_cast<std::size_t>(f.packet)];
  const bool tail = f.index == pkt.length - 1;
  if (trace_) {
    const Coord c = coord(r);
    *trace_ << cycle << ' ' << c.x << ' ' << c.y << ' ' << to_string(static_cast<Port>(out)) << ' ' << f.packet << ' '
            << f.index << '\n';
  }
  if (out == kLocal) {
    ++flits_delivered_;
    if (tail) pkt.delivered = cycle + 1;
    if (auto* ep = endpoints_[r]) ep->on_flit(f.packet, f.index, cycle + 1);
  } else {
    --router.credits[static_cast<std::size_t>(out)];
    if (f.index == 0) ++pkt.hops;
    const Coord c = coord(r);
    push(index({c.x + kDx[out], c.y + kDy[out]}), kOpposite[out], {f.packet, f.index, cycle + 1});
  }
  if (tail) {
    router.out_owner[static_cast<std::size_t>(out)] = -1;
    router.in_route[static_cast<std::size_t>(in)] = -1;
  }
}

void Noc::step_router(std::size_t r, int64_t cycle) {
  auto& router = routers_[r];
  if (router.buffered == 0) return;
  uint8_t used_in = 0, used_out = 0;

  // Established connections stream body flits.
  for (int out = 0; out < kPorts; ++out) {
    const int in = router.out_owner[static_cast<std::size_t>(out)];
    if (in < 0) continue;
    const auto& b = router.in[static_cast<std::size_t>(in)];
    if (b.size == 0) continue;
    const Flit& f = b.front();
    if (f.ready > cycle) continue;
    if (can_send(r, out, f, cycle)) {
      send(r, in, out, cycle);
      used_in |= static_cast<uint8_t>(1u << in);
      used_out |= static_cast<uint8_t>(1u << out);
    } else {
      ++router.counters.blocked_flit_cycles;
    }
  }

  // Headers compete for free outputs.
  uint8_t requests = 0;
  const Coord here = coord(r);
  for (int in = 0; in < kPorts; ++in) {
    if (used_in & (1u << in)) continue;
    const auto& b = router.in[static_cast<std::size_t>(in)];
    if (b.size == 0) continue;
    const Flit& f = b.front();
    if (f.index != 0 || cycle < f.ready + 3) continue;
    auto& route = router.in_route[static_cast<std::size_t>(in)];
    if (route < 0) route = static_cast<int8_t>(route_xy(here, packets_[static_cast<std::size_t>(f.packet)].dst));
    if (router.out_owner[static_cast<std::size_t>(route)] >= 0 || (used_out & (1u << route)) ||
        !can_send(r, route, f, cycle)) {
      ++router.counters.blocked_flit_cycles;
      continue;
    }
    requests |= static_cast<uint8_t>(1u << in);
  }
  if (requests == 0) return;
  const int in = router.arbiter.arbitrate(requests);
  const int out = router.in_route[static_cast<std::size_t>(in)];
  ++router.counters.arbitrations;
  ++router.counters.packets;
  router.counters.blocked_flit_cycles += std::popcount(requests) - 1;
  router.out_owner[static_cast<std::size_t>(out)] = static_cast<int8_t>(in);
  send(r, in, out, cycle);
}

void Noc::inject(std::size_t node, int64_t cycle) {
  auto& inj = injectors_[node];
  if (inj.queue.empty() || inj.credits == 0) return;
  const int32_t id = inj.queue.front();
  auto& pkt = packets_[static_cast<std::size_t>(id)];
  if (inj.next_flit >= pkt.produced) return;
  push(node, kLocal, {id, inj.next_flit, cycle + 1});
  --inj.credits;
  ++moves_;
  ++flits_injected_;
  if (inj.next_flit == 0) pkt.injected = cycle;
  if (++inj.next_flit == pkt.length) {
    inj.queue.pop_front();
    inj.next_flit = 0;
    --injecting_;
    if (auto* ep = endpoints_[node]) ep->on_injected(id, cycle);
  }
}

void Noc::step(int64_t cycle) {
  // Credits freed during the previous stepped cycle.
  for (const auto& [r, port] : credit_returns_) {
    if (port == kLocal) ++injectors_[r].credits;
    else ++routers_[r].credits[static_cast<std::size_t>(port)];
  }
  credit_returns_.clear();

  const std::size_t n_active = active_routers_.size();
  for (std::size_t i = 0; i < n_active; ++i) step_router(active_routers_[i], cycle);
  for (std::size_t i = 0; i < active_injectors_.size(); ++i) inject(active_injectors_[i], cycle);

  active_routers_.erase(std::remove_if(active_routers_.begin(), active_routers_.end(),
                                       [&](std::size_t r) {
                                         if (routers_[r].buffered > 0) return false;
                                         in_active_[r] = 0;
                                         return true;
                                       }),
                        active_routers_.end());
  active_injectors_.erase(std::remove_if(active_injectors_.begin(), active_injectors_.end(),
                                         [&](std::size_t n) {
                                           if (!injectors_[n].queue.empty()) return false;
                                           injector_active_[n] = 0;
                                           return true;
                                         }),
                          active_injectors_.end());
}

std::string Noc::dump(int64_t cycle) const {
  std::ostringstream out;
  out << "cycle " << cycle << ": " << buffered_ << " flits buffered, " << injecting_ << " packets awaiting injection\n";
  for (std::size_t r = 0; r < routers_.size(); ++r) {
    const auto& router = routers_[r];
    for (int p = 0; p < kPorts; ++p) {
      const auto& b = router.in[static_cast<std::size_t>(p)];
      if (b.size == 0) continue;
      const Flit& f = b.front();
      const auto& pkt = packets_[static_cast<std::size_t>(f.packet)];
      out << "  router " << to_string(coord(r)) << " in " << to_string(static_cast<Port>(p)) << ": " << b.size
          << " flits, head packet " << f.packet << " (" << to_string(pkt.kind) << " " << to_string(pkt.src) << "->"
          << to_string(pkt.dst) << ") flit " << f.index << "/" << pkt.length << " ready " << f.ready;
      const int route = router.in_route[static_cast<std::size_t>(p)];
      if (route >= 0) {
        out << " route " << to_string(static_cast<Port>(route));
        if (route != kLocal) out << " credits " << router.credits[static_cast<std::size_t>(route)];
      }
      out << "\n";
    }
  }
  for (std::size_t n = 0; n < injectors_.size(); ++n) {
    const auto& inj = injectors_[n];
    if (inj.queue.empty()) continue;
    out << "  interface " << to_string(coord(n)) << ": " << inj.queue.size() << " packets queued, next flit "
        << inj.next_flit << ", credits " << inj.credits << "\n";
  }
  return out.str();
}

}  // namespace cnnmap
