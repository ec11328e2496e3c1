#include "cnnmap/sim.hpp"

#include <algorithm>
#include <deque>
#include <memory>
#include <optional>
#include <queue>

#include "cnnmap/error.hpp"
#include "cnnmap/traversal.hpp"

namespace cnnmap {

int64_t SimReport::total_noc_cycles() const {
  int64_t n = 0;
  for (const auto& l : layers) n += l.noc_cycles;
  return n;
}

int64_t SimReport::total_core_cycles() const {
  int64_t n = 0;
  for (const auto& l : layers) n += l.core_cycles;
  return n;
}

int64_t ideal_core_cycles(const std::vector<WorkItem>& items, const CoreConfig& core) {
  int64_t cycles = 0;
  for (const auto& it : items) cycles += zero_latency_cycles(it.sublayer, it.tiling, core);
  return cycles;
}

namespace {

void check_mapping(const PlatformConfig& p, const Mapping& m, const CoreConfig& core) {
  const std::string where = "mapping of layer " + m.layer.name + ": ";
  if (m.cores.empty()) throw ConfigError(where + "no active core");
  std::vector<uint8_t> used(static_cast<std::size_t>(p.nodes()), 0);
  int64_t area = 0;
  std::vector<Slice> regions;
  for (const auto& c : m.cores) {
    if (c.node.x < 0 || c.node.x >= p.mesh_w || c.node.y < 0 || c.node.y >= p.mesh_h || p.role(c.node) != NodeRole::kCore)
      throw ConfigError(where + to_string(c.node) + " is not a processing core");
    if (used[static_cast<std::size_t>(p.index(c.node))]++) throw ConfigError(where + to_string(c.node) + " listed twice");
    for (const auto& it : c.items) {
      if (!(it.sublayer == slice_to_sublayer(m.layer, it.region)))
        throw ConfigError(where + "sub-layer does not match its region");
      if (sram_alloc(it.sublayer, it.tiling) > core.d_sram_words)
        throw ConfigError(where + "tiling exceeds the SRAM of " + to_string(c.node));
      area += it.region.t_of * it.region.t_ox;
      regions.push_back(it.region);
    }
  }
  if (area != m.layer.n_of * m.layer.n_ox) throw ConfigError(where + "regions do not cover the ofmap plane");
  for (std::size_t i = 0; i < regions.size(); ++i) {
    for (std::size_t j = i + 1; j < regions.size(); ++j) {
      const auto& a = regions[i];
      const auto& b = regions[j];
      if (a.of0 < b.of0 + b.t_of && b.of0 < a.of0 + a.t_of && a.x0 < b.x0 + b.t_ox && b.x0 < a.x0 + a.t_ox)
        throw ConfigError(where + "overlapping regions");
    }
  }
}

class LayerSim;

// A processing core with its DMA network interface.
class CoreAgent final : public Endpoint {
 public:
  enum class State { kUnconfigured, kReady, kComputing, kAwaiting, kDone };

  CoreAgent(LayerSim& sim, const CoreWork& work) : sim_(sim), work_(work) {
    stats.node = work.node;
    stats.items = static_cast<int>(work.items.size());
  }

  void on_flit(int32_t packet, int32_t index, int64_t cycle) override;
  void on_injected(int32_t packet, int64_t cycle) override;
  /// Runs the core at a core clock edge.
  void act(int64_t cycle);

  State state = State::kUnconfigured;
  int64_t wake = -1;
  CoreStats stats;
  int64_t finish_noc = 0;

 private:
  struct PendingRead {
    int64_t seq;
    int64_t remaining;
  };
  struct PendingWrite {
    int64_t seq;
    int64_t packets;
  };

  void submit(const TraversalStep& s, int64_t cycle);
  void complete(int64_t seq, int64_t cycle);
  bool done(int64_t first, int64_t last) const {
    for (int64_t s = first; s <= last; ++s) {
      if (!completed_[static_cast<std::size_t>(s)]) return false;
    }
    return true;
  }

  LayerSim& sim_;
  const CoreWork& work_;
  std::size_t next_item_ = 0;
  std::optional<LoopNestWalker> walker_;
  int64_t next_seq_ = 0;
  std::vector<uint8_t> completed_;
  std::deque<PendingRead> reads_;
  std::deque<PendingWrite> writes_;
  int64_t await_first_ = 0, await_last_ = 0, stall_since_ = 0;
};

// The DRAM interface: one request slot per sender, a bus moving one flit of
// payload per NoC cycle, writes served before reads.
class DramAgent final : public Endpoint {
 public:
  explicit DramAgent(LayerSim& sim);

  bool accept_header(int32_t packet, int64_t cycle) override;
  void on_flit(int32_t packet, int32_t index, int64_t cycle) override;
  bool step(int64_t cycle);  // true when the bus moved data
  bool idle() const { return writes_.empty() && reads_.empty() && !response_; }

  int64_t read_words = 0;
  int64_t write_words = 0;
  int64_t bus_cycles = 0;
  int64_t max_bits = 0;

 private:
  struct Write {
    int32_t packet;
    int64_t words_left;
    int32_t arrived = 0;   // payload flits landed
    int32_t consumed = 0;  // payload flits written
  };
  struct Read {
    int32_t request;
    int64_t remaining;
  };
  struct Response {
    int32_t packet;
    int32_t payload_flits;
    int32_t produced = 0;
    int64_t words;
  };

  LayerSim& sim_;
  std::vector<int32_t> slot_;  // per node: packet holding the slot, -1 when free
  std::deque<Write> writes_;   // in header arrival order
  std::deque<Read> reads_;     // in arrival order
  std::optional<Response> response_;
  bool writing_ = false;       // the front write owns the bus
};

class LayerSim {
 public:
  LayerSim(const PlatformConfig& p, const Mapping& m, const SimOptions& o)
      : platform(p),
        mapping(m),
        core(p.core_config()),
        rule(p.packet_rule()),
        ratio(p.clock_ratio()),
        noc(p.mesh_w, p.mesh_h, static_cast<int>(p.inport_buffer_flits)),
        dram(*this) {
    if (o.packet_len_override > 0) rule.max_len = o.packet_len_override;
    rule.validate();
    noc.set_trace(o.trace);
    noc.attach(p.dram(), &dram);
    for (const auto& w : m.cores) {
      cores.push_back(std::make_unique<CoreAgent>(*this, w));
      noc.attach(w.node, cores.back().get());
    }
  }

  LayerReport run();

  int64_t align(int64_t cycle) const { return (cycle + ratio - 1) / ratio * ratio; }
  void schedule(std::size_t core_index, int64_t cycle) { wakes.emplace(cycle, core_index); }
  std::size_t index_of(const CoreAgent* c) const {
    for (std::size_t i = 0; i < cores.size(); ++i) {
      if (cores[i].get() == c) return i;
    }
    return 0;
  }

  const PlatformConfig& platform;
  const Mapping& mapping;
  CoreConfig core;
  PacketRule rule;
  int ratio;
  Noc noc;
  DramAgent dram;
  std::vector<std::unique_ptr<CoreAgent>> cores;
  std::priority_queue<std::pair<int64_t, std::size_t>, std::vector<std::pair<int64_t, std::size_t>>,
                      std::greater<>>
      wakes;
};

void CoreAgent::on_flit(int32_t packet, int32_t index, int64_t cycle) {
  const auto& pkt = sim_.noc.packet(packet);
  if (index != pkt.length - 1) return;
  if (pkt.kind == PacketKind::kService) {
    state = State::kReady;
    stats.start_cycle = sim_.align(cycle) / sim_.ratio;
    wake = sim_.align(cycle);
    sim_.schedule(sim_.index_of(this), wake);
    return;
  }
  if (pkt.kind != PacketKind::kReadResponse) throw Error("core " + to_string(work_.node) + " received a DRAM request");
  auto& r = reads_.front();
  r.remaining -= pkt.words;
  if (r.remaining == 0) {
    const int64_t seq = r.seq;
    reads_.pop_front();
    complete(seq, cycle);
  }
}

void CoreAgent::on_injected(int32_t packet, int64_t cycle) {
  if (sim_.noc.packet(packet).kind != PacketKind::kWrite) return;
  auto& w = writes_.front();
  if (--w.packets == 0) {
    const int64_t seq = w.seq;
    writes_.pop_front();
    complete(seq, cycle + 1);
  }
}

void CoreAgent::complete(int64_t seq, int64_t cycle) {
  completed_[static_cast<std::size_t>(seq)] = 1;
  if (state == State::kAwaiting && seq >= await_first_ && seq <= await_last_ && done(await_first_, await_last_)) {
    wake = sim_.align(std::max(cycle, stall_since_));
    sim_.schedule(sim_.index_of(this), wake);
  }
}

void CoreAgent::submit(const TraversalStep& s, int64_t cycle) {
  (void)cycle;
  ++stats.dma_requests;
  completed_.push_back(0);
  const Coord dram = sim_.platform.dram();
  if (is_read(s.kind)) {
    stats.dram_ld_words += s.words;
    PacketInfo info;
    info.src = work_.node;
    info.dst = dram;
    info.kind = PacketKind::kReadRequest;
    info.length = static_cast<int32_t>(PacketRule::kReadRequestFlits);
    info.produced = info.length;
    info.words = s.words;
    info.tag = s.seq;
    sim_.noc.enqueue(sim_.noc.create_packet(info));
    reads_.push_back({s.seq, s.words});
    return;
  }
  stats.dram_st_words += s.words;
  const auto lengths = packetize(s.words, sim_.rule);
  writes_.push_back({s.seq, static_cast<int64_t>(lengths.size())});
  int64_t left = s.words;
  for (int64_t len : lengths) {
    PacketInfo info;
    info.src = work_.node;
    info.dst = dram;
    info.kind = PacketKind::kWrite;
    info.length = static_cast<int32_t>(len);
    info.produced = info.length;
    info.words = std::min(left, sim_.rule.max_payload_words());
    left -= info.words;
    info.tag = s.seq;
    sim_.noc.enqueue(sim_.noc.create_packet(info));
  }
}

void CoreAgent::act(int64_t cycle) {
  if (cycle != wake) return;  // stale wake-up
  const int ratio = sim_.ratio;
  if (state == State::kComputing) state = State::kReady;
  if (state == State::kAwaiting) {
    if (!done(await_first_, await_last_)) return;
    stats.stall_cycles += (cycle - stall_since_) / ratio;
    state = State::kReady;
  }
  if (state != State::kReady) return;
  TraversalStep s;
  for (;;) {
    if (!walker_) {
      if (next_item_ == work_.items.size()) {
        state = State::kDone;
        finish_noc = cycle;
        stats.finish_cycle = cycle / ratio;
        return;
      }
      const auto& item = work_.items[next_item_++];
      walker_.emplace(item.sublayer, item.tiling, sim_.core, next_seq_);
    }
    if (!walker_->next(s)) {
      next_seq_ += walker_->issued();
      walker_.reset();
      continue;
    }
    switch (s.type) {
      case TraversalStep::Type::kDma:
        submit(s, cycle);
        break;
      case TraversalStep::Type::kAwait:
        if (done(s.await_first, s.await_last)) break;
        state = State::kAwaiting;
        await_first_ = s.await_first;
        await_last_ = s.await_last;
        stall_since_ = cycle;
        return;
      case TraversalStep::Type::kCompute:
        state = State::kComputing;
        stats.busy_cycles += s.cycles;
        stats.macs += s.macs;
        stats.sram_ld_words += s.sram_ld;
        stats.sram_st_words += s.sram_st;
        wake = cycle + s.cycles * ratio;
        sim_.schedule(sim_.index_of(this), wake);
        return;
    }
  }
}

DramAgent::DramAgent(LayerSim& sim) : sim_(sim), slot_(static_cast<std::size_t>(sim.platform.nodes()), -1) {}

bool DramAgent::accept_header(int32_t packet, int64_t) {
  const auto& pkt = sim_.noc.packet(packet);
  return slot_[static_cast<std::size_t>(sim_.platform.index(pkt.src))] < 0;
}

void DramAgent::on_flit(int32_t packet, int32_t index, int64_t) {
  const auto& pkt = sim_.noc.packet(packet);
  const auto src = static_cast<std::size_t>(sim_.platform.index(pkt.src));
  if (pkt.kind != PacketKind::kWrite && pkt.kind != PacketKind::kReadRequest)
    throw Error("DRAM interface received a " + std::string(to_string(pkt.kind)) + " packet");
  if (index == 0) {
    slot_[src] = packet;
    if (pkt.kind == PacketKind::kWrite) writes_.push_back({packet, pkt.words});
    return;
  }
  if (pkt.kind == PacketKind::kWrite) {
    if (index >= PacketRule::kOverheadFlits) {
      for (auto& w : writes_) {
        if (w.packet == packet) {
          ++w.arrived;
          break;
        }
      }
    }
    return;
  }
  if (index == pkt.length - 1) reads_.push_back({packet, pkt.words});
}

bool DramAgent::step(int64_t) {
  const int64_t wpf = sim_.rule.words_per_flit();
  const int64_t word_bits = sim_.rule.word_bits;
  if (!writing_ && !response_) {
    if (!writes_.empty()) {
      writing_ = true;
    } else if (!reads_.empty()) {
      const auto& r = reads_.front();
      const auto& req = sim_.noc.packet(r.request);
      Response resp;
      resp.words = std::min(r.remaining, sim_.rule.max_payload_words());
      resp.payload_flits = static_cast<int32_t>(ceil_div(resp.words, wpf));
      PacketInfo info;
      info.src = sim_.platform.dram();
      info.dst = req.src;
      info.kind = PacketKind::kReadResponse;
      info.length = resp.payload_flits + static_cast<int32_t>(PacketRule::kOverheadFlits);
      info.produced = static_cast<int32_t>(PacketRule::kOverheadFlits);
      info.words = resp.words;
      info.tag = req.tag;
      resp.packet = sim_.noc.create_packet(info);
      sim_.noc.enqueue(resp.packet);
      response_ = resp;
    }
  }

  if (writing_) {
    auto& w = writes_.front();
    if (w.consumed == w.arrived) return false;
    const int64_t words = std::min(wpf, w.words_left);
    w.words_left -= words;
    ++w.consumed;
    write_words += words;
    ++bus_cycles;
    max_bits = std::max(max_bits, words * word_bits);
    if (w.words_left == 0) {
      slot_[static_cast<std::size_t>(sim_.platform.index(sim_.noc.packet(w.packet).src))] = -1;
      writes_.pop_front();
      writing_ = false;
    }
    return true;
  }
  if (response_) {
    // The response staging buffer holds as many flits as a DMA buffer.
    const int64_t staging = std::max<int64_t>(1, sim_.platform.dmani_buffer_words / wpf);
    if (sim_.noc.backlog(sim_.platform.dram()) >= staging) return false;
    auto& resp = *response_;
    const int64_t words = std::min(wpf, resp.words - static_cast<int64_t>(resp.produced) * wpf);
    sim_.noc.produce(resp.packet, 1);
    ++resp.produced;
    read_words += words;
    ++bus_cycles;
    max_bits = std::max(max_bits, words * word_bits);
    if (resp.produced == resp.payload_flits) {
      auto& r = reads_.front();
      r.remaining -= resp.words;
      if (r.remaining == 0) {
        slot_[static_cast<std::size_t>(sim_.platform.index(sim_.noc.packet(r.request).src))] = -1;
        reads_.pop_front();
      }
      response_.reset();
    }
    return true;
  }
  return false;
}

LayerReport LayerSim::run() {
  const Coord master = platform.master();
  // Configuration packets: a header, a size flit and two descriptor flits per work item.
  for (const auto& w : mapping.cores) {
    PacketInfo info;
    info.src = master;
    info.dst = w.node;
    info.kind = PacketKind::kService;
    info.length = static_cast<int32_t>(std::min<int64_t>(rule.max_len, 2 + 2 * static_cast<int64_t>(w.items.size())));
    info.produced = info.length;
    info.words = 0;
    noc.enqueue(noc.create_packet(info));
  }

  int64_t cycle = 0;
  int64_t last_move = 0;
  int64_t moves = noc.moves();
  std::size_t finished = 0;
  const int64_t watchdog = platform.watchdog_cycles;
  for (;;) {
    bool acted = false;
    while (!wakes.empty() && wakes.top().first <= cycle) {
      const auto [when, idx] = wakes.top();
      wakes.pop();
      if (when < cycle) continue;
      auto& c = *cores[idx];
      const bool was_done = c.state == CoreAgent::State::kDone;
      c.act(cycle);
      acted = true;
      if (!was_done && c.state == CoreAgent::State::kDone) ++finished;
    }
    acted |= dram.step(cycle);
    noc.step(cycle);
    if (noc.moves() != moves || acted) {
      moves = noc.moves();
      last_move = cycle;
    }
    const bool network_idle = noc.idle() && dram.idle();
    if (network_idle && finished == cores.size()) break;
    if (!network_idle) {
      if (cycle - last_move > watchdog) {
        throw DeadlockError("layer " + mapping.layer.name + ": no progress for " + std::to_string(watchdog) +
                            " NoC cycles\n" + noc.dump(cycle));
      }
      ++cycle;
      continue;
    }
    // Nothing in flight: jump to the next core event.
    while (!wakes.empty() && wakes.top().first <= cycle) wakes.pop();
    if (wakes.empty()) {
      throw DeadlockError("layer " + mapping.layer.name + ": cores wait for DMA but the network is empty at cycle " +
                          std::to_string(cycle) + "\n" + noc.dump(cycle));
    }
    cycle = wakes.top().first;
  }

  LayerReport rep;
  rep.layer = mapping.layer.name;
  rep.noc_cycles = cycle + 1;
  rep.core_cycles = ceil_div(rep.noc_cycles, ratio);
  rep.active_cores = static_cast<int>(cores.size());
  for (const auto& c : cores) rep.cores.push_back(c->stats);
  for (int i = 0; i < platform.nodes(); ++i) {
    const Coord c = platform.coord(i);
    rep.routers.push_back({c, platform.role(c), noc.counters(c)});
  }
  rep.packets = static_cast<int64_t>(noc.packet_count());
  rep.flits_injected = noc.flits_injected();
  rep.flits_delivered = noc.flits_delivered();
  rep.dram_read_words = dram.read_words;
  rep.dram_write_words = dram.write_words;
  rep.dram_bus_cycles = dram.bus_cycles;
  rep.dram_max_bits_per_cycle = dram.max_bits;
  for (std::size_t i = 0; i < noc.packet_count(); ++i) {
    const auto& p = noc.packet(static_cast<int32_t>(i));
    if (p.hops != manhattan(p.src, p.dst)) ++rep.hop_mismatches;
  }
  return rep;
}

LayerReport run_ideal(const PlatformConfig& p, const Mapping& m) {
  const CoreConfig core = p.core_config();
  LayerReport rep;
  rep.layer = m.layer.name;
  rep.active_cores = static_cast<int>(m.cores.size());
  int64_t longest = 0;
  for (const auto& w : m.cores) {
    CoreStats s;
    s.node = w.node;
    s.items = static_cast<int>(w.items.size());
    for (const auto& it : w.items) {
      const auto t = walk_totals(it.sublayer, it.tiling, core);
      s.macs += t.macs;
      s.sram_ld_words += t.sram_ld;
      s.sram_st_words += t.sram_st;
      s.dram_ld_words += t.read_words;
      s.dram_st_words += t.write_words;
      s.dma_requests += t.requests;
      s.busy_cycles += t.compute_cycles;
    }
    s.finish_cycle = ideal_core_cycles(w.items, core);
    s.stall_cycles = s.finish_cycle - s.busy_cycles;
    longest = std::max(longest, s.finish_cycle);
    rep.dram_read_words += s.dram_ld_words;
    rep.dram_write_words += s.dram_st_words;
    rep.cores.push_back(s);
  }
  rep.core_cycles = longest;
  rep.noc_cycles = longest * p.clock_ratio();
  return rep;
}

}  // namespace

LayerReport run_layer(const PlatformConfig& platform, const Mapping& mapping, const SimOptions& options) {
  platform.validate();
  check_mapping(platform, mapping, platform.core_config());
  if (options.ideal_transport) return run_ideal(platform, mapping);
  LayerSim sim(platform, mapping, options);
  return sim.run();
}

SimReport run(const PlatformConfig& platform, const std::vector<Mapping>& mappings, const SimOptions& options) {
  SimReport rep;
  for (const auto& m : mappings) rep.layers.push_back(run_layer(platform, m, options));
  return rep;
}

void write_report_csv(std::ostream& out, const SimReport& report) {
  out << "layer,kind,x,y,role,cycles,macs,sram_ld_words,sram_st_words,dram_ld_words,dram_st_words,busy_cycles,"
         "stall_cycles,packets,flits,arbitrations,blocked_flit_cycles\n";
  for (const auto& l : report.layers) {
    for (const auto& c : l.cores) {
      out << l.layer << ",core," << c.node.x << ',' << c.node.y << ",core," << c.finish_cycle - c.start_cycle << ','
          << c.macs << ',' << c.sram_ld_words << ',' << c.sram_st_words << ',' << c.dram_ld_words << ','
          << c.dram_st_words << ',' << c.busy_cycles << ',' << c.stall_cycles << ",,,,\n";
    }
    for (const auto& r : l.routers) {
      out << l.layer << ",router," << r.node.x << ',' << r.node.y << ',' << to_string(r.role) << ',' << l.noc_cycles
          << ",,,,,,,," << r.counters.packets << ',' << r.counters.flits << ',' << r.counters.arbitrations << ','
          << r.counters.blocked_flit_cycles << '\n';
    }
  }
}

}  // namespace cnnmap
