#pragma once

// System simulation of one or more mapped layers: a master node configures the
// active cores, every core replays its loop nest as DMA requests and compute
// intervals, and all DRAM traffic crosses the mesh to a single DRAM interface.

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "cnnmap/mapper.hpp"
#include "cnnmap/noc.hpp"
#include "cnnmap/platform.hpp"

namespace cnnmap {

struct SimOptions {
  /// Replace the network by an ideal transport: blocking loads cost their
  /// words at the DRAM bandwidth, overlapped transfers stream beside compute.
  bool ideal_transport = false;
  /// Maximum packet length in flits; 0 keeps the platform value.
  int64_t packet_len_override = 0;
  /// Flit-level trace: "cycle x y out_port packet flit" per crossbar traversal.
  std::ostream* trace = nullptr;
};

struct CoreStats {
  Coord node;
  int items = 0;
  int64_t macs = 0;
  int64_t sram_ld_words = 0;
  int64_t sram_st_words = 0;
  int64_t dram_ld_words = 0;
  int64_t dram_st_words = 0;
  int64_t dma_requests = 0;
  int64_t busy_cycles = 0;   // core cycles computing
  int64_t stall_cycles = 0;  // core cycles waiting for DMA
  int64_t start_cycle = 0;   // core cycle the configuration arrived
  int64_t finish_cycle = 0;  // core cycle the last DMA completed
};

struct RouterStats {
  Coord node;
  NodeRole role = NodeRole::kEmpty;
  RouterCounters counters;
};

struct LayerReport {
  std::string layer;
  int64_t noc_cycles = 0;
  int64_t core_cycles = 0;
  int active_cores = 0;
  std::vector<CoreStats> cores;
  std::vector<RouterStats> routers;  // row-major, empty for the ideal transport
  int64_t packets = 0;
  int64_t flits_injected = 0;
  int64_t flits_delivered = 0;
  int64_t dram_read_words = 0;
  int64_t dram_write_words = 0;
  int64_t dram_bus_cycles = 0;          // NoC cycles the DRAM bus moved data
  int64_t dram_max_bits_per_cycle = 0;  // peak bits moved by the DRAM bus in one NoC cycle
  int64_t hop_mismatches = 0;           // packets whose link count differs from the Manhattan distance

  int64_t dram_words() const { return dram_read_words + dram_write_words; }
};

struct SimReport {
  std::vector<LayerReport> layers;
  int64_t total_noc_cycles() const;
  int64_t total_core_cycles() const;
};

/// Simulates the mappings back to back with a barrier between layers.
/// Throws ConfigError for mappings that do not fit the platform and
/// DeadlockError (with the in-flight state) when the watchdog fires.
SimReport run(const PlatformConfig& platform, const std::vector<Mapping>& mappings, const SimOptions& options = {});
LayerReport run_layer(const PlatformConfig& platform, const Mapping& mapping, const SimOptions& options = {});

/// Core cycles of one core's items over the ideal transport.
int64_t ideal_core_cycles(const std::vector<WorkItem>& items, const CoreConfig& core);

/// One row per core and per router.
void write_report_csv(std::ostream& out, const SimReport& report);

}  // namespace cnnmap
