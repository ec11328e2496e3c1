#pragma once

// The three experiment families: single-core objectives, constant overall
// capability with a varying core count, and core-count scaling.

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "cnnmap/energy.hpp"
#include "cnnmap/mapper.hpp"
#include "cnnmap/platform.hpp"
#include "cnnmap/sim.hpp"
#include "cnnmap/workload.hpp"

namespace cnnmap {

struct ExperimentOptions {
  EnergyTable energy;
  /// Where mapping manifests are archived; empty keeps them in memory only.
  std::filesystem::path manifest_dir;
  std::ostream* trace = nullptr;
  /// Applied to every simulation except the scaling reference (which uses 10000).
  int64_t packet_len_override = 0;
  /// Progress lines; null for silence.
  std::ostream* log = nullptr;
};

struct SingleCoreRow {
  std::string layer;
  Objective objective = Objective::kMinComp;
  Tiling tiling;
  CostBreakdown cost;
  LayerReport sim;
  EnergyBreakdown energy;
  double runtime_ms = 0;
  double dram_mbyte = 0;
  double energy_mj = 0;
};

/// Every layer under each objective on `platform` (one active core, whole layer).
std::vector<SingleCoreRow> run_single_core(const Network& net, const PlatformConfig& platform,
                                           const std::vector<Objective>& objectives, const ExperimentOptions& opt);

struct CapabilityConfig {
  int cores = 1;
  CoreConfig core;
};

inline constexpr int64_t kCapabilityMacs = 2048;
inline constexpr int64_t kCapabilitySramWords = 524288;  // 1 MByte of 16-bit words

/// Splits 2048 MACs and 1 MByte of SRAM evenly over `cores` cores, with
/// P_ox = 2^ceil(log2(MACs per core) / 2). Throws ConfigError if the split is not exact.
CapabilityConfig capability_config(int cores);
/// Throws ConfigError unless cores * P_ox * P_of = 2048 and cores * D_sram = 1 MByte.
void validate_capability(const CapabilityConfig& c);

struct CapabilityRow {
  std::string group;
  int cores = 0;
  CoreConfig core;
  int alloc_cores = 0;
  int64_t core_cycles = 0;
  double runtime_ms = 0;
  LayerReport sim;
};

std::vector<CapabilityRow> run_constant_capability(const Network& net, const std::vector<CapabilityConfig>& configs,
                                                   const ExperimentOptions& opt);

struct ScalingRow {
  std::string layer;
  int cores = 0;
  double speedup = 0;
  int alloc_cores = 0;
  double bound = 0;
  int64_t reference_cycles = 0;
  int64_t sim_cycles = 0;
  int64_t mapping_cost = 0;
  LayerReport sim;
};

/// Speedups over a single-core run with 10000-flit packets; min-comp tilings throughout.
std::vector<ScalingRow> run_core_scaling(const Network& net, const std::vector<int>& counts, const CoreConfig& core,
                                         const ExperimentOptions& opt);

double runtime_ms(int64_t core_cycles, double f_core_hz);
double mbyte(int64_t words, int64_t word_bits);

void write_single_core_csv(std::ostream& out, const std::vector<SingleCoreRow>& rows);
void write_capability_csv(std::ostream& out, const std::vector<CapabilityRow>& rows);
void write_scaling_csv(std::ostream& out, const std::vector<ScalingRow>& rows);

/// Writes <dir>/single_core.csv (+ _detail.csv) and summary.txt; creates `dir`.
void emit_single_core(const std::filesystem::path& dir, const std::vector<SingleCoreRow>& rows);
void emit_capability(const std::filesystem::path& dir, const std::vector<CapabilityRow>& rows);
void emit_scaling(const std::filesystem::path& dir, const std::vector<ScalingRow>& rows);

}  // namespace cnnmap
