#pragma once

// Event-count energy model. All energies are in pJ.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "cnnmap/noc.hpp"
#include "cnnmap/platform.hpp"
#include "cnnmap/sim.hpp"

namespace cnnmap {

struct EnergyTable {
  double idle = 148.42;     // pJ per core cycle
  double mac = 6.42;        // pJ per MAC
  double sram_ld = 0.89;    // pJ per bit
  double sram_st = 0.46;    // pJ per bit
  double dram_ld = 21.0;    // pJ per bit
  double dram_st = 21.0;    // pJ per bit
  double route = 0.06;      // pJ per packet
  double arb = 0.22;        // pJ per packet
  double xbar_sw = 0.03;    // pJ per bit
  double xbar_su = 0.16;    // pJ per bit
  double buf = 0.09;        // pJ per bit
  double leak = 0.43;       // pJ per router cycle

  /// Throws ConfigError on a negative entry.
  void validate() const;
  bool operator==(const EnergyTable&) const = default;
};

/// Text format: one `name value unit` line per entry, `#` comments, names as
/// in Table fields with an optional `E_` prefix (e.g. `E_mac 6.42 pJ/op`).
/// Entries not listed keep their defaults.
EnergyTable parse_energy_table(std::string_view text, const std::string& source = "<energy>");
EnergyTable load_energy_table(const std::filesystem::path& path);
std::string serialize_energy_table(const EnergyTable& t);

double core_energy(int64_t cycles, int64_t macs, int64_t sram_ld_bits, int64_t sram_st_bits, const EnergyTable& t);
double dram_energy(int64_t ld_bits, int64_t st_bits, const EnergyTable& t);
/// One router: per-packet routing and arbitration, per-bit crossbar and buffer
/// events, leakage per cycle.
double router_energy(int64_t packets, int64_t flits, int64_t flit_bits, int64_t cycles, const EnergyTable& t);
double noc_energy(const std::vector<RouterCounters>& routers, int64_t flit_bits, int64_t cycles, const EnergyTable& t);

/// E_new = E_old * (V_new / V_old)^2 * N_new / N_old; throws ConfigError on a non-positive input.
double scale_energy(double e_old, double v_old, double v_new, double n_old, double n_new);

struct EnergyBreakdown {
  double core = 0;
  double dram = 0;
  double noc = 0;
  double total() const { return core + dram + noc; }
};

/// Active cores pay idle energy for the whole layer; routers leak for the whole layer.
EnergyBreakdown layer_energy(const LayerReport& layer, const PlatformConfig& platform, const EnergyTable& t);

}  // namespace cnnmap
