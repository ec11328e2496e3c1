#pragma once

// Single-core cost model for the tiled convolution loop nest and the exact
// constrained search for the min-comp / min-dram tilings.

#include <cstdint>
#include <string>

#include "cnnmap/workload.hpp"

namespace cnnmap {

inline constexpr int64_t ceil_div(int64_t a, int64_t b) { return (a + b - 1) / b; }

/// How the SRAM cycles of an ofmap row are charged.
///  kVerbatim:    2 * T'ox * T'of * Pox * Pof / BW_sram
///  kPerWord:     2 * T'ox * T'of / BW_sram
enum class SramCycleModel { kVerbatim, kPerWord };

struct CoreConfig {
  int64_t p_ox = 16;
  int64_t p_of = 8;
  int64_t d_sram_words = 16 * 4096;
  int64_t word_bits = 16;
  int64_t bw_dram_words = 8;  // words per core cycle
  double f_core_hz = 500e6;
  SramCycleModel sram_model = SramCycleModel::kVerbatim;

  /// Banked dual-port SRAM with p_ox banks.
  int64_t bw_sram_words() const { return 2 * p_ox; }
  int64_t macs_per_cycle() const { return p_ox * p_of; }

  /// P_ox / P_of default core with the SRAM sized at p_ox * 4096 words.
  static CoreConfig with_unrolling(int64_t p_ox, int64_t p_of);

  /// Throws ConfigError.
  void validate() const;

  bool operator==(const CoreConfig&) const = default;
};

/// Tile sizes T' and counts S' for one (sub)layer.
struct Tiling {
  int64_t t_of = 1;
  int64_t t_if = 1;
  int64_t t_ox = 1;
  int64_t t_ix = 1;
  int64_t s_of = 1;
  int64_t s_if = 1;
  int64_t s_ox = 1;

  /// Derives T'_ix and the counts; throws ConfigError on sizes outside [1, N'].
  static Tiling make(const ConvLayer& layer, int64_t t_of, int64_t t_if, int64_t t_ox);

  int64_t tiles() const { return s_of * s_if * s_ox; }
  bool operator==(const Tiling&) const = default;
};

struct TileCounts {
  int64_t s_of = 0;
  int64_t s_if = 0;
  int64_t s_ox = 0;
  bool operator==(const TileCounts&) const = default;
};

/// Cycle counts are core cycles; traffic counts are words over the whole (sub)layer.
struct CostBreakdown {
  int64_t n_dram_init = 0;
  int64_t n_dram_par = 0;
  int64_t c_mac = 0;   // one ofmap row of one tile
  int64_t c_sram = 0;  // one ofmap row of one tile
  int64_t c_pfetch = 0;
  int64_t c_comp = 0;  // all rows of one tile
  int64_t c_dram_par = 0;
  int64_t c_outer_loop = 0;
  int64_t c_inner_loop = 0;
  int64_t c_total = 0;
  int64_t n_sram_alloc = 0;
  int64_t n_mac = 0;
  int64_t n_sram_ld = 0;
  int64_t n_sram_st = 0;

  int64_t n_dram() const { return n_dram_init + n_dram_par; }
  /// Compute-only cycles of the inner loops over all tiles (no DRAM time).
  int64_t c_tot_wo_dram(const Tiling& t) const { return c_comp * t.tiles(); }
};

struct ComputeCost {
  int64_t c_comp = 0;
  int64_t c_mac = 0;
  int64_t c_sram = 0;
  int64_t c_pfetch = 0;
  int64_t n_mac = 0;
  int64_t n_sram_ld = 0;
  int64_t n_sram_st = 0;
};

enum class Objective { kMinComp, kMinDram };

std::string to_string(Objective obj);
Objective objective_from_string(const std::string& s);

/// Throws ConfigError on a zero tile size.
TileCounts tile_counts(int64_t n_of, int64_t n_if, int64_t n_ox, int64_t t_of, int64_t t_if, int64_t t_ox);

int64_t dram_init_accesses(const ConvLayer& layer, const Tiling& tiling);
int64_t dram_par_accesses(const ConvLayer& layer, const Tiling& tiling);
int64_t prefetch_cycles(int64_t stride);
ComputeCost compute_cycles(const ConvLayer& layer, const Tiling& tiling, const CoreConfig& core);
CostBreakdown total_cycles(const ConvLayer& layer, const Tiling& tiling, const CoreConfig& core);
int64_t sram_alloc(const ConvLayer& layer, const Tiling& tiling);

struct TilingSolution {
  Tiling tiling;
  CostBreakdown cost;
  int64_t objective_value = 0;
  int64_t candidates_evaluated = 0;
};

int64_t objective_value(const CostBreakdown& cost, Objective obj);

/// Exact minimizer over all integer tile sizes that fit the SRAM.
/// Ties prefer larger T'_ox, then larger T'_of, then larger T'_if.
/// Throws InfeasibleError when even T' = (1,1,1) exceeds the SRAM.
TilingSolution optimize(const ConvLayer& layer, const CoreConfig& core, Objective obj);

}  // namespace cnnmap
