#pragma once

// Symbolic walk of the tiled loop nest executed by a processing core: the DMA
// requests it issues, the points where it must wait for them, and the compute
// time spent per ofmap row. The walk is shared by the mapper (packet lists)
// and by the simulated core (transaction generation).

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "cnnmap/tiling.hpp"
#include "cnnmap/workload.hpp"

namespace cnnmap {

enum class DmaKind : uint8_t { kFilters, kBiases, kIfmapInit, kPsumInit, kIfmapNext, kPsumNext, kStore };

const char* to_string(DmaKind k);
inline bool is_read(DmaKind k) { return k != DmaKind::kStore; }
/// Loads the core must wait for before the inner loops start.
inline bool is_blocking(DmaKind k) { return k <= DmaKind::kPsumInit; }

struct TraversalStep {
  enum class Type : uint8_t { kDma, kAwait, kCompute };
  Type type = Type::kDma;

  // kDma: request number `seq` (consecutive from the first_seq given to the walker).
  DmaKind kind = DmaKind::kFilters;
  int64_t words = 0;
  int64_t seq = 0;

  // kAwait: all requests with first <= seq <= last must be complete.
  int64_t await_first = 0;
  int64_t await_last = 0;

  // kCompute: one ofmap row of the current tile.
  int64_t cycles = 0;
  int64_t macs = 0;
  int64_t sram_ld = 0;
  int64_t sram_st = 0;
};

/// Generator over the steps for one (sub)layer with a fixed tiling.
///
/// Per tile (t_o, t_i, t_x): filters (+ biases on the first input-channel tile)
/// when a new (t_o, t_i) pair starts, initial ifmap rows and, for t_i > 0,
/// initial psums; then for every ofmap row: wait for the store two rows back,
/// prefetch the next row's ifmap/psum, wait for this row's prefetch, compute,
/// store. The walk ends by waiting for every request it issued.
///
/// Word counts of ragged last tiles are clipped; the first ofmap-width tile
/// loads its full halo and later ones only their new columns, so the totals
/// equal dram_init_accesses() + dram_par_accesses().
class LoopNestWalker {
 public:
  LoopNestWalker(const ConvLayer& layer, const Tiling& tiling, const CoreConfig& core, int64_t first_seq = 0);

  /// Fills `out` and returns true, or returns false once the walk is over.
  bool next(TraversalStep& out);

  int64_t issued() const { return next_seq_ - first_seq_; }

 private:
  void emit_dma(DmaKind kind, int64_t words);
  void emit_await(int64_t first, int64_t last);
  void fill();  // refills buf_ with the next row (or tile header, or final wait)

  ConvLayer layer_;
  Tiling tiling_;
  int64_t row_cycles_ = 0, row_macs_ = 0, row_ld_ = 0, row_st_ = 0;

  int64_t first_seq_ = 0;
  int64_t next_seq_ = 0;

  std::vector<TraversalStep> buf_;
  std::size_t pos_ = 0;
  bool finished_ = false;

  int64_t t_o_ = 0, t_i_ = 0, t_x_ = 0, y_ = -1;  // y_ == -1: tile header pending
  int64_t of_a_ = 0, if_a_ = 0, ox_a_ = 0, ifmap_w_ = 0;

  int64_t prefetch_first_ = -1, prefetch_last_ = -1;  // loads for the next row
  std::array<int64_t, 2> recent_stores_{-1, -1};      // stores of the last two rows
};

/// Totals of one complete walk.
struct WalkTotals {
  int64_t blocking_words = 0;
  int64_t overlapped_words = 0;
  int64_t read_words = 0;
  int64_t write_words = 0;
  int64_t compute_cycles = 0;
  int64_t macs = 0;
  int64_t sram_ld = 0;
  int64_t sram_st = 0;
  int64_t requests = 0;
};

WalkTotals walk_totals(const ConvLayer& layer, const Tiling& tiling, const CoreConfig& core);

/// Core cycles of the walk over an ideal transport: blocking loads stall the
/// core at BW_dram, overlapped transfers stream at BW_dram beside the compute.
int64_t zero_latency_cycles(const ConvLayer& layer, const Tiling& tiling, const CoreConfig& core);

}  // namespace cnnmap
