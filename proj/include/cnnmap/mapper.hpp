#pragma once

// Many-core mapping: the layer's ofmap plane is cut into (T_of x T_ox) slices,
// slices are distributed over the cores nearest to the DRAM node, and every
// slice is executed with its own single-core tiling.

#include <array>
#include <cstdint>
#include <map>
#include <vector>

#include "cnnmap/packet.hpp"
#include "cnnmap/platform.hpp"
#include "cnnmap/tiling.hpp"
#include "cnnmap/workload.hpp"

namespace cnnmap {

/// A rectangle [of0, of0 + t_of) x [x0, x0 + t_ox) of the ofmap plane; sizes
/// are already clipped at the layer edges.
struct Slice {
  int64_t of0 = 0;
  int64_t x0 = 0;
  int64_t t_of = 1;
  int64_t t_ox = 1;
  bool operator==(const Slice&) const = default;
};

struct SliceShape {
  int64_t t_of = 1;
  int64_t t_ox = 1;
  bool operator==(const SliceShape&) const = default;
  auto operator<=>(const SliceShape&) const = default;
};

struct SliceCounts {
  int64_t s_of = 0;
  int64_t s_ox = 0;
  bool operator==(const SliceCounts&) const = default;
};

/// Multiples of the core unrolling up to the layer size; a dimension smaller
/// than its unrolling factor contributes only its full size.
std::vector<SliceShape> slice_candidates(const ConvLayer& layer, const CoreConfig& core);
SliceCounts slice_counts(const ConvLayer& layer, int64_t t_of, int64_t t_ox);
/// All slices of a layer ordered by (of0, x0).
std::vector<Slice> make_slices(const ConvLayer& layer, SliceShape shape);
/// The sub-layer computing `slice`: input width shrinks to the slice's receptive field.
ConvLayer slice_to_sublayer(const ConvLayer& layer, const Slice& slice);

/// Block distribution of ordered slices over k cores (remainders to the first
/// cores); x-adjacent slices of the same output-channel group on one core are
/// merged into one region.
std::vector<std::vector<Slice>> stitch_adjacent(const std::vector<Slice>& slices, int k);

/// One region executed by a core with a fixed tiling.
struct WorkItem {
  Slice region;
  ConvLayer sublayer;
  Tiling tiling;
};

/// Builds the work item for `region`, clipping the slice tiling to the region.
WorkItem make_work_item(const ConvLayer& layer, const Slice& region, const Tiling& slice_tiling);

struct CoreWork {
  Coord node;
  std::vector<WorkItem> items;
};

/// Words moved between DRAM and one core for its items.
struct TrafficSummary {
  int64_t read_words = 0;
  int64_t write_words = 0;
  int64_t read_requests = 0;
  int64_t flits = 0;  // read requests + responses + writes, overhead included
  int64_t packets = 0;
  bool operator==(const TrafficSummary&) const = default;
};

/// Packet lengths of every DMA request of the items, in execution order. Each
/// read contributes its request packet followed by its response packets.
std::vector<int64_t> enumerate_packets(const std::vector<WorkItem>& items, const CoreConfig& core,
                                       const PacketRule& rule);
/// Same totals as enumerate_packets, without walking the rows.
TrafficSummary traffic_summary(const WorkItem& item, const PacketRule& rule);

/// max(core_cycles) + ceil(total_flits * flit_bits / (flit_bits * clock_ratio)).
int64_t mapping_cost(const std::vector<int64_t>& core_cycles, int64_t total_flits, int64_t flit_bits,
                     int clock_ratio);

struct Mapping {
  ConvLayer layer;
  Objective objective = Objective::kMinComp;
  int k = 1;  // wave step; cores.size() may be smaller when there are fewer slices
  SliceShape shape;
  Tiling slice_tiling;  // tiling of a full slice
  std::vector<CoreWork> cores;
  int64_t cost = 0;
  int64_t max_core_cycles = 0;  // max over cores of compute-only cycles
  int64_t total_flits = 0;
  int64_t dram_words = 0;

  int active_cores() const { return static_cast<int>(cores.size()); }
};

/// Compute-only cycles of one core: sum of C_comp * S' over its items.
int64_t core_compute_cycles(const CoreWork& core, const CoreConfig& cfg);

struct CandidateCost {
  int k = 1;
  SliceShape shape;
  int64_t cost = 0;
};

/// k = 1, 2, 4, ... capped at n_cores.
std::vector<int> wave_steps(int n_cores);
/// Active core sets per wave step.
std::vector<std::vector<Coord>> wave_schedule(const PlatformConfig& platform);

/// Memoizes the slice tilings of wave_allocate across platforms with the same core.
class SliceTilingCache {
 public:
  const TilingSolution& get(const ConvLayer& sublayer, const CoreConfig& core, Objective obj);

 private:
  std::map<std::array<int64_t, 13>, TilingSolution> cache_;
};

/// Builds and costs the mapping of `layer` for one wave step and slice shape.
Mapping build_mapping(const ConvLayer& layer, const PlatformConfig& platform, int k, SliceShape shape,
                      const Tiling& slice_tiling, Objective obj);

struct MappingResult {
  Mapping best;
  std::vector<CandidateCost> candidates;  // every evaluated (k, T)
};

/// Evaluates every slice shape at every wave step and keeps the cheapest;
/// ties prefer smaller k, then larger (T_ox, T_of). Shapes whose slice has no
/// feasible tiling are skipped; throws InfeasibleError if none is left.
MappingResult wave_allocate(const ConvLayer& layer, const PlatformConfig& platform, Objective obj,
                            SliceTilingCache* cache = nullptr);

/// Reference cycles over max(max core compute cycles, DRAM words / BW_dram).
double theoretical_bound(int64_t single_core_cycles, const Mapping& mapping, int64_t bw_dram_words);

}  // namespace cnnmap
