#include "cnnmap/mapper.hpp"

#include <algorithm>
#include <tuple>

#include "cnnmap/error.hpp"
#include "cnnmap/traversal.hpp"

namespace cnnmap {

std::vector<SliceShape> slice_candidates(const ConvLayer& layer, const CoreConfig& core) {
  auto sizes = [](int64_t n, int64_t p) {
    std::vector<int64_t> v;
    for (int64_t m = 1; m <= n / p; ++m) v.push_back(m * p);
    if (v.empty()) v.push_back(n);
    return v;
  };
  std::vector<SliceShape> out;
  for (int64_t t_of : sizes(layer.n_of, core.p_of)) {
    for (int64_t t_ox : sizes(layer.n_ox, core.p_ox)) out.push_back({t_of, t_ox});
  }
  return out;
}

SliceCounts slice_counts(const ConvLayer& layer, int64_t t_of, int64_t t_ox) {
  if (t_of < 1 || t_ox < 1) throw ConfigError("slice sizes must be >= 1");
  return {ceil_div(layer.n_of, t_of), ceil_div(layer.n_ox, t_ox)};
}

std::vector<Slice> make_slices(const ConvLayer& layer, SliceShape shape) {
  const auto n = slice_counts(layer, shape.t_of, shape.t_ox);
  std::vector<Slice> out;
  out.reserve(static_cast<std::size_t>(n.s_of * n.s_ox));
  for (int64_t o = 0; o < n.s_of; ++o) {
    for (int64_t x = 0; x < n.s_ox; ++x) {
      const int64_t of0 = o * shape.t_of, x0 = x * shape.t_ox;
      out.push_back({of0, x0, std::min(shape.t_of, layer.n_of - of0), std::min(shape.t_ox, layer.n_ox - x0)});
    }
  }
  return out;
}

ConvLayer slice_to_sublayer(const ConvLayer& layer, const Slice& s) {
  if (s.of0 < 0 || s.x0 < 0 || s.t_of < 1 || s.t_ox < 1 || s.of0 + s.t_of > layer.n_of || s.x0 + s.t_ox > layer.n_ox) {
    throw ConfigError("slice outside layer " + layer.name);
  }
  ConvLayer sub = layer;
  sub.n_of = s.t_of;
  sub.n_ox = s.t_ox;
  sub.n_ix = (s.t_ox - 1) * layer.stride + layer.n_kx;
  return sub;
}

std::vector<std::vector<Slice>> stitch_adjacent(const std::vector<Slice>& slices, int k) {
  if (k < 1) throw ConfigError("core count must be >= 1");
  const auto n = static_cast<int64_t>(slices.size());
  const int64_t used = std::min<int64_t>(k, n);
  std::vector<std::vector<Slice>> out(static_cast<std::size_t>(used));
  const int64_t base = used ? n / used : 0, extra = used ? n % used : 0;
  std::size_t next = 0;
  for (int64_t c = 0; c < used; ++c) {
    auto& regions = out[static_cast<std::size_t>(c)];
    for (int64_t i = 0; i < base + (c < extra); ++i) {
      const Slice& s = slices[next++];
      if (!regions.empty()) {
        Slice& last = regions.back();
        if (last.of0 == s.of0 && last.t_of == s.t_of && last.x0 + last.t_ox == s.x0) {
          last.t_ox += s.t_ox;
          continue;
        }
      }
      regions.push_back(s);
    }
  }
  return out;
}

WorkItem make_work_item(const ConvLayer& layer, const Slice& region, const Tiling& slice_tiling) {
  WorkItem w;
  w.region = region;
  w.sublayer = slice_to_sublayer(layer, region);
  w.tiling = Tiling::make(w.sublayer, std::min(slice_tiling.t_of, region.t_of), slice_tiling.t_if,
                          std::min(slice_tiling.t_ox, region.t_ox));
  return w;
}

namespace {

struct TileClass {
  int64_t size = 0;
  int64_t count = 0;
  bool first = false;
};

// Tile positions of one loop grouped by (is first, size).
std::vector<TileClass> tile_classes(int64_t n, int64_t t) {
  const int64_t s = ceil_div(n, t);
  std::vector<TileClass> v;
  if (s == 1) {
    v.push_back({n, 1, true});
    return v;
  }
  v.push_back({t, 1, true});
  if (s > 2) v.push_back({t, s - 2, false});
  v.push_back({n - (s - 1) * t, 1, false});
  return v;
}

}  // namespace

TrafficSummary traffic_summary(const WorkItem& item, const PacketRule& rule) {
  const ConvLayer& l = item.sublayer;
  const Tiling& t = item.tiling;
  TrafficSummary sum;
  auto read = [&](int64_t words, int64_t n) {
    if (n == 0) return;
    sum.read_words += words * n;
    sum.read_requests += n;
    sum.flits += n * (PacketRule::kReadRequestFlits + packetized_flits(words, rule));
    sum.packets += n * (1 + packet_count(words, rule));
  };
  auto write = [&](int64_t words, int64_t n) {
    if (n == 0) return;
    sum.write_words += words * n;
    sum.flits += n * packetized_flits(words, rule);
    sum.packets += n * packet_count(words, rule);
  };
  const auto os = tile_classes(l.n_of, t.t_of);
  const auto is = tile_classes(l.n_if, t.t_if);
  const auto xs = tile_classes(l.n_ox, t.t_ox);
  const int64_t k_area = l.n_kx * l.n_ky;
  for (const auto& o : os) {
    for (const auto& i : is) {
      for (const auto& x : xs) {
        const int64_t n = o.count * i.count * x.count;
        const int64_t w = x.first ? (x.size - 1) * l.stride + l.n_kx : x.size * l.stride;
        const int64_t psum = x.size * o.size;
        if (x.first) {
          read(o.size * k_area * i.size, n);
          if (i.first) read(o.size, n);
        }
        read(i.size * l.n_ky * w, n);
        if (!i.first) read(psum, n);
        read(i.size * l.stride * w, n * (l.n_oy - 1));
        if (!i.first) read(psum, n * (l.n_oy - 1));
        write(psum, n * l.n_oy);
      }
    }
  }
  return sum;
}

std::vector<int64_t> enumerate_packets(const std::vector<WorkItem>& items, const CoreConfig& core,
                                       const PacketRule& rule) {
  std::vector<int64_t> out;
  for (const auto& item : items) {
    LoopNestWalker walker(item.sublayer, item.tiling, core);
    TraversalStep s;
    while (walker.next(s)) {
      if (s.type != TraversalStep::Type::kDma) continue;
      if (is_read(s.kind)) out.push_back(PacketRule::kReadRequestFlits);
      for (int64_t len : packetize(s.words, rule)) out.push_back(len);
    }
  }
  return out;
}

int64_t mapping_cost(const std::vector<int64_t>& core_cycles, int64_t total_flits, int64_t flit_bits,
                     int clock_ratio) {
  const int64_t compute = core_cycles.empty() ? 0 : *std::max_element(core_cycles.begin(), core_cycles.end());
  return compute + ceil_div(total_flits * flit_bits, flit_bits * clock_ratio);
}

int64_t core_compute_cycles(const CoreWork& core, const CoreConfig& cfg) {
  int64_t sum = 0;
  for (const auto& item : core.items) {
    sum += compute_cycles(item.sublayer, item.tiling, cfg).c_comp * item.tiling.tiles();
  }
  return sum;
}

std::vector<int> wave_steps(int n_cores) {
  if (n_cores < 1) throw ConfigError("core count must be >= 1");
  std::vector<int> out{1};
  while (out.back() < n_cores) out.push_back(std::min(2 * out.back(), n_cores));
  return out;
}

std::vector<std::vector<Coord>> wave_schedule(const PlatformConfig& platform) {
  const auto cores = platform.cores_by_distance();
  std::vector<std::vector<Coord>> out;
  for (int k : wave_steps(static_cast<int>(cores.size()))) out.emplace_back(cores.begin(), cores.begin() + k);
  return out;
}

const TilingSolution& SliceTilingCache::get(const ConvLayer& l, const CoreConfig& c, Objective obj) {
  const std::array<int64_t, 13> key{l.n_if, l.n_iy,     l.n_ix,         l.n_ky,
                                    l.n_kx, l.n_of,     l.stride,       c.p_ox,
                                    c.p_of, c.d_sram_words, c.bw_dram_words, static_cast<int64_t>(c.sram_model),
                                    static_cast<int64_t>(obj)};
  auto it = cache_.find(key);
  if (it == cache_.end()) it = cache_.emplace(key, optimize(l, c, obj)).first;
  return it->second;
}

Mapping build_mapping(const ConvLayer& layer, const PlatformConfig& platform, int k, SliceShape shape,
                      const Tiling& slice_tiling, Objective obj) {
  const CoreConfig core = platform.core_config();
  const PacketRule rule = platform.packet_rule();
  const auto nodes = platform.cores_by_distance();
  if (k < 1 || k > static_cast<int>(nodes.size())) throw ConfigError("wave step exceeds the platform's cores");

  Mapping m;
  m.layer = layer;
  m.objective = obj;
  m.k = k;
  m.shape = shape;
  m.slice_tiling = slice_tiling;
  const auto regions = stitch_adjacent(make_slices(layer, shape), k);
  std::vector<int64_t> cycles;
  for (std::size_t c = 0; c < regions.size(); ++c) {
    CoreWork work;
    work.node = nodes[c];
    for (const auto& r : regions[c]) {
      work.items.push_back(make_work_item(layer, r, slice_tiling));
      const auto traffic = traffic_summary(work.items.back(), rule);
      m.total_flits += traffic.flits;
      m.dram_words += traffic.read_words + traffic.write_words;
    }
    cycles.push_back(core_compute_cycles(work, core));
    m.cores.push_back(std::move(work));
  }
  m.max_core_cycles = *std::max_element(cycles.begin(), cycles.end());
  m.cost = mapping_cost(cycles, m.total_flits, platform.flit_bits, platform.clock_ratio());
  return m;
}

MappingResult wave_allocate(const ConvLayer& layer, const PlatformConfig& platform, Objective obj,
                            SliceTilingCache* cache) {
  SliceTilingCache local;
  if (!cache) cache = &local;
  const CoreConfig core = platform.core_config();
  const auto steps = wave_steps(platform.core_count());

  MappingResult result;
  bool have = false;
  int64_t min_alloc = 0;
  for (const auto& shape : slice_candidates(layer, core)) {
    const ConvLayer sub = slice_to_sublayer(layer, {0, 0, shape.t_of, shape.t_ox});
    const TilingSolution* sol = nullptr;
    try {
      sol = &cache->get(sub, core, obj);
    } catch (const InfeasibleError& e) {
      min_alloc = e.min_alloc_words();
      continue;
    }
    for (int k : steps) {
      Mapping m = build_mapping(layer, platform, k, shape, sol->tiling, obj);
      result.candidates.push_back({k, shape, m.cost});
      const bool better =
          !have || m.cost < result.best.cost ||
          (m.cost == result.best.cost &&
           (k < result.best.k ||
            (k == result.best.k && std::tie(shape.t_ox, shape.t_of) > std::tie(result.best.shape.t_ox,
                                                                                 result.best.shape.t_of))));
      if (better) {
        result.best = std::move(m);
        have = true;
      }
    }
  }
  if (!have) {
    throw InfeasibleError("layer " + layer.name + ": no slice fits a core's SRAM of " +
                              std::to_string(core.d_sram_words) + " words",
                          min_alloc);
  }
  return result;
}

double theoretical_bound(int64_t single_core_cycles, const Mapping& m, int64_t bw_dram_words) {
  const double dram = static_cast<double>(m.dram_words) / static_cast<double>(bw_dram_words);
  return static_cast<double>(single_core_cycles) / std::max(static_cast<double>(m.max_core_cycles), dram);
}

}  // namespace cnnmap
