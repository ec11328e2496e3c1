#include "cnnmap/tiling.hpp"

#include <algorithm>
#include <bit>
#include <tuple>

#include "cnnmap/error.hpp"

namespace cnnmap {

CoreConfig CoreConfig::with_unrolling(int64_t p_ox, int64_t p_of) {
  CoreConfig c;
  c.p_ox = p_ox;
  c.p_of = p_of;
  c.d_sram_words = p_ox * 4096;
  return c;
}

void CoreConfig::validate() const {
  auto pow2 = [](int64_t v) { return v >= 1 && std::has_single_bit(static_cast<uint64_t>(v)); };
  if (!pow2(p_ox) || !pow2(p_of)) throw ConfigError("P_ox and P_of must be powers of two >= 1");
  if (d_sram_words < 1) throw ConfigError("D_sram must be positive");
  if (word_bits < 1) throw ConfigError("word width must be positive");
  if (bw_dram_words < 1) throw ConfigError("BW_dram must be positive");
  if (!(f_core_hz > 0)) throw ConfigError("f_core must be positive");
}

Tiling Tiling::make(const ConvLayer& layer, int64_t t_of, int64_t t_if, int64_t t_ox) {
  if (t_of < 1 || t_of > layer.n_of || t_if < 1 || t_if > layer.n_if || t_ox < 1 || t_ox > layer.n_ox) {
    throw ConfigError("tiling (" + std::to_string(t_of) + "," + std::to_string(t_if) + "," + std::to_string(t_ox) +
                      ") outside layer " + layer.name + " bounds");
  }
  Tiling t;
  t.t_of = t_of;
  t.t_if = t_if;
  t.t_ox = t_ox;
  t.t_ix = (t_ox - 1) * layer.stride + layer.n_kx;
  const auto c = tile_counts(layer.n_of, layer.n_if, layer.n_ox, t_of, t_if, t_ox);
  t.s_of = c.s_of;
  t.s_if = c.s_if;
  t.s_ox = c.s_ox;
  return t;
}

std::string to_string(Objective obj) { return obj == Objective::kMinComp ? "min-comp" : "min-dram"; }

Objective objective_from_string(const std::string& s) {
  if (s == "min-comp") return Objective::kMinComp;
  if (s == "min-dram") return Objective::kMinDram;
  throw ConfigError("unknown objective '" + s + "' (expected min-comp or min-dram)");
}

TileCounts tile_counts(int64_t n_of, int64_t n_if, int64_t n_ox, int64_t t_of, int64_t t_if, int64_t t_ox) {
  if (t_of < 1 || t_if < 1 || t_ox < 1) throw ConfigError("tile size must be >= 1");
  return {ceil_div(n_of, t_of), ceil_div(n_if, t_if), ceil_div(n_ox, t_ox)};
}

int64_t dram_init_accesses(const ConvLayer& l, const Tiling& t) {
  return l.n_of * l.n_kx * l.n_ky * l.n_if                  // filters
         + l.n_of                                           // biases
         + t.s_of * l.n_ix * l.n_ky * l.n_if                // initial ifmap rows
         + (t.s_if - 1) * l.n_ox * l.n_of;                  // initial psum rows
}

int64_t dram_par_accesses(const ConvLayer& l, const Tiling& t) {
  return t.s_if * l.n_ox * l.n_oy * l.n_of                  // ofmap / psum stores
         + t.s_of * l.n_ix * (l.n_iy - l.n_ky) * l.n_if     // next ifmap rows
         + (t.s_if - 1) * l.n_ox * (l.n_oy - 1) * l.n_of;   // next psum rows
}

int64_t prefetch_cycles(int64_t stride) { return ceil_div(stride + 1, 2) - 1; }

namespace {

int64_t sram_row_cycles(int64_t t_ox, int64_t t_of, const CoreConfig& core) {
  const int64_t words = core.sram_model == SramCycleModel::kVerbatim ? 2 * t_ox * t_of * core.p_ox * core.p_of
                                                                      : 2 * t_ox * t_of;
  return ceil_div(words, core.bw_sram_words());
}

}  // namespace

ComputeCost compute_cycles(const ConvLayer& l, const Tiling& t, const CoreConfig& core) {
  ComputeCost c;
  const int64_t v_ox = ceil_div(t.t_ox, core.p_ox);
  const int64_t v_of = ceil_div(t.t_of, core.p_of);
  c.c_pfetch = prefetch_cycles(l.stride);
  c.c_mac = (c.c_pfetch + l.n_kx) * t.t_if * l.n_ky * v_ox * v_of;
  c.c_sram = sram_row_cycles(t.t_ox, t.t_of, core);
  c.c_comp = (c.c_mac + c.c_sram) * l.n_oy;

  // Symbolic trip counts of the inner loops; every tile runs the full T' ranges.
  const int64_t rows = t.tiles() * l.n_oy;
  const int64_t vec_blocks = v_ox * v_of;
  const int64_t line_words = (core.p_ox - 1) * l.stride + l.n_kx;
  c.n_mac = rows * vec_blocks * l.n_ky * t.t_if * l.n_kx * core.p_ox * core.p_of;
  c.n_sram_ld = rows * vec_blocks * (core.p_ox * core.p_of + l.n_ky * t.t_if * line_words);
  c.n_sram_st = rows * vec_blocks * core.p_ox * core.p_of;
  return c;
}

int64_t sram_alloc(const ConvLayer& l, const Tiling& t) {
  return t.t_of                                   // biases
         + t.t_of * l.n_kx * l.n_ky * t.t_if      // filters
         + t.t_if * (l.n_ky + l.stride) * t.t_ix  // ifmap rows incl. prefetch
         + 3 * t.t_ox * t.t_of;                   // triple-buffered ofmap rows
}

CostBreakdown total_cycles(const ConvLayer& l, const Tiling& t, const CoreConfig& core) {
  CostBreakdown b;
  b.n_dram_init = dram_init_accesses(l, t);
  b.n_dram_par = dram_par_accesses(l, t);
  const auto c = compute_cycles(l, t, core);
  b.c_mac = c.c_mac;
  b.c_sram = c.c_sram;
  b.c_pfetch = c.c_pfetch;
  b.c_comp = c.c_comp;
  b.n_mac = c.n_mac;
  b.n_sram_ld = c.n_sram_ld;
  b.n_sram_st = c.n_sram_st;
  b.c_dram_par = ceil_div(b.n_dram_par, core.bw_dram_words);
  b.c_outer_loop = ceil_div(b.n_dram_init, core.bw_dram_words);
  b.c_inner_loop = std::max(b.c_comp * t.tiles(), b.c_dram_par);
  b.c_total = b.c_outer_loop + b.c_inner_loop;
  b.n_sram_alloc = sram_alloc(l, t);
  return b;
}

int64_t objective_value(const CostBreakdown& cost, Objective obj) {
  return obj == Objective::kMinComp ? cost.c_total : cost.n_dram();
}

TilingSolution optimize(const ConvLayer& l, const CoreConfig& core, Objective obj) {
  const int64_t k_area = l.n_kx * l.n_ky;
  const int64_t row_span = l.n_ky + l.stride;
  const int64_t d = core.d_sram_words;
  const int64_t bw = core.bw_dram_words;
  const int64_t pfetch = prefetch_cycles(l.stride);

  // alloc(T'_if) = a + b * T'_if for fixed (T'_ox, T'_of); both grow with T'_ox and T'_of,
  // so the first infeasible size ends the corresponding loop.
  auto alloc_a = [&](int64_t t_ox, int64_t t_of) { return t_of + 3 * t_ox * t_of; };
  auto alloc_b = [&](int64_t t_ix, int64_t t_of) { return t_of * k_area + row_span * t_ix; };

  const int64_t min_alloc = alloc_a(1, 1) + alloc_b(l.n_kx, 1);
  if (min_alloc > d) {
    throw InfeasibleError("layer " + l.name + ": no tiling fits " + std::to_string(d) +
                              " SRAM words (minimal allocation " + std::to_string(min_alloc) + ")",
                          min_alloc);
  }

  // Terms that only depend on the tile counts.
  const int64_t filters_biases = l.n_of * k_area * l.n_if + l.n_of;
  const int64_t ifmap_init_per_sof = l.n_ix * l.n_ky * l.n_if;
  const int64_t ifmap_next_per_sof = l.n_ix * (l.n_iy - l.n_ky) * l.n_if;
  const int64_t psum_init_per_sif = l.n_ox * l.n_of;
  const int64_t store_per_sif = l.n_ox * l.n_oy * l.n_of;
  const int64_t psum_next_per_sif = l.n_ox * (l.n_oy - 1) * l.n_of;

  struct Best {
    int64_t value = -1;
    int64_t t_ox = 0, t_of = 0, t_if = 0;
  } best;
  int64_t evaluated = 0;

  for (int64_t t_ox = 1; t_ox <= l.n_ox; ++t_ox) {
    const int64_t t_ix = (t_ox - 1) * l.stride + l.n_kx;
    if (alloc_a(t_ox, 1) + alloc_b(t_ix, 1) > d) break;
    const int64_t s_ox = ceil_div(l.n_ox, t_ox);
    const int64_t v_ox = ceil_div(t_ox, core.p_ox);
    for (int64_t t_of = 1; t_of <= l.n_of; ++t_of) {
      const int64_t a = alloc_a(t_ox, t_of);
      const int64_t b = alloc_b(t_ix, t_of);
      if (a + b > d) break;
      const int64_t max_if = std::min(l.n_if, (d - a) / b);
      const int64_t s_of = ceil_div(l.n_of, t_of);
      const int64_t v_of = ceil_div(t_of, core.p_of);
      const int64_t c_sram = sram_row_cycles(t_ox, t_of, core);
      for (int64_t t_if = 1; t_if <= max_if; ++t_if) {
        ++evaluated;
        const int64_t s_if = ceil_div(l.n_if, t_if);
        const int64_t n_init = filters_biases + s_of * ifmap_init_per_sof + (s_if - 1) * psum_init_per_sif;
        const int64_t n_par = s_if * store_per_sif + s_of * ifmap_next_per_sof + (s_if - 1) * psum_next_per_sif;
        int64_t value;
        if (obj == Objective::kMinDram) {
          value = n_init + n_par;
        } else {
          const int64_t c_mac = (pfetch + l.n_kx) * t_if * l.n_ky * v_ox * v_of;
          const int64_t c_comp = (c_mac + c_sram) * l.n_oy;
          value = ceil_div(n_init, bw) + std::max(c_comp * s_ox * s_if * s_of, ceil_div(n_par, bw));
        }
        // Ties: larger (T'_ox, T'_of, T'_if) wins.
        if (best.value < 0 || value < best.value ||
            (value == best.value &&
             std::tie(t_ox, t_of, t_if) > std::tie(best.t_ox, best.t_of, best.t_if))) {
          best = {value, t_ox, t_of, t_if};
        }
      }
    }
  }

  TilingSolution sol;
  sol.tiling = Tiling::make(l, best.t_of, best.t_if, best.t_ox);
  sol.cost = total_cycles(l, sol.tiling, core);
  sol.objective_value = objective_value(sol.cost, obj);
  sol.candidates_evaluated = evaluated;
  return sol;
}

}  // namespace cnnmap
