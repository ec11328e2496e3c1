#include "cnnmap/traversal.hpp"

#include <algorithm>

namespace cnnmap {

const char* to_string(DmaKind k) {
  switch (k) {
    case DmaKind::kFilters: return "filters";
    case DmaKind::kBiases: return "biases";
    case DmaKind::kIfmapInit: return "ifmap_init";
    case DmaKind::kPsumInit: return "psum_init";
    case DmaKind::kIfmapNext: return "ifmap_next";
    case DmaKind::kPsumNext: return "psum_next";
    case DmaKind::kStore: return "store";
  }
  return "?";
}

LoopNestWalker::LoopNestWalker(const ConvLayer& layer, const Tiling& tiling, const CoreConfig& core, int64_t first_seq)
    : layer_(layer), tiling_(tiling), first_seq_(first_seq), next_seq_(first_seq) {
  const auto c = compute_cycles(layer, tiling, core);
  const int64_t rows = tiling.tiles() * layer.n_oy;
  row_cycles_ = c.c_mac + c.c_sram;
  row_macs_ = c.n_mac / rows;
  row_ld_ = c.n_sram_ld / rows;
  row_st_ = c.n_sram_st / rows;
  buf_.reserve(8);
}

void LoopNestWalker::emit_dma(DmaKind kind, int64_t words) {
  TraversalStep s;
  s.type = TraversalStep::Type::kDma;
  s.kind = kind;
  s.words = words;
  s.seq = next_seq_++;
  buf_.push_back(s);
}

void LoopNestWalker::emit_await(int64_t first, int64_t last) {
  TraversalStep s;
  s.type = TraversalStep::Type::kAwait;
  s.await_first = first;
  s.await_last = last;
  buf_.push_back(s);
}

void LoopNestWalker::fill() {
  buf_.clear();
  pos_ = 0;
  const ConvLayer& l = layer_;
  const Tiling& t = tiling_;

  if (t_o_ == t.s_of) {
    if (next_seq_ > first_seq_) emit_await(first_seq_, next_seq_ - 1);
    finished_ = true;
    return;
  }

  if (y_ < 0) {
    of_a_ = std::min(t.t_of, l.n_of - t_o_ * t.t_of);
    if_a_ = std::min(t.t_if, l.n_if - t_i_ * t.t_if);
    ox_a_ = std::min(t.t_ox, l.n_ox - t_x_ * t.t_ox);
    // Later width tiles only fetch the columns not already covered by the halo.
    ifmap_w_ = t_x_ == 0 ? (ox_a_ - 1) * l.stride + l.n_kx : ox_a_ * l.stride;
    const int64_t first = next_seq_;
    if (t_x_ == 0) {
      emit_dma(DmaKind::kFilters, of_a_ * l.n_kx * l.n_ky * if_a_);
      if (t_i_ == 0) emit_dma(DmaKind::kBiases, of_a_);
    }
    emit_dma(DmaKind::kIfmapInit, if_a_ * l.n_ky * ifmap_w_);
    if (t_i_ > 0) emit_dma(DmaKind::kPsumInit, ox_a_ * of_a_);
    emit_await(first, next_seq_ - 1);
    y_ = 0;
    return;
  }

  // One ofmap row.
  if (recent_stores_[0] >= 0) emit_await(recent_stores_[0], recent_stores_[0]);
  const int64_t pf_first = prefetch_first_, pf_last = prefetch_last_;
  prefetch_first_ = prefetch_last_ = -1;
  if (y_ + 1 < l.n_oy) {
    prefetch_first_ = next_seq_;
    emit_dma(DmaKind::kIfmapNext, if_a_ * l.stride * ifmap_w_);
    if (t_i_ > 0) emit_dma(DmaKind::kPsumNext, ox_a_ * of_a_);
    prefetch_last_ = next_seq_ - 1;
  }
  if (y_ >= 1) emit_await(pf_first, pf_last);

  TraversalStep c;
  c.type = TraversalStep::Type::kCompute;
  c.cycles = row_cycles_;
  c.macs = row_macs_;
  c.sram_ld = row_ld_;
  c.sram_st = row_st_;
  buf_.push_back(c);

  const int64_t store = next_seq_;
  emit_dma(DmaKind::kStore, ox_a_ * of_a_);
  recent_stores_ = {recent_stores_[1], store};

  if (++y_ == l.n_oy) {
    y_ = -1;
    if (++t_x_ == t.s_ox) {
      t_x_ = 0;
      if (++t_i_ == t.s_if) {
        t_i_ = 0;
        ++t_o_;
      }
    }
  }
}

bool LoopNestWalker::next(TraversalStep& out) {
  while (pos_ == buf_.size()) {
    if (finished_) return false;
    fill();
  }
  out = buf_[pos_++];
  return true;
}

WalkTotals walk_totals(const ConvLayer& layer, const Tiling& tiling, const CoreConfig& core) {
  WalkTotals w;
  LoopNestWalker walker(layer, tiling, core);
  TraversalStep s;
  while (walker.next(s)) {
    if (s.type == TraversalStep::Type::kDma) {
      ++w.requests;
      (is_blocking(s.kind) ? w.blocking_words : w.overlapped_words) += s.words;
      (is_read(s.kind) ? w.read_words : w.write_words) += s.words;
    } else if (s.type == TraversalStep::Type::kCompute) {
      w.compute_cycles += s.cycles;
      w.macs += s.macs;
      w.sram_ld += s.sram_ld;
      w.sram_st += s.sram_st;
    }
  }
  return w;
}

int64_t zero_latency_cycles(const ConvLayer& layer, const Tiling& tiling, const CoreConfig& core) {
  const auto w = walk_totals(layer, tiling, core);
  return ceil_div(w.blocking_words, core.bw_dram_words) +
         std::max(w.compute_cycles, ceil_div(w.overlapped_words, core.bw_dram_words));
}

}  // namespace cnnmap
