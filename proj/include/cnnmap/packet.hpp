#pragma once

#include <cstdint>
#include <vector>

namespace cnnmap {

/// Packing of DMA payload into NoC packets: a header flit (dst + src), a size
/// flit, then payload flits of flit_bits / word_bits words each. Requests are
/// split greedily into packets of at most max_len flits.
struct PacketRule {
  int64_t flit_bits = 64;
  int64_t word_bits = 16;
  int64_t max_len = 40;

  static constexpr int64_t kOverheadFlits = 2;
  /// Header + size + one descriptor flit.
  static constexpr int64_t kReadRequestFlits = 3;

  int64_t words_per_flit() const { return flit_bits / word_bits; }
  int64_t max_payload_words() const { return (max_len - kOverheadFlits) * words_per_flit(); }

  /// Throws ConfigError.
  void validate() const;
};

/// Packet lengths (flits) carrying `words` payload words; empty for 0 words.
std::vector<int64_t> packetize(int64_t words, const PacketRule& rule);
int64_t packet_count(int64_t words, const PacketRule& rule);
/// Sum of packetize(words, rule).
int64_t packetized_flits(int64_t words, const PacketRule& rule);

}  // namespace cnnmap
