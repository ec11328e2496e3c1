#include "cnnmap/packet.hpp"

#include "cnnmap/error.hpp"
#include "cnnmap/tiling.hpp"

namespace cnnmap {

void PacketRule::validate() const {
  if (flit_bits < 1 || word_bits < 1 || flit_bits % word_bits != 0)
    throw ConfigError("flit width must be a positive multiple of the word width");
  if (max_len < kReadRequestFlits) throw ConfigError("max packet length must be >= 3 flits");
}

std::vector<int64_t> packetize(int64_t words, const PacketRule& rule) {
  std::vector<int64_t> out;
  const int64_t cap = rule.max_payload_words();
  for (int64_t left = words; left > 0; left -= cap) {
    const int64_t chunk = left < cap ? left : cap;
    out.push_back(PacketRule::kOverheadFlits + ceil_div(chunk, rule.words_per_flit()));
  }
  return out;
}

int64_t packet_count(int64_t words, const PacketRule& rule) {
  return words <= 0 ? 0 : ceil_div(words, rule.max_payload_words());
}

int64_t packetized_flits(int64_t words, const PacketRule& rule) {
  if (words <= 0) return 0;
  const int64_t cap = rule.max_payload_words();
  const int64_t full = words / cap;
  const int64_t rest = words % cap;
  int64_t flits = full * (PacketRule::kOverheadFlits + cap / rule.words_per_flit());
  if (rest > 0) flits += PacketRule::kOverheadFlits + ceil_div(rest, rule.words_per_flit());
  return flits;
}

}  // namespace cnnmap
