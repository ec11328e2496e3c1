#pragma once

// Mesh geometry, node roles and the system parameters shared by the mapper
// and the simulator.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "cnnmap/packet.hpp"
#include "cnnmap/tiling.hpp"

namespace cnnmap {

struct Coord {
  int x = 0;
  int y = 0;
  bool operator==(const Coord&) const = default;
};

inline int manhattan(Coord a, Coord b) { return (a.x > b.x ? a.x - b.x : b.x - a.x) + (a.y > b.y ? a.y - b.y : b.y - a.y); }
std::string to_string(Coord c);

enum class NodeRole { kEmpty, kMaster, kDram, kCore };
const char* to_string(NodeRole r);

struct PlatformConfig {
  int mesh_w = 3;
  int mesh_h = 1;
  std::vector<NodeRole> roles;  // row-major, y * mesh_w + x

  int64_t flit_bits = 64;
  int64_t max_packet_len = 40;
  int64_t inport_buffer_flits = 16;
  int64_t dmani_buffer_words = 64;
  double f_noc_hz = 1e9;
  double f_core_hz = 500e6;
  /// Unrolling, SRAM and word width of every processing core. DRAM bandwidth
  /// and clock are derived from the NoC parameters by core_config().
  CoreConfig core;
  std::string energy_table_path;  // empty: built-in table
  int64_t watchdog_cycles = 2'000'000;

  /// Smallest near-square mesh holding n cores plus master and DRAM node;
  /// cores fill the positions nearest to the DRAM node, the rest stay empty.
  static PlatformConfig for_cores(int n_cores, const CoreConfig& core = {});
  /// Every free position of a w x h mesh becomes a core.
  static PlatformConfig full_mesh(int w, int h, const CoreConfig& core = {});

  int nodes() const { return mesh_w * mesh_h; }
  int index(Coord c) const { return c.y * mesh_w + c.x; }
  Coord coord(int index) const { return {index % mesh_w, index / mesh_w}; }
  NodeRole role(Coord c) const { return roles[static_cast<std::size_t>(index(c))]; }

  Coord master() const { return {0, 0}; }
  Coord dram() const { return {mesh_w / 2, mesh_h / 2}; }
  /// Processing cores by ascending distance to the DRAM node, ties row-major.
  std::vector<Coord> cores_by_distance() const;
  int core_count() const;

  int clock_ratio() const;
  PacketRule packet_rule() const { return {flit_bits, core.word_bits, max_packet_len}; }
  /// Core parameters with BW_dram = flit width per NoC cycle in words per core cycle.
  CoreConfig core_config() const;

  /// Throws ConfigError.
  void validate() const;
};

/// Text format: `key = value` lines, `#` comments. Keys: cores, mesh (WxH),
/// flit_bits, max_packet_len, inport_buffer, dmani_buffer, f_noc_hz, f_core_hz,
/// p_ox, p_of, d_sram_words, word_bits, sram_cycles (verbatim | per-word),
/// energy_table, watchdog. `cores` and `mesh` are mutually exclusive.
PlatformConfig parse_platform(std::string_view text, const std::string& source = "<platform>");
PlatformConfig load_platform(const std::filesystem::path& path);
std::string serialize_platform(const PlatformConfig& p);

/// Side lengths used by PlatformConfig::for_cores.
std::pair<int, int> mesh_for_cores(int n_cores);

}  // namespace cnnmap
