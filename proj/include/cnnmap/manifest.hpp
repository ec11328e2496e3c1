#pragma once

// Text form of mappings, the hand-off between the mapper and the simulator.
//
//   mapping layer=<name> objective=min-comp k=4 t_of=64 t_ox=16 cost=... max_core_cycles=... total_flits=... dram_words=...
//   layer name=<name> n_if=... n_iy=... n_ix=... n_ky=... n_kx=... n_of=... stride=...
//   slice_tiling t_of=... t_if=... t_ox=...
//   core x=1 y=0
//   item of0=0 x0=0 t_of=64 t_ox=32 tile_of=64 tile_if=3 tile_ox=16
//   end

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "cnnmap/mapper.hpp"

namespace cnnmap {

std::string write_manifest(const std::vector<Mapping>& mappings);
/// Rebuilds sub-layers and tilings from the recorded regions and tile sizes.
std::vector<Mapping> parse_manifest(std::string_view text, const std::string& source = "<manifest>");
std::vector<Mapping> load_manifest(const std::filesystem::path& path);

}  // namespace cnnmap
