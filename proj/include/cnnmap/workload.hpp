#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace cnnmap {

/// One convolutional layer. Input sizes already include padding, so
/// n_ox = (n_ix - n_kx) / stride + 1 holds exactly (same for y).
struct ConvLayer {
  std::string name;
  int64_t n_if = 1;
  int64_t n_iy = 1;
  int64_t n_ix = 1;
  int64_t n_ky = 1;
  int64_t n_kx = 1;
  int64_t n_of = 1;
  int64_t n_oy = 1;
  int64_t n_ox = 1;
  int64_t stride = 1;

  /// Builds a layer from its nine independent fields; derives n_oy/n_ox and validates.
  static ConvLayer make(std::string name, int64_t n_if, int64_t n_iy, int64_t n_ix, int64_t n_ky,
                        int64_t n_kx, int64_t n_of, int64_t stride);

  /// Throws DimensionError naming the first violated invariant.
  void validate() const;

  int64_t macs() const { return n_of * n_oy * n_ox * n_if * n_ky * n_kx; }

  /// Same dimensions, ignoring the name.
  bool same_shape(const ConvLayer& other) const;

  bool operator==(const ConvLayer&) const = default;
};

struct Network {
  std::string name;
  std::vector<ConvLayer> layers;

  const ConvLayer& layer(std::string_view layer_name) const;
  bool operator==(const Network&) const = default;
};

/// Consecutive layers with identical shapes, e.g. VGG-16 "3_{2,3}".
struct LayerGroup {
  std::string label;
  std::vector<std::size_t> members;  // indices into Network::layers
};

Network parse_network(std::string_view text, const std::string& source = "<network>");
Network load_network(const std::filesystem::path& path);
std::string serialize_network(const Network& net);

/// AlexNet (8 entries, grouped layers split) and VGG-16 (13 entries).
std::vector<Network> builtin_networks();
Network builtin_network(std::string_view name);

std::vector<LayerGroup> group_layers(const Network& net);

}  // namespace cnnmap
