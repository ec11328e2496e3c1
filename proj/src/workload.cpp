#include "cnnmap/workload.hpp"

#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include "cnnmap/error.hpp"
#include "text_util.hpp"

namespace cnnmap {

namespace detail {
extern const std::string_view kVgg16Text;
extern const std::string_view kAlexNetText;
}  // namespace detail

namespace {

int64_t output_extent(const std::string& layer, const char* axis, int64_t in, int64_t k, int64_t s) {
  if (k > in) {
    throw DimensionError("layer " + layer + ": kernel larger than input along " + axis + " (" + std::to_string(k) +
                         " > " + std::to_string(in) + ")");
  }
  if ((in - k) % s != 0) {
    throw DimensionError("layer " + layer + ": (n_i" + axis + " - n_k" + axis + ") / stride is not integral (" +
                         std::to_string(in) + " - " + std::to_string(k) + ") / " + std::to_string(s));
  }
  return (in - k) / s + 1;
}

}  // namespace

ConvLayer ConvLayer::make(std::string name, int64_t n_if, int64_t n_iy, int64_t n_ix, int64_t n_ky, int64_t n_kx,
                          int64_t n_of, int64_t stride) {
  ConvLayer l;
  l.name = std::move(name);
  l.n_if = n_if;
  l.n_iy = n_iy;
  l.n_ix = n_ix;
  l.n_ky = n_ky;
  l.n_kx = n_kx;
  l.n_of = n_of;
  l.stride = stride;
  for (auto [v, what] : {std::pair{n_if, "n_if"}, {n_iy, "n_iy"}, {n_ix, "n_ix"}, {n_ky, "n_ky"},
                         {n_kx, "n_kx"}, {n_of, "n_of"}, {stride, "stride"}}) {
    if (v < 1) throw DimensionError("layer " + l.name + ": " + what + " must be >= 1");
  }
  l.n_oy = output_extent(l.name, "y", n_iy, n_ky, stride);
  l.n_ox = output_extent(l.name, "x", n_ix, n_kx, stride);
  return l;
}

void ConvLayer::validate() const {
  const auto fresh = make(name, n_if, n_iy, n_ix, n_ky, n_kx, n_of, stride);
  if (fresh.n_ox != n_ox) {
    throw DimensionError("layer " + name + ": n_ox = " + std::to_string(n_ox) + " but (n_ix - n_kx) / stride + 1 = " +
                         std::to_string(fresh.n_ox));
  }
  if (fresh.n_oy != n_oy) {
    throw DimensionError("layer " + name + ": n_oy = " + std::to_string(n_oy) + " but (n_iy - n_ky) / stride + 1 = " +
                         std::to_string(fresh.n_oy));
  }
}

bool ConvLayer::same_shape(const ConvLayer& o) const {
  return n_if == o.n_if && n_iy == o.n_iy && n_ix == o.n_ix && n_ky == o.n_ky && n_kx == o.n_kx && n_of == o.n_of &&
         n_oy == o.n_oy && n_ox == o.n_ox && stride == o.stride;
}

const ConvLayer& Network::layer(std::string_view layer_name) const {
  for (const auto& l : layers) {
    if (l.name == layer_name) return l;
  }
  throw ConfigError("network " + name + " has no layer '" + std::string(layer_name) + "'");
}

Network parse_network(std::string_view text, const std::string& source) {
  using detail::opt_int;
  using detail::req_int;
  static const std::set<std::string> known = {"name",     "n_if",     "n_iy", "n_ix", "n_iy_raw", "n_ix_raw",
                                              "pad",      "n_ky",     "n_kx", "n_of", "stride",   "n_oy",
                                              "n_ox"};
  Network net;
  std::set<std::string> names;
  for (const auto& line : detail::tokenize(text, source)) {
    if (line.keyword == "network") {
      if (line.positional.size() != 1 || !line.kv.empty())
        throw ParseError(source, line.number, "expected 'network <name>'");
      net.name = line.positional.front();
      continue;
    }
    if (line.keyword != "layer") throw ParseError(source, line.number, "unknown record '" + line.keyword + "'");
    if (!line.positional.empty()) throw ParseError(source, line.number, "unexpected token '" + line.positional[0] + "'");
    for (const auto& [k, v] : line.kv) {
      if (!known.contains(k)) throw ParseError(source, line.number, "unknown key '" + k + "'");
    }
    const auto name_it = line.kv.find("name");
    if (name_it == line.kv.end()) throw ParseError(source, line.number, "missing key 'name'");

    // Raw extents plus pad are folded into padded extents; the two spellings are exclusive.
    const auto pad = opt_int(line, "pad", source);
    auto extent = [&](const std::string& padded, const std::string& raw) {
      const auto p = opt_int(line, padded, source);
      const auto r = opt_int(line, raw, source);
      if (p && r) throw ParseError(source, line.number, "both '" + padded + "' and '" + raw + "' given");
      if (p) {
        if (pad) throw ParseError(source, line.number, "'pad' only applies to raw extents");
        return *p;
      }
      if (!r) throw ParseError(source, line.number, "missing key '" + padded + "'");
      return *r + 2 * pad.value_or(0);
    };
    const int64_t n_iy = extent("n_iy", "n_iy_raw");
    const int64_t n_ix = extent("n_ix", "n_ix_raw");
    if (pad && *pad < 0) throw ParseError(source, line.number, "negative pad");

    ConvLayer layer;
    try {
      layer = ConvLayer::make(name_it->second, req_int(line, "n_if", source), n_iy, n_ix,
                              req_int(line, "n_ky", source), req_int(line, "n_kx", source),
                              req_int(line, "n_of", source), req_int(line, "stride", source));
    } catch (const DimensionError& e) {
      throw DimensionError(source + ":" + std::to_string(line.number) + ": " + e.what());
    }
    if (const auto oy = opt_int(line, "n_oy", source); oy && *oy != layer.n_oy) {
      throw DimensionError(source + ":" + std::to_string(line.number) + ": layer " + layer.name + " declares n_oy=" +
                           std::to_string(*oy) + " but (n_iy - n_ky) / stride + 1 = " + std::to_string(layer.n_oy));
    }
    if (const auto ox = opt_int(line, "n_ox", source); ox && *ox != layer.n_ox) {
      throw DimensionError(source + ":" + std::to_string(line.number) + ": layer " + layer.name + " declares n_ox=" +
                           std::to_string(*ox) + " but (n_ix - n_kx) / stride + 1 = " + std::to_string(layer.n_ox));
    }
    if (!names.insert(layer.name).second)
      throw ParseError(source, line.number, "duplicate layer name '" + layer.name + "'");
    net.layers.push_back(std::move(layer));
  }
  if (net.name.empty()) throw ParseError(source, 0, "missing 'network <name>' record");
  return net;
}

Network load_network(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open network file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_network(buf.str(), path.string());
}

std::string serialize_network(const Network& net) {
  std::ostringstream out;
  out << "network " << net.name << "\n";
  for (const auto& l : net.layers) {
    out << "layer name=" << l.name << " n_if=" << l.n_if << " n_iy=" << l.n_iy << " n_ix=" << l.n_ix
        << " n_ky=" << l.n_ky << " n_kx=" << l.n_kx << " n_of=" << l.n_of << " stride=" << l.stride
        << " n_oy=" << l.n_oy << " n_ox=" << l.n_ox << "\n";
  }
  return out.str();
}

std::vector<Network> builtin_networks() {
  return {parse_network(detail::kAlexNetText, "alexnet.net"), parse_network(detail::kVgg16Text, "vgg16.net")};
}

Network builtin_network(std::string_view name) {
  auto lower = [](std::string_view s) {
    std::string r;
    for (char c : s) {
      if (c != '-' && c != '_') r.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    return r;
  };
  for (auto& net : builtin_networks()) {
    if (lower(net.name) == lower(name)) return net;
  }
  throw ConfigError("no builtin network named '" + std::string(name) + "'");
}

std::vector<LayerGroup> group_layers(const Network& net) {
  std::vector<LayerGroup> groups;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    if (!groups.empty() && net.layers[groups.back().members.front()].same_shape(net.layers[i])) {
      groups.back().members.push_back(i);
    } else {
      groups.push_back({{}, {i}});
    }
  }
  for (auto& g : groups) {
    if (g.members.size() == 1) {
      g.label = net.layers[g.members.front()].name;
      continue;
    }
    // "3_2","3_3" -> "3_{2,3}" when the members share a prefix up to '_'.
    const auto& first = net.layers[g.members.front()].name;
    const auto us = first.rfind('_');
    std::string prefix = us == std::string::npos ? std::string{} : first.substr(0, us + 1);
    bool shared = !prefix.empty();
    for (auto m : g.members) shared = shared && net.layers[m].name.starts_with(prefix);
    if (shared) {
      g.label = prefix + "{";
      for (std::size_t k = 0; k < g.members.size(); ++k) {
        g.label += (k ? "," : "") + net.layers[g.members[k]].name.substr(prefix.size());
      }
      g.label += "}";
    } else {
      for (std::size_t k = 0; k < g.members.size(); ++k) g.label += (k ? "+" : "") + net.layers[g.members[k]].name;
    }
  }
  return groups;
}

}  // namespace cnnmap
