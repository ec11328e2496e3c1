#include "cnnmap/manifest.hpp"

#include <fstream>
#include <sstream>

#include "cnnmap/error.hpp"
#include "text_util.hpp"

namespace cnnmap {

std::string write_manifest(const std::vector<Mapping>& mappings) {
  std::ostringstream out;
  for (const auto& m : mappings) {
    const auto& l = m.layer;
    out << "mapping layer=" << l.name << " objective=" << to_string(m.objective) << " k=" << m.k
        << " t_of=" << m.shape.t_of << " t_ox=" << m.shape.t_ox << " cost=" << m.cost
        << " max_core_cycles=" << m.max_core_cycles << " total_flits=" << m.total_flits
        << " dram_words=" << m.dram_words << "\n";
    out << "layer name=" << l.name << " n_if=" << l.n_if << " n_iy=" << l.n_iy << " n_ix=" << l.n_ix
        << " n_ky=" << l.n_ky << " n_kx=" << l.n_kx << " n_of=" << l.n_of << " stride=" << l.stride << "\n";
    out << "slice_tiling t_of=" << m.slice_tiling.t_of << " t_if=" << m.slice_tiling.t_if
        << " t_ox=" << m.slice_tiling.t_ox << "\n";
    for (const auto& c : m.cores) {
      out << "core x=" << c.node.x << " y=" << c.node.y << "\n";
      for (const auto& it : c.items) {
        out << "item of0=" << it.region.of0 << " x0=" << it.region.x0 << " t_of=" << it.region.t_of
            << " t_ox=" << it.region.t_ox << " tile_of=" << it.tiling.t_of << " tile_if=" << it.tiling.t_if
            << " tile_ox=" << it.tiling.t_ox << "\n";
      }
    }
    out << "end\n";
  }
  return out.str();
}

std::vector<Mapping> parse_manifest(std::string_view text, const std::string& source) {
  using detail::req_int;
  std::vector<Mapping> out;
  Mapping* cur = nullptr;
  bool have_layer = false;
  auto fail = [&](const detail::Line& line, const std::string& what) { throw ParseError(source, line.number, what); };
  auto req_str = [&](const detail::Line& line, const std::string& key) {
    const auto it = line.kv.find(key);
    if (it == line.kv.end()) fail(line, "missing key '" + key + "'");
    return it->second;
  };

  for (const auto& line : detail::tokenize(text, source)) {
    try {
      if (line.keyword == "mapping") {
        if (cur) fail(line, "'mapping' before 'end'");
        out.emplace_back();
        cur = &out.back();
        have_layer = false;
        cur->objective = objective_from_string(req_str(line, "objective"));
        cur->k = static_cast<int>(req_int(line, "k", source));
        cur->shape = {req_int(line, "t_of", source), req_int(line, "t_ox", source)};
        cur->cost = req_int(line, "cost", source);
        cur->max_core_cycles = req_int(line, "max_core_cycles", source);
        cur->total_flits = req_int(line, "total_flits", source);
        cur->dram_words = req_int(line, "dram_words", source);
        cur->layer.name = req_str(line, "layer");
        continue;
      }
      if (!cur) fail(line, "'" + line.keyword + "' outside a mapping block");
      if (line.keyword == "layer") {
        cur->layer = ConvLayer::make(req_str(line, "name"), req_int(line, "n_if", source), req_int(line, "n_iy", source),
                                     req_int(line, "n_ix", source), req_int(line, "n_ky", source),
                                     req_int(line, "n_kx", source), req_int(line, "n_of", source),
                                     req_int(line, "stride", source));
        have_layer = true;
      } else if (line.keyword == "slice_tiling") {
        if (!have_layer) fail(line, "'slice_tiling' before 'layer'");
        const ConvLayer sub = slice_to_sublayer(cur->layer, {0, 0, cur->shape.t_of, cur->shape.t_ox});
        cur->slice_tiling = Tiling::make(sub, req_int(line, "t_of", source), req_int(line, "t_if", source),
                                         req_int(line, "t_ox", source));
      } else if (line.keyword == "core") {
        CoreWork c;
        c.node = {static_cast<int>(req_int(line, "x", source)), static_cast<int>(req_int(line, "y", source))};
        cur->cores.push_back(std::move(c));
      } else if (line.keyword == "item") {
        if (!have_layer || cur->cores.empty()) fail(line, "'item' before 'layer' and 'core'");
        WorkItem it;
        it.region = {req_int(line, "of0", source), req_int(line, "x0", source), req_int(line, "t_of", source),
                     req_int(line, "t_ox", source)};
        it.sublayer = slice_to_sublayer(cur->layer, it.region);
        it.tiling = Tiling::make(it.sublayer, req_int(line, "tile_of", source), req_int(line, "tile_if", source),
                                 req_int(line, "tile_ox", source));
        cur->cores.back().items.push_back(std::move(it));
      } else if (line.keyword == "end") {
        if (!have_layer) fail(line, "mapping without 'layer'");
        if (cur->cores.empty()) fail(line, "mapping without cores");
        cur = nullptr;
      } else {
        fail(line, "unknown record '" + line.keyword + "'");
      }
    } catch (const ParseError&) {
      throw;
    } catch (const Error& e) {
      throw ParseError(source, line.number, e.what());
    }
  }
  if (cur) throw ParseError(source, 0, "missing 'end' after the last mapping");
  return out;
}

std::vector<Mapping> load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open manifest " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_manifest(buf.str(), path.string());
}

}  // namespace cnnmap
