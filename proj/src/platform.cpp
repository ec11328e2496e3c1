#include "cnnmap/platform.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "cnnmap/error.hpp"
#include "text_util.hpp"

namespace cnnmap {

std::string to_string(Coord c) { return "(" + std::to_string(c.x) + "," + std::to_string(c.y) + ")"; }

const char* to_string(NodeRole r) {
  switch (r) {
    case NodeRole::kEmpty: return "empty";
    case NodeRole::kMaster: return "master";
    case NodeRole::kDram: return "dram";
    case NodeRole::kCore: return "core";
  }
  return "?";
}

std::pair<int, int> mesh_for_cores(int n_cores) {
  if (n_cores < 1) throw ConfigError("core count must be >= 1");
  if (n_cores == 1) return {3, 1};
  const int nodes = n_cores + 2;
  int w = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(nodes))));
  while ((w - 1) * (w - 1) >= nodes) --w;  // guard against sqrt rounding
  while (w * w < nodes) ++w;
  const int h = (nodes + w - 1) / w;
  return {w, h};
}

namespace {

std::vector<Coord> free_by_distance(const PlatformConfig& p) {
  std::vector<Coord> free;
  for (int i = 0; i < p.nodes(); ++i) {
    const Coord c = p.coord(i);
    if (c != p.master() && c != p.dram()) free.push_back(c);
  }
  const Coord d = p.dram();
  std::stable_sort(free.begin(), free.end(),
                   [&](Coord a, Coord b) { return manhattan(a, d) < manhattan(b, d); });
  return free;
}

void assign_fixed_roles(PlatformConfig& p) {
  p.roles.assign(static_cast<std::size_t>(p.nodes()), NodeRole::kEmpty);
  p.roles[static_cast<std::size_t>(p.index(p.master()))] = NodeRole::kMaster;
  p.roles[static_cast<std::size_t>(p.index(p.dram()))] = NodeRole::kDram;
}

}  // namespace

PlatformConfig PlatformConfig::for_cores(int n_cores, const CoreConfig& core) {
  const auto [w, h] = mesh_for_cores(n_cores);
  PlatformConfig p;
  p.mesh_w = w;
  p.mesh_h = h;
  p.core = core;
  assign_fixed_roles(p);
  const auto free = free_by_distance(p);
  for (int i = 0; i < n_cores; ++i) p.roles[static_cast<std::size_t>(p.index(free[static_cast<std::size_t>(i)]))] = NodeRole::kCore;
  return p;
}

PlatformConfig PlatformConfig::full_mesh(int w, int h, const CoreConfig& core) {
  if (w < 1 || h < 1 || w * h < 3) throw ConfigError("mesh must have at least 3 nodes");
  PlatformConfig p;
  p.mesh_w = w;
  p.mesh_h = h;
  p.core = core;
  assign_fixed_roles(p);
  for (auto& r : p.roles) {
    if (r == NodeRole::kEmpty) r = NodeRole::kCore;
  }
  return p;
}

std::vector<Coord> PlatformConfig::cores_by_distance() const {
  std::vector<Coord> out;
  for (Coord c : free_by_distance(*this)) {
    if (role(c) == NodeRole::kCore) out.push_back(c);
  }
  return out;
}

int PlatformConfig::core_count() const {
  return static_cast<int>(std::count(roles.begin(), roles.end(), NodeRole::kCore));
}

int PlatformConfig::clock_ratio() const { return static_cast<int>(std::llround(f_noc_hz / f_core_hz)); }

CoreConfig PlatformConfig::core_config() const {
  CoreConfig c = core;
  c.bw_dram_words = flit_bits * clock_ratio() / core.word_bits;
  c.f_core_hz = f_core_hz;
  return c;
}

void PlatformConfig::validate() const {
  if (mesh_w < 1 || mesh_h < 1) throw ConfigError("mesh dimensions must be positive");
  if (roles.size() != static_cast<std::size_t>(nodes())) throw ConfigError("role table does not match the mesh size");
  int masters = 0, drams = 0;
  for (int i = 0; i < nodes(); ++i) {
    const auto r = roles[static_cast<std::size_t>(i)];
    masters += r == NodeRole::kMaster;
    drams += r == NodeRole::kDram;
  }
  if (masters != 1 || drams != 1) throw ConfigError("platform needs exactly one master and one DRAM node");
  if (role(master()) != NodeRole::kMaster) throw ConfigError("master node must sit at (0,0)");
  if (role(dram()) != NodeRole::kDram) throw ConfigError("DRAM node must sit at the mesh center " + to_string(dram()));
  if (core_count() < 1) throw ConfigError("platform has no processing core");
  if (!(f_core_hz > 0) || !(f_noc_hz > 0)) throw ConfigError("clock frequencies must be positive");
  const double ratio = f_noc_hz / f_core_hz;
  if (ratio < 1 || std::abs(ratio - std::round(ratio)) > 1e-9) {
    throw ConfigError("f_noc must be an integer multiple of f_core");
  }
  packet_rule().validate();
  if (inport_buffer_flits < 1) throw ConfigError("inport buffer must hold at least one flit");
  if (dmani_buffer_words < 1) throw ConfigError("DMANI buffer must hold at least one word");
  if ((flit_bits * clock_ratio()) % core.word_bits != 0) throw ConfigError("DRAM bandwidth is not a whole number of words");
  if (watchdog_cycles < 1) throw ConfigError("watchdog horizon must be positive");
  core_config().validate();
}

PlatformConfig parse_platform(std::string_view text, const std::string& source) {
  std::map<std::string, std::pair<std::string, std::size_t>> kv;
  std::size_t number = 0, pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const auto raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    ++number;
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    const auto body = detail::trim(detail::strip_comment(raw));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) throw ParseError(source, number, "expected 'key = value'");
    const std::string key(detail::trim(body.substr(0, eq)));
    const std::string value(detail::trim(body.substr(eq + 1)));
    if (key.empty() || value.empty()) throw ParseError(source, number, "expected 'key = value'");
    if (!kv.emplace(key, std::pair{value, number}).second) throw ParseError(source, number, "duplicate key '" + key + "'");
  }

  auto take = [&](const std::string& key) -> const std::pair<std::string, std::size_t>* {
    const auto it = kv.find(key);
    return it == kv.end() ? nullptr : &it->second;
  };
  auto take_int = [&](const std::string& key, int64_t& out) {
    if (const auto* v = take(key)) out = detail::to_int(v->first, source, v->second);
  };
  auto take_double = [&](const std::string& key, double& out) {
    if (const auto* v = take(key)) out = detail::to_double(v->first, source, v->second);
  };

  CoreConfig core;
  take_int("p_ox", core.p_ox);
  take_int("p_of", core.p_of);
  take_int("d_sram_words", core.d_sram_words);
  take_int("word_bits", core.word_bits);
  if (const auto* v = take("sram_cycles")) {
    if (v->first == "verbatim") core.sram_model = SramCycleModel::kVerbatim;
    else if (v->first == "per-word") core.sram_model = SramCycleModel::kPerWord;
    else throw ParseError(source, v->second, "sram_cycles must be 'verbatim' or 'per-word'");
  }

  const auto* cores = take("cores");
  const auto* mesh = take("mesh");
  if (cores && mesh) throw ParseError(source, mesh->second, "'cores' and 'mesh' are mutually exclusive");
  PlatformConfig p;
  try {
    if (mesh) {
      const auto x = mesh->first.find('x');
      if (x == std::string::npos) throw ParseError(source, mesh->second, "mesh must be written WxH");
      const auto w = detail::to_int(mesh->first.substr(0, x), source, mesh->second);
      const auto h = detail::to_int(mesh->first.substr(x + 1), source, mesh->second);
      p = PlatformConfig::full_mesh(static_cast<int>(w), static_cast<int>(h), core);
    } else {
      int64_t n = 1;
      take_int("cores", n);
      p = PlatformConfig::for_cores(static_cast<int>(n), core);
    }
  } catch (const ConfigError& e) {
    throw ParseError(source, (mesh ? mesh : cores) ? (mesh ? mesh : cores)->second : 0, e.what());
  }

  take_int("flit_bits", p.flit_bits);
  take_int("max_packet_len", p.max_packet_len);
  take_int("inport_buffer", p.inport_buffer_flits);
  take_int("dmani_buffer", p.dmani_buffer_words);
  take_double("f_noc_hz", p.f_noc_hz);
  take_double("f_core_hz", p.f_core_hz);
  take_int("watchdog", p.watchdog_cycles);
  if (const auto* v = take("energy_table")) p.energy_table_path = v->first;

  static const char* const kKnown[] = {"cores", "mesh", "flit_bits", "max_packet_len", "inport_buffer",
                                       "dmani_buffer", "f_noc_hz", "f_core_hz", "p_ox", "p_of", "d_sram_words",
                                       "word_bits", "sram_cycles", "energy_table", "watchdog"};
  for (const auto& [key, v] : kv) {
    if (std::find(std::begin(kKnown), std::end(kKnown), key) == std::end(kKnown)) {
      throw ParseError(source, v.second, "unknown key '" + key + "'");
    }
  }
  try {
    p.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(source + ": " + e.what());
  }
  return p;
}

PlatformConfig load_platform(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open platform file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  auto p = parse_platform(ss.str(), path.string());
  // Relative energy table paths are resolved against the platform file.
  if (!p.energy_table_path.empty() && std::filesystem::path(p.energy_table_path).is_relative()) {
    p.energy_table_path = (path.parent_path() / p.energy_table_path).string();
  }
  return p;
}

std::string serialize_platform(const PlatformConfig& p) {
  std::ostringstream out;
  out.precision(17);
  // Only layouts produced by for_cores / full_mesh are expressible.
  if (p.core_count() == p.nodes() - 2) {
    out << "mesh = " << p.mesh_w << "x" << p.mesh_h << "\n";
  } else {
    out << "cores = " << p.core_count() << "\n";
  }
  out << "flit_bits = " << p.flit_bits << "\n"
      << "max_packet_len = " << p.max_packet_len << "\n"
      << "inport_buffer = " << p.inport_buffer_flits << "\n"
      << "dmani_buffer = " << p.dmani_buffer_words << "\n"
      << "f_noc_hz = " << p.f_noc_hz << "\n"
      << "f_core_hz = " << p.f_core_hz << "\n"
      << "p_ox = " << p.core.p_ox << "\n"
      << "p_of = " << p.core.p_of << "\n"
      << "d_sram_words = " << p.core.d_sram_words << "\n"
      << "word_bits = " << p.core.word_bits << "\n"
      << "sram_cycles = " << (p.core.sram_model == SramCycleModel::kVerbatim ? "verbatim" : "per-word") << "\n"
      << "watchdog = " << p.watchdog_cycles << "\n";
  if (!p.energy_table_path.empty()) out << "energy_table = " << p.energy_table_path << "\n";
  return out.str();
}

}  // namespace cnnmap
