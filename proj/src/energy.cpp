#include "cnnmap/energy.hpp"

#include <fstream>
#include <sstream>
#include <utility>

#include "cnnmap/error.hpp"
#include "text_util.hpp"

namespace cnnmap {

namespace {

struct Entry {
  const char* name;
  double EnergyTable::*field;
  const char* unit;
};

constexpr Entry kEntries[] = {
    {"idle", &EnergyTable::idle, "pJ/cycle"},     {"mac", &EnergyTable::mac, "pJ/op"},
    {"sram_ld", &EnergyTable::sram_ld, "pJ/bit"}, {"sram_st", &EnergyTable::sram_st, "pJ/bit"},
    {"dram_ld", &EnergyTable::dram_ld, "pJ/bit"}, {"dram_st", &EnergyTable::dram_st, "pJ/bit"},
    {"route", &EnergyTable::route, "pJ/packet"},  {"arb", &EnergyTable::arb, "pJ/packet"},
    {"xbar_sw", &EnergyTable::xbar_sw, "pJ/bit"}, {"xbar_su", &EnergyTable::xbar_su, "pJ/bit"},
    {"buf", &EnergyTable::buf, "pJ/bit"},         {"leak", &EnergyTable::leak, "pJ/cycle"},
};

}  // namespace

void EnergyTable::validate() const {
  for (const auto& e : kEntries) {
    if (!(this->*e.field >= 0)) throw ConfigError(std::string("energy entry ") + e.name + " must be >= 0");
  }
}

EnergyTable parse_energy_table(std::string_view text, const std::string& source) {
  EnergyTable t;
  for (const auto& line : detail::tokenize(text, source)) {
    std::string name = line.keyword;
    if (name.rfind("E_", 0) == 0) name = name.substr(2);
    const Entry* entry = nullptr;
    for (const auto& e : kEntries) {
      if (name == e.name) entry = &e;
    }
    if (!entry) throw ParseError(source, line.number, "unknown energy entry '" + line.keyword + "'");
    if (!line.kv.empty() || line.positional.empty() || line.positional.size() > 2)
      throw ParseError(source, line.number, "expected '<name> <value> [unit]'");
    const double v = detail::to_double(line.positional[0], source, line.number);
    if (v < 0) throw ParseError(source, line.number, "negative energy");
    if (line.positional.size() == 2 && line.positional[1] != entry->unit)
      throw ParseError(source, line.number, "unit of " + name + " must be " + entry->unit);
    t.*entry->field = v;
  }
  return t;
}

EnergyTable load_energy_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open energy table " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_energy_table(buf.str(), path.string());
}

std::string serialize_energy_table(const EnergyTable& t) {
  std::ostringstream out;
  out.precision(17);
  for (const auto& e : kEntries) out << "E_" << e.name << ' ' << t.*e.field << ' ' << e.unit << '\n';
  return out.str();
}

double core_energy(int64_t cycles, int64_t macs, int64_t sram_ld_bits, int64_t sram_st_bits, const EnergyTable& t) {
  return t.idle * static_cast<double>(cycles) + t.mac * static_cast<double>(macs) +
         t.sram_ld * static_cast<double>(sram_ld_bits) + t.sram_st * static_cast<double>(sram_st_bits);
}

double dram_energy(int64_t ld_bits, int64_t st_bits, const EnergyTable& t) {
  return t.dram_ld * static_cast<double>(ld_bits) + t.dram_st * static_cast<double>(st_bits);
}

double router_energy(int64_t packets, int64_t flits, int64_t flit_bits, int64_t cycles, const EnergyTable& t) {
  return (t.route + t.arb) * static_cast<double>(packets) +
         (t.xbar_sw + t.xbar_su + t.buf) * static_cast<double>(flits * flit_bits) +
         t.leak * static_cast<double>(cycles);
}

double noc_energy(const std::vector<RouterCounters>& routers, int64_t flit_bits, int64_t cycles, const EnergyTable& t) {
  double e = 0;
  for (const auto& r : routers) e += router_energy(r.packets, r.flits, flit_bits, cycles, t);
  return e;
}

double scale_energy(double e_old, double v_old, double v_new, double n_old, double n_new) {
  if (!(e_old > 0 && v_old > 0 && v_new > 0 && n_old > 0 && n_new > 0))
    throw ConfigError("energy scaling needs positive inputs");
  return e_old * (v_new / v_old) * (v_new / v_old) * n_new / n_old;
}

EnergyBreakdown layer_energy(const LayerReport& layer, const PlatformConfig& platform, const EnergyTable& t) {
  EnergyBreakdown e;
  const int64_t wb = platform.core.word_bits;
  for (const auto& c : layer.cores) {
    e.core += core_energy(layer.core_cycles, c.macs, c.sram_ld_words * wb, c.sram_st_words * wb, t);
  }
  e.dram = dram_energy(layer.dram_read_words * wb, layer.dram_write_words * wb, t);
  std::vector<RouterCounters> routers;
  for (const auto& r : layer.routers) routers.push_back(r.counters);
  e.noc = noc_energy(routers, platform.flit_bits, layer.noc_cycles, t);
  return e;
}

}  // namespace cnnmap
