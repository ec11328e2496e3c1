#include "cnnmap/experiments.hpp"

#include <array>
#include <bit>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "cnnmap/error.hpp"
#include "cnnmap/manifest.hpp"

namespace cnnmap {

double runtime_ms(int64_t core_cycles, double f_core_hz) { return static_cast<double>(core_cycles) / f_core_hz * 1e3; }

double mbyte(int64_t words, int64_t word_bits) {
  return static_cast<double>(words) * static_cast<double>(word_bits) / 8.0 / (1024.0 * 1024.0);
}

namespace {

using ShapeKey = std::array<int64_t, 7>;
ShapeKey shape_key(const ConvLayer& l) { return {l.n_if, l.n_iy, l.n_ix, l.n_ky, l.n_kx, l.n_of, l.stride}; }

// Simulations only see what survives a round trip through the text formats.
LayerReport simulate_serialized(const PlatformConfig& platform, const Mapping& m, const ExperimentOptions& opt,
                                const std::string& tag, const SimOptions& sim_opt) {
  const std::string text = write_manifest({m});
  if (!opt.manifest_dir.empty()) {
    std::filesystem::create_directories(opt.manifest_dir);
    const auto path = opt.manifest_dir / (tag + ".manifest");
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << "# platform\n";
    std::istringstream lines(serialize_platform(platform));
    for (std::string line; std::getline(lines, line);) out << "#   " << line << "\n";
    out << text;
  }
  PlatformConfig p = parse_platform(serialize_platform(platform), tag + " platform");
  p.energy_table_path = platform.energy_table_path;
  const auto parsed = parse_manifest(text, tag);
  return run_layer(p, parsed.front(), sim_opt);
}

std::string file_tag(std::string s) {
  for (char& c : s) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-') c = '_';
  }
  return s;
}

void log_line(const ExperimentOptions& opt, const std::string& s) {
  if (opt.log) *opt.log << s << std::endl;
}

}  // namespace

std::vector<SingleCoreRow> run_single_core(const Network& net, const PlatformConfig& platform,
                                           const std::vector<Objective>& objectives, const ExperimentOptions& opt) {
  platform.validate();
  const CoreConfig core = platform.core_config();
  SimOptions sim_opt;
  sim_opt.trace = opt.trace;
  sim_opt.packet_len_override = opt.packet_len_override;
  std::map<std::pair<ShapeKey, Objective>, SingleCoreRow> done;
  std::vector<SingleCoreRow> rows;
  for (const auto& layer : net.layers) {
    for (Objective obj : objectives) {
      const auto key = std::pair{shape_key(layer), obj};
      auto it = done.find(key);
      if (it == done.end()) {
        SingleCoreRow row;
        const auto sol = optimize(layer, core, obj);
        row.tiling = sol.tiling;
        row.cost = sol.cost;
        const Mapping m = build_mapping(layer, platform, 1, {layer.n_of, layer.n_ox}, sol.tiling, obj);
        row.sim = simulate_serialized(platform, m, opt, file_tag(net.name + "_single_" + layer.name + "_" + to_string(obj)),
                                      sim_opt);
        row.energy = layer_energy(row.sim, platform, opt.energy);
        row.runtime_ms = runtime_ms(row.sim.core_cycles, platform.f_core_hz);
        row.dram_mbyte = mbyte(row.sim.dram_words(), core.word_bits);
        row.energy_mj = row.energy.total() * 1e-9;
        log_line(opt, "single-core " + layer.name + " " + to_string(obj) + ": " + std::to_string(row.sim.core_cycles) +
                          " cycles (analytical " + std::to_string(row.cost.c_total) + ")");
        it = done.emplace(key, std::move(row)).first;
      }
      SingleCoreRow row = it->second;
      row.layer = layer.name;
      row.objective = obj;
      row.sim.layer = layer.name;
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

CapabilityConfig capability_config(int cores) {
  if (cores < 1 || kCapabilityMacs % cores != 0 || kCapabilitySramWords % cores != 0)
    throw ConfigError("capability budget does not split evenly over " + std::to_string(cores) + " cores");
  const int64_t macs = kCapabilityMacs / cores;
  if (!std::has_single_bit(static_cast<uint64_t>(macs)))
    throw ConfigError("MACs per core must be a power of two, got " + std::to_string(macs));
  const int log2 = std::bit_width(static_cast<uint64_t>(macs)) - 1;
  CapabilityConfig c;
  c.cores = cores;
  c.core.p_ox = int64_t{1} << ((log2 + 1) / 2);
  c.core.p_of = macs / c.core.p_ox;
  c.core.d_sram_words = kCapabilitySramWords / cores;
  validate_capability(c);
  return c;
}

void validate_capability(const CapabilityConfig& c) {
  if (c.cores * c.core.p_ox * c.core.p_of != kCapabilityMacs)
    throw ConfigError("capability mismatch: " + std::to_string(c.cores) + " x " + std::to_string(c.core.p_ox) + " x " +
                      std::to_string(c.core.p_of) + " != " + std::to_string(kCapabilityMacs) + " MACs");
  if (c.cores * c.core.d_sram_words != kCapabilitySramWords)
    throw ConfigError("capability mismatch: " + std::to_string(c.cores) + " x " + std::to_string(c.core.d_sram_words) +
                      " SRAM words != 1 MByte");
  c.core.validate();
}

std::vector<CapabilityRow> run_constant_capability(const Network& net, const std::vector<CapabilityConfig>& configs,
                                                   const ExperimentOptions& opt) {
  SimOptions sim_opt;
  sim_opt.trace = opt.trace;
  sim_opt.packet_len_override = opt.packet_len_override;
  std::vector<CapabilityRow> rows;
  const auto groups = group_layers(net);
  for (const auto& cfg : configs) {
    validate_capability(cfg);
    const auto platform = PlatformConfig::for_cores(cfg.cores, cfg.core);
    SliceTilingCache cache;
    for (const auto& g : groups) {
      const ConvLayer& layer = net.layers[g.members.front()];
      const auto mapping = wave_allocate(layer, platform, Objective::kMinComp, &cache).best;
      const auto rep = simulate_serialized(platform, mapping, opt,
                                           file_tag(net.name + "_constcap_" + std::to_string(cfg.cores) + "_" + layer.name),
                                           sim_opt);
      CapabilityRow row;
      row.group = g.label;
      row.cores = cfg.cores;
      row.core = cfg.core;
      row.alloc_cores = mapping.active_cores();
      row.core_cycles = rep.core_cycles;
      row.runtime_ms = runtime_ms(rep.core_cycles, platform.f_core_hz);
      row.sim = rep;
      log_line(opt, "const-cap " + std::to_string(cfg.cores) + " cores, " + g.label + ": " +
                        std::to_string(rep.core_cycles) + " cycles on " + std::to_string(row.alloc_cores) + " cores");
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

std::vector<ScalingRow> run_core_scaling(const Network& net, const std::vector<int>& counts, const CoreConfig& core,
                                         const ExperimentOptions& opt) {
  SimOptions sim_opt;
  sim_opt.trace = opt.trace;
  sim_opt.packet_len_override = opt.packet_len_override;
  SimOptions ref_opt = sim_opt;
  ref_opt.packet_len_override = 10000;

  std::vector<PlatformConfig> platforms;
  for (int n : counts) platforms.push_back(PlatformConfig::for_cores(n, core));
  const auto ref_platform = PlatformConfig::for_cores(1, core);
  const CoreConfig ref_core = ref_platform.core_config();

  SliceTilingCache cache;
  std::map<ShapeKey, std::vector<ScalingRow>> done;
  std::vector<ScalingRow> rows;
  for (const auto& layer : net.layers) {
    auto it = done.find(shape_key(layer));
    if (it == done.end()) {
      const auto sol = optimize(layer, ref_core, Objective::kMinComp);
      const Mapping ref_map = build_mapping(layer, ref_platform, 1, {layer.n_of, layer.n_ox}, sol.tiling,
                                           Objective::kMinComp);
      const auto ref = simulate_serialized(ref_platform, ref_map, opt, file_tag(net.name + "_scaling_ref_" + layer.name),
                                           ref_opt);
      std::vector<ScalingRow> per_count;
      for (std::size_t i = 0; i < counts.size(); ++i) {
        const auto& platform = platforms[i];
        const auto mapping = wave_allocate(layer, platform, Objective::kMinComp, &cache).best;
        ScalingRow row;
        row.cores = counts[i];
        row.sim = simulate_serialized(platform, mapping, opt,
                                      file_tag(net.name + "_scaling_" + std::to_string(counts[i]) + "_" + layer.name),
                                      sim_opt);
        row.reference_cycles = ref.core_cycles;
        row.sim_cycles = row.sim.core_cycles;
        row.speedup = static_cast<double>(ref.core_cycles) / static_cast<double>(row.sim_cycles);
        row.alloc_cores = mapping.active_cores();
        row.bound = theoretical_bound(ref.core_cycles, mapping, platform.core_config().bw_dram_words);
        row.mapping_cost = mapping.cost;
        log_line(opt, "scaling " + layer.name + " " + std::to_string(counts[i]) + " cores: speedup " +
                          std::to_string(row.speedup) + " bound " + std::to_string(row.bound) + " on " +
                          std::to_string(row.alloc_cores) + " cores");
        per_count.push_back(std::move(row));
      }
      it = done.emplace(shape_key(layer), std::move(per_count)).first;
    }
    for (auto row : it->second) {
      row.layer = layer.name;
      row.sim.layer = layer.name;
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

namespace {

std::string fixed(double v, int digits) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  return out;
}

}  // namespace

void write_single_core_csv(std::ostream& out, const std::vector<SingleCoreRow>& rows) {
  out << "layer,objective,runtime_ms,dram_mbyte,energy_mj\n";
  for (const auto& r : rows) {
    out << r.layer << ',' << to_string(r.objective) << ',' << fixed(r.runtime_ms, 6) << ',' << fixed(r.dram_mbyte, 6)
        << ',' << fixed(r.energy_mj, 6) << '\n';
  }
}

void write_capability_csv(std::ostream& out, const std::vector<CapabilityRow>& rows) {
  out << "group,cores,p_ox,p_of,d_sram_words,alloc_cores,runtime_ms\n";
  for (const auto& r : rows) {
    out << '"' << r.group << '"' << ',' << r.cores << ',' << r.core.p_ox << ',' << r.core.p_of << ','
        << r.core.d_sram_words << ',' << r.alloc_cores << ',' << fixed(r.runtime_ms, 6) << '\n';
  }
}

void write_scaling_csv(std::ostream& out, const std::vector<ScalingRow>& rows) {
  out << "layer,cores,speedup,alloc_cores,bound\n";
  for (const auto& r : rows) {
    out << r.layer << ',' << r.cores << ',' << fixed(r.speedup, 4) << ',' << r.alloc_cores << ',' << fixed(r.bound, 4)
        << '\n';
  }
}

void emit_single_core(const std::filesystem::path& dir, const std::vector<SingleCoreRow>& rows) {
  auto csv = open_out(dir / "single_core.csv");
  write_single_core_csv(csv, rows);
  auto detail = open_out(dir / "single_core_detail.csv");
  detail << "layer,objective,t_of,t_if,t_ox,analytic_cycles,sim_cycles,analytic_dram_words,sim_dram_words,"
            "core_energy_mj,dram_energy_mj,noc_energy_mj\n";
  for (const auto& r : rows) {
    detail << r.layer << ',' << to_string(r.objective) << ',' << r.tiling.t_of << ',' << r.tiling.t_if << ','
           << r.tiling.t_ox << ',' << r.cost.c_total << ',' << r.sim.core_cycles << ',' << r.cost.n_dram() << ','
           << r.sim.dram_words() << ',' << fixed(r.energy.core * 1e-9, 6) << ',' << fixed(r.energy.dram * 1e-9, 6)
           << ',' << fixed(r.energy.noc * 1e-9, 6) << '\n';
  }
  auto sum = open_out(dir / "summary.txt");
  sum << "single-core runs: " << rows.size() << "\n\n";
  sum << std::left << std::setw(8) << "layer" << std::setw(10) << "objective" << std::right << std::setw(14)
      << "runtime ms" << std::setw(14) << "DRAM MByte" << std::setw(14) << "energy mJ" << "\n";
  for (const auto& r : rows) {
    sum << std::left << std::setw(8) << r.layer << std::setw(10) << to_string(r.objective) << std::right
        << std::setw(14) << fixed(r.runtime_ms, 3) << std::setw(14) << fixed(r.dram_mbyte, 3) << std::setw(14)
        << fixed(r.energy_mj, 3) << "\n";
  }
}

void emit_capability(const std::filesystem::path& dir, const std::vector<CapabilityRow>& rows) {
  auto csv = open_out(dir / "const_cap.csv");
  write_capability_csv(csv, rows);
  auto sum = open_out(dir / "summary.txt");
  std::map<std::string, const CapabilityRow*> best;
  std::vector<std::string> order;
  for (const auto& r : rows) {
    auto [it, fresh] = best.emplace(r.group, &r);
    if (fresh) order.push_back(r.group);
    else if (r.core_cycles < it->second->core_cycles) it->second = &r;
  }
  sum << "fastest configuration per layer group\n";
  for (const auto& g : order) {
    const auto* r = best[g];
    sum << "  " << std::left << std::setw(12) << g << std::right << std::setw(5) << r->cores << " cores ("
        << r->core.p_ox << "x" << r->core.p_of << ")  " << fixed(r->runtime_ms, 3) << " ms\n";
  }
}

void emit_scaling(const std::filesystem::path& dir, const std::vector<ScalingRow>& rows) {
  auto csv = open_out(dir / "scaling.csv");
  write_scaling_csv(csv, rows);
  auto sum = open_out(dir / "summary.txt");
  std::map<int, std::pair<double, int>> gap;
  for (const auto& r : rows) {
    auto& g = gap[r.cores];
    g.first += (r.bound - r.speedup) / r.bound;
    ++g.second;
  }
  sum << "average gap between simulated speedup and bound\n";
  for (const auto& [cores, g] : gap) {
    sum << "  " << std::setw(3) << cores << " cores: " << fixed(100.0 * g.first / g.second, 2) << " %\n";
  }
}

}  // namespace cnnmap
