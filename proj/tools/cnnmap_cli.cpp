#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cnnmap/error.hpp"
#include "cnnmap/experiments.hpp"

namespace fs = std::filesystem;
using namespace cnnmap;

namespace {

struct Args {
  std::string network = "vgg16";
  std::string platform;
  std::string objective = "both";
  std::vector<int> cores;
  std::string out = "results";
  std::string trace;
  int64_t packet_len_override = 0;
  std::string energy_table;
  bool quiet = false;
};

Network resolve_network(const std::string& name) {
  if (fs::exists(name)) return load_network(name);
  return builtin_network(name);
}

std::vector<Objective> resolve_objectives(const std::string& s) {
  if (s == "both") return {Objective::kMinComp, Objective::kMinDram};
  return {objective_from_string(s)};
}

int run(const std::string& kind, const Args& a) {
  const Network net = resolve_network(a.network);
  PlatformConfig platform = a.platform.empty() ? PlatformConfig::for_cores(1) : load_platform(a.platform);

  ExperimentOptions opt;
  std::string table = a.energy_table.empty() ? platform.energy_table_path : a.energy_table;
  if (!table.empty()) opt.energy = load_energy_table(table);
  opt.packet_len_override = a.packet_len_override;
  opt.manifest_dir = fs::path(a.out) / "manifests";
  if (!a.quiet) opt.log = &std::cerr;

  std::unique_ptr<std::ofstream> trace;
  if (!a.trace.empty()) {
    trace = std::make_unique<std::ofstream>(a.trace);
    if (!*trace) throw ConfigError("cannot write " + a.trace);
    opt.trace = trace.get();
  }

  if (kind == "single-core") {
    if (platform.core_count() != 1) throw ConfigError("single-core needs a platform with exactly one core");
    auto rows = run_single_core(net, platform, resolve_objectives(a.objective), opt);
    emit_single_core(a.out, rows);
  } else if (kind == "const-cap") {
    std::vector<int> counts = a.cores.empty() ? std::vector<int>{2, 4, 16, 32, 64, 128} : a.cores;
    std::vector<CapabilityConfig> configs;
    for (int n : counts) configs.push_back(capability_config(n));
    auto rows = run_constant_capability(net, configs, opt);
    emit_capability(a.out, rows);
  } else {
    static const std::vector<int> kAllowed{1, 2, 4, 7, 14, 23};
    std::vector<int> counts = a.cores.empty() ? kAllowed : a.cores;
    for (int n : counts) {
      if (std::find(kAllowed.begin(), kAllowed.end(), n) == kAllowed.end()) {
        throw ConfigError("scaling core counts must be among 1,2,4,7,14,23; got " + std::to_string(n));
      }
    }
    auto rows = run_core_scaling(net, counts, platform.core, opt);
    emit_scaling(a.out, rows);
  }
  std::cerr << "wrote " << a.out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CNN layer tiling and many-core mapping explorer"};
  app.require_subcommand(1);
  Args a;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--network", a.network, "builtin name (vgg16, alexnet) or network file")->capture_default_str();
    sub->add_option("--platform", a.platform, "platform file; core parameters are taken from it");
    sub->add_option("--out", a.out, "output directory")->capture_default_str();
    sub->add_option("--trace", a.trace, "write a per-flit NoC trace to this file");
    sub->add_option("--packet-len-override", a.packet_len_override, "maximum packet length in flits")
        ->check(CLI::NonNegativeNumber);
    sub->add_option("--energy-table", a.energy_table, "energy table file");
    sub->add_flag("-q,--quiet", a.quiet, "no progress output");
  };

  auto* single = app.add_subcommand("single-core", "both tiling objectives on a one-core 3x1 system");
  add_common(single);
  single->add_option("--objective", a.objective, "min-comp, min-dram or both")
      ->check(CLI::IsMember({"min-comp", "min-dram", "both"}))
      ->capture_default_str();

  auto* cap = app.add_subcommand("const-cap", "2048 MACs and 1 MByte SRAM split over varying core counts");
  add_common(cap);
  cap->add_option("--cores", a.cores, "core counts (default 2 4 16 32 64 128)")->delimiter(',');

  auto* scaling = app.add_subcommand("scaling", "speedup over a single core for growing meshes");
  add_common(scaling);
  scaling->add_option("--cores", a.cores, "core counts (default 1 2 4 7 14 23)")->delimiter(',');

  CLI11_PARSE(app, argc, argv);

  const std::string kind = app.get_subcommands().front()->get_name();
  try {
    return run(kind, a);
  } catch (const InfeasibleError& e) {
    std::cerr << "infeasible: " << e.what() << " (needs at least " << e.min_alloc_words() << " words)\n";
    return 3;
  } catch (const DeadlockError& e) {
    std::cerr << "watchdog: " << e.what() << "\n";
    return 4;
  } catch (const ParseError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
