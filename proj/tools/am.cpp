// am: command-line driver for the schematic-to-layout pipeline.
//
// Settings are layered: built-in defaults, then --config FILE, then
// --set key=value, then the dedicated flags. Exit status is 0 on success,
// 1 when a stage fails and 2 on usage or configuration errors.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "amflow/evaluation.hpp"
#include "amflow/io.hpp"
#include "amflow/pipeline.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace am;

namespace {

struct CommonFlags {
  std::string config_file;
  std::vector<std::string> sets;
  std::string mode;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> budget;
  bool no_cot = false;
  bool no_micl = false;
  bool no_intent = false;
  std::string spec;
  std::string out;
  std::string simulator;
  std::string fixtures;
  std::string micl;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config_file, "key = value settings file")->check(CLI::ExistingFile);
  cmd->add_option("--set", f.sets, "override one setting (key=value), repeatable");
  cmd->add_option("--mode", f.mode, "live, replay or record");
  cmd->add_option("--seed", f.seed, "random seed");
  cmd->add_option("--budget", f.budget, "sizing trial budget");
  cmd->add_flag("--no-cot", f.no_cot, "drop the stepwise extraction prompt");
  cmd->add_flag("--no-micl", f.no_micl, "drop the worked example");
  cmd->add_flag("--no-intent", f.no_intent, "skip the reconciliation pass");
  cmd->add_option("--spec", f.spec, "sizing targets (JSON)");
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--simulator", f.simulator, "SPICE simulator binary; analytic model when unset");
  cmd->add_option("--fixtures", f.fixtures, "replay/record fixture directory");
  cmd->add_option("--micl", f.micl, "worked-example directory");
}

pipeline::PipelineConfig resolve(const CommonFlags& f) {
  pipeline::PipelineConfig cfg;
#ifdef AM_DEFAULT_MICL
  cfg.micl_dir = AM_DEFAULT_MICL;
#endif
  if (!f.config_file.empty()) cfg = pipeline::parse_config(read_file(f.config_file), cfg);
  for (const auto& kv : f.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw pipeline::ConfigError("--set expects key=value, got '" + kv + "'");
    pipeline::apply_setting(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (!f.mode.empty()) pipeline::apply_setting(cfg, "mode", f.mode);
  if (f.seed) cfg.seed = *f.seed;
  if (f.budget) cfg.budget = *f.budget;
  if (f.no_cot) cfg.cot = false;
  if (f.no_micl) cfg.micl = false;
  if (f.no_intent) cfg.intent = false;
  if (!f.spec.empty()) cfg.spec = f.spec;
  if (!f.out.empty()) cfg.out_dir = f.out;
  if (!f.simulator.empty()) cfg.simulator = f.simulator;
  if (!f.fixtures.empty()) cfg.fixtures = f.fixtures;
  if (!f.micl.empty()) cfg.micl_dir = f.micl;
  return cfg;
}

void report(const pipeline::Run& run) {
  for (const auto& s : run.manifest().stages) {
    std::cout << s.name << ": " << s.status;
    for (const auto& [k, v] : s.details) std::cout << " " << k << "=" << v;
    std::cout << "\n";
  }
  std::cout << "manifest: " << (fs::path(run.config().out_dir) / "manifest.json").string() << "\n";
}

std::vector<std::string> traces_from(const std::string& branches_json) {
  std::vector<std::string> out;
  if (branches_json.empty()) return out;
  for (const auto& b : nlohmann::json::parse(read_file(branches_json)))
    if (const auto t = b.value("trace", ""); !t.empty()) out.push_back(t);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Schematic image to routed analog layout"};
  app.require_subcommand(1);
  CommonFlags flags;

  std::string image, detections, bundle, golden, netlist_file, traces_file, placement_file, instance_file;
  std::string case_dir, corpus;
  std::size_t eval_n = 15;
  std::vector<std::size_t> eval_k{1, 5};
  bool netlist_only = false;

  auto* extract = app.add_subcommand("extract", "image + detections -> annotated bundle");
  extract->add_option("--image", image, "schematic image (PNG or PGM)")->required();
  extract->add_option("--detections", detections, "component detections (JSON)")->required();

  auto* netlist = app.add_subcommand("netlist", "bundle -> fused netlist");
  netlist->add_option("--image", image, "schematic image")->required();
  netlist->add_option("--bundle", bundle, "directory written by extract")->required();
  netlist->add_option("--golden", golden, "reference netlist; a mismatch fails the stage");

  auto* size = app.add_subcommand("size", "netlist + spec -> sized netlist and study");
  size->add_option("--netlist", netlist_file, "netlist to size")->required();
  size->add_option("--traces", traces_file, "branches.json whose traces seed the sizing context");

  auto* place = app.add_subcommand("place", "sized netlist -> placement");
  place->add_option("--netlist", netlist_file, "sized netlist")->required();

  auto* route = app.add_subcommand("route", "placement -> routed layout");
  route->add_option("--netlist", netlist_file, "sized netlist")->required();
  route->add_option("--placement", placement_file, "placement.json")->required();
  route->add_option("--instance", instance_file, "instance.json; derived from the netlist when unset");

  auto* full = app.add_subcommand("full", "image -> routed layout, every stage");
  full->add_option("--case", case_dir, "case directory; fills image, detections, golden, spec and fixtures");
  full->add_option("--image", image, "schematic image");
  full->add_option("--detections", detections, "component detections");
  full->add_option("--golden", golden, "reference netlist");

  auto* eval = app.add_subcommand("eval", "benchmark table over a case corpus");
  eval->add_option("--corpus", corpus, "directory of case directories")->required();
  eval->add_option("--n", eval_n, "attempts per case");
  eval->add_option("--k", eval_k, "k values for pass@k")->delimiter(',');
  eval->add_flag("--netlist-only", netlist_only, "score netlist recovery alone");

  auto* passk = app.add_subcommand("passk", "unbiased pass@k for n attempts with c successes");
  std::size_t pn = 0, pc = 0, pk = 0;
  passk->add_option("n", pn)->required();
  passk->add_option("c", pc)->required();
  passk->add_option("k", pk)->required();

  for (auto* cmd : {extract, netlist, size, place, route, full, eval}) add_common(cmd, flags);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*passk) {
      std::printf("%.3f\n", evaluation::pass_at_k(pn, pc, pk));
      return 0;
    }

    auto cfg = resolve(flags);
    if (*full && !case_dir.empty()) {
      const fs::path c = case_dir;
      if (image.empty()) image = (c / "schematic.png").string();
      if (detections.empty()) detections = (c / "detections.json").string();
      if (golden.empty()) golden = (c / "golden.sp").string();
      if (flags.spec.empty()) cfg.spec = (c / "spec.json").string();
      if (flags.fixtures.empty()) cfg.fixtures = (c / "replay").string();
    }
    if (*full && (image.empty() || detections.empty()))
      throw pipeline::ConfigError("full needs --case or both --image and --detections");

    if (*eval) {
      evaluation::BenchmarkOptions bo;
      bo.n = eval_n;
      bo.ks = eval_k;
      if (netlist_only) bo.criteria = {true, false, false};
      const auto cases = evaluation::discover_cases(corpus);
      const auto table = evaluation::run_benchmark(cases, [&](const evaluation::CaseSpec& c, std::size_t a) {
        return pipeline::run_attempt(cfg, c, a, bo.criteria);
      }, bo);
      fs::create_directories(cfg.out_dir);
      write_file((fs::path(cfg.out_dir) / "results.csv").string(), evaluation::to_csv(table));
      const std::string md = evaluation::to_markdown(table);
      write_file((fs::path(cfg.out_dir) / "results.md").string(), md);
      std::cout << md;
      return 0;
    }

    const bool uses_llm = *netlist || *size || *full;
    if (uses_llm) pipeline::validate(cfg);
    pipeline::Run run(cfg);
    try {
      if (*extract) {
        pipeline::run_extract(run, image, detections);
      } else if (*netlist) {
        const fs::path b = bundle;
        pipeline::run_netlist(run, image, (b / "overlay.png").string(), (b / "node_map.json").string(), golden);
      } else if (*size) {
        pipeline::run_size(run, netlist::parse_spice(read_file(netlist_file)), traces_from(traces_file));
      } else if (*place) {
        pipeline::run_place(run, netlist::parse_spice(read_file(netlist_file)));
      } else if (*route) {
        const auto sized = netlist::parse_spice(read_file(netlist_file));
        const auto inst = instance_file.empty() ? placement::instance_from_netlist(sized, cfg.block_spacing)
                                                : placement::instance_from_json(read_file(instance_file));
        pipeline::run_route(run, sized, inst, placement::placement_from_json(read_file(placement_file), inst));
      } else if (*full) {
        pipeline::run_full(run, {image, detections, golden});
      }
    } catch (const pipeline::StageError& e) {
      report(run);
      std::cerr << "error: " << e.what() << "\n";
      return 1;
    } catch (const std::exception& e) {
      // Input files that fail to load before the stage starts.
      std::cerr << "error: [" << app.get_subcommands().front()->get_name() << "] " << e.what() << "\n";
      return 1;
    }
    report(run);
    return 0;
  } catch (const pipeline::ConfigError& e) {
    std::cerr << "error: [config] " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
