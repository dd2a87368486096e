#include <filesystem>

#include "amflow/io.hpp"
#include "amflow/pipeline.hpp"
#include "doctest.h"

using namespace am;
using namespace am::pipeline;
namespace fs = std::filesystem;

namespace {

const fs::path kRoot = AM_SOURCE_DIR;
const fs::path kCase = kRoot / "fixtures" / "cases" / "amp5t";

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("am_pipeline_" + name);
  fs::remove_all(p);
  return p;
}

PipelineConfig case_config(const fs::path& out) {
  PipelineConfig cfg;
  cfg.fixtures = (kCase / "replay").string();
  cfg.micl_dir = (kRoot / "fixtures" / "micl").string();
  cfg.spec = (kCase / "spec.json").string();
  cfg.out_dir = out.string();
  return cfg;
}

FullInputs case_inputs() {
  return {(kCase / "schematic.png").string(), (kCase / "detections.json").string(), (kCase / "golden.sp").string()};
}

}  // namespace

TEST_CASE("config file parsing and overrides") {
  const auto cfg = parse_config("# comment\nmode = live\nseed = 7\nbudget=30  # trailing\n\nsa.alpha = 0.9\ncot = off\n");
  CHECK(cfg.mode == Mode::Live);
  CHECK(cfg.seed == 7);
  CHECK(cfg.budget == 30);
  CHECK(cfg.schedule.alpha == 0.9);
  CHECK_FALSE(cfg.cot);
  CHECK(cfg.micl);

  CHECK_THROWS_AS(parse_config("colour = blue\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("seed = many\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("cot = maybe\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("just words\n"), ConfigError);

  // Text form parses back to the same settings.
  const auto again = parse_config(to_config_text(cfg));
  CHECK(to_config_text(again) == to_config_text(cfg));
}

TEST_CASE("replay and record need a fixture directory") {
  PipelineConfig cfg;
  CHECK_THROWS_AS(validate(cfg), ConfigError);
  cfg.mode = Mode::Record;
  CHECK_THROWS_AS(validate(cfg), ConfigError);
  cfg.mode = Mode::Replay;
  cfg.fixtures = (scratch("nofix") / "missing").string();
  CHECK_THROWS_AS(validate(cfg), ConfigError);
  cfg.fixtures = (kCase / "replay").string();
  CHECK_NOTHROW(validate(cfg));
  cfg.mode = Mode::Live;
  cfg.fixtures.clear();
  CHECK_NOTHROW(validate(cfg));
}

TEST_CASE("manifests leave paths out") {
  auto a = case_config("/tmp/one");
  auto b = case_config("/elsewhere/two");
  b.fixtures = "/x";
  CHECK(manifest_config(a) == manifest_config(b));
  b.seed = 43;
  CHECK(manifest_config(a) != manifest_config(b));
}

TEST_CASE("full golden run: every stage ok, every artifact reads back") {
  const auto out = scratch("golden");
  Run run(case_config(out));
  run_full(run, case_inputs());
  const auto& m = run.manifest();
  REQUIRE(m.stages.size() == 5);
  CHECK(m.all_ok());
  CHECK(m.find("netlist")->details.at("exact_match") == "true");
  CHECK(m.find("size")->details.at("spec_met") == "true");
  CHECK(m.find("route")->details.at("violations") == "0");
  CHECK(m.find("route")->details.at("axis_aligned") == "true");

  const auto back = manifest_from_json(read_file((out / "manifest.json").string()));
  CHECK(to_json(back) == to_json(m));
  for (const auto& s : m.stages)
    for (const auto& [name, digest] : s.artifacts) CHECK(fs::exists(out / name));

  const auto fused = netlist::parse_spice(read_file((out / "fused.sp").string()));
  CHECK(netlist::recovery_score(fused, netlist::parse_spice(read_file((kCase / "golden.sp").string()))).exact_match);
  const auto sized = netlist::parse_spice(read_file((out / "sized.sp").string()));
  const auto study = sizing::study_from_jsonl(read_file((out / "study.jsonl").string()));
  CHECK(study.trials.size() == 60);
  const auto inst = placement::instance_from_json(read_file((out / "instance.json").string()));
  const auto p = placement::placement_from_json(read_file((out / "placement.json").string()), inst);
  CHECK(placement::overlap_free(p, inst));
  CHECK(pairs_axis_aligned(inst, p));
  const auto report = routing::report_from_json(read_file((out / "routes.json").string()));
  CHECK(report.complete());
  CHECK(read_file((out / "layout.svg").string()).find("<svg") != std::string::npos);

  // Routing from the saved artifacts reproduces the routed layout.
  Run again(case_config(scratch("golden_route")));
  run_route(again, sized, inst, p);
  CHECK(again.manifest().stages.back().artifacts == m.find("route")->artifacts);
}

TEST_CASE("identical config and seed give byte-identical manifests") {
  std::string first;
  for (const char* name : {"det_a", "det_b"}) {
    const auto out = scratch(name);
    Run run(case_config(out));
    run_full(run, case_inputs());
    const auto text = read_file((out / "manifest.json").string());
    if (first.empty()) first = text;
    else CHECK(text == first);
  }
  auto cfg = case_config(scratch("det_seed"));
  cfg.seed = 5;
  Run run(cfg);
  run_full(run, case_inputs());
  CHECK(to_json(run.manifest()) != first);
}

TEST_CASE("stage failures are tagged and partial artifacts stay") {
  const auto out = scratch("fail");
  auto cfg = case_config(out);
  cfg.spec.clear();
  Run run(cfg);
  try {
    run_full(run, case_inputs());
    FAIL("expected a sizing failure");
  } catch (const StageError& e) {
    CHECK(e.stage() == "size");
    CHECK(std::string(e.what()).rfind("[size] ", 0) == 0);
  }
  const auto m = manifest_from_json(read_file((out / "manifest.json").string()));
  REQUIRE(m.stages.size() == 3);
  CHECK(m.stages[1].status == "ok");
  CHECK(m.stages[2].status == "failed");
  CHECK(fs::exists(out / "fused.sp"));
  CHECK_FALSE(m.all_ok());

  // A request with no recorded reply fails the stage that made it.
  auto miss = case_config(scratch("miss"));
  miss.tag_prefix = "unrecorded:";
  Run r2(miss);
  CHECK_THROWS_AS(run_full(r2, case_inputs()), StageError);
  CHECK(r2.manifest().stages.back().name == "netlist");
  CHECK(r2.manifest().stages.back().error.find("replay") != std::string::npos);

  auto no_micl_dir = case_config(scratch("micl"));
  no_micl_dir.micl_dir.clear();
  Run r3(no_micl_dir);
  CHECK_THROWS_AS(run_full(r3, case_inputs()), StageError);
  CHECK(r3.manifest().stages.back().error.find("MICL") != std::string::npos);
}

TEST_CASE("reconciliation decides the all-branches-wrong fixture") {
  const fs::path split = kRoot / "fixtures" / "netlist_split";
  auto cfg = case_config(scratch("split"));
  cfg.fixtures = (split / "replay").string();
  for (const bool intent : {true, false}) {
    cfg.intent = intent;
    Run run(cfg);
    const auto ex = run_extract(run, (kCase / "schematic.png").string(), (kCase / "detections.json").string());
    if (intent) {
      const auto nl = run_netlist(run, (kCase / "schematic.png").string(), ex.overlay, ex.node_map,
                                  (split / "golden.sp").string());
      CHECK(nl.exact_match == true);
      CHECK(nl.stage == reasoning::FusionStage::Llm);
    } else {
      CHECK_THROWS_AS(run_netlist(run, (kCase / "schematic.png").string(), ex.overlay, ex.node_map,
                                  (split / "golden.sp").string()),
                      StageError);
      CHECK(run.manifest().find("netlist")->details.at("exact_match") == "false");
    }
  }
}

TEST_CASE("net pairs follow matched devices") {
  const auto ir = netlist::parse_spice(read_file((kCase / "golden.sp").string()));
  const auto inst = placement::instance_from_netlist(ir, 2.0);
  const auto res = placement::anneal_restarts(inst, {}, 1, 2, Exec::Serial);
  const auto pairs = net_pairs(ir, inst, res.placement);
  REQUIRE(pairs.size() == 2);
  CHECK(pairs[0].a == "n1");
  CHECK(pairs[0].b == "out");
  CHECK(pairs[1].a == "inp");
  CHECK(pairs[1].b == "inn");
  CHECK(pairs[0].axis_x == doctest::Approx(pairs[1].axis_x));
}

TEST_CASE("benchmark over the recorded corpus") {
  auto base = case_config(scratch("eval"));
  const auto cases = evaluation::discover_cases((kRoot / "fixtures" / "cases").string());
  REQUIRE(cases.size() == 2);
  auto table = [&](const PipelineConfig& cfg, evaluation::SuccessCriteria cr) {
    evaluation::BenchmarkOptions bo;
    bo.criteria = cr;
    return evaluation::to_csv(evaluation::run_benchmark(
        cases, [&](const evaluation::CaseSpec& c, std::size_t a) { return run_attempt(cfg, c, a, cr); }, bo));
  };
  const auto full = table(base, {});
  CHECK(full.find("amp5t,15,11,73.3,100.0,3,1,0,0") != std::string::npos);
  CHECK(full.find("cs,15,7,46.7,98.1,8,0,0,0") != std::string::npos);

  const evaluation::SuccessCriteria netlist_only{true, false, false};
  auto no_intent = base;
  no_intent.intent = false;
  CHECK(table(no_intent, netlist_only).find("amp5t,15,9,60.0,99.8") != std::string::npos);
  auto no_cot = base;
  no_cot.cot = false;
  CHECK(table(no_cot, netlist_only).find("cs,15,4,26.7,84.6") != std::string::npos);
}
