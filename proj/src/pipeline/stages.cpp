#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>

#include "amflow/io.hpp"
#include "amflow/pipeline.hpp"
#include "json.hpp"
#include "../util/strings.hpp"

namespace am::pipeline {

namespace fs = std::filesystem;
using json = nlohmann::json;
using util::format_double;

namespace {

// Runs body as stage `name`; any escaping error is recorded and rethrown
// tagged with the stage.
template <class F>
auto staged(Run& run, const std::string& name, F&& body) {
  run.begin(name);
  try {
    auto out = body();
    run.save_manifest();
    return out;
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    run.fail(e.what());
    throw StageError(name, e.what());
  }
}

[[noreturn]] void stage_failure(Run& run, const std::string& name, const std::string& reason) {
  run.fail(reason);
  throw StageError(name, reason);
}

json space_json(const sizing::ParameterSpace& space) {
  json j{{"provenance", space.provenance}, {"dims", json::array()}};
  for (const auto& d : space.dims)
    j["dims"].push_back({{"name", d.name},
                         {"lo", d.lo},
                         {"hi", d.hi},
                         {"scale", std::string(sizing::to_string(d.scale))},
                         {"unit", d.unit},
                         {"ties", d.ties}});
  return j;
}

}  // namespace

ExtractOutput run_extract(Run& run, const std::string& image, const std::string& detections) {
  return staged(run, "extract", [&] {
    const auto gray = vision::read_gray_image(image);
    const auto det = vision::parse_detections(read_file(detections));
    const auto res = vision::extract(gray, det);
    const fs::path out = run.config().out_dir;
    fs::create_directories(out);
    ExtractOutput o;
    o.overlay = (out / "overlay.png").string();
    o.regions = (out / "regions.png").string();
    vision::write_png(o.overlay, res.bundle.overlay);
    vision::write_png(o.regions, res.bundle.regions);
    run.record_artifact("overlay.png");
    run.record_artifact("regions.png");
    o.node_map = run.write_artifact("node_map.json", res.bundle.node_map);
    o.region_count = res.labeling.region_count();
    run.stage().details["regions"] = std::to_string(o.region_count);
    run.stage().details["components"] = std::to_string(det.components.size());
    return o;
  });
}

NetlistOutput run_netlist(Run& run, const std::string& image, const std::string& overlay,
                          const std::string& node_map_file, const std::string& golden) {
  return staged(run, "netlist", [&] {
    const auto& cfg = run.config();
    reasoning::ReasoningConfig rc;
    rc.cot = cfg.cot;
    rc.micl = cfg.micl;
    rc.intent = cfg.intent;
    rc.model = cfg.model;
    rc.tag_prefix = cfg.tag_prefix;
    if (cfg.micl) {
      if (cfg.micl_dir.empty()) throw reasoning::MissingArtifact("MICL is enabled but no exemplar directory is set");
      rc.exemplar = reasoning::load_exemplar(cfg.micl_dir);
    }
    const reasoning::AnnotatedArtifacts annotated{overlay, read_file(node_map_file)};
    const auto inputs = reasoning::build_branch_inputs(image, annotated, rc);
    const auto hyps = reasoning::run_branches(inputs, run.gateway(), rc);
    const std::vector<reasoning::BranchHypothesis> hv(hyps.begin(), hyps.end());

    json branches = json::array();
    NetlistOutput o;
    for (const auto& h : hv) {
      branches.push_back({{"branch", std::string(reasoning::to_string(h.id))},
                          {"parsed", h.netlist.has_value()},
                          {"parse_error", h.parse_error},
                          {"netlist", h.netlist ? netlist::serialize(*h.netlist) : ""},
                          {"trace", h.trace}});
      if (!h.trace.empty()) o.traces.push_back(h.trace);
    }
    run.write_artifact("branches.json", branches.dump(2) + "\n");

    const auto fused = reasoning::fuse(hv, &run.gateway(), rc);
    run.write_artifact("fusion.json", json{{"stage", std::string(reasoning::to_string(fused.stage))},
                                           {"valid", fused.valid},
                                           {"notes", fused.notes}}
                                          .dump(2) + "\n");
    auto& rec = run.stage();
    rec.details["fusion_stage"] = std::string(reasoning::to_string(fused.stage));
    rec.details["valid"] = fused.valid ? "true" : "false";
    if (!fused.valid) stage_failure(run, "netlist", "fusion produced no valid netlist");
    run.write_artifact("fused.sp", netlist::serialize(fused.netlist));
    o.netlist = fused.netlist;
    o.stage = fused.stage;
    if (!golden.empty()) {
      const auto report = netlist::recovery_score(fused.netlist, netlist::parse_spice(read_file(golden)));
      o.exact_match = report.exact_match;
      rec.details["exact_match"] = report.exact_match ? "true" : "false";
      rec.details["component_accuracy"] = format_double(report.component_accuracy);
      rec.details["edge_accuracy"] = format_double(report.edge_accuracy);
      if (!report.exact_match) stage_failure(run, "netlist", "fused netlist differs from the golden netlist");
    }
    return o;
  });
}

SizingOutput run_size(Run& run, const netlist::NetlistIR& ir, const std::vector<std::string>& traces) {
  return staged(run, "size", [&] {
    const auto& cfg = run.config();
    if (cfg.spec.empty()) throw sizing::InvalidSpec("no spec file given");
    const auto spec = sizing::parse_spec(read_file(cfg.spec));

    std::string context;
    if (!traces.empty()) {
      const llm::CompressOptions co{cfg.model, cfg.tag_prefix + "compress"};
      context = llm::compress_context(traces, run.gateway(), co);
    }
    sizing::AgentConfig ac;
    ac.max_steps = cfg.agent_steps;
    ac.model = cfg.model;
    ac.tag_prefix = cfg.tag_prefix;
    const auto agent = sizing::plan_search_space(ir, context, run.gateway(), ac);
    const auto& space = agent.space;

    sizing::Evaluator evaluator;
    if (cfg.simulator.empty()) {
      evaluator = [&](const sizing::Point& x, sizing::TrialContext&) {
        try {
          return sizing::Evaluation{sizing::analytic_evaluate(ir, space, x, ac.process), false};
        } catch (const sizing::UnsupportedTopology&) {
          throw;
        } catch (const Error&) {
          return sizing::Evaluation{{}, true};
        }
      };
    } else {
      sizing::SpiceAdapterConfig sc;
      sc.simulator = cfg.simulator;
      evaluator = [&ir, &space, sc](const sizing::Point& x, sizing::TrialContext&) {
        try {
          return sizing::Evaluation{sizing::spice_evaluate(ir, space, x, sc), false};
        } catch (const sizing::SimulatorNotFound&) {
          throw;
        } catch (const Error&) {
          return sizing::Evaluation{{}, true};
        }
      };
    }
    sizing::OptimizeConfig oc;
    oc.budget = cfg.budget;
    oc.seed = cfg.seed;
    const auto study = sizing::optimize(space, evaluator, spec, oc);
    const auto& best = study.best_trial();

    SizingOutput o;
    o.sized = sizing::apply_point(ir, space, best.x);
    o.metrics = best.metrics;
    o.spec_met = sizing::spec_met(best.metrics, spec);

    json transcript = json::array();
    for (const auto& e : agent.transcript.entries)
      transcript.push_back({{"kind", std::string(llm::to_string(e.kind))}, {"text", e.text}});
    run.write_artifact("context.txt", context);
    run.write_artifact("agent.json", json{{"steps", agent.steps},
                                          {"fallback_dims", agent.fallback_dims},
                                          {"transcript", transcript}}
                                         .dump(2) + "\n");
    run.write_artifact("space.json", space_json(space).dump(2) + "\n");
    run.write_artifact("study.jsonl", sizing::study_to_jsonl(study));
    run.write_artifact("sized.sp", netlist::serialize(o.sized));
    json summary{{"best_trial", best.number}, {"fom", best.fom}, {"spec_met", o.spec_met}, {"metrics", best.metrics}};
    run.write_artifact("sizing.json", summary.dump(2) + "\n");

    auto& rec = run.stage();
    rec.details["trials"] = std::to_string(study.trials.size());
    rec.details["best_trial"] = std::to_string(best.number);
    rec.details["fom"] = format_double(best.fom);
    rec.details["spec_met"] = o.spec_met ? "true" : "false";
    rec.details["agent_steps"] = std::to_string(agent.steps);
    for (const auto& [k, v] : best.metrics) rec.details["metric." + k] = format_double(v);
    if (!o.spec_met) stage_failure(run, "size", "best trial misses the spec");
    return o;
  });
}

bool pairs_axis_aligned(const placement::Instance& inst, const placement::Placement& p, double tol) {
  std::optional<double> axis;
  for (const auto& [a, b] : inst.symmetry_pairs) {
    const auto ia = inst.index_of(a);
    const auto ib = inst.index_of(b);
    if (std::abs(p.y[ia] - p.y[ib]) > tol) return false;
    const double c = 0.5 * (p.x[ia] + 0.5 * p.w_of(inst, ia) + p.x[ib] + 0.5 * p.w_of(inst, ib));
    if (axis && std::abs(*axis - c) > tol) return false;
    axis = c;
  }
  return true;
}

PlacementOutput run_place(Run& run, const netlist::NetlistIR& sized) {
  return staged(run, "place", [&] {
    const auto& cfg = run.config();
    PlacementOutput o;
    o.instance = placement::instance_from_netlist(sized, cfg.block_spacing);
    const auto res = placement::anneal_restarts(o.instance, cfg.schedule, cfg.seed, cfg.restarts);
    o.placement = res.placement;
    o.cost = res.cost;
    run.write_artifact("instance.json", placement::to_json(o.instance) + "\n");
    run.write_artifact("placement.json", placement::to_json(o.placement, o.instance) + "\n");
    auto& rec = run.stage();
    rec.details["area"] = format_double(o.placement.width * o.placement.height);
    rec.details["hpwl"] = format_double(o.cost.hpwl);
    rec.details["symmetry_cost"] = format_double(o.cost.symmetry);
    rec.details["pairs"] = std::to_string(o.instance.symmetry_pairs.size());
    rec.details["axis_aligned"] = pairs_axis_aligned(o.instance, o.placement) ? "true" : "false";
    if (!placement::overlap_free(o.placement, o.instance)) stage_failure(run, "place", "placement overlaps");
    return o;
  });
}

std::vector<routing::NetPair> net_pairs(const netlist::NetlistIR& ir, const placement::Instance& inst,
                                        const placement::Placement& p) {
  std::vector<routing::NetPair> out;
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& [a, b] : inst.symmetry_pairs) {
    const auto* da = ir.find(a);
    const auto* db = ir.find(b);
    if (!da || !db || da->ports.size() != db->ports.size()) continue;
    const auto ia = inst.index_of(a);
    const auto ib = inst.index_of(b);
    const double axis = 0.5 * (p.x[ia] + 0.5 * p.w_of(inst, ia) + p.x[ib] + 0.5 * p.w_of(inst, ib));
    for (std::size_t k = 0; k < da->ports.size(); ++k) {
      const auto& na = da->ports[k].net;
      const auto& nb = db->ports[k].net;
      if (na == nb) continue;
      if (!seen.insert({std::min(na, nb), std::max(na, nb)}).second) continue;
      out.push_back({na, nb, axis});
    }
  }
  return out;
}

RoutingOutput run_route(Run& run, const netlist::NetlistIR& sized, const placement::Instance& inst,
                        const placement::Placement& p) {
  return staged(run, "route", [&] {
    const auto& cfg = run.config();
    auto grid = routing::build_grid(p, inst, cfg.rules);
    // Gate nets of matched devices are the noise-sensitive inputs.
    for (const auto& [a, b] : inst.symmetry_pairs) {
      const auto* da = sized.find(a);
      const auto* db = sized.find(b);
      if (!da || !db || !netlist::is_mos(da->kind) || !netlist::is_mos(db->kind)) continue;
      const auto& ga = da->net(netlist::PortRole::Gate);
      const auto& gb = db->net(netlist::PortRole::Gate);
      if (ga == gb) continue;
      for (const auto& g : {ga, gb})
        if (const int idx = grid.net_index(g); idx >= 0) grid.sensitive[static_cast<std::size_t>(idx)] = true;
    }
    routing::RouteOptions ro;
    ro.weights = cfg.router;
    ro.candidates = cfg.route_candidates;
    RoutingOutput o;
    o.report = routing::route_all(grid, net_pairs(sized, inst, p), ro);
    o.violations = routing::drc_check(o.report.routes, grid, cfg.rules.min_spacing);
    o.symmetric = pairs_axis_aligned(inst, p);

    json drc = json::array();
    for (const auto& v : o.violations)
      drc.push_back({{"kind", routing::to_string(v.kind)},
                     {"net_a", v.net_a},
                     {"net_b", v.net_b},
                     {"a", {v.a.layer, v.a.ix, v.a.iy}},
                     {"b", {v.b.layer, v.b.ix, v.b.iy}}});
    run.write_artifact("routes.json", routing::to_json(o.report, grid) + "\n");
    run.write_artifact("drc.json", json{{"violations", drc}}.dump(2) + "\n");
    run.write_artifact("layout.svg", routing::to_svg(o.report, grid));

    auto& rec = run.stage();
    rec.details["routed"] = std::to_string(o.report.routes.size());
    rec.details["unrouted"] = std::to_string(o.report.unrouted.size());
    rec.details["violations"] = std::to_string(o.violations.size());
    rec.details["mirrored"] = std::to_string(o.report.mirrored.size());
    rec.details["axis_aligned"] = o.symmetric ? "true" : "false";
    if (!o.report.complete()) stage_failure(run, "route", "unrouted nets remain");
    if (!o.violations.empty()) stage_failure(run, "route", std::to_string(o.violations.size()) + " DRC violations");
    if (!o.symmetric) stage_failure(run, "route", "symmetry pairs are not axis-aligned");
    return o;
  });
}

void run_full(Run& run, const FullInputs& in) {
  const auto ex = run_extract(run, in.image, in.detections);
  const auto nl = run_netlist(run, in.image, ex.overlay, ex.node_map, in.golden);
  const auto sz = run_size(run, nl.netlist, nl.traces);
  const auto pl = run_place(run, sz.sized);
  run_route(run, sz.sized, pl.instance, pl.placement);
}

std::string attempt_prefix(std::size_t attempt) { return "a" + std::to_string(attempt) + ":"; }

evaluation::AttemptOutcome run_attempt(const PipelineConfig& base, const evaluation::CaseSpec& c,
                                       std::size_t attempt, const evaluation::SuccessCriteria& criteria,
                                       llm::Gateway* gateway) {
  using evaluation::Stage;
  PipelineConfig cfg = base;
  const fs::path dir = c.dir;
  cfg.mode = Mode::Replay;
  cfg.fixtures = (dir / "replay").string();
  cfg.spec = (dir / "spec.json").string();
  cfg.tag_prefix = base.tag_prefix + attempt_prefix(attempt);
  cfg.seed = base.seed + attempt;
  cfg.out_dir = (fs::path(base.out_dir) / c.id / ("a" + std::to_string(attempt))).string();

  evaluation::AttemptOutcome o;
  auto run_ptr = gateway ? std::make_unique<Run>(cfg, *gateway) : std::make_unique<Run>(cfg);
  Run& run = *run_ptr;
  const auto stage_of = [](const std::string& s) {
    if (s == "size") return Stage::Sizing;
    if (s == "place") return Stage::Placement;
    if (s == "route") return Stage::Routing;
    return Stage::Netlist;
  };
  try {
    const std::string image = (dir / "schematic.png").string();
    const auto ex = run_extract(run, image, (dir / "detections.json").string());
    const auto nl = run_netlist(run, image, ex.overlay, ex.node_map, (dir / "golden.sp").string());
    o.netlist_exact = nl.exact_match.value_or(false);
    if (!criteria.spec && !criteria.drc) return o;
    const auto sz = run_size(run, nl.netlist, nl.traces);
    o.spec_met = sz.spec_met;
    if (!criteria.drc) return o;
    const auto pl = run_place(run, sz.sized);
    o.placed = true;
    run_route(run, sz.sized, pl.instance, pl.placement);
    o.drc_clean = true;
  } catch (const StageError& e) {
    o.error_stage = stage_of(e.stage());
    o.error = e.what();
  }
  return o;
}

}  // namespace am::pipeline
