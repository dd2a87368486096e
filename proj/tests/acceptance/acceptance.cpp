// Acceptance driver: one PASS/FAIL line per criterion, exit 1 if any fails.
//
//   acceptance <am-binary> <source-root> <scratch-dir>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <random>
#include <string>

#include "amflow/evaluation.hpp"
#include "amflow/io.hpp"
#include "amflow/pipeline.hpp"
#include "amflow/placement.hpp"
#include "amflow/reasoning.hpp"
#include "amflow/routing.hpp"
#include "amflow/sizing.hpp"
#include "amflow/vision.hpp"
#include "support/netlist_oracle.hpp"
#include "support/placement_oracle.hpp"
#include "support/reasoning_fixtures.hpp"
#include "support/routing_oracle.hpp"
#include "support/table_cells.hpp"
#include "support/vision_oracle.hpp"

namespace fs = std::filesystem;
namespace t = am::testing;
using am::Exec;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  const char* name;
  double limit_s;
  std::function<Verdict()> body;
};

std::string fmt(const char* f, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Verdict pass_at_k_cells() {
  std::size_t ok = 0, total = 0;
  for (const auto& cell : t::reference_cells()) {
    const auto c = t::implied_successes(cell.pass1);
    const double p1 = std::stod(am::evaluation::percent(am::evaluation::pass_at_k(15, c, 1)));
    const double p5 = std::stod(am::evaluation::percent(am::evaluation::pass_at_k(15, c, 5)));
    ++total;
    ok += std::abs(p1 - cell.pass1) <= 0.05 && std::abs(p5 - cell.pass5) <= 0.05;
  }
  using am::evaluation::pass_at_k;
  using am::evaluation::percent;
  const bool spot = percent(pass_at_k(15, 3, 5)) == "73.6" && percent(pass_at_k(15, 7, 5)) == "98.1" &&
                    percent(pass_at_k(15, 11, 5)) == "100.0";
  return {ok == total && total >= 10 && spot, fmt("%zu/%zu cells within 0.05 pp", ok, total)};
}

Verdict astar_vs_dijkstra() {
  using namespace am::routing;
  std::mt19937_64 rng(32);
  std::uniform_int_distribution<int> coord(0, 31), surcharge(0, 3), wrong(0, 3), via(0, 5);
  std::bernoulli_distribution blocked(0.25);
  int agree = 0, reachable = 0;
  for (int trial = 0; trial < 100; ++trial) {
    RoutingRules rules;
    rules.pitch = 1.0;
    rules.margin = 0.0;
    RoutingGrid g(32, 32, rules);
    for (std::size_t i = 0; i < g.size(); ++i) {
      g.obstacle[i] = blocked(rng);
      g.cost[i] = surcharge(rng);
    }
    const RouterWeights w{static_cast<double>(wrong(rng)), static_cast<double>(via(rng)), 0.0, 0.0};
    const GridCell s{0, coord(rng), coord(rng)}, d{1, coord(rng), coord(rng)};
    g.obstacle[g.index(s)] = g.obstacle[g.index(d)] = 0;
    const auto oracle = t::dijkstra(g, s, d, w);
    const auto found = astar(g, search_space(g, -1, w), {s}, d, w);
    if (found.has_value() != oracle.has_value()) continue;
    if (!found) {
      ++agree;
      continue;
    }
    ++reachable;
    agree += found->cost == *oracle && t::contiguous(found->path);
  }
  return {agree == 100, fmt("%d/100 exact (%d reachable)", agree, reachable)};
}

Verdict canonical_vs_bruteforce() {
  std::mt19937_64 rng(11);
  std::vector<am::netlist::NetlistIR> pool;
  for (int i = 0; i < 50; ++i) pool.push_back(t::random_netlist(rng, 6, 4));
  for (int i = 0; i < 50; ++i) pool.push_back(t::renamed_clone(pool[static_cast<std::size_t>(i)], rng));
  std::vector<am::netlist::CanonicalForm> forms;
  for (const auto& ir : pool) forms.push_back(am::netlist::canonicalize(ir));
  std::size_t pairs = 0, disagree = 0, iso = 0;
  for (std::size_t i = 0; i < pool.size(); ++i)
    for (std::size_t j = i + 1; j < pool.size(); ++j) {
      const bool truth = t::brute_force_isomorphic(pool[i], pool[j]);
      ++pairs;
      iso += truth;
      disagree += truth != (forms[i] == forms[j]);
    }
  return {disagree == 0 && iso >= 50, fmt("%zu pairs, %zu isomorphic, %zu disagreements", pairs, iso, disagree)};
}

Verdict anneal_three_blocks() {
  am::placement::Instance inst;
  inst.blocks = {{"A", 1.0, 2.0, {}}, {"B", 2.0, 1.0, {}}, {"C", 1.0, 1.0, {}}};
  const double optimum = t::exhaustive_min_area(inst);
  int hits = 0, monotone = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto r = am::placement::anneal(inst, {}, seed);
    hits += std::abs(r.cost.area - optimum) < 1e-9;
    bool mono = true;
    for (std::size_t i = 1; i < r.best_trace.size(); ++i) mono &= r.best_trace[i] <= r.best_trace[i - 1];
    monotone += mono;
  }
  return {hits >= 95 && monotone == 100 && std::abs(optimum - 5.0) < 1e-9,
          fmt("optimum %.1f hit %d/100, monotone %d/100", optimum, hits, monotone)};
}

Verdict tpe_parabola() {
  using namespace am::sizing;
  ParameterSpace space;
  space.dims.push_back({"x", 0.0, 10.0, Scale::Linear, "", {}});
  const Objective objective = [](const Metrics& m) { return m.at("f"); };

  // Grid oracle for the optimum location.
  double grid_best = 0.0;
  for (int i = 0; i <= 10000; ++i) {
    const double x = i * 1e-3;
    if (-(x - 3) * (x - 3) > -(grid_best - 3) * (grid_best - 3)) grid_best = x;
  }

  const Evaluator parabola = [](const Point& x, TrialContext& ctx) {
    const double v = -(x.at("x") - 3.0) * (x.at("x") - 3.0);
    ctx.report(v);
    return Evaluation{{{"f", v}}, false};
  };
  int close = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    OptimizeConfig cfg;
    cfg.budget = 100;
    cfg.seed = seed;
    const auto study = optimize(space, parabola, objective, cfg);
    close += std::abs(study.best_trial().x.at("x") - grid_best) <= 0.5;
  }

  const Evaluator plateau = [](const Point& x, TrialContext& ctx) {
    const double v = x.at("x");
    for (int step = 0; step < 3; ++step) {
      const double value = v > 5.0 ? 0.0 : (step + 1) * (5.0 - std::abs(v - 2.5));
      if (ctx.report(value)) return Evaluation{{{"f", value}}, false};
    }
    return Evaluation{{{"f", 3 * (5.0 - std::abs(v - 2.5))}}, false};
  };
  OptimizeConfig pc;
  pc.budget = 60;
  pc.seed = 11;
  std::size_t pruned = 0;
  for (const auto& tr : optimize(space, plateau, objective, pc).trials) pruned += tr.state == TrialState::Pruned;
  return {close >= 18 && pruned >= 1 && std::abs(grid_best - 3.0) < 1e-9,
          fmt("%d/20 seeds within 0.5 of %.3f, %zu pruned on plateau", close, grid_best, pruned)};
}

Verdict labeling_vs_flood() {
  std::mt19937_64 rng(21);
  int match = 0, idempotent = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const int w = 20 + trial * 3, h = 15 + trial * 2;
    const int radius = trial % 3;
    const std::size_t thr = static_cast<std::size_t>(trial % 4) * 3;
    const auto m = t::random_mask(rng, w, h, 0.05 + 0.02 * (trial % 5));
    const auto l = am::vision::label_regions(m, thr, radius, trial % 2 ? Exec::Parallel : Exec::Serial);
    const auto oracle = t::oracle_partition(m, thr, radius);
    match += l.region_count() == oracle.size() && t::partition_of(l) == oracle;
    const double eps = 2.0 + trial;
    const auto once = am::vision::merge_nodes(l, eps);
    idempotent += once.labels == am::vision::merge_nodes(once, eps).labels;
  }
  return {match == 20 && idempotent == 20, fmt("%d/20 partitions match, merge idempotent %d/20", match, idempotent)};
}

Verdict fusion_fixtures(const fs::path& root, const fs::path& scratch) {
  using namespace am::reasoning;
  using am::netlist::recovery_score;
  const auto truth = t::amp5t();
  auto three = [](am::netlist::NetlistIR a, am::netlist::NetlistIR b, am::netlist::NetlistIR c) {
    return std::vector<BranchHypothesis>{t::hyp(BranchId::Raw, std::move(a)), t::hyp(BranchId::Annotated, std::move(b)),
                                         t::hyp(BranchId::Dual, std::move(c))};
  };
  ReasoningConfig off;
  off.micl = false;
  off.intent = false;

  // Consensus alone must repair one disjoint fault per branch.
  const auto disjoint = three(t::flip_kind(truth, 0), t::relabeled(t::rewire(truth, 3, 0, "n1"), "_a"),
                              t::relabeled(t::flip_kind(truth, 4), "_d"));
  const bool disjoint_ok = recovery_score(fuse(disjoint, nullptr, off).netlist, truth).exact_match;

  const auto outvoted = three(t::flip_kind(truth, 3), truth, t::relabeled(truth, "_o"));
  const bool outvoted_ok = recovery_score(fuse(outvoted, nullptr, off).netlist, truth).exact_match;

  const auto disagree =
      three(t::rewire(truth, 1, 1, "inp"), t::rewire(truth, 1, 1, "out"), t::rewire(truth, 1, 1, "tail"));
  const bool disagree_fails = !recovery_score(fuse(disagree, nullptr, off).netlist, truth).exact_match;

  // Recorded replay where every branch is wrong: reconciliation repairs it, consensus alone cannot.
  const fs::path split = root / "fixtures" / "netlist_split";
  const fs::path amp = root / "fixtures" / "cases" / "amp5t";
  bool replay_ok = false;
  std::string replay_note = "replay unavailable";
  try {
    am::pipeline::PipelineConfig cfg;
    cfg.fixtures = (split / "replay").string();
    cfg.micl_dir = (root / "fixtures" / "micl").string();
    cfg.out_dir = (scratch / "fusion").string();
    bool with = false, without = true;
    for (const bool intent : {true, false}) {
      cfg.intent = intent;
      am::pipeline::Run run(cfg);
      const auto ex = am::pipeline::run_extract(run, (amp / "schematic.png").string(), (amp / "detections.json").string());
      try {
        const auto nl = am::pipeline::run_netlist(run, (amp / "schematic.png").string(), ex.overlay, ex.node_map,
                                                  (split / "golden.sp").string());
        (intent ? with : without) = nl.exact_match.value_or(false);
      } catch (const am::pipeline::StageError&) {
        (intent ? with : without) = false;
      }
    }
    replay_ok = with && !without;
    replay_note = fmt("replay with=%d without=%d", with, without);
  } catch (const std::exception& e) {
    replay_note = e.what();
  }
  return {disjoint_ok && outvoted_ok && disagree_fails && replay_ok,
          fmt("disjoint=%d outvoted(no-intent)=%d disagree(no-intent) exact=%d, ", disjoint_ok, outvoted_ok,
              !disagree_fails) +
              replay_note};
}

Verdict union_bound() {
  const std::vector<double> p{0.3, 0.4, 0.5};
  std::mt19937_64 rng(2024);
  std::bernoulli_distribution b0(p[0]), b1(p[1]), b2(p[2]);
  const int n = 100000;
  int hits = 0;
  for (int i = 0; i < n; ++i) {
    const bool x0 = b0(rng), x1 = b1(rng), x2 = b2(rng);
    hits += x0 || x1 || x2;
  }
  const double empirical = static_cast<double>(hits) / n;
  const double bound = am::reasoning::joint_pass_lower_bound(p);
  return {std::abs(empirical - bound) < 0.01 && std::abs(bound - 0.79) < 1e-12,
          fmt("empirical %.4f vs %.4f", empirical, bound)};
}

Verdict end_to_end(const std::string& am_bin, const fs::path& root, const fs::path& scratch) {
  const fs::path c = root / "fixtures" / "cases" / "amp5t";
  std::string manifests[2];
  for (int i = 0; i < 2; ++i) {
    const fs::path out = scratch / ("full_" + std::to_string(i));
    fs::remove_all(out);
    const std::string cmd =
        "\"" + am_bin + "\" full --case \"" + c.string() + "\" --out \"" + out.string() + "\" > \"" +
        (scratch / ("full_" + std::to_string(i) + ".log")).string() + "\" 2>&1";
    if (std::system(cmd.c_str()) != 0) return {false, fmt("run %d exited non-zero", i)};
    if (!fs::exists(out / "layout.svg")) return {false, "no layout.svg"};
    manifests[i] = am::read_file((out / "manifest.json").string());
  }
  const auto m = am::pipeline::manifest_from_json(manifests[0]);
  const auto* route = m.find("route");
  const bool clean = route && route->details.at("violations") == "0" && route->details.at("unrouted") == "0";
  const bool aligned = route && route->details.at("axis_aligned") == "true";
  const bool same = manifests[0] == manifests[1];
  return {m.all_ok() && clean && aligned && same,
          fmt("stages ok=%d drc clean=%d pairs aligned=%d manifests identical=%d", m.all_ok(), clean, aligned, same)};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 4) {
    std::fprintf(stderr, "usage: acceptance <am-binary> <source-root> <scratch-dir>\n");
    return 2;
  }
  const std::string am_bin = argv[1];
  const fs::path root = argv[2];
  const fs::path scratch = argv[3];
  fs::create_directories(scratch);

  const std::vector<Criterion> criteria{
      {1, "pass@k table arithmetic", 1, pass_at_k_cells},
      {2, "A* equals Dijkstra", 10, astar_vs_dijkstra},
      {3, "canonical form vs isomorphism", 30, canonical_vs_bruteforce},
      {4, "SA three-block optimum", 20, anneal_three_blocks},
      {5, "TPE parabola and pruning", 10, tpe_parabola},
      {6, "region labeling vs flood fill", 5, labeling_vs_flood},
      {7, "branch fusion fixtures", 2, [&] { return fusion_fixtures(root, scratch); }},
      {8, "union success bound", 2, union_bound},
      {9, "end-to-end amplifier layout", 60, [&] { return end_to_end(am_bin, root, scratch); }},
  };

  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.body();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool ok = v.pass && secs < c.limit_s;
    failed += !ok;
    std::printf("%s %d %s: %s (%.2f s, limit %.0f s)\n", ok ? "PASS" : "FAIL", c.id, c.name, v.detail.c_str(), secs,
                c.limit_s);
    std::fflush(stdout);
  }
  return failed ? 1 : 0;
}
