#include <cmath>
#include <filesystem>
#include <random>

#include "amflow/io.hpp"
#include "amflow/sizing.hpp"
#include "doctest.h"
#include "support/reasoning_fixtures.hpp"

using namespace am::sizing;
namespace fs = std::filesystem;
namespace t = am::testing;

namespace {

const char* kCommonSource =
    "M1 out in gnd gnd nfet W=2u L=0.5u\n"
    "R1 vdd out 10k\n"
    ".model nfet nmos\n.end\n";

const char* kCascode =
    "M1 x in gnd gnd nfet W=4u L=0.5u\n"
    "M2 out vb x gnd nfet W=4u L=0.5u\n"
    "R1 vdd out 5k\n"
    "Vb vb 0 DC 1.3\n"
    ".model nfet nmos\n.end\n";

ParameterSpace line_space(double lo = 0.0, double hi = 10.0) {
  ParameterSpace s;
  s.dims.push_back({"x", lo, hi, Scale::Linear, "", {}});
  return s;
}

Evaluator single_step(std::function<double(double)> f) {
  return [f](const Point& x, TrialContext& ctx) {
    const double v = f(x.at("x"));
    ctx.report(v);
    return Evaluation{{{"f", v}}, false};
  };
}

OptimizeConfig budget(std::size_t n, std::uint64_t seed) {
  OptimizeConfig c;
  c.budget = n;
  c.seed = seed;
  return c;
}

Objective metric_f() {
  return [](const Metrics& m) { return m.at("f"); };
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string write_stub(const fs::path& dir, const std::string& body) {
  const auto p = dir / "stubsim";
  am::write_file(p.string(), "#!/bin/sh\n" + body + "\n");
  fs::permissions(p, fs::perms::owner_all);
  return p.string();
}

}  // namespace

TEST_CASE("fallback space covers sizable params and ties matched pairs") {
  const auto ir = t::amp5t();
  const auto s = fallback_space(ir);
  std::vector<std::string> names;
  for (const auto& d : s.dims) names.push_back(d.name);
  CHECK(names == std::vector<std::string>{"M1.W", "M1.L", "M3.W", "M3.L", "M5.W", "M5.L", "Vb.dc"});
  CHECK(s.find("M1.W")->ties == std::vector<std::string>{"M2.W"});
  CHECK(s.find("M3.L")->ties == std::vector<std::string>{"M4.L"});
  CHECK(s.find("M1.W")->lo == doctest::Approx(0.42e-6));
  CHECK(s.find("M1.W")->hi == doctest::Approx(100e-6));
  CHECK(s.find("M5.L")->hi == doctest::Approx(4e-6));
  CHECK(s.find("Vb.dc")->scale == Scale::Linear);
  CHECK_NOTHROW(s.check(ir));

  const auto cs = fallback_space(am::netlist::parse_spice(kCommonSource));
  REQUIRE(cs.dims.size() == 3);
  CHECK(cs.dims[2].name == "R1.value");
  CHECK(cs.dims[2].lo == 100.0);
  CHECK(cs.dims[2].hi == 1e6);
}

TEST_CASE("space invariants are enforced") {
  const auto ir = t::amp5t();
  ParameterSpace s;
  s.dims.push_back({"M1.W", 2e-6, 1e-6, Scale::Log, "m", {}});
  CHECK_THROWS_AS(s.check(ir), InvalidSpace);
  s.dims[0] = {"M1.W", 0.0, 1e-6, Scale::Log, "m", {}};
  CHECK_THROWS_AS(s.check(ir), InvalidSpace);
  s.dims[0] = {"M9.W", 1e-6, 2e-6, Scale::Log, "m", {}};
  CHECK_THROWS_AS(s.check(ir), InvalidSpace);
  s.dims[0] = {"Vb.W", 1e-6, 2e-6, Scale::Log, "m", {}};
  CHECK_THROWS_AS(s.check(ir), InvalidSpace);
  s.dims[0] = {"M1.W", 1e-6, 2e-6, Scale::Log, "m", {"M1.W"}};
  CHECK_THROWS_AS(s.check(ir), InvalidSpace);
}

TEST_CASE("apply_point writes dims and their ties") {
  const auto ir = t::amp5t();
  const auto s = fallback_space(ir);
  Point x;
  for (const auto& d : s.dims) x[d.name] = d.lo;
  x["M1.W"] = 7e-6;
  const auto sized = apply_point(ir, s, x);
  CHECK(sized.find("M1")->params.at("w") == 7e-6);
  CHECK(sized.find("M2")->params.at("w") == 7e-6);
  CHECK(sized.find("Vb")->params.at("dc") == 0.0);
  x.erase("M5.L");
  CHECK_THROWS_AS(apply_point(ir, s, x), InvalidSpace);
}

TEST_CASE("fom saturates each target at its weight") {
  Spec spec{{{"gain_db", Direction::AtLeast, 40.0, 1.0}, {"power_w", Direction::AtMost, 1e-4, 2.0}}};
  CHECK(fom({{"gain_db", 40.0}, {"power_w", 1e-4}}, spec) == doctest::Approx(3.0));
  CHECK(fom({{"gain_db", 80.0}, {"power_w", 1e-5}}, spec) == doctest::Approx(3.0));
  CHECK(fom({{"gain_db", 20.0}, {"power_w", 1e-4}}, spec) == doctest::Approx(2.5));
  CHECK(fom({{"gain_db", 40.0}, {"power_w", 4e-4}}, spec) == doctest::Approx(1.5));
  CHECK_THROWS_AS(fom({{"gain_db", 40.0}}, spec), MissingMetric);
  CHECK(spec_met({{"gain_db", 40.0}, {"power_w", 1e-4}}, spec));
  CHECK_FALSE(spec_met({{"gain_db", 39.9}, {"power_w", 1e-4}}, spec));

  Spec one{{{"gbw_hz", Direction::AtLeast, 1e6, 1.0}}};
  CHECK(fom({{"gbw_hz", 0.5e6}}, one) == doctest::Approx(0.5));
}

TEST_CASE("fom is monotone in every at-least metric") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.1, 10.0);
  for (int trial = 0; trial < 300; ++trial) {
    Spec spec;
    Metrics m;
    for (int k = 0; k < 4; ++k) {
      const std::string name = "m" + std::to_string(k);
      spec.targets.push_back({name, k % 2 ? Direction::AtMost : Direction::AtLeast, u(rng), u(rng)});
      m[name] = u(rng);
    }
    const double base = fom(m, spec);
    for (int k = 0; k < 4; k += 2) {
      Metrics up = m;
      up["m" + std::to_string(k)] *= 1.0 + u(rng);
      CHECK(fom(up, spec) >= base - 1e-12);
    }
  }
}

TEST_CASE("spec files parse and round-trip") {
  const auto spec = parse_spec(R"([{"metric":"gain_db","dir":">=","threshold":40,"weight":2},
                                   {"metric":"power_w","dir":"<=","threshold":1e-4}])");
  REQUIRE(spec.targets.size() == 2);
  CHECK(spec.targets[0].weight == 2.0);
  CHECK(spec.targets[1].dir == Direction::AtMost);
  CHECK(spec.targets[1].weight == 1.0);
  const auto again = parse_spec(to_json(spec));
  CHECK(again.targets[1].threshold == spec.targets[1].threshold);
  CHECK_THROWS_AS(parse_spec(R"([{"metric":"g","dir":"~","threshold":1}])"), InvalidSpec);
  CHECK_THROWS_AS(parse_spec(R"([{"metric":"g","dir":">=","threshold":1,"weight":0}])"), InvalidSpec);
  CHECK_THROWS_AS(parse_spec("{"), InvalidSpec);
}

TEST_CASE("tpe falls back to uniform sampling before startup") {
  std::mt19937_64 rng(1);
  const auto s = line_space();
  for (int i = 0; i < 200; ++i) {
    const auto x = tpe_suggest({}, s, rng);
    CHECK(x.at("x") >= 0.0);
    CHECK(x.at("x") <= 10.0);
  }
}

TEST_CASE("tpe suggestions stay in bounds on log dims") {
  ParameterSpace s;
  s.dims.push_back({"a", 1e-7, 1e-4, Scale::Log, "m", {}});
  s.dims.push_back({"b", -1.0, 1.0, Scale::Linear, "", {}});
  std::mt19937_64 rng(3);
  std::vector<Trial> study;
  for (int i = 0; i < 40; ++i) {
    Trial tr;
    tr.number = i;
    tr.x = tpe_suggest(study, s, rng);
    CHECK(in_bounds(s, tr.x));
    CHECK(tr.x.at("a") > 0.0);
    tr.fom = -std::abs(std::log10(tr.x.at("a")) + 5.5) - tr.x.at("b") * tr.x.at("b");
    tr.state = TrialState::Complete;
    study.push_back(tr);
  }
}

TEST_CASE("tpe concentrates on a clustered good set") {
  // Thirty observations on a grid; the best quarter sits around x = 3.
  std::vector<Trial> study;
  for (int i = 0; i < 30; ++i) {
    Trial tr;
    tr.number = i;
    tr.x["x"] = 10.0 * (i + 0.5) / 30.0;
    tr.fom = -std::pow(tr.x["x"] - 3.0, 2);
    tr.state = TrialState::Complete;
    study.push_back(tr);
  }
  int inside = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(seed);
    const double x = tpe_suggest(study, line_space(), rng).at("x");
    inside += x >= 2.0 && x <= 4.0;
  }
  CHECK(inside > 90);
}

TEST_CASE("median pruning compares against completed trials at the same step") {
  std::vector<Trial> study;
  for (int i = 0; i < 5; ++i) {
    Trial tr;
    tr.number = i;
    tr.state = TrialState::Complete;
    tr.steps = {static_cast<double>(i), 10.0};
    tr.fom = 10.0;
    study.push_back(tr);
  }
  Trial run;
  run.number = 99;
  run.steps = {2.5};
  CHECK_FALSE(median_prune(study, run, 0, 5));
  run.steps = {1.5};
  CHECK(median_prune(study, run, 0, 5));
  CHECK_FALSE(median_prune(study, run, 0, 6));
  CHECK_FALSE(median_prune(study, run, 1, 5));
  study.resize(4);
  CHECK_FALSE(median_prune(study, run, 0, 5));
}

TEST_CASE("constant evaluator completes every trial") {
  const auto study = optimize(line_space(), single_step([](double) { return 1.25; }), metric_f(), budget(20, 5));
  CHECK(study.trials.size() == 20);
  for (const auto& tr : study.trials) CHECK(tr.state == TrialState::Complete);
  CHECK(study.best_trial().fom == 1.25);
}

TEST_CASE("optimize finds the peak of a parabola") {
  const auto f = single_step([](double x) { return -(x - 3.0) * (x - 3.0); });
  OptimizeConfig cfg;
  cfg.seed = 42;
  const auto study = optimize(line_space(), f, metric_f(), cfg);
  CHECK(study.trials.size() == 100);
  CHECK(study.best_trial().fom >= -0.25);

  // Best is the recount maximum over completed trials; best-so-far never drops.
  double best = -INFINITY, running = -INFINITY;
  for (const auto& tr : study.trials) {
    CHECK(in_bounds(line_space(), tr.x));
    if (tr.state != TrialState::Complete) continue;
    CHECK(std::isfinite(tr.fom));
    best = std::max(best, tr.fom);
    const double next = std::max(running, tr.fom);
    CHECK(next >= running);
    running = next;
  }
  CHECK(study.best_trial().fom == best);
  CHECK(study.best_trial().state == TrialState::Complete);

  const auto again = optimize(line_space(), f, metric_f(), cfg);
  REQUIRE(again.trials.size() == study.trials.size());
  for (std::size_t i = 0; i < study.trials.size(); ++i) CHECK(again.trials[i].x == study.trials[i].x);
}

TEST_CASE("plateau half of the space is pruned early") {
  // Staged evaluator: three reports; x > 5 stays flat and low.
  Evaluator staged = [](const Point& x, TrialContext& ctx) {
    const double v = x.at("x");
    for (int step = 0; step < 3; ++step) {
      const double value = v > 5.0 ? 0.0 : (step + 1) * (5.0 - std::abs(v - 2.5));
      if (ctx.report(value)) return Evaluation{{{"f", value}}, false};
    }
    return Evaluation{{{"f", 3 * (5.0 - std::abs(v - 2.5))}}, false};
  };
  const auto study = optimize(line_space(), staged, metric_f(), budget(60, 11));
  std::size_t pruned = 0;
  for (const auto& tr : study.trials) pruned += tr.state == TrialState::Pruned;
  CHECK(pruned >= 1);
  CHECK(study.best_trial().state == TrialState::Complete);
}

TEST_CASE("optimize raises when nothing completes") {
  Evaluator fails = [](const Point&, TrialContext&) { return Evaluation{{}, true}; };
  CHECK_THROWS_AS(optimize(line_space(), fails, metric_f(), budget(5, 1)), AllTrialsFailed);
  Evaluator throws = [](const Point&, TrialContext&) -> Evaluation { throw am::Error("sim crashed"); };
  CHECK_THROWS_AS(optimize(line_space(), throws, metric_f(), budget(5, 1)), AllTrialsFailed);
}

TEST_CASE("study JSON-lines round-trip") {
  const auto f = single_step([](double x) { return -(x - 3.0) * (x - 3.0); });
  auto study = optimize(line_space(), f, metric_f(), budget(15, 4));
  study.trials[3].state = TrialState::Failed;
  study.trials[3].fom = kFailedFom;
  const auto text = study_to_jsonl(study);
  CHECK(std::count(text.begin(), text.end(), '\n') == 15);
  const auto back = study_from_jsonl(text);
  REQUIRE(back.trials.size() == 15);
  CHECK(back.trials[3].state == TrialState::Failed);
  CHECK(std::isinf(back.trials[3].fom));
  CHECK(back.trials[7].x == study.trials[7].x);
  CHECK(back.trials[7].steps == study.trials[7].steps);
  CHECK(study_to_jsonl(back) == text);
}

TEST_CASE("square-law gain of an ideal common-source stage") {
  CHECK(common_source_gain_db(1e-3, 100e3) == doctest::Approx(40.0));
  CHECK(common_source_gain_db(1e-3, 100e3, 100e3) == doctest::Approx(20.0 * std::log10(50.0)));
}

TEST_CASE("operating point matches the square law") {
  const auto ir = am::netlist::parse_spice(kCommonSource);
  ProcessModel pm;
  pm.input_cm = 0.7;
  const auto op = solve_operating_point(ir, pm);
  REQUIRE(op.devices.size() == 1);
  const auto& m = op.devices[0];
  CHECK(m.region == "saturation");
  const double vout = op.node_voltage.at("out");
  const double beta = pm.kp_n * 4.0, lambda = pm.lambda_l / 0.5e-6;
  CHECK(m.id_a == doctest::Approx(0.5 * beta * 0.25 * 0.25 * std::exp(lambda * vout)).epsilon(1e-6));
  CHECK((pm.vdd - vout) / 10e3 == doctest::Approx(m.id_a).epsilon(1e-6));
  CHECK(m.gm == doctest::Approx(2 * m.id_a / m.vov).epsilon(1e-9));
  CHECK(m.ro == doctest::Approx(1.0 / (lambda * m.id_a)).epsilon(1e-9));
  CHECK(op.supply_current == doctest::Approx(m.id_a).epsilon(1e-6));
}

TEST_CASE("common-source gain, bandwidth and power follow the small-signal model") {
  const auto ir = am::netlist::parse_spice(kCommonSource);
  ProcessModel pm;
  pm.input_cm = 0.7;
  const auto metrics = analytic_evaluate(ir, {}, {}, pm);
  const auto op = solve_operating_point(ir, pm);
  const auto& m = op.devices[0];
  CHECK(metrics.at("gain_db") == doctest::Approx(common_source_gain_db(m.gm, m.ro, 10e3)).epsilon(1e-6));
  const double rout = m.ro * 10e3 / (m.ro + 10e3);
  CHECK(metrics.at("gbw_hz") == doctest::Approx(m.gm * rout / (2 * M_PI * rout * pm.c_load)).epsilon(1e-6));
  CHECK(metrics.at("power_w") == doctest::Approx(pm.vdd * m.id_a).epsilon(1e-6));
  CHECK(metrics.at("sat_fraction") == 1.0);
}

TEST_CASE("doubling drain current at fixed overdrive doubles power") {
  ProcessModel pm;
  pm.input_cm = 1.2;
  auto ir = t::amp5t();
  const auto base = analytic_evaluate(ir, {}, {}, pm);
  for (auto& d : ir.devices)
    if (am::netlist::is_mos(d.kind)) d.params["w"] *= 2;
  const auto doubled = analytic_evaluate(ir, {}, {}, pm);
  CHECK(doubled.at("power_w") == doctest::Approx(2 * base.at("power_w")).epsilon(1e-9));

  auto cs = am::netlist::parse_spice(kCommonSource);
  pm.input_cm = 0.7;
  const auto cs_base = analytic_evaluate(cs, {}, {}, pm);
  cs.find("M1")->params["w"] *= 2;
  cs.find("R1")->params["value"] /= 2;
  CHECK(analytic_evaluate(cs, {}, {}, pm).at("power_w") == doctest::Approx(2 * cs_base.at("power_w")).epsilon(1e-9));
}

TEST_CASE("differential gain agrees with a finite-difference linearization") {
  ProcessModel pm;
  pm.input_cm = 1.2;
  const auto ir = t::amp5t();
  const auto metrics = analytic_evaluate(ir, {}, {}, pm);
  CHECK(metrics.at("sat_fraction") == 1.0);

  // Nodal oracle: re-solve the nonlinear DC equations with driven inputs.
  auto driven = [&](double vd) {
    std::string text = t::kAmp5T;
    text.insert(text.find(".model"), "Vp inp 0 DC " + std::to_string(pm.input_cm + vd / 2) + "\nVn inn 0 DC " +
                                         std::to_string(pm.input_cm - vd / 2) + "\n");
    return solve_operating_point(am::netlist::parse_spice(text), pm).node_voltage.at("out");
  };
  const double h = 1e-5;
  const double a_fd = (driven(h) - driven(-h)) / (2 * h);
  CHECK(a_fd > 0.0);
  const double a_model = std::pow(10.0, metrics.at("gain_db") / 20.0);
  CHECK(a_model == doctest::Approx(a_fd).epsilon(0.01));

  const auto op = solve_operating_point(ir, pm);
  const auto& m1 = op.devices[0];
  const auto& m2 = op.devices[1];
  const auto& m4 = op.devices[3];
  // Textbook estimate lands near the exact nodal value.
  const double rough = m1.gm * (m2.ro * m4.ro / (m2.ro + m4.ro));
  CHECK(a_model == doctest::Approx(rough).epsilon(0.1));
}

TEST_CASE("topology templates") {
  CHECK(classify_topology(t::amp5t()) == Topology::DiffPair5T);
  CHECK(classify_topology(am::netlist::parse_spice(kCommonSource)) == Topology::CommonSource);
  CHECK(classify_topology(am::netlist::parse_spice(kCascode)) == Topology::Cascode);
  const auto bjt = am::netlist::parse_spice("Q1 out in gnd npn\nR1 vdd out 1k\n.model npn npn\n.end\n");
  CHECK(classify_topology(bjt) == Topology::Unsupported);
  CHECK_THROWS_AS(analytic_evaluate(bjt, {}, {}), UnsupportedTopology);
  const auto no_out = am::netlist::parse_spice("M1 x in gnd gnd nfet W=1u L=1u\nR1 vdd x 1k\n.model nfet nmos\n.end\n");
  CHECK_THROWS_AS(analytic_evaluate(no_out, {}, {}), UnsupportedTopology);

  ProcessModel pm;
  pm.input_cm = 0.8;
  const auto cascode = am::netlist::parse_spice(kCascode);
  const auto m = analytic_evaluate(cascode, {}, {}, pm);
  CHECK(m.at("sat_fraction") == 1.0);
  // Cascoded output resistance dwarfs the load: gain is close to gm1 * R.
  const double gm1 = solve_operating_point(cascode, pm).devices[0].gm;
  CHECK(m.at("gain_db") == doctest::Approx(20 * std::log10(gm1 * 5e3)).epsilon(0.02));
}

TEST_CASE("input polarity from net names") {
  CHECK(input_polarity("inp") == 1);
  CHECK(input_polarity("in") == 1);
  CHECK(input_polarity("vin") == 1);
  CHECK(input_polarity("inn") == -1);
  CHECK(input_polarity("vinn") == -1);
  CHECK(input_polarity("vim") == -1);
  CHECK(input_polarity("in-") == -1);
}

TEST_CASE("simulator adapter: missing binary") {
  CHECK(find_simulator("surely-not-a-simulator-binary").empty());
  SpiceAdapterConfig cfg;
  cfg.simulator = "surely-not-a-simulator-binary";
  CHECK_THROWS_AS(spice_evaluate(t::amp5t(), {}, {}, cfg), SimulatorNotFound);
}

TEST_CASE("simulator adapter: stub output is parsed") {
  TempDir dir("am_test_spice_stub");
  SpiceAdapterConfig cfg;
  cfg.simulator = write_stub(dir.path,
                             "cp \"$2\" \"$(dirname \"$2\")/seen.cir\"\n"
                             "echo 'Circuit: sizing deck'\n"
                             "echo 'power_w = 2.500000e-04'\n"
                             "echo 'gain_db              =  4.125000e+01 at=  1.000000e+00'\n"
                             "echo 'gbw_hz               =  1.230000e+07'");
  cfg.work_dir = (dir.path / "run").string();
  const auto m = spice_evaluate(t::amp5t(), {}, {}, cfg);
  CHECK(m.at("gain_db") == 41.25);
  CHECK(m.at("gbw_hz") == 1.23e7);
  CHECK(m.at("power_w") == 2.5e-4);
  const auto deck = am::read_file((dir.path / "run" / "seen.cir").string());
  CHECK(deck.find(".temp 25") != std::string::npos);
  CHECK(deck.find("Vsz_inp inp 0 DC 0.9 AC 0.5\n") != std::string::npos);
  CHECK(deck.find("Vsz_inn inn 0 DC 0.9 AC 0.5 180\n") != std::string::npos);
  CHECK(deck.find("meas ac gain_db find vdb(out) at=1") != std::string::npos);
}

TEST_CASE("simulator adapter: missing measure and timeout") {
  TempDir dir("am_test_spice_fail");
  SpiceAdapterConfig cfg;
  cfg.simulator = write_stub(dir.path, "echo 'gain_db = failed'");
  CHECK_THROWS_AS(spice_evaluate(t::amp5t(), {}, {}, cfg), MeasureParseError);
  cfg.simulator = write_stub(dir.path, "sleep 5");
  cfg.timeout_seconds = 0.2;
  const auto start = std::chrono::steady_clock::now();
  CHECK_THROWS_AS(spice_evaluate(t::amp5t(), {}, {}, cfg), SimulationTimeout);
  CHECK(std::chrono::steady_clock::now() - start < std::chrono::seconds(3));
}

TEST_CASE("simulator adapter: RC low-pass corner") {
  const std::string sim = find_simulator("ngspice");
  if (sim.empty()) {
    MESSAGE("ngspice not on PATH; skipped");
    return;
  }
  SpiceAdapterConfig cfg;
  cfg.simulator = sim;
  cfg.c_load = 1e-18;
  cfg.measures = {"f3db"};
  cfg.extra_control = {"meas ac f3db when vdb(out)=-3.0103"};
  const auto ir = am::netlist::parse_spice("R1 in out 1k\nC1 out 0 1n\n.end\n");
  const double expected = 1.0 / (2 * M_PI * 1e3 * 1e-9);
  CHECK(spice_evaluate(ir, {}, {}, cfg).at("f3db") == doctest::Approx(expected).epsilon(0.02));
}

namespace {

// Proposes the narrowed ranges for every dim of the amplifier, then finishes.
std::string scripted_agent(const am::llm::ChatRequest& req) {
  if (req.tag == "agent:plan") return "1. Size the input pair M1/M2\n2. Size the mirror M3/M4\n3. Size tail M5 and Vb\n";
  const std::vector<std::string> script = {
      R"(Action: topology_query {})",
      R"(Action: operating_point_probe {"x": {"M1.W": "2u"}})",
      R"(Action: range_propose {"dim": "M1.W", "lo": "0.42u", "hi": "50u", "scale": "log"})",
      R"(Action: range_propose {"dim": "M1.L", "lo": "0.15u", "hi": "2u", "scale": "log"})",
      R"(Action: range_propose {"dim": "M3.W", "lo": 0.42e-6, "hi": 50e-6, "scale": "log"})",
      R"(Action: range_propose {"dim": "M4.L", "lo": "0.15u", "hi": "2u", "scale": "log"})",
      R"(Action: range_propose {"dim": "M5.W", "lo": "0.42u", "hi": "50u", "scale": "log"})",
      R"(Action: range_propose {"dim": "M5.L", "lo": "0.15u", "hi": "2u", "scale": "log"})",
      R"(Action: range_propose {"dim": "Vb.dc", "lo": 0.5, "hi": 1.2, "scale": "linear"})",
  };
  const auto step = std::stoul(req.tag.substr(req.tag.rfind(':') + 1));
  return "Thought: step " + std::to_string(step) + "\n" + script.at(step);
}

}  // namespace

TEST_CASE("agent narrows the amplifier space and keeps one observation") {
  am::llm::ScriptedGateway gw(scripted_agent);
  const auto res = plan_search_space(t::amp5t(), "five-transistor OTA", gw);
  CHECK(res.steps == 9);
  CHECK(res.fallback_dims.empty());
  for (const auto* name : {"M1.W", "M3.W", "M5.W"}) {
    const auto* d = res.space.find(name);
    REQUIRE(d);
    CHECK(d->lo == doctest::Approx(0.42e-6));
    CHECK(d->hi == doctest::Approx(50e-6));
    CHECK(d->scale == Scale::Log);
  }
  for (const auto* name : {"M1.L", "M3.L", "M5.L"}) {
    CHECK(res.space.find(name)->lo == doctest::Approx(0.15e-6));
    CHECK(res.space.find(name)->hi == doctest::Approx(2e-6));
  }
  CHECK(res.space.find("M3.L")->ties == std::vector<std::string>{"M4.L"});
  CHECK(res.space.find("Vb.dc")->hi == 1.2);
  CHECK(res.space.provenance.rfind("agent:", 0) == 0);

  std::size_t results = 0, plans = 0, todos = 0;
  for (const auto& e : res.transcript.entries) {
    results += e.kind == am::llm::EntryKind::ToolResult;
    plans += e.kind == am::llm::EntryKind::Plan;
    todos += e.kind == am::llm::EntryKind::Todo;
  }
  CHECK(results == 1);
  CHECK(plans == 1);
  CHECK(todos == 1);
  CHECK(res.transcript.todo()->text.find("Pending ranges: none") != std::string::npos);
  CHECK(res.peak_tokens >= res.transcript.token_estimate());
}

TEST_CASE("agent without proposals falls back to the table") {
  am::llm::ScriptedGateway gw([](const am::llm::ChatRequest& req) -> std::string {
    if (req.tag == "agent:plan") return "1. nothing to do";
    return "Thought: done\nAction: finish {}";
  });
  const auto ir = t::amp5t();
  const auto res = plan_search_space(ir, "", gw);
  const auto fb = fallback_space(ir);
  CHECK(res.fallback_dims.size() == fb.dims.size());
  for (std::size_t i = 0; i < fb.dims.size(); ++i) {
    CHECK(res.space.dims[i].lo == fb.dims[i].lo);
    CHECK(res.space.dims[i].hi == fb.dims[i].hi);
  }
  std::size_t results = 0;
  for (const auto& e : res.transcript.entries) results += e.kind == am::llm::EntryKind::ToolResult;
  CHECK(results == 1);
}

TEST_CASE("agent budget exhaustion returns the filled space") {
  am::llm::ScriptedGateway gw([](const am::llm::ChatRequest& req) -> std::string {
    if (req.tag == "agent:plan") return "1. plan";
    if (req.tag == "agent:step:0") return "Thought: start\nAction: range_propose {\"dim\": \"M1.W\", \"lo\": \"1u\", \"hi\": \"9u\"}";
    if (req.tag == "agent:step:1") return "Action: range_propose {\"dim\": \"M9.W\", \"lo\": 1, \"hi\": 2}";
    return "I am not sure what to do.";
  });
  AgentConfig cfg;
  cfg.max_steps = 5;
  try {
    plan_search_space(t::amp5t(), "", gw, cfg);
    FAIL("expected AgentBudgetExhausted");
  } catch (const AgentBudgetExhausted& e) {
    const auto& r = e.result();
    CHECK(r.steps == 5);
    CHECK(r.space.find("M1.W")->hi == doctest::Approx(9e-6));
    CHECK(r.fallback_dims.size() == 6);
    CHECK(r.space.find("M5.W")->hi == doctest::Approx(100e-6));
  }
  CHECK(gw.calls() == 6);
}

TEST_CASE("agent tools report topology and operating point") {
  const auto ir = t::amp5t();
  const auto fb = fallback_space(ir);
  const auto topo = tool_topology_query(ir, fb);
  CHECK(topo.find("topology: diff_pair_5t") != std::string::npos);
  CHECK(topo.find("(M1,M2)") != std::string::npos);
  CHECK(topo.find("(M3,M4)") != std::string::npos);
  ProcessModel pm;
  const auto probe = tool_operating_point_probe(ir, fb, {{"M1.W", 2e-6}}, pm);
  CHECK(probe.find("M1 ") != std::string::npos);
  CHECK(probe.find("supply_current=") != std::string::npos);
}
