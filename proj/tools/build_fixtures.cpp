// Regenerates the committed replay fixtures from authored responses.
// Usage: build_fixtures <repo-root>
//
// Case fixtures are recorded by running the real pipeline against a
// scripted gateway, so every stored request hash is exactly what a replay
// run will ask for.

#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <regex>

#include "amflow/io.hpp"
#include "amflow/llm.hpp"
#include "amflow/pipeline.hpp"
#include "json.hpp"
#include "schematic_art.hpp"

namespace fs = std::filesystem;
using namespace am;

namespace {

void build_compress(const fs::path& root) {
  const fs::path dir = root / "fixtures" / "llm";
  const auto doc = nlohmann::json::parse(read_file((dir / "compress_traces.json").string()));
  const std::string summary = doc["summary"].get<std::string>();
  llm::ScriptedGateway script([&](const llm::ChatRequest&) { return summary; });
  fs::remove_all(dir / "replay");
  llm::RecordingGateway rec(script, (dir / "replay").string());
  llm::compress_context(doc["traces"].get<std::vector<std::string>>(), rec);
}

constexpr const char* kMiclResponse = R"(Step 1. Components: one NMOS transistor M1, one load resistor R1, a ground symbol.
Step 2. R1 top terminal touches the vdd rail, R1 bottom terminal touches the wire that also reaches the drain of M1 and the out label. The gate of M1 is driven from the in label. The source of M1 goes to the ground rail.
Step 3. Merging equipotential nodes: the R1/M1 junction and the out label are one node, out. The gate wire is in. The bottom rail is gnd.
```spice
R1 vdd out 10k
M1 out in gnd gnd nfet W=2u L=0.5u
.model nfet nmos
.end
```)";

void build_micl(const fs::path& root) {
  const fs::path dir = root / "fixtures" / "micl";
  const art::Sheet sheet = art::common_source_sheet();
  vision::write_png((dir / "exemplar.png").string(), sheet.image);
  const nlohmann::json ex{{"images", {"exemplar.png"}},
                          {"prompt", "Here is a worked example. Extract the netlist of this schematic."},
                          {"response", kMiclResponse}};
  write_file((dir / "exemplar.json").string(), ex.dump(2) + "\n");
}

// ---- benchmark cases ----

// How the three branch replies of one attempt relate to the truth.
enum class Scenario {
  Clean,     // all branches right
  Outvoted,  // one branch wrong, the majority fixes it
  Split,     // all branches wrong on one device, only reconciliation fixes it
  Disagree,  // as Split, and reconciliation keeps the wrong draft
};

enum class Variant { Full, NoCot, NoMicl };

struct CaseDef {
  std::string id;
  art::Sheet sheet;
  std::string truth;  // golden netlist text
  std::string spec;
  std::string summary;  // compressed context reply
  std::string components, connections, merging;  // stepwise reasoning text
  // Replaces one card line; driven by (branch index, scenario).
  std::function<std::string(const std::string& truth, int branch, Scenario s)> corrupt;
  std::function<Scenario(Variant, std::size_t attempt)> scenario;
  std::function<bool(std::size_t attempt)> bad_sizing;
};

std::string replace_line(const std::string& text, const std::string& from, const std::string& to) {
  const auto at = text.find(from);
  if (at == std::string::npos) throw std::runtime_error("fixture text lacks '" + from + "'");
  return text.substr(0, at) + to + text.substr(at + from.size());
}

std::string fence(const std::string& netlist) { return "```spice\n" + netlist + "```\n"; }

const std::string kAmp5T =
    "M1 n1 inp tail gnd nfet W=2u L=0.5u\n"
    "M2 out inn tail gnd nfet W=2u L=0.5u\n"
    "M3 n1 n1 vdd vdd pfet W=4u L=0.5u\n"
    "M4 out n1 vdd vdd pfet W=4u L=0.5u\n"
    "M5 tail vb gnd gnd nfet W=8u L=1u\n"
    "Vb vb 0 DC 0.8\n"
    ".model nfet nmos\n"
    ".model pfet pmos\n"
    ".end\n";

const std::string kCommonSource =
    "R1 vdd out 10k\n"
    "M1 out in gnd gnd nfet W=2u L=0.5u\n"
    ".model nfet nmos\n"
    ".end\n";

CaseDef amp5t_case() {
  CaseDef c{"amp5t", art::amp5t_sheet(), kAmp5T,
            R"({"targets": [
  {"metric": "gain_db", "dir": ">=", "threshold": 40},
  {"metric": "gbw_hz", "dir": ">=", "threshold": 1e7},
  {"metric": "power_w", "dir": "<=", "threshold": 1e-4}
]}
)",
            "Five-transistor OTA. M1/M2 form the NMOS input pair on inp/inn, M3/M4 a PMOS mirror load with M3 "
            "diode-connected on n1, M5 the tail source biased by Vb on vb. Output is taken at out.",
            "Step 1. Components: five MOSFETs M1 to M5, one voltage source Vb, a ground symbol.",
            "Step 2. M3 and M4 hang from the vdd rail; their gates join the diode wire from the M3 drain. M1 drain "
            "meets M3 drain, M2 drain meets M4 drain and the out label. The M1 and M2 sources join at the tail wire "
            "that reaches the M5 drain. Vb drives the M5 gate.",
            "Step 3. Merging: the mirror gate wire and the M1/M3 junction are one node n1; the pair source wire is "
            "tail; the bias wire is vb; the bottom rail is gnd.",
            {}, {}, {}};
  c.corrupt = [](const std::string& t, int branch, Scenario s) {
    if (s == Scenario::Clean) return t;
    if (s == Scenario::Outvoted)
      return branch == 0 ? replace_line(t, "M4 out n1 vdd vdd pfet", "M4 out n1 vdd vdd nfet") : t;
    static const char* gate[] = {"inp", "out", "tail"};
    return replace_line(t, "M2 out inn tail", std::string("M2 out ") + gate[branch] + " tail");
  };
  c.scenario = [](Variant v, std::size_t a) {
    switch (v) {
      case Variant::Full: {
        static const Scenario cycle[] = {Scenario::Clean, Scenario::Outvoted, Scenario::Split, Scenario::Clean,
                                         Scenario::Disagree};
        return cycle[a % 5];
      }
      case Variant::NoCot: {
        static const Scenario cycle[] = {Scenario::Clean, Scenario::Disagree, Scenario::Split, Scenario::Outvoted,
                                         Scenario::Disagree};
        return cycle[a % 5];
      }
      case Variant::NoMicl: return a % 3 == 0 ? Scenario::Disagree : Scenario::Clean;
    }
    return Scenario::Clean;
  };
  c.bad_sizing = [](std::size_t a) { return a == 8; };
  return c;
}

CaseDef cs_case() {
  CaseDef c{"cs", art::cs_sheet(), kCommonSource,
            R"({"targets": [
  {"metric": "gain_db", "dir": ">=", "threshold": 12},
  {"metric": "power_w", "dir": "<=", "threshold": 5e-4}
]}
)",
            "Common-source stage: NMOS M1 with gate on in, resistive load R1 from vdd to out.",
            "Step 1. Components: one MOSFET M1, one resistor R1, a ground symbol.",
            "Step 2. R1 hangs from the vdd rail; its lower terminal runs left to the M1 drain and right to the out "
            "label. The in label drives the M1 gate; the M1 source reaches the bottom rail.",
            "Step 3. Merging: the R1/M1 junction and out are one node; the gate wire is in; the bottom rail is gnd.",
            {}, {}, {}};
  c.corrupt = [](const std::string& t, int branch, Scenario s) {
    if (s == Scenario::Clean) return t;
    if (s == Scenario::Outvoted)
      return branch == 0 ? replace_line(t, "M1 out in gnd gnd nfet", "M1 out in gnd gnd pfet") : t;
    static const char* load[] = {"in", "gnd", "vdd"};
    return replace_line(t, "R1 vdd out", std::string("R1 vdd ") + load[branch]);
  };
  c.scenario = [](Variant v, std::size_t a) {
    const std::size_t passing = v == Variant::Full ? 7 : v == Variant::NoCot ? 4 : 6;
    if (a >= passing) return Scenario::Disagree;
    return a % 2 ? Scenario::Outvoted : Scenario::Clean;
  };
  c.bad_sizing = [](std::size_t) { return false; };
  return c;
}

// Scripted replies keyed by request tag. The tag prefix names the attempt.
struct Script {
  const CaseDef* def = nullptr;
  Variant variant = Variant::Full;
  std::optional<Scenario> fixed;  // overrides the per-attempt scenario

  std::string operator()(const llm::ChatRequest& req) const;
};

std::optional<std::size_t> attempt_of(const std::string& prefix) {
  static const std::regex re("a([0-9]+):");
  std::smatch m;
  if (std::regex_match(prefix, m, re)) return std::stoul(m[1].str());
  return std::nullopt;
}

std::string Script::operator()(const llm::ChatRequest& req) const {
  static const std::vector<std::string> stems{"branch:", "fusion", "compress", "agent:"};
  std::string prefix, rest;
  for (const auto& stem : stems)
    if (const auto at = req.tag.find(stem); at != std::string::npos) {
      prefix = req.tag.substr(0, at);
      rest = req.tag.substr(at);
      break;
    }
  if (rest.empty()) throw std::runtime_error("unexpected request tag " + req.tag);
  const auto attempt = attempt_of(prefix);
  const Scenario scene = fixed ? *fixed : attempt ? def->scenario(variant, *attempt) : Scenario::Clean;
  const bool sabotage = variant == Variant::Full && attempt && def->bad_sizing(*attempt);
  const bool cot = variant != Variant::NoCot;

  if (rest.rfind("branch:", 0) == 0) {
    const std::string name = rest.substr(7);
    const int idx = name == "raw" ? 0 : name == "annotated" ? 1 : 2;
    const std::string netlist = def->corrupt(def->truth, idx, scene);
    if (!cot) return fence(netlist);
    // Without the worked example the reply skips the node-merging step.
    if (variant == Variant::NoMicl) return def->components + "\n" + def->connections + "\n" + fence(netlist);
    return def->components + "\n" + def->connections + "\n" + def->merging + "\n" + fence(netlist);
  }
  if (rest == "fusion") {
    if (scene == Scenario::Disagree) {
      const std::string& body = req.messages.back().text;
      const auto draft = reasoning::extract_spice_block(body.substr(body.find("### Consensus draft")));
      return "No branch is clearly better; keeping the consensus draft.\n" + fence(draft.value_or(""));
    }
    return "Cross-checking each branch against the node map resolves the conflicting device.\n" + fence(def->truth);
  }
  if (rest == "compress") return def->summary;
  if (rest == "agent:plan")
    return "1. Query the topology to confirm the device roles.\n"
           "2. Probe the operating point at the default sizing.\n"
           "3. Propose a range for every sizing parameter.\n"
           "4. Finish.\n";

  const std::size_t step = std::stoul(rest.substr(rest.rfind(':') + 1));
  const auto space = sizing::fallback_space(netlist::parse_spice(def->truth));
  if (step == 0) return "Thought: Start from the structure.\nAction: topology_query {}";
  if (step == 1) {
    const auto& d = space.dims.front();
    const nlohmann::json x{{"x", {{d.name, std::sqrt(d.lo * d.hi)}}}};
    return "Thought: Check bias conditions before narrowing ranges.\nAction: operating_point_probe " + x.dump();
  }
  const std::size_t k = step - 2;
  if (k >= space.dims.size()) return "Thought: Every range is set.\nAction: finish {}";
  const auto& d = space.dims[k];
  double lo, hi;
  if (d.scale == sizing::Scale::Log) {
    lo = d.lo * std::pow(d.hi / d.lo, 0.15);
    hi = d.lo * std::pow(d.hi / d.lo, 0.75);
  } else {
    lo = d.lo + 0.2 * (d.hi - d.lo);
    hi = d.lo + 0.6 * (d.hi - d.lo);
  }
  // A bias range that forces a large tail current.
  if (sabotage && d.name == "Vb.dc") {
    lo = d.lo + 0.8 * (d.hi - d.lo);
    hi = d.hi;
  }
  const nlohmann::json args{{"dim", d.name},
                            {"lo", lo},
                            {"hi", hi},
                            {"scale", std::string(sizing::to_string(d.scale))}};
  return "Thought: Narrow " + d.name + " around a workable region.\nAction: range_propose " + args.dump();
}

// Identical requests must get identical replies, or replay would depend on
// recording order.
class ConflictGuard : public llm::Gateway {
 public:
  explicit ConflictGuard(llm::Gateway& inner) : inner_(inner) {}
  std::string complete(const llm::ChatRequest& req) override {
    const std::string reply = inner_.complete(req);
    const auto [it, fresh] = seen_.emplace(llm::request_hash(req), reply);
    if (!fresh && it->second != reply) throw std::runtime_error("conflicting replies for tag " + req.tag);
    return reply;
  }

 private:
  llm::Gateway& inner_;
  std::map<std::string, std::string> seen_;
};

constexpr std::size_t kAttempts = 15;

const char* outcome(const evaluation::AttemptOutcome& o) {
  if (!o.error_stage) return "ok";
  return o.error.c_str();
}

void build_case(const fs::path& root, const CaseDef& def) {
  const fs::path dir = root / "fixtures" / "cases" / def.id;
  fs::remove_all(dir);
  fs::create_directories(dir / "replay");
  vision::write_png((dir / "schematic.png").string(), def.sheet.image);
  write_file((dir / "detections.json").string(), vision::to_json(def.sheet.det) + "\n");
  write_file((dir / "golden.sp").string(), def.truth);
  write_file((dir / "spec.json").string(), def.spec);

  Script script{&def, Variant::Full, std::nullopt};
  llm::ScriptedGateway scripted([&](const llm::ChatRequest& r) { return script(r); });
  ConflictGuard guard(scripted);
  llm::RecordingGateway rec(guard, (dir / "replay").string());

  const fs::path scratch = fs::temp_directory_path() / "am_build_fixtures" / def.id;
  fs::remove_all(scratch);
  pipeline::PipelineConfig cfg;
  cfg.fixtures = (dir / "replay").string();
  cfg.micl_dir = (root / "fixtures" / "micl").string();
  cfg.spec = (dir / "spec.json").string();
  cfg.out_dir = (scratch / "golden").string();
  {
    pipeline::Run run(cfg, rec);
    pipeline::run_full(run, {(dir / "schematic.png").string(), (dir / "detections.json").string(),
                             (dir / "golden.sp").string()});
    std::cout << def.id << " golden: ok\n";
  }

  const evaluation::CaseSpec cs{def.id, dir.string()};
  cfg.out_dir = (scratch / "full").string();
  for (std::size_t a = 0; a < kAttempts; ++a)
    std::cout << def.id << " a" << a << ": " << outcome(pipeline::run_attempt(cfg, cs, a, {}, &rec)) << "\n";

  const evaluation::SuccessCriteria netlist_only{true, false, false};
  for (const auto v : {Variant::NoCot, Variant::NoMicl}) {
    script.variant = v;
    auto vc = cfg;
    (v == Variant::NoCot ? vc.cot : vc.micl) = false;
    vc.out_dir = (scratch / (v == Variant::NoCot ? "no_cot" : "no_micl")).string();
    for (std::size_t a = 0; a < kAttempts; ++a) pipeline::run_attempt(vc, cs, a, netlist_only, &rec);
  }
}

// Every branch wrong on M2; only the reconciliation pass recovers it.
void build_netlist_split(const fs::path& root, const CaseDef& def) {
  const fs::path dir = root / "fixtures" / "netlist_split";
  fs::remove_all(dir);
  fs::create_directories(dir / "replay");
  write_file((dir / "golden.sp").string(), def.truth);
  Script script{&def, Variant::Full, Scenario::Split};
  llm::ScriptedGateway scripted([&](const llm::ChatRequest& r) { return script(r); });
  llm::RecordingGateway rec(scripted, (dir / "replay").string());

  pipeline::PipelineConfig cfg;
  cfg.micl_dir = (root / "fixtures" / "micl").string();
  cfg.out_dir = (fs::temp_directory_path() / "am_build_fixtures" / "netlist_split").string();
  pipeline::Run run(cfg, rec);
  const fs::path cdir = root / "fixtures" / "cases" / def.id;
  const auto ex = pipeline::run_extract(run, (cdir / "schematic.png").string(), (cdir / "detections.json").string());
  pipeline::run_netlist(run, (cdir / "schematic.png").string(), ex.overlay, ex.node_map, (dir / "golden.sp").string());
  std::cout << "netlist_split: ok\n";
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: build_fixtures <repo-root>\n";
    return 2;
  }
  try {
    const fs::path root = argv[1];
    build_compress(root);
    build_micl(root);
    const auto amp = amp5t_case();
    build_case(root, amp);
    build_case(root, cs_case());
    build_netlist_split(root, amp);
  } catch (const std::exception& e) {
    std::cerr << "build_fixtures: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
