#pragma once

// Stage orchestration: configuration, gateways, artifacts and manifests.
// Stages run sequentially; each writes its files under the output
// directory and appends one record to the manifest.

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "amflow/error.hpp"
#include "amflow/evaluation.hpp"
#include "amflow/llm.hpp"
#include "amflow/netlist.hpp"
#include "amflow/placement.hpp"
#include "amflow/reasoning.hpp"
#include "amflow/routing.hpp"
#include "amflow/sizing.hpp"
#include "amflow/vision.hpp"

namespace am::pipeline {

enum class Mode { Live, Replay, Record };
std::string_view to_string(Mode m);

struct PipelineConfig {
  Mode mode = Mode::Replay;
  bool cot = true;
  bool micl = true;
  bool intent = true;
  std::uint64_t seed = 42;
  std::string model = "gpt-4o";
  std::string tag_prefix;

  std::size_t budget = 60;       // sizing trials
  std::size_t agent_steps = 24;
  placement::Schedule schedule;
  std::size_t restarts = 4;
  double block_spacing = 2.0;    // um; keeps pin access cells off neighbours
  routing::RoutingRules rules;
  routing::RouterWeights router;
  std::size_t route_candidates = 4;

  std::string fixtures;   // replay/record directory
  std::string micl_dir;   // exemplar directory, needed when micl is on
  std::string out_dir = "out";
  std::string simulator;  // empty selects the analytic evaluator
  std::string spec;       // sizing targets (JSON file)
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Sets one key; unknown keys and unparsable values throw ConfigError.
void apply_setting(PipelineConfig& cfg, const std::string& key, const std::string& value);

// key = value lines; '#' starts a comment.
PipelineConfig parse_config(const std::string& text, PipelineConfig base = {});
std::string to_config_text(const PipelineConfig& cfg);
// Behavioural keys only; paths are omitted so manifests do not depend on
// where a run was started.
std::map<std::string, std::string> manifest_config(const PipelineConfig& cfg);

// Replay and record need a fixture directory.
void validate(const PipelineConfig& cfg);

std::unique_ptr<llm::Gateway> make_gateway(const PipelineConfig& cfg);

// Error raised by a stage; what() starts with "[<stage>] ".
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& reason)
      : Error("[" + stage + "] " + reason), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

struct StageRecord {
  std::string name;
  std::string status = "ok";                     // ok | failed
  std::string error;
  std::map<std::string, std::string> artifacts;  // file name -> sha256
  std::map<std::string, std::string> details;    // deterministic scalars only
};

// No timestamps or absolute paths, so identical runs give identical bytes.
struct Manifest {
  std::map<std::string, std::string> config;
  std::vector<StageRecord> stages;

  bool all_ok() const;
  const StageRecord* find(const std::string& stage) const;
};

std::string to_json(const Manifest& m);
Manifest manifest_from_json(const std::string& text);

// Shared state for one invocation. The gateway is created on first use.
class Run {
 public:
  explicit Run(PipelineConfig cfg);
  // Injected gateway (fixture authoring, tests); not owned.
  Run(PipelineConfig cfg, llm::Gateway& gateway);

  const PipelineConfig& config() const { return cfg_; }
  llm::Gateway& gateway();
  const Manifest& manifest() const { return manifest_; }

  StageRecord& begin(const std::string& stage);
  StageRecord& stage() { return manifest_.stages.back(); }  // after begin()
  // Writes out_dir/name and records its digest in the current stage.
  std::string write_artifact(const std::string& name, const std::string& bytes);
  // Records a file written by other code.
  void record_artifact(const std::string& name);
  void fail(const std::string& reason);
  void save_manifest() const;

 private:
  PipelineConfig cfg_;
  std::unique_ptr<llm::Gateway> owned_;
  llm::Gateway* gw_ = nullptr;
  Manifest manifest_;
};

struct ExtractOutput {
  std::string overlay;   // paths under out_dir
  std::string regions;
  std::string node_map;
  std::size_t region_count = 0;
};

struct NetlistOutput {
  netlist::NetlistIR netlist;
  std::vector<std::string> traces;
  reasoning::FusionStage stage = reasoning::FusionStage::Consensus;
  std::optional<bool> exact_match;  // when a golden netlist was given
};

struct SizingOutput {
  netlist::NetlistIR sized;
  sizing::Metrics metrics;
  bool spec_met = false;
};

struct PlacementOutput {
  placement::Instance instance;
  placement::Placement placement;
  placement::CostBreakdown cost;
};

struct RoutingOutput {
  routing::RoutingReport report;
  std::vector<routing::Violation> violations;
  bool symmetric = false;  // every pair mirrored about a shared vertical axis
};

// Each stage throws StageError after recording the failure in the manifest.
ExtractOutput run_extract(Run& run, const std::string& image, const std::string& detections);
NetlistOutput run_netlist(Run& run, const std::string& image, const std::string& overlay,
                          const std::string& node_map_file, const std::string& golden = "");
SizingOutput run_size(Run& run, const netlist::NetlistIR& ir, const std::vector<std::string>& traces = {});
PlacementOutput run_place(Run& run, const netlist::NetlistIR& sized);
RoutingOutput run_route(Run& run, const netlist::NetlistIR& sized, const placement::Instance& inst,
                        const placement::Placement& p);

struct FullInputs {
  std::string image;
  std::string detections;
  std::string golden;  // optional
};

// extract -> netlist -> size -> place -> route; stops at the first failure.
void run_full(Run& run, const FullInputs& in);

// Routing net pairs for matched devices: differing nets on corresponding
// ports, mirrored about the pair's centre line.
std::vector<routing::NetPair> net_pairs(const netlist::NetlistIR& ir, const placement::Instance& inst,
                                        const placement::Placement& p);

// Pairs share a row and sit at equal distance from one axis.
bool pairs_axis_aligned(const placement::Instance& inst, const placement::Placement& p, double tol = 1e-6);

// Benchmark attempts: attempt k replays case/replay with tag prefix "a<k>:"
// and writes under out_dir/<case>/a<k>. A non-null gateway replaces replay
// (fixture recording).
evaluation::AttemptOutcome run_attempt(const PipelineConfig& base, const evaluation::CaseSpec& c,
                                       std::size_t attempt, const evaluation::SuccessCriteria& criteria,
                                       llm::Gateway* gateway = nullptr);
std::string attempt_prefix(std::size_t attempt);

}  // namespace am::pipeline
