#pragma once

// Three-branch netlist extraction and consensus fusion.

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "amflow/error.hpp"
#include "amflow/llm.hpp"
#include "amflow/netlist.hpp"

namespace am::reasoning {

enum class BranchId { Raw, Annotated, Dual };
std::string_view to_string(BranchId id);

// A worked example prepended to every branch conversation.
struct MiclExemplar {
  std::vector<std::string> images;
  std::string prompt;
  std::string response;
};

// Reads <dir>/exemplar.json {images:[relative paths], prompt, response}.
MiclExemplar load_exemplar(const std::string& dir);

struct ReasoningConfig {
  bool cot = true;
  bool micl = true;
  bool intent = true;
  std::string model = "gpt-4o";
  double extract_temperature = 0.2;
  double fusion_temperature = 0.0;
  // Prefixed to every request tag; distinguishes benchmark attempts.
  std::string tag_prefix;
  // Preference when branches disagree without a majority.
  std::array<BranchId, 3> tie_break{BranchId::Annotated, BranchId::Dual, BranchId::Raw};
  std::optional<MiclExemplar> exemplar;
};

struct AnnotatedArtifacts {
  std::string overlay_image;  // path
  std::string node_map;       // JSON text
};

struct BranchInput {
  BranchId id = BranchId::Raw;
  std::vector<std::string> images;
  std::string cot_prompt;
  std::optional<MiclExemplar> micl_exemplar;
};

class MissingArtifact : public Error {
 public:
  using Error::Error;
};

class NoParsableHypothesis : public Error {
 public:
  using Error::Error;
};

// Raw, annotated and dual inputs, in that order.
std::array<BranchInput, 3> build_branch_inputs(const std::string& raw_image,
                                               const AnnotatedArtifacts& annotated,
                                               const ReasoningConfig& config);

// The exact request a branch sends; exposed for fixture authoring.
llm::ChatRequest branch_request(const BranchInput& b, const ReasoningConfig& config);

struct BranchHypothesis {
  BranchId id = BranchId::Raw;
  std::optional<netlist::NetlistIR> netlist;
  std::string trace;
  std::string parse_error;  // set when netlist is absent
};

// Body of the first ```spice fence (any fence when none is tagged).
std::optional<std::string> extract_spice_block(const std::string& text);

BranchHypothesis run_branch(const BranchInput& b, llm::Gateway& gw, const ReasoningConfig& config);

// Runs the three branches concurrently.
std::array<BranchHypothesis, 3> run_branches(const std::array<BranchInput, 3>& inputs, llm::Gateway& gw,
                                             const ReasoningConfig& config);

// Supply and ground present, no floating non-rail net, structural
// invariants intact.
bool is_valid_candidate(const netlist::NetlistIR& ir);

enum class FusionStage { Consensus, Llm, Fallback };
std::string_view to_string(FusionStage stage);

struct FusionResult {
  netlist::NetlistIR netlist;
  FusionStage stage = FusionStage::Consensus;
  bool valid = false;
  std::vector<std::string> notes;
};

// Deterministic voting draft (kinds and port nets by majority with the
// configured tie-break).
netlist::NetlistIR consensus(const std::vector<BranchHypothesis>& hyps, const ReasoningConfig& config);

// The request the optional LLM stage sends; exposed for fixture authoring.
llm::ChatRequest fusion_request(const std::vector<BranchHypothesis>& hyps,
                                const netlist::NetlistIR& draft, const ReasoningConfig& config);

// Consensus, then (if config.intent) an LLM reconciliation pass that is
// kept only when its netlist passes is_valid_candidate.
FusionResult fuse(const std::vector<BranchHypothesis>& hyps, llm::Gateway* gw,
                  const ReasoningConfig& config);

// 1 - prod(1 - p_b).
double joint_pass_lower_bound(const std::vector<double>& p);

}  // namespace am::reasoning
