#include <filesystem>
#include <future>

#include "amflow/io.hpp"
#include "amflow/reasoning.hpp"
#include "json.hpp"
#include "../util/strings.hpp"

namespace am::reasoning {

std::string_view to_string(BranchId id) {
  switch (id) {
    case BranchId::Raw: return "raw";
    case BranchId::Annotated: return "annotated";
    case BranchId::Dual: return "dual";
  }
  return "raw";
}

MiclExemplar load_exemplar(const std::string& dir) {
  namespace fs = std::filesystem;
  const fs::path file = fs::path(dir) / "exemplar.json";
  if (!fs::exists(file)) throw MissingArtifact("MICL exemplar not found: " + file.string());
  const auto j = nlohmann::json::parse(read_file(file.string()));
  MiclExemplar ex;
  for (const auto& img : j.at("images")) {
    const fs::path p = fs::path(dir) / img.get<std::string>();
    if (!fs::exists(p)) throw MissingArtifact("MICL exemplar image not found: " + p.string());
    ex.images.push_back(p.string());
  }
  ex.prompt = j.at("prompt").get<std::string>();
  ex.response = j.at("response").get<std::string>();
  return ex;
}

namespace {

std::string branch_prompt(BranchId id, const AnnotatedArtifacts& annotated, bool cot) {
  std::string text(llm::prompt_template("branch_" + std::string(to_string(id))));
  if (id != BranchId::Raw) text += "\nNode map:\n" + annotated.node_map + "\n";
  if (cot) text += "\n" + std::string(llm::prompt_template("extract_steps"));
  text += "\nReturn the netlist in a ```spice block.\n";
  return text;
}

}  // namespace

std::array<BranchInput, 3> build_branch_inputs(const std::string& raw_image,
                                               const AnnotatedArtifacts& annotated,
                                               const ReasoningConfig& config) {
  if (!file_exists(raw_image)) throw MissingArtifact("raw schematic image not found: " + raw_image);
  if (!file_exists(annotated.overlay_image)) {
    throw MissingArtifact("annotated overlay not found: " + annotated.overlay_image);
  }
  if (config.micl && !config.exemplar) throw MissingArtifact("MICL enabled but no exemplar loaded");

  std::array<BranchInput, 3> out;
  const std::array<BranchId, 3> ids{BranchId::Raw, BranchId::Annotated, BranchId::Dual};
  for (std::size_t i = 0; i < 3; ++i) {
    BranchInput& b = out[i];
    b.id = ids[i];
    switch (b.id) {
      case BranchId::Raw: b.images = {raw_image}; break;
      case BranchId::Annotated: b.images = {annotated.overlay_image}; break;
      case BranchId::Dual: b.images = {raw_image, annotated.overlay_image}; break;
    }
    b.cot_prompt = branch_prompt(b.id, annotated, config.cot);
    if (config.micl) b.micl_exemplar = config.exemplar;
  }
  return out;
}

llm::ChatRequest branch_request(const BranchInput& b, const ReasoningConfig& config) {
  llm::ChatRequest req;
  req.model = config.model;
  req.temperature = config.extract_temperature;
  req.tag = config.tag_prefix + "branch:" + std::string(to_string(b.id));
  req.messages.push_back({llm::Role::System, std::string(llm::prompt_template("extract_system")), {}});
  if (b.micl_exemplar) {
    req.messages.push_back({llm::Role::User, b.micl_exemplar->prompt, b.micl_exemplar->images});
    req.messages.push_back({llm::Role::Assistant, b.micl_exemplar->response, {}});
  }
  req.messages.push_back({llm::Role::User, b.cot_prompt, b.images});
  return req;
}

std::optional<std::string> extract_spice_block(const std::string& text) {
  std::optional<std::string> first_any;
  std::size_t pos = 0;
  while ((pos = text.find("```", pos)) != std::string::npos) {
    const std::size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) break;
    const std::string lang = util::lower(util::trim(text.substr(pos + 3, eol - pos - 3)));
    const std::size_t close = text.find("```", eol + 1);
    if (close == std::string::npos) break;
    std::string body = text.substr(eol + 1, close - eol - 1);
    if (lang == "spice" || lang == "sp" || lang == "cir" || lang == "netlist") return body;
    if (!first_any) first_any = std::move(body);
    pos = close + 3;
  }
  return first_any;
}

BranchHypothesis run_branch(const BranchInput& b, llm::Gateway& gw, const ReasoningConfig& config) {
  BranchHypothesis h;
  h.id = b.id;
  h.trace = gw.complete(branch_request(b, config));
  const auto block = extract_spice_block(h.trace);
  if (!block) {
    h.parse_error = "no fenced netlist block in response";
    return h;
  }
  try {
    auto ir = netlist::parse_spice(*block);
    netlist::validate(ir);
    h.netlist = std::move(ir);
  } catch (const Error& e) {
    h.parse_error = e.what();
  }
  return h;
}

std::array<BranchHypothesis, 3> run_branches(const std::array<BranchInput, 3>& inputs, llm::Gateway& gw,
                                             const ReasoningConfig& config) {
  std::array<std::future<BranchHypothesis>, 3> pending;
  for (std::size_t i = 0; i < 3; ++i) {
    pending[i] = std::async(std::launch::async, [&, i] { return run_branch(inputs[i], gw, config); });
  }
  std::array<BranchHypothesis, 3> out;
  for (std::size_t i = 0; i < 3; ++i) out[i] = pending[i].get();
  return out;
}

double joint_pass_lower_bound(const std::vector<double>& p) {
  double miss = 1.0;
  for (double v : p) {
    if (!(v >= 0.0 && v <= 1.0)) throw DomainError("branch probability outside [0,1]");
    miss *= 1.0 - v;
  }
  return 1.0 - miss;
}

}  // namespace am::reasoning
