#include <algorithm>
#include <filesystem>

#include "amflow/digest.hpp"
#include "amflow/io.hpp"
#include "amflow/pipeline.hpp"
#include "json.hpp"

namespace am::pipeline {

namespace fs = std::filesystem;
using json = nlohmann::json;

bool Manifest::all_ok() const {
  return !stages.empty() &&
         std::all_of(stages.begin(), stages.end(), [](const StageRecord& s) { return s.status == "ok"; });
}

const StageRecord* Manifest::find(const std::string& stage) const {
  for (const auto& s : stages)
    if (s.name == stage) return &s;
  return nullptr;
}

std::string to_json(const Manifest& m) {
  json j;
  j["config"] = m.config;
  j["stages"] = json::array();
  for (const auto& s : m.stages)
    j["stages"].push_back(
        {{"name", s.name}, {"status", s.status}, {"error", s.error}, {"artifacts", s.artifacts}, {"details", s.details}});
  return j.dump(2) + "\n";
}

Manifest manifest_from_json(const std::string& text) {
  Manifest m;
  try {
    const json j = json::parse(text);
    m.config = j.at("config").get<std::map<std::string, std::string>>();
    for (const auto& js : j.at("stages")) {
      StageRecord s;
      s.name = js.at("name").get<std::string>();
      s.status = js.at("status").get<std::string>();
      s.error = js.value("error", "");
      s.artifacts = js.value("artifacts", std::map<std::string, std::string>{});
      s.details = js.value("details", std::map<std::string, std::string>{});
      m.stages.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    throw Error(std::string("malformed manifest: ") + e.what());
  }
  return m;
}

Run::Run(PipelineConfig cfg) : cfg_(std::move(cfg)) { manifest_.config = manifest_config(cfg_); }

Run::Run(PipelineConfig cfg, llm::Gateway& gateway) : cfg_(std::move(cfg)), gw_(&gateway) {
  manifest_.config = manifest_config(cfg_);
}

llm::Gateway& Run::gateway() {
  if (!gw_) {
    owned_ = make_gateway(cfg_);
    gw_ = owned_.get();
  }
  return *gw_;
}

StageRecord& Run::begin(const std::string& stage) {
  manifest_.stages.push_back({stage, "ok", "", {}, {}});
  return manifest_.stages.back();
}

std::string Run::write_artifact(const std::string& name, const std::string& bytes) {
  fs::create_directories(cfg_.out_dir);
  const fs::path path = fs::path(cfg_.out_dir) / name;
  write_file(path.string(), bytes);
  if (!manifest_.stages.empty()) manifest_.stages.back().artifacts[name] = sha256_hex(bytes);
  return path.string();
}

void Run::record_artifact(const std::string& name) {
  const fs::path path = fs::path(cfg_.out_dir) / name;
  if (!manifest_.stages.empty()) manifest_.stages.back().artifacts[name] = sha256_hex(read_file(path.string()));
}

void Run::fail(const std::string& reason) {
  if (manifest_.stages.empty()) return;
  manifest_.stages.back().status = "failed";
  manifest_.stages.back().error = reason;
  save_manifest();
}

void Run::save_manifest() const {
  fs::create_directories(cfg_.out_dir);
  write_file((fs::path(cfg_.out_dir) / "manifest.json").string(), to_json(manifest_));
}

}  // namespace am::pipeline
