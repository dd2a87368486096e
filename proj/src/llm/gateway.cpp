#include <filesystem>

#include "amflow/digest.hpp"
#include "amflow/io.hpp"
#include "amflow/llm.hpp"
#include "json.hpp"

namespace am::llm {

using nlohmann::json;

std::string_view to_string(Role role) {
  switch (role) {
    case Role::System: return "system";
    case Role::User: return "user";
    case Role::Assistant: return "assistant";
    case Role::Tool: return "tool";
  }
  return "user";
}

ReplayMiss::ReplayMiss(const std::string& hash)
    : Error("no replay fixture for request " + hash), hash_(hash) {}

HttpError::HttpError(int status, const std::string& body)
    : Error("HTTP " + std::to_string(status) + ": " + body.substr(0, 500)), status_(status) {}

std::string canonical_request(const ChatRequest& req) {
  if (req.messages.empty()) throw InvalidRequest("chat request has no messages");
  json msgs = json::array();
  for (const auto& m : req.messages) {
    json images = json::array();
    for (const auto& path : m.images) {
      if (!file_exists(path)) throw InvalidRequest("image ref does not resolve: " + path);
      images.push_back("sha256:" + sha256_hex(read_file(path)));
    }
    msgs.push_back({{"role", std::string(to_string(m.role))}, {"text", m.text}, {"images", images}});
  }
  // nlohmann objects are key-sorted, so dump() is canonical.
  return json{{"messages", msgs}, {"model", req.model}, {"tag", req.tag}}.dump();
}

std::string request_hash(const ChatRequest& req) { return sha256_hex(canonical_request(req)); }

namespace {

json request_digest(const ChatRequest& req) {
  const std::string& last = req.messages.back().text;
  return {{"model", req.model},
          {"tag", req.tag},
          {"messages", req.messages.size()},
          {"last_message_head", last.substr(0, 160)}};
}

}  // namespace

ReplayGateway::ReplayGateway(const std::string& fixture_dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(fixture_dir)) throw Error("replay fixture directory not found: " + fixture_dir);
  for (const auto& entry : fs::directory_iterator(fixture_dir)) {
    if (entry.path().extension() != ".json") continue;
    try {
      const json j = json::parse(read_file(entry.path().string()));
      responses_[j.at("hash").get<std::string>()] = j.at("response").get<std::string>();
    } catch (const json::exception& e) {
      throw Error("bad replay fixture " + entry.path().string() + ": " + e.what());
    }
  }
}

ReplayGateway::ReplayGateway(std::map<std::string, std::string> responses)
    : responses_(std::move(responses)) {}

std::string ReplayGateway::complete(const ChatRequest& req) {
  const std::string h = request_hash(req);
  const auto it = responses_.find(h);
  if (it == responses_.end()) throw ReplayMiss(h);
  return it->second;
}

bool ReplayGateway::contains(const ChatRequest& req) const {
  return responses_.count(request_hash(req)) > 0;
}

void write_fixture(const std::string& fixture_dir, const ChatRequest& req, const std::string& response) {
  const std::string h = request_hash(req);
  const json j{{"hash", h}, {"request_digest", request_digest(req)}, {"response", response}};
  write_file((std::filesystem::path(fixture_dir) / (h + ".json")).string(), j.dump(2) + "\n");
}

RecordingGateway::RecordingGateway(Gateway& inner, std::string fixture_dir)
    : inner_(inner), dir_(std::move(fixture_dir)) {}

std::string RecordingGateway::complete(const ChatRequest& req) {
  std::string response = inner_.complete(req);
  std::lock_guard lock(mu_);
  write_fixture(dir_, req, response);
  return response;
}

std::string ScriptedGateway::complete(const ChatRequest& req) {
  {
    std::lock_guard lock(mu_);
    ++calls_;
  }
  return responder_(req);
}

std::size_t ScriptedGateway::calls() const {
  std::lock_guard lock(mu_);
  return calls_;
}

}  // namespace am::llm
