#include "httplib.h"

#include <openssl/evp.h>

#include <cstdlib>
#include <filesystem>

#include "amflow/io.hpp"
#include "amflow/llm.hpp"
#include "json.hpp"

namespace am::llm {

using nlohmann::json;

namespace {

std::string base64(const std::string& bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3) + 1, '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(bytes.data()),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::string mime_for(const std::string& path) {
  const auto ext = std::filesystem::path(path).extension().string();
  if (ext == ".png") return "image/png";
  if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
  return "application/octet-stream";
}

json wire_body(const ChatRequest& req, const std::string& model) {
  json msgs = json::array();
  for (const auto& m : req.messages) {
    json msg{{"role", std::string(to_string(m.role))}};
    if (m.images.empty()) {
      msg["content"] = m.text;
    } else {
      json parts = json::array({{{"type", "text"}, {"text", m.text}}});
      for (const auto& path : m.images) {
        const std::string url = "data:" + mime_for(path) + ";base64," + base64(read_file(path));
        parts.push_back({{"type", "image_url"}, {"image_url", {{"url", url}}}});
      }
      msg["content"] = parts;
    }
    msgs.push_back(std::move(msg));
  }
  return {{"model", req.model.empty() ? model : req.model},
          {"messages", msgs},
          {"temperature", req.temperature}};
}

// Splits "https://host:port/v1" into origin and path prefix.
std::pair<std::string, std::string> split_base(const std::string& base) {
  const auto scheme_end = base.find("://");
  const auto path_start = base.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
  if (path_start == std::string::npos) return {base, ""};
  std::string path = base.substr(path_start);
  while (!path.empty() && path.back() == '/') path.pop_back();
  return {base.substr(0, path_start), path};
}

}  // namespace

LiveConfig LiveConfig::from_env() {
  LiveConfig c;
  if (const char* v = std::getenv("LLM_API_BASE"); v && *v) c.api_base = v;
  if (const char* v = std::getenv("LLM_API_KEY"); v && *v) c.api_key = v;
  if (const char* v = std::getenv("LLM_MODEL"); v && *v) c.model = v;
  return c;
}

LiveGateway::LiveGateway(LiveConfig config) : config_(std::move(config)) {
  if (config_.max_in_flight < 1) config_.max_in_flight = 1;
}

std::string LiveGateway::complete(const ChatRequest& req) {
  const std::string body = wire_body(req, config_.model).dump();
  {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return in_flight_ < config_.max_in_flight; });
    ++in_flight_;
  }
  struct Release {
    LiveGateway* g;
    ~Release() {
      {
        std::lock_guard lock(g->mu_);
        --g->in_flight_;
      }
      g->cv_.notify_one();
    }
  } release{this};

  const auto [origin, prefix] = split_base(config_.api_base);
  httplib::Client cli(origin);
  cli.set_connection_timeout(config_.timeout_seconds);
  cli.set_read_timeout(config_.timeout_seconds);
  cli.set_write_timeout(config_.timeout_seconds);
  httplib::Headers headers;
  if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);
  auto res = cli.Post(prefix + "/chat/completions", headers, body, "application/json");
  if (!res) {
    if (res.error() == httplib::Error::Read || res.error() == httplib::Error::Write ||
        res.error() == httplib::Error::ConnectionTimeout) {
      throw Timeout("chat request timed out after " + std::to_string(config_.timeout_seconds) + " s");
    }
    throw HttpError(0, httplib::to_string(res.error()));
  }
  if (res->status != 200) throw HttpError(res->status, res->body);
  try {
    const json j = json::parse(res->body);
    return j.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception& e) {
    throw HttpError(res->status, std::string("unexpected response shape: ") + e.what());
  }
}

}  // namespace am::llm
