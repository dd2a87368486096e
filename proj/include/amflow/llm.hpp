#pragma once

// Chat-completion gateway with interchangeable backends (live HTTP,
// content-hashed replay, recording, scripted) and the transcript
// truncation / trace compression helpers used by the agents.

#include <condition_variable>
#include <cstddef>
#include <functional>
#include <map>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "amflow/error.hpp"

namespace am::llm {

enum class Role { System, User, Assistant, Tool };
std::string_view to_string(Role role);

struct Message {
  Role role = Role::User;
  std::string text;
  std::vector<std::string> images;  // file paths
};

struct ChatRequest {
  std::vector<Message> messages;
  std::string model;
  double temperature = 0.2;
  std::string tag;
};

class ReplayMiss : public Error {
 public:
  explicit ReplayMiss(const std::string& hash);
  const std::string& hash() const { return hash_; }

 private:
  std::string hash_;
};

class HttpError : public Error {
 public:
  HttpError(int status, const std::string& body);
  int status() const { return status_; }

 private:
  int status_;
};

class Timeout : public Error {
 public:
  using Error::Error;
};

class InvalidRequest : public Error {
 public:
  using Error::Error;
};

// Canonical JSON of (messages, model, tag). Images enter by content
// digest, so fixtures survive path changes. Temperature is excluded.
std::string canonical_request(const ChatRequest& req);
std::string request_hash(const ChatRequest& req);

// Implementations must be safe to call concurrently.
class Gateway {
 public:
  virtual ~Gateway() = default;
  virtual std::string complete(const ChatRequest& req) = 0;
};

// Read-only store loaded once; each fixture file is
// {"hash": ..., "request_digest": ..., "response": ...}.
class ReplayGateway : public Gateway {
 public:
  explicit ReplayGateway(const std::string& fixture_dir);
  explicit ReplayGateway(std::map<std::string, std::string> responses);

  std::string complete(const ChatRequest& req) override;
  std::size_t size() const { return responses_.size(); }
  bool contains(const ChatRequest& req) const;

 private:
  std::map<std::string, std::string> responses_;
};

struct LiveConfig {
  std::string api_base = "https://api.openai.com/v1";
  std::string api_key;
  std::string model = "gpt-4o";
  int timeout_seconds = 120;
  int max_in_flight = 3;

  // LLM_API_BASE, LLM_API_KEY, LLM_MODEL override the defaults.
  static LiveConfig from_env();
};

// OpenAI-compatible POST {api_base}/chat/completions.
class LiveGateway : public Gateway {
 public:
  explicit LiveGateway(LiveConfig config);
  std::string complete(const ChatRequest& req) override;
  const LiveConfig& config() const { return config_; }

 private:
  LiveConfig config_;
  std::mutex mu_;
  std::condition_variable cv_;
  int in_flight_ = 0;
};

// Forwards to `inner` and writes one fixture per distinct request.
class RecordingGateway : public Gateway {
 public:
  RecordingGateway(Gateway& inner, std::string fixture_dir);
  std::string complete(const ChatRequest& req) override;

 private:
  Gateway& inner_;
  std::string dir_;
  std::mutex mu_;
};

// In-process responder, for tests and fixture authoring.
class ScriptedGateway : public Gateway {
 public:
  using Responder = std::function<std::string(const ChatRequest&)>;
  explicit ScriptedGateway(Responder responder) : responder_(std::move(responder)) {}
  std::string complete(const ChatRequest& req) override;
  std::size_t calls() const;

 private:
  Responder responder_;
  mutable std::mutex mu_;
  std::size_t calls_ = 0;
};

// Writes `response` as the fixture for `req` into `fixture_dir`.
void write_fixture(const std::string& fixture_dir, const ChatRequest& req, const std::string& response);

// ceil(chars / 4).
std::size_t estimate_tokens(std::string_view text);

enum class EntryKind { Plan, Todo, Thought, Action, ToolResult };
std::string_view to_string(EntryKind kind);

struct Entry {
  EntryKind kind = EntryKind::Thought;
  std::string text;
};

struct Transcript {
  std::vector<Entry> entries;

  void add(EntryKind kind, std::string text);
  // Replaces the current todo entry in place, or appends the first one.
  void set_todo(std::string text);
  const Entry* todo() const;
  std::size_t token_estimate() const;
  // Plan/todo as user turns, thoughts/actions as assistant turns, tool
  // results as tool turns.
  std::vector<Message> to_messages() const;
};

struct TruncationPolicy {
  std::size_t keep_thoughts = 2;
};

// Keeps plan/todo entries, the newest tool result and the last
// `keep_thoughts` thought/action pairs, in original order.
Transcript truncate_context(const Transcript& t, const TruncationPolicy& policy = {});

struct CompressOptions {
  std::string model = "gpt-4o";
  std::string tag = "compress";
};

// One summarization request over all traces.
std::string compress_context(const std::vector<std::string>& traces, Gateway& gw,
                             const CompressOptions& options = {});

// Fixed system prompts, loaded from the versioned template files at build time.
std::string_view prompt_template(std::string_view name);

}  // namespace am::llm
