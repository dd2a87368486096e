#include <algorithm>
#include <map>

#include "amflow/llm.hpp"

namespace am::llm {

namespace {

const std::map<std::string_view, std::string_view>& prompt_table() {
  static const std::map<std::string_view, std::string_view> table{
#include "prompts_gen.inc"
  };
  return table;
}

}  // namespace

std::string_view prompt_template(std::string_view name) {
  const auto& t = prompt_table();
  const auto it = t.find(name);
  if (it == t.end()) throw Error("unknown prompt template '" + std::string(name) + "'");
  return it->second;
}

std::size_t estimate_tokens(std::string_view text) { return (text.size() + 3) / 4; }

std::string_view to_string(EntryKind kind) {
  switch (kind) {
    case EntryKind::Plan: return "plan";
    case EntryKind::Todo: return "todo";
    case EntryKind::Thought: return "thought";
    case EntryKind::Action: return "action";
    case EntryKind::ToolResult: return "tool_result";
  }
  return "thought";
}

void Transcript::add(EntryKind kind, std::string text) {
  if (kind == EntryKind::Todo) {
    set_todo(std::move(text));
    return;
  }
  entries.push_back({kind, std::move(text)});
}

void Transcript::set_todo(std::string text) {
  for (auto& e : entries) {
    if (e.kind == EntryKind::Todo) {
      e.text = std::move(text);
      return;
    }
  }
  entries.push_back({EntryKind::Todo, std::move(text)});
}

const Entry* Transcript::todo() const {
  for (const auto& e : entries)
    if (e.kind == EntryKind::Todo) return &e;
  return nullptr;
}

std::size_t Transcript::token_estimate() const {
  std::size_t n = 0;
  for (const auto& e : entries) n += estimate_tokens(e.text);
  return n;
}

std::vector<Message> Transcript::to_messages() const {
  std::vector<Message> out;
  for (const auto& e : entries) {
    switch (e.kind) {
      case EntryKind::Plan: out.push_back({Role::Assistant, "PLAN:\n" + e.text, {}}); break;
      case EntryKind::Todo: out.push_back({Role::User, "TODO:\n" + e.text, {}}); break;
      case EntryKind::Thought: out.push_back({Role::Assistant, "Thought: " + e.text, {}}); break;
      case EntryKind::Action: out.push_back({Role::Assistant, "Action: " + e.text, {}}); break;
      case EntryKind::ToolResult: out.push_back({Role::User, "Observation: " + e.text, {}}); break;
    }
  }
  return out;
}

Transcript truncate_context(const Transcript& t, const TruncationPolicy& policy) {
  const std::size_t n = t.entries.size();
  // Pair index per thought/action entry: a thought opens a pair, an action
  // joins the open pair or opens its own.
  std::vector<long> pair(n, -1);
  long pairs = 0;
  bool open = false;
  std::size_t newest_result = n;
  for (std::size_t i = 0; i < n; ++i) {
    const auto kind = t.entries[i].kind;
    if (kind == EntryKind::Thought) {
      pair[i] = pairs++;
      open = true;
    } else if (kind == EntryKind::Action) {
      pair[i] = open ? pairs - 1 : pairs++;
      open = false;
    } else if (kind == EntryKind::ToolResult) {
      newest_result = i;
    }
  }
  const long first_kept = pairs - static_cast<long>(policy.keep_thoughts);

  Transcript out;
  for (std::size_t i = 0; i < n; ++i) {
    const auto kind = t.entries[i].kind;
    bool keep = false;
    switch (kind) {
      case EntryKind::Plan:
      case EntryKind::Todo: keep = true; break;
      case EntryKind::ToolResult: keep = i == newest_result; break;
      case EntryKind::Thought:
      case EntryKind::Action: keep = pair[i] >= first_kept; break;
    }
    if (keep) out.entries.push_back(t.entries[i]);
  }
  return out;
}

std::string compress_context(const std::vector<std::string>& traces, Gateway& gw,
                             const CompressOptions& options) {
  if (traces.empty()) throw InvalidRequest("compress_context needs at least one trace");
  std::string body;
  for (std::size_t i = 0; i < traces.size(); ++i) {
    body += "### Trace " + std::to_string(i + 1) + "\n" + traces[i] + "\n\n";
  }
  ChatRequest req;
  req.model = options.model;
  req.tag = options.tag;
  req.temperature = 0.0;
  req.messages = {{Role::System, std::string(prompt_template("compress_system")), {}},
                  {Role::User, body, {}}};
  return gw.complete(req);
}

}  // namespace am::llm
