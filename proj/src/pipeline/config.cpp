#include <charconv>
#include <filesystem>
#include <functional>
#include <sstream>

#include "amflow/pipeline.hpp"
#include "../util/strings.hpp"

namespace am::pipeline {

std::string_view to_string(Mode m) {
  switch (m) {
    case Mode::Live: return "live";
    case Mode::Replay: return "replay";
    case Mode::Record: return "record";
  }
  return "replay";
}

namespace {

bool parse_bool(const std::string& key, const std::string& v) {
  const auto s = util::lower(v);
  if (s == "1" || s == "true" || s == "on" || s == "yes") return true;
  if (s == "0" || s == "false" || s == "off" || s == "no") return false;
  throw ConfigError(key + ": expected a boolean, got '" + v + "'");
}

double parse_num(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto* end = v.data() + v.size();
  const auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc{} || p != end) throw ConfigError(key + ": expected a number, got '" + v + "'");
  return out;
}

std::uint64_t parse_count(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto* end = v.data() + v.size();
  const auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc{} || p != end) throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  return out;
}

struct Key {
  std::function<void(PipelineConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const PipelineConfig&)> get;
  bool path = false;  // left out of manifests
};

template <class T>
Key count_key(T PipelineConfig::*field) {
  return {[field](PipelineConfig& c, const std::string& k, const std::string& v) {
            c.*field = static_cast<T>(parse_count(k, v));
          },
          [field](const PipelineConfig& c) { return std::to_string(c.*field); }};
}

Key flag_key(bool PipelineConfig::*field) {
  return {[field](PipelineConfig& c, const std::string& k, const std::string& v) { c.*field = parse_bool(k, v); },
          [field](const PipelineConfig& c) { return std::string(c.*field ? "true" : "false"); }};
}

Key text_key(std::string PipelineConfig::*field, bool path) {
  return {[field](PipelineConfig& c, const std::string&, const std::string& v) { c.*field = v; },
          [field](const PipelineConfig& c) { return c.*field; }, path};
}

template <class Get>
Key num_key(Get ref) {
  return {[ref](PipelineConfig& c, const std::string& k, const std::string& v) { ref(c) = parse_num(k, v); },
          [ref](const PipelineConfig& c) { return util::format_double(ref(c)); }};
}

const std::map<std::string, Key>& keys() {
  static const std::map<std::string, Key> table = [] {
    std::map<std::string, Key> t;
    t["mode"] = {[](PipelineConfig& c, const std::string& k, const std::string& v) {
                   const auto s = util::lower(v);
                   if (s == "live") c.mode = Mode::Live;
                   else if (s == "replay") c.mode = Mode::Replay;
                   else if (s == "record") c.mode = Mode::Record;
                   else throw ConfigError(k + ": expected live, replay or record, got '" + v + "'");
                 },
                 [](const PipelineConfig& c) { return std::string(to_string(c.mode)); }};
    t["cot"] = flag_key(&PipelineConfig::cot);
    t["micl"] = flag_key(&PipelineConfig::micl);
    t["intent"] = flag_key(&PipelineConfig::intent);
    t["seed"] = count_key(&PipelineConfig::seed);
    t["model"] = text_key(&PipelineConfig::model, false);
    t["tag_prefix"] = text_key(&PipelineConfig::tag_prefix, false);
    t["budget"] = count_key(&PipelineConfig::budget);
    t["agent_steps"] = count_key(&PipelineConfig::agent_steps);
    t["restarts"] = count_key(&PipelineConfig::restarts);
    t["sa.alpha"] = num_key([](auto& c) -> auto& { return c.schedule.alpha; });
    t["sa.moves_per_temperature"] = {
        [](PipelineConfig& c, const std::string& k, const std::string& v) {
          c.schedule.moves_per_temperature = parse_count(k, v);
        },
        [](const PipelineConfig& c) { return std::to_string(c.schedule.moves_per_temperature); }};
    t["sa.initial_acceptance"] = num_key([](auto& c) -> auto& { return c.schedule.initial_acceptance; });
    t["sa.stop_ratio"] = num_key([](auto& c) -> auto& { return c.schedule.stop_ratio; });
    t["block_spacing"] = num_key([](auto& c) -> auto& { return c.block_spacing; });
    t["route.pitch"] = num_key([](auto& c) -> auto& { return c.rules.pitch; });
    t["route.margin"] = num_key([](auto& c) -> auto& { return c.rules.margin; });
    t["route.min_spacing"] = {
        [](PipelineConfig& c, const std::string& k, const std::string& v) {
          c.rules.min_spacing = static_cast<int>(parse_count(k, v));
        },
        [](const PipelineConfig& c) { return std::to_string(c.rules.min_spacing); }};
    t["route.wrong_direction"] = num_key([](auto& c) -> auto& { return c.router.wrong_direction; });
    t["route.via"] = num_key([](auto& c) -> auto& { return c.router.via; });
    t["route.sensitivity"] = num_key([](auto& c) -> auto& { return c.router.sensitivity; });
    t["route.congestion"] = num_key([](auto& c) -> auto& { return c.router.congestion; });
    t["route.candidates"] = count_key(&PipelineConfig::route_candidates);
    t["fixtures"] = text_key(&PipelineConfig::fixtures, true);
    t["micl_dir"] = text_key(&PipelineConfig::micl_dir, true);
    t["out"] = text_key(&PipelineConfig::out_dir, true);
    t["simulator"] = text_key(&PipelineConfig::simulator, true);
    t["spec"] = text_key(&PipelineConfig::spec, true);
    return t;
  }();
  return table;
}

}  // namespace

void apply_setting(PipelineConfig& cfg, const std::string& key, const std::string& value) {
  const auto it = keys().find(key);
  if (it == keys().end()) throw ConfigError("unknown config key '" + key + "'");
  it->second.set(cfg, key, value);
}

PipelineConfig parse_config(const std::string& text, PipelineConfig base) {
  std::size_t line_no = 0;
  for (const auto& raw : util::split_lines(text)) {
    ++line_no;
    const std::string line(util::trim(std::string_view(raw).substr(0, raw.find('#'))));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    const std::string_view view(line);
    apply_setting(base, std::string(util::trim(view.substr(0, eq))), std::string(util::trim(view.substr(eq + 1))));
  }
  return base;
}

std::string to_config_text(const PipelineConfig& cfg) {
  std::ostringstream os;
  for (const auto& [k, key] : keys()) os << k << " = " << key.get(cfg) << "\n";
  return os.str();
}

std::map<std::string, std::string> manifest_config(const PipelineConfig& cfg) {
  std::map<std::string, std::string> out;
  for (const auto& [k, key] : keys())
    if (!key.path) out[k] = key.get(cfg);
  out["simulator"] = cfg.simulator.empty() ? "analytic" : std::filesystem::path(cfg.simulator).filename().string();
  return out;
}

void validate(const PipelineConfig& cfg) {
  if (cfg.mode != Mode::Live && cfg.fixtures.empty())
    throw ConfigError(std::string(to_string(cfg.mode)) + " mode requires a fixture directory");
  if (cfg.mode == Mode::Replay && !std::filesystem::is_directory(cfg.fixtures))
    throw ConfigError("fixture directory not found: " + cfg.fixtures);
  if (cfg.budget == 0) throw ConfigError("budget must be positive");
  if (cfg.restarts == 0) throw ConfigError("restarts must be positive");
  if (!(cfg.rules.pitch > 0.0)) throw ConfigError("route.pitch must be positive");
  if (!(cfg.schedule.alpha > 0.0 && cfg.schedule.alpha < 1.0)) throw ConfigError("sa.alpha must lie in (0, 1)");
  if (cfg.out_dir.empty()) throw ConfigError("output directory must be set");
}

namespace {

// Live calls written through to the fixture directory.
class RecordingLive : public llm::Gateway {
 public:
  RecordingLive(const std::string& dir)
      : live_(llm::LiveConfig::from_env()), rec_(live_, dir) {}
  std::string complete(const llm::ChatRequest& req) override { return rec_.complete(req); }

 private:
  llm::LiveGateway live_;
  llm::RecordingGateway rec_;
};

}  // namespace

std::unique_ptr<llm::Gateway> make_gateway(const PipelineConfig& cfg) {
  switch (cfg.mode) {
    case Mode::Replay: return std::make_unique<llm::ReplayGateway>(cfg.fixtures);
    case Mode::Record: return std::make_unique<RecordingLive>(cfg.fixtures);
    case Mode::Live: return std::make_unique<llm::LiveGateway>(llm::LiveConfig::from_env());
  }
  throw ConfigError("unknown mode");
}

}  // namespace am::pipeline
