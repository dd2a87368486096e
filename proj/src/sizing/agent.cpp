#include <cmath>
#include <nlohmann/json.hpp>
#include <sstream>

#include "amflow/digest.hpp"
#include "amflow/placement.hpp"
#include "amflow/sizing.hpp"
#include "../util/strings.hpp"

namespace am::sizing {

using json = nlohmann::json;
using llm::EntryKind;
using netlist::NetlistIR;

AgentBudgetExhausted::AgentBudgetExhausted(AgentResult partial)
    : Error("agent stopped after " + std::to_string(partial.steps) + " steps with " +
            std::to_string(partial.fallback_dims.size()) + " dims unproposed"),
      result_(std::move(partial)) {}

namespace {

std::string fmt(double v) { return util::format_double(v); }

std::string describe_dim(const Dim& d) {
  std::string s = d.name + " [" + fmt(d.lo) + ", " + fmt(d.hi) + "] " + std::string(to_string(d.scale)) + " " + d.unit;
  if (!d.ties.empty()) {
    s += " (shared with";
    for (const auto& t : d.ties) s += " " + t;
    s += ")";
  }
  return s;
}

std::string circuit_block(const NetlistIR& ir, const std::string& context, const ParameterSpace& fallback) {
  std::string s = "Circuit:\n```spice\n" + netlist::serialize(ir) + "```\n";
  if (!context.empty()) s += "Context:\n" + context + "\n";
  s += "Parameters (fallback range):\n";
  for (const auto& d : fallback.dims) s += "- " + describe_dim(d) + "\n";
  return s;
}

std::optional<double> number_of(const json& v) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) return netlist::parse_si_value(v.get<std::string>());
  return std::nullopt;
}

struct Action {
  std::string tool;
  json args = json::object();
};

std::optional<Action> parse_action(const std::string& reply, std::string* thought) {
  std::optional<Action> act;
  const auto lines = util::split_lines(reply);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string_view line = util::trim(lines[i]);
    if (util::starts_with_ci(line, "thought:")) {
      *thought = std::string(util::trim(line.substr(8)));
    } else if (util::starts_with_ci(line, "action:") && !act) {
      std::string rest(util::trim(line.substr(7)));
      for (std::size_t k = i + 1; k < lines.size(); ++k) rest += "\n" + lines[k];
      const auto sp = rest.find_first_of(" \t\n{");
      Action a;
      a.tool = util::lower(util::trim(rest.substr(0, sp)));
      if (sp != std::string::npos) {
        const auto open = rest.find('{', sp);
        const auto close = rest.rfind('}');
        if (open != std::string::npos && close != std::string::npos && close > open) {
          try {
            a.args = json::parse(rest.substr(open, close - open + 1));
          } catch (const json::exception&) {
            return std::nullopt;
          }
        }
      }
      act = std::move(a);
    }
  }
  return act;
}

// Midpoint in scale space of each dim, overridden by `over`.
Point probe_point(const ParameterSpace& space, const Point& over) {
  Point x;
  for (const auto& d : space.dims) {
    x[d.name] = from_unit(d, 0.5 * (to_unit(d, d.lo) + to_unit(d, d.hi)));
    for (const auto& t : d.ties) {
      const auto it = over.find(t);
      if (it != over.end()) x[d.name] = it->second;
    }
    const auto it = over.find(d.name);
    if (it != over.end()) x[d.name] = it->second;
  }
  return x;
}

}  // namespace

std::string tool_topology_query(const NetlistIR& ir, const ParameterSpace& fallback) {
  std::ostringstream os;
  os << "topology: " << to_string(classify_topology(ir)) << "\n";
  for (const auto& d : ir.devices) {
    os << d.id << " " << netlist::to_string(d.kind);
    for (const auto& p : d.ports) os << " " << netlist::to_string(p.role) << "=" << p.net;
    os << "\n";
  }
  const auto pairs = placement::derive_symmetry_pairs(ir, false);
  os << "matched pairs:";
  if (pairs.empty()) os << " none";
  for (const auto& [a, b] : pairs) os << " (" << a << "," << b << ")";
  os << "\nparameters: " << fallback.dims.size() << "\n";
  return os.str();
}

std::string tool_operating_point_probe(const NetlistIR& ir, const ParameterSpace& fallback, const Point& x,
                                       const ProcessModel& pm) {
  std::ostringstream os;
  try {
    const auto op = solve_operating_point(apply_point(ir, fallback, probe_point(fallback, x)), pm);
    os << "nodes:";
    for (const auto& [net, v] : op.node_voltage) os << " " << net << "=" << fmt(std::round(v * 1e4) / 1e4);
    os << "\n";
    for (const auto& d : op.devices) {
      os << d.id << " " << d.region << " id=" << fmt(std::round(d.id_a * 1e9) / 1e9)
         << " vov=" << fmt(std::round(d.vov * 1e4) / 1e4) << " vds=" << fmt(std::round(d.vds * 1e4) / 1e4) << "\n";
    }
    os << "supply_current=" << fmt(std::round(op.supply_current * 1e9) / 1e9) << "\n";
  } catch (const Error& e) {
    os << "probe failed: " << e.what() << "\n";
  }
  return os.str();
}

AgentResult plan_search_space(const NetlistIR& ir, const std::string& compressed_context, llm::Gateway& gw,
                              const AgentConfig& config) {
  netlist::validate(ir);
  const ParameterSpace fallback = fallback_space(ir);
  const std::string block = circuit_block(ir, compressed_context, fallback);

  AgentResult result;
  auto& tr = result.transcript;

  llm::ChatRequest plan_req;
  plan_req.model = config.model;
  plan_req.temperature = config.temperature;
  plan_req.tag = config.tag_prefix + "agent:plan";
  plan_req.messages = {{llm::Role::System, std::string(llm::prompt_template("agent_plan")), {}},
                       {llm::Role::User, block, {}}};
  const std::string plan = gw.complete(plan_req);
  tr.add(EntryKind::Plan, plan);

  std::string todo_list;
  for (const auto& line : util::split_lines(plan)) {
    const auto t = util::trim(line);
    if (!t.empty() && (std::isdigit(static_cast<unsigned char>(t.front())) || t.front() == '-' || t.front() == '*'))
      todo_list += std::string(t) + "\n";
  }
  if (todo_list.empty()) todo_list = plan + "\n";

  std::map<std::string, Dim> proposed;
  auto pending = [&] {
    std::string s;
    for (const auto& d : fallback.dims)
      if (!proposed.count(d.name)) s += (s.empty() ? "" : ", ") + d.name;
    return s;
  };
  auto refresh_todo = [&] {
    const std::string p = pending();
    tr.set_todo(todo_list + "Pending ranges: " + (p.empty() ? "none" : p));
  };
  refresh_todo();

  auto leader_of = [&](const std::string& name) -> const Dim* {
    for (const auto& d : fallback.dims) {
      if (util::iequals(d.name, name)) return &d;
      for (const auto& t : d.ties)
        if (util::iequals(t, name)) return &d;
    }
    return nullptr;
  };

  bool finished = false;
  while (!finished && result.steps < config.max_steps && proposed.size() < fallback.dims.size()) {
    llm::ChatRequest req;
    req.model = config.model;
    req.temperature = config.temperature;
    req.tag = config.tag_prefix + "agent:step:" + std::to_string(result.steps);
    req.messages = {{llm::Role::System, std::string(llm::prompt_template("agent_step")), {}},
                    {llm::Role::User, block, {}}};
    for (auto& m : tr.to_messages()) req.messages.push_back(std::move(m));
    const std::string reply = gw.complete(req);
    ++result.steps;

    std::string thought;
    const auto action = parse_action(reply, &thought);
    if (!thought.empty()) tr.add(EntryKind::Thought, thought);

    std::string obs;
    if (!action) {
      tr.add(EntryKind::Action, "(unparsable)");
      obs = "error: reply must contain 'Action: <tool> <json>'";
    } else {
      tr.add(EntryKind::Action, action->tool + " " + action->args.dump());
      if (action->tool == "topology_query") {
        obs = tool_topology_query(ir, fallback);
      } else if (action->tool == "operating_point_probe") {
        Point over;
        const json& xs = action->args.contains("x") ? action->args["x"] : json::object();
        bool ok = xs.is_object();
        if (ok) {
          for (const auto& [k, v] : xs.items()) {
            const auto val = number_of(v);
            const Dim* d = leader_of(k);
            if (!val || !d) {
              ok = false;
              break;
            }
            over[d->name] = std::clamp(*val, d->lo, d->hi);
          }
        }
        obs = ok ? tool_operating_point_probe(ir, fallback, over, config.process)
                 : "error: x must map known parameters to numbers";
      } else if (action->tool == "range_propose") {
        const Dim* d = action->args.contains("dim") && action->args["dim"].is_string()
                           ? leader_of(action->args["dim"].get<std::string>())
                           : nullptr;
        const double nan = std::numeric_limits<double>::quiet_NaN();
        const double lo = action->args.contains("lo") ? number_of(action->args["lo"]).value_or(nan) : nan;
        const double hi = action->args.contains("hi") ? number_of(action->args["hi"]).value_or(nan) : nan;
        Scale scale = d ? d->scale : Scale::Linear;
        if (action->args.contains("scale") && action->args["scale"].is_string())
          scale = util::lower(action->args["scale"].get<std::string>()) == "log" ? Scale::Log : Scale::Linear;
        if (!d) {
          obs = "error: unknown parameter";
        } else if (!(lo < hi)) {
          obs = "error: need numeric lo < hi for " + d->name;
        } else if (scale == Scale::Log && !(lo > 0.0)) {
          obs = "error: log scale needs lo > 0 for " + d->name;
        } else {
          Dim nd = *d;
          nd.lo = std::max(lo, d->lo);
          nd.hi = std::min(hi, d->hi);
          nd.scale = scale;
          if (!(nd.lo < nd.hi)) {
            obs = "error: range for " + d->name + " lies outside the allowed bounds";
          } else {
            obs = "accepted " + describe_dim(nd);
            if (nd.lo != lo || nd.hi != hi) obs += " (clipped to allowed bounds)";
            proposed[d->name] = nd;
          }
        }
      } else if (action->tool == "finish") {
        finished = true;
        obs = "finished with " + std::to_string(proposed.size()) + " of " + std::to_string(fallback.dims.size()) +
              " ranges proposed";
      } else {
        obs = "error: unknown tool '" + action->tool + "'";
      }
    }
    tr.add(EntryKind::ToolResult, obs);
    refresh_todo();
    result.peak_tokens = std::max(result.peak_tokens, tr.token_estimate());
    tr = llm::truncate_context(tr, config.truncation);
  }

  for (const auto& d : fallback.dims) {
    const auto it = proposed.find(d.name);
    if (it != proposed.end()) {
      result.space.dims.push_back(it->second);
    } else {
      result.space.dims.push_back(d);
      result.fallback_dims.push_back(d.name);
    }
  }
  std::string digest_src;
  for (const auto& e : tr.entries) digest_src += std::string(llm::to_string(e.kind)) + "\n" + e.text + "\n";
  result.space.provenance = config.tag_prefix + "agent:" + sha256_hex(digest_src).substr(0, 16);
  result.space.check(ir);

  if (!finished && proposed.size() < fallback.dims.size()) throw AgentBudgetExhausted(std::move(result));
  return result;
}

}  // namespace am::sizing
