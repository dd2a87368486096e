#include <algorithm>
#include <map>

#include "amflow/reasoning.hpp"

namespace am::reasoning {

using netlist::Device;
using netlist::NetlistIR;
using netlist::PortRole;

std::string_view to_string(FusionStage stage) {
  switch (stage) {
    case FusionStage::Consensus: return "consensus";
    case FusionStage::Llm: return "llm";
    case FusionStage::Fallback: return "fallback";
  }
  return "consensus";
}

bool is_valid_candidate(const NetlistIR& ir) {
  try {
    netlist::validate(ir);
  } catch (const Error&) {
    return false;
  }
  bool vdd = false, gnd = false;
  for (const auto& [net, role] : ir.named_rails) {
    vdd |= role == netlist::RailRole::VDD;
    gnd |= role == netlist::RailRole::GND;
  }
  if (!vdd || !gnd) return false;
  std::map<std::string, int> degree;
  for (const auto& d : ir.devices)
    for (const auto& p : d.ports) degree[p.net]++;
  for (const auto& [net, n] : degree) {
    if (n < 2 && !ir.named_rails.count(net)) return false;
  }
  return !ir.devices.empty();
}

namespace {

struct Ranked {
  const BranchHypothesis* hyp;
  int rank;  // lower = preferred
};

std::vector<Ranked> rank_parsed(const std::vector<BranchHypothesis>& hyps, const ReasoningConfig& config) {
  std::vector<Ranked> out;
  for (const auto& h : hyps) {
    if (!h.netlist) continue;
    const auto it = std::find(config.tie_break.begin(), config.tie_break.end(), h.id);
    out.push_back({&h, static_cast<int>(it - config.tie_break.begin())});
  }
  std::stable_sort(out.begin(), out.end(), [](const Ranked& a, const Ranked& b) {
    if (a.rank != b.rank) return a.rank < b.rank;
    return netlist::serialize(*a.hyp->netlist) < netlist::serialize(*b.hyp->netlist);
  });
  return out;
}

// Picks the value with most votes; ties go to the best-ranked supporter.
template <class T>
T vote(const std::vector<std::pair<T, int>>& ballots, int* support = nullptr) {
  std::map<T, std::pair<int, int>> tally;  // value -> (count, best rank)
  for (const auto& [v, rank] : ballots) {
    auto [it, fresh] = tally.try_emplace(v, 0, rank);
    it->second.first++;
    it->second.second = std::min(it->second.second, rank);
  }
  auto best = tally.begin();
  for (auto it = tally.begin(); it != tally.end(); ++it) {
    if (it->second.first > best->second.first ||
        (it->second.first == best->second.first && it->second.second < best->second.second)) {
      best = it;
    }
  }
  if (support) *support = best->second.first;
  return best->first;
}

struct Candidate {
  const Device* dev;
  std::vector<std::string> nets;  // translated into reference names
  int rank;
  const NetlistIR* source;
};

}  // namespace

NetlistIR consensus(const std::vector<BranchHypothesis>& hyps, const ReasoningConfig& config) {
  const auto parsed = rank_parsed(hyps, config);
  if (parsed.empty()) throw NoParsableHypothesis("no branch produced a parsable netlist");
  if (parsed.size() == 1) return *parsed.front().hyp->netlist;
  const int m = static_cast<int>(parsed.size());

  // Reference = hypothesis agreeing most with the others.
  std::size_t ref = 0;
  double best_agree = -1.0;
  for (std::size_t i = 0; i < parsed.size(); ++i) {
    double agree = 0.0;
    for (std::size_t j = 0; j < parsed.size(); ++j) {
      if (i == j) continue;
      const auto r = netlist::recovery_score(*parsed[j].hyp->netlist, *parsed[i].hyp->netlist);
      agree += r.component_accuracy + r.edge_accuracy + (r.exact_match ? 1.0 : 0.0);
    }
    if (agree > best_agree + 1e-12) {
      best_agree = agree;
      ref = i;
    }
  }
  const NetlistIR& reference = *parsed[ref].hyp->netlist;

  std::vector<netlist::Correspondence> maps(parsed.size());
  for (std::size_t j = 0; j < parsed.size(); ++j) {
    if (j == ref) {
      maps[j].isomorphic = true;
      for (std::size_t d = 0; d < reference.devices.size(); ++d) maps[j].device_map.push_back(static_cast<int>(d));
      for (const auto& n : reference.nets) maps[j].net_map[n] = n;
    } else {
      maps[j] = netlist::align(*parsed[j].hyp->netlist, reference);
    }
  }
  auto translate = [&](std::size_t j, const std::string& net) {
    const auto it = maps[j].net_map.find(net);
    return it != maps[j].net_map.end() ? it->second : "\x01" + std::to_string(j) + ":" + net;
  };

  NetlistIR out;
  for (std::size_t d = 0; d < reference.devices.size(); ++d) {
    std::vector<Candidate> cands;
    int best_rank_present = 1 << 20, best_rank_absent = 1 << 20;
    for (std::size_t j = 0; j < parsed.size(); ++j) {
      const int p = maps[j].device_map[d];
      if (p < 0) {
        best_rank_absent = std::min(best_rank_absent, parsed[j].rank);
        continue;
      }
      const NetlistIR& src = *parsed[j].hyp->netlist;
      Candidate c{&src.devices[static_cast<std::size_t>(p)], {}, parsed[j].rank, &src};
      for (const auto& port : c.dev->ports) c.nets.push_back(translate(j, port.net));
      cands.push_back(std::move(c));
      best_rank_present = std::min(best_rank_present, parsed[j].rank);
    }
    const int present = static_cast<int>(cands.size());
    if (2 * present < m || (2 * present == m && best_rank_absent < best_rank_present)) continue;

    std::vector<std::pair<netlist::DeviceKind, int>> kind_ballots;
    for (const auto& c : cands) kind_ballots.emplace_back(c.dev->kind, c.rank);
    const auto kind = vote(kind_ballots);
    const auto& roles = netlist::port_roles(kind);

    std::vector<Candidate*> same_shape;
    for (auto& c : cands)
      if (netlist::port_roles(c.dev->kind) == roles) same_shape.push_back(&c);
    std::sort(same_shape.begin(), same_shape.end(),
              [](const Candidate* a, const Candidate* b) { return a->rank < b->rank; });

    // Orient two-terminal passives against the preferred candidate.
    if (roles.size() == 2 && roles[0] == PortRole::Terminal) {
      const auto& anchor = same_shape.front()->nets;
      for (auto* c : same_shape) {
        const int straight = (c->nets[0] == anchor[0]) + (c->nets[1] == anchor[1]);
        const int swapped = (c->nets[1] == anchor[0]) + (c->nets[0] == anchor[1]);
        if (swapped > straight) std::swap(c->nets[0], c->nets[1]);
      }
    }

    Device fused;
    fused.id = reference.devices[d].id;
    fused.kind = kind;
    for (std::size_t k = 0; k < roles.size(); ++k) {
      std::vector<std::pair<std::string, int>> ballots;
      for (const auto* c : same_shape) ballots.emplace_back(c->nets[k], c->rank);
      fused.ports.push_back({roles[k], vote(ballots)});
    }
    const Candidate* donor = nullptr;
    for (const auto* c : same_shape)
      if (c->dev->kind == kind) {
        donor = c;
        break;
      }
    fused.model = donor->dev->model;
    fused.params = donor->dev->params;
    if (!fused.model.empty()) {
      const auto it = donor->source->models.find(fused.model);
      if (it != donor->source->models.end()) out.models[fused.model] = it->second;
    }
    out.devices.push_back(std::move(fused));
  }

  // Nets seen in only one non-reference branch get fresh names.
  std::map<std::string, std::string> fresh;
  int next = 1;
  for (auto& dev : out.devices)
    for (auto& port : dev.ports) {
      if (port.net.empty() || port.net[0] != '\x01') continue;
      auto [it, added] = fresh.try_emplace(port.net, "");
      if (added) {
        std::string name;
        do name = "nf" + std::to_string(next++);
        while (reference.nets.count(name));
        it->second = name;
      }
      port.net = it->second;
    }
  out.subckts = reference.subckts;
  out.rebuild_nets();
  return out;
}

llm::ChatRequest fusion_request(const std::vector<BranchHypothesis>& hyps, const NetlistIR& draft,
                                const ReasoningConfig& config) {
  std::vector<const BranchHypothesis*> order;
  for (const auto& h : hyps) order.push_back(&h);
  auto rank = [&](const BranchHypothesis* h) {
    return std::find(config.tie_break.begin(), config.tie_break.end(), h->id) - config.tie_break.begin();
  };
  std::stable_sort(order.begin(), order.end(),
                   [&](const BranchHypothesis* a, const BranchHypothesis* b) { return rank(a) < rank(b); });
  std::string body;
  for (const auto* h : order) body += "### Branch " + std::string(to_string(h->id)) + "\n" + h->trace + "\n\n";
  body += "### Consensus draft\n```spice\n" + netlist::serialize(draft) + "\n```\n";

  llm::ChatRequest req;
  req.model = config.model;
  req.temperature = config.fusion_temperature;
  req.tag = config.tag_prefix + "fusion";
  req.messages = {{llm::Role::System, std::string(llm::prompt_template("fusion_system")), {}},
                  {llm::Role::User, body, {}}};
  return req;
}

FusionResult fuse(const std::vector<BranchHypothesis>& hyps, llm::Gateway* gw, const ReasoningConfig& config) {
  FusionResult r;
  r.netlist = consensus(hyps, config);
  r.stage = FusionStage::Consensus;
  r.valid = is_valid_candidate(r.netlist);
  if (!r.valid) r.notes.push_back("consensus draft failed the validity check");

  if (config.intent && gw) {
    const std::string reply = gw->complete(fusion_request(hyps, r.netlist, config));
    const auto block = extract_spice_block(reply);
    if (!block) {
      r.notes.push_back("fusion reply had no netlist block; keeping consensus");
    } else {
      try {
        auto ir = netlist::parse_spice(*block);
        if (is_valid_candidate(ir)) {
          r.netlist = std::move(ir);
          r.stage = FusionStage::Llm;
          r.valid = true;
          return r;
        }
        r.notes.push_back("fusion netlist failed the validity check; keeping consensus");
      } catch (const Error& e) {
        r.notes.push_back(std::string("fusion netlist unparsable (") + e.what() + "); keeping consensus");
      }
    }
  }
  if (r.valid) return r;

  for (const auto& ranked : rank_parsed(hyps, config)) {
    if (is_valid_candidate(*ranked.hyp->netlist)) {
      r.netlist = *ranked.hyp->netlist;
      r.stage = FusionStage::Fallback;
      r.valid = true;
      r.notes.push_back("fell back to branch " + std::string(to_string(ranked.hyp->id)));
      return r;
    }
  }
  return r;
}

}  // namespace am::reasoning
