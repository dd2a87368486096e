#include <algorithm>
#include <map>
#include <sstream>

#include "amflow/netlist.hpp"
#include "../util/hungarian.hpp"
#include "../util/strings.hpp"

namespace am::netlist {

namespace {

using NetMap = std::map<std::string, std::string>;  // pred net -> truth net

bool same_role_set(DeviceKind a, DeviceKind b) { return port_roles(a) == port_roles(b); }

// Number of truth incidences of `t` reproduced by `p` under `nets`.
// Terminal ports compare as a multiset so resistor orientation is free.
int matched_ports(const Device& t, const Device& p, const NetMap& nets) {
  if (!same_role_set(t.kind, p.kind)) return 0;
  auto mapped = [&](const std::string& pred_net) -> std::string {
    auto it = nets.find(pred_net);
    return it == nets.end() ? std::string("\x01unmapped") : it->second;
  };
  int matched = 0;
  std::vector<std::string> t_terms, p_terms;
  for (std::size_t i = 0; i < t.ports.size(); ++i) {
    if (t.ports[i].role == PortRole::Terminal) {
      t_terms.push_back(t.ports[i].net);
      p_terms.push_back(mapped(p.ports[i].net));
    } else if (mapped(p.ports[i].net) == t.ports[i].net) {
      ++matched;
    }
  }
  std::sort(t_terms.begin(), t_terms.end());
  std::sort(p_terms.begin(), p_terms.end());
  std::vector<std::string> common;
  std::set_intersection(t_terms.begin(), t_terms.end(), p_terms.begin(), p_terms.end(),
                        std::back_inserter(common));
  return matched + static_cast<int>(common.size());
}

NetMap nets_from_devices(const NetlistIR& pred, const NetlistIR& truth,
                         const std::vector<int>& dev_map) {
  NetMap fixed;
  std::set<std::string> taken;
  for (const auto& [name, role] : pred.named_rails) {
    (void)role;
    if (truth.named_rails.count(name)) {
      fixed[name] = name;
      taken.insert(name);
    }
  }
  std::vector<std::string> free_pred, free_truth;
  for (const auto& n : pred.nets) {
    if (!fixed.count(n)) free_pred.push_back(n);
  }
  for (const auto& n : truth.nets) {
    if (!taken.count(n)) free_truth.push_back(n);
  }
  if (free_pred.empty() || free_truth.empty()) return fixed;

  std::map<std::string, std::size_t> pi, ti;
  for (std::size_t i = 0; i < free_pred.size(); ++i) pi[free_pred[i]] = i;
  for (std::size_t j = 0; j < free_truth.size(); ++j) ti[free_truth[j]] = j;
  std::vector<std::vector<double>> cost(free_pred.size(),
                                        std::vector<double>(free_truth.size(), 0.0));
  for (std::size_t t = 0; t < truth.devices.size(); ++t) {
    if (dev_map[t] < 0) continue;
    const Device& td = truth.devices[t];
    const Device& pd = pred.devices[static_cast<std::size_t>(dev_map[t])];
    if (!same_role_set(td.kind, pd.kind)) continue;
    for (std::size_t k = 0; k < td.ports.size(); ++k) {
      auto a = pi.find(pd.ports[k].net);
      auto b = ti.find(td.ports[k].net);
      if (a != pi.end() && b != ti.end()) cost[a->second][b->second] -= 1.0;
    }
  }
  const auto assign = util::min_cost_assignment(cost);
  for (std::size_t i = 0; i < assign.size(); ++i) {
    if (assign[i] >= 0) fixed[free_pred[i]] = free_truth[static_cast<std::size_t>(assign[i])];
  }
  return fixed;
}

// Kind agreement weighs less than one incidence: topology decides.
std::vector<int> devices_from_nets(const NetlistIR& pred, const NetlistIR& truth,
                                   const NetMap& nets, double& total) {
  std::vector<std::vector<double>> cost(truth.devices.size(),
                                        std::vector<double>(pred.devices.size(), 0.0));
  for (std::size_t t = 0; t < truth.devices.size(); ++t) {
    for (std::size_t p = 0; p < pred.devices.size(); ++p) {
      const auto& td = truth.devices[t];
      const auto& pd = pred.devices[p];
      cost[t][p] = -(0.5 * (td.kind == pd.kind) + matched_ports(td, pd, nets));
    }
  }
  auto assign = util::min_cost_assignment(cost);
  total = 0.0;
  for (std::size_t t = 0; t < assign.size(); ++t) {
    if (assign[t] >= 0) total -= cost[t][static_cast<std::size_t>(assign[t])];
  }
  return assign;
}

std::vector<int> initial_devices(const NetlistIR& pred, const NetlistIR& truth) {
  std::vector<std::vector<double>> cost(truth.devices.size(),
                                        std::vector<double>(pred.devices.size(), 0.0));
  for (std::size_t t = 0; t < truth.devices.size(); ++t) {
    for (std::size_t p = 0; p < pred.devices.size(); ++p) {
      const auto& td = truth.devices[t];
      const auto& pd = pred.devices[p];
      double s = 3.0 * (td.kind == pd.kind) + 1.0 * util::iequals(td.id, pd.id);
      if (same_role_set(td.kind, pd.kind)) {
        for (std::size_t k = 0; k < td.ports.size(); ++k) {
          const bool tr = truth.named_rails.count(td.ports[k].net) > 0;
          if (tr && td.ports[k].net == pd.ports[k].net) s += 0.5;
        }
      }
      cost[t][p] = -s;
    }
  }
  return util::min_cost_assignment(cost);
}

RecoveryReport score_with(const NetlistIR& pred, const NetlistIR& truth,
                          const std::vector<int>& dev_map, const NetMap& nets) {
  RecoveryReport r;
  std::size_t kinds_ok = 0, edges_ok = 0, edges_total = 0;
  std::map<std::string, std::string> reverse;
  for (const auto& [p, t] : nets) reverse[t] = p;
  for (std::size_t t = 0; t < truth.devices.size(); ++t) {
    const Device& td = truth.devices[t];
    edges_total += td.ports.size();
    if (dev_map[t] < 0) {
      r.mismatches.push_back(td.id + ": missing from prediction");
      continue;
    }
    const Device& pd = pred.devices[static_cast<std::size_t>(dev_map[t])];
    if (td.kind == pd.kind) {
      ++kinds_ok;
    } else {
      r.mismatches.push_back(td.id + ": kind " + std::string(to_string(td.kind)) +
                             ", predicted " + std::string(to_string(pd.kind)) + " (" + pd.id +
                             ")");
    }
    const int m = matched_ports(td, pd, nets);
    edges_ok += static_cast<std::size_t>(m);
    if (m < static_cast<int>(td.ports.size())) {
      std::ostringstream why;
      why << td.id << ": " << (td.ports.size() - static_cast<std::size_t>(m))
          << " terminal connection(s) differ (predicted " << pd.id << ":";
      for (const auto& p : pd.ports) {
        auto it = nets.find(p.net);
        why << ' ' << to_string(p.role) << '=' << (it == nets.end() ? "?" : it->second);
      }
      why << ")";
      r.mismatches.push_back(why.str());
    }
  }
  std::vector<bool> used(pred.devices.size(), false);
  for (int p : dev_map) {
    if (p >= 0) used[static_cast<std::size_t>(p)] = true;
  }
  for (std::size_t p = 0; p < pred.devices.size(); ++p) {
    if (!used[p]) r.mismatches.push_back(pred.devices[p].id + ": extra predicted device");
  }
  const std::size_t n = truth.devices.size();
  r.component_accuracy = n == 0 ? (pred.devices.empty() ? 1.0 : 0.0)
                                : static_cast<double>(kinds_ok) / static_cast<double>(n);
  r.edge_accuracy = edges_total == 0 ? (pred.devices.empty() ? 1.0 : 0.0)
                                     : static_cast<double>(edges_ok) /
                                           static_cast<double>(edges_total);
  return r;
}

}  // namespace

Correspondence align(const NetlistIR& pred, const NetlistIR& truth) {
  Correspondence c;
  const CanonicalForm cp = canonicalize(pred);
  const CanonicalForm ct = canonicalize(truth);
  if (cp == ct) {
    c.isomorphic = true;
    c.device_map.assign(truth.devices.size(), -1);
    for (std::size_t i = 0; i < ct.device_order.size(); ++i) {
      c.device_map[ct.device_order[i]] = static_cast<int>(cp.device_order[i]);
    }
    for (std::size_t i = 0; i < ct.net_order.size(); ++i) c.net_map[cp.net_order[i]] = ct.net_order[i];
    return c;
  }

  // Alternate device and net assignments until the joint score stalls.
  c.device_map = initial_devices(pred, truth);
  c.net_map = nets_from_devices(pred, truth, c.device_map);
  double best = -1.0;
  for (int iter = 0; iter < 32; ++iter) {
    double total = 0.0;
    auto next = devices_from_nets(pred, truth, c.net_map, total);
    if (total <= best) break;
    best = total;
    c.device_map = std::move(next);
    c.net_map = nets_from_devices(pred, truth, c.device_map);
  }

  // Pairwise-swap refinement escapes assignments locked in by a
  // mis-kinded device.
  auto joint = [&](const std::vector<int>& dm, const NetMap& nm) {
    double total = 0.0;
    for (std::size_t t = 0; t < dm.size(); ++t) {
      if (dm[t] < 0) continue;
      const auto& td = truth.devices[t];
      const auto& pd = pred.devices[static_cast<std::size_t>(dm[t])];
      total += 0.5 * (td.kind == pd.kind) + matched_ports(td, pd, nm);
    }
    return total;
  };
  double current = joint(c.device_map, c.net_map);
  for (bool improved = true; improved;) {
    improved = false;
    for (std::size_t a = 0; a < c.device_map.size(); ++a) {
      for (std::size_t b = a + 1; b < c.device_map.size(); ++b) {
        auto dm = c.device_map;
        std::swap(dm[a], dm[b]);
        auto nm = nets_from_devices(pred, truth, dm);
        const double score = joint(dm, nm);
        if (score > current + 1e-9) {
          current = score;
          c.device_map = std::move(dm);
          c.net_map = std::move(nm);
          improved = true;
        }
      }
    }
  }
  return c;
}

RecoveryReport recovery_score(const NetlistIR& pred, const NetlistIR& truth) {
  const Correspondence c = align(pred, truth);
  RecoveryReport r = score_with(pred, truth, c.device_map, c.net_map);
  r.exact_match = c.isomorphic;
  if (!r.exact_match && r.mismatches.empty()) r.mismatches.push_back("topology differs (not isomorphic)");
  return r;
}

}  // namespace am::netlist
