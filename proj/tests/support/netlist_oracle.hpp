#pragma once

// Test-only netlist generators and a brute-force isomorphism oracle that
// shares no code with the canonicalizer it checks.

#include <algorithm>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "amflow/netlist.hpp"

namespace am::testing {

using netlist::Device;
using netlist::DeviceKind;
using netlist::NetlistIR;
using netlist::Port;
using netlist::PortRole;

inline NetlistIR random_netlist(std::mt19937_64& rng, int max_devices = 6, int max_nets = 4,
                                bool with_params = false) {
  static const std::vector<DeviceKind> kinds{DeviceKind::NMOS, DeviceKind::PMOS, DeviceKind::R,
                                             DeviceKind::C};
  std::uniform_int_distribution<int> n_dev(1, max_devices);
  std::uniform_int_distribution<int> n_nets(2, max_nets);
  std::uniform_int_distribution<std::size_t> pick_kind(0, kinds.size() - 1);
  const int nets = n_nets(rng);
  std::vector<std::string> pool;
  for (int i = 0; i < nets; ++i) pool.push_back("n" + std::to_string(i + 1));
  pool.push_back("vdd");
  pool.push_back("gnd");
  std::uniform_int_distribution<std::size_t> pick_net(0, pool.size() - 1);
  std::uniform_real_distribution<double> unit(0.1, 10.0);

  NetlistIR ir;
  const int count = n_dev(rng);
  std::map<DeviceKind, int> serial;
  for (int d = 0; d < count; ++d) {
    Device dev;
    dev.kind = kinds[pick_kind(rng)];
    const char prefix = netlist::is_mos(dev.kind) ? 'M' : (dev.kind == DeviceKind::R ? 'R' : 'C');
    dev.id = std::string(1, prefix) + std::to_string(++serial[dev.kind] + 10 * static_cast<int>(dev.kind));
    for (PortRole role : netlist::port_roles(dev.kind)) dev.ports.push_back(Port{role, pool[pick_net(rng)]});
    if (netlist::is_mos(dev.kind)) {
      dev.model = dev.kind == DeviceKind::NMOS ? "nfet" : "pfet";
      if (with_params) {
        dev.params["w"] = unit(rng) * 1e-6;
        dev.params["l"] = unit(rng) * 1e-7;
      }
    } else {
      dev.params["value"] = with_params ? unit(rng) * 1e3 : 1e3;
    }
    ir.devices.push_back(std::move(dev));
  }
  ir.rebuild_nets();
  return ir;
}

// Renames every non-rail net, shuffles device order, renames devices and
// flips passive orientation at random.
inline NetlistIR renamed_clone(const NetlistIR& ir, std::mt19937_64& rng) {
  std::vector<std::string> free;
  for (const auto& n : ir.nets) {
    if (!ir.named_rails.count(n)) free.push_back(n);
  }
  std::vector<std::string> fresh = free;
  std::shuffle(fresh.begin(), fresh.end(), rng);
  std::map<std::string, std::string> rename;
  for (std::size_t i = 0; i < free.size(); ++i) rename[free[i]] = "x_" + fresh[i];

  NetlistIR out = ir;
  std::shuffle(out.devices.begin(), out.devices.end(), rng);
  std::bernoulli_distribution flip(0.5);
  int k = 0;
  for (auto& d : out.devices) {
    d.id = d.id.substr(0, 1) + "z" + std::to_string(++k);
    for (auto& p : d.ports) {
      if (auto it = rename.find(p.net); it != rename.end()) p.net = it->second;
    }
    if (d.ports.size() == 2 && d.ports[0].role == PortRole::Terminal && flip(rng)) {
      std::swap(d.ports[0].net, d.ports[1].net);
    }
  }
  out.rebuild_nets();
  return out;
}

// Exhaustive isomorphism: try every bijection of non-rail nets and
// compare device multisets. Rails must map to themselves.
inline bool brute_force_isomorphic(const NetlistIR& a, const NetlistIR& b) {
  if (a.devices.size() != b.devices.size() || a.nets.size() != b.nets.size()) return false;
  std::vector<std::string> rails_a, rails_b, free_a, free_b;
  for (const auto& n : a.nets) (a.named_rails.count(n) ? rails_a : free_a).push_back(n);
  for (const auto& n : b.nets) (b.named_rails.count(n) ? rails_b : free_b).push_back(n);
  if (rails_a != rails_b || free_a.size() != free_b.size()) return false;

  using Sig = std::pair<int, std::vector<std::pair<int, std::string>>>;
  auto signatures = [](const NetlistIR& ir, const std::map<std::string, std::string>& m) {
    std::vector<Sig> out;
    for (const auto& d : ir.devices) {
      Sig s;
      s.first = static_cast<int>(d.kind);
      for (const auto& p : d.ports) {
        auto it = m.find(p.net);
        s.second.emplace_back(static_cast<int>(p.role), it == m.end() ? p.net : it->second);
      }
      std::sort(s.second.begin(), s.second.end());
      out.push_back(std::move(s));
    }
    std::sort(out.begin(), out.end());
    return out;
  };
  const auto target = signatures(b, {});
  std::vector<std::size_t> perm(free_b.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  do {
    std::map<std::string, std::string> m;
    for (std::size_t i = 0; i < free_a.size(); ++i) m[free_a[i]] = free_b[perm[i]];
    if (signatures(a, m) == target) return true;
  } while (std::next_permutation(perm.begin(), perm.end()));
  return false;
}

}  // namespace am::testing
