#pragma once

// Constructed branch hypotheses around a five-transistor amplifier.

#include <algorithm>
#include <random>
#include <string>

#include "amflow/netlist.hpp"
#include "amflow/reasoning.hpp"

namespace am::testing {

inline const char* kAmp5T =
    "M1 n1 inp tail gnd nfet W=2u L=0.5u\n"
    "M2 out inn tail gnd nfet W=2u L=0.5u\n"
    "M3 n1 n1 vdd vdd pfet W=4u L=0.5u\n"
    "M4 out n1 vdd vdd pfet W=4u L=0.5u\n"
    "M5 tail vb gnd gnd nfet W=8u L=1u\n"
    "Vb vb 0 DC 0.8\n"
    ".model nfet nmos\n.model pfet pmos\n.end\n";

inline netlist::NetlistIR amp5t() { return netlist::parse_spice(kAmp5T); }

// Same circuit with internal nets renamed and devices listed in another order.
inline netlist::NetlistIR relabeled(netlist::NetlistIR ir, const std::string& suffix) {
  for (auto& d : ir.devices) {
    for (auto& p : d.ports)
      if (!ir.named_rails.count(p.net)) p.net += suffix;
    d.id = "X" + d.id + suffix;
  }
  std::reverse(ir.devices.begin(), ir.devices.end());
  ir.rebuild_nets();
  return ir;
}

inline netlist::NetlistIR flip_kind(netlist::NetlistIR ir, std::size_t dev) {
  auto& d = ir.devices[dev];
  if (d.kind == netlist::DeviceKind::NMOS) {
    d.kind = netlist::DeviceKind::PMOS;
    d.model = "pfet";
  } else if (d.kind == netlist::DeviceKind::PMOS) {
    d.kind = netlist::DeviceKind::NMOS;
    d.model = "nfet";
  }
  return ir;
}

inline netlist::NetlistIR rewire(netlist::NetlistIR ir, std::size_t dev, std::size_t port, const std::string& net) {
  ir.devices[dev].ports[port].net = net;
  ir.rebuild_nets();
  return ir;
}

inline reasoning::BranchHypothesis hyp(reasoning::BranchId id, netlist::NetlistIR ir) {
  reasoning::BranchHypothesis h;
  h.id = id;
  h.trace = std::string("trace of ") + std::string(reasoning::to_string(id)) + "\n```spice\n" +
            netlist::serialize(ir) + "\n```\n";
  h.netlist = std::move(ir);
  return h;
}

}  // namespace am::testing
