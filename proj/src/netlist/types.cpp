#include "amflow/netlist.hpp"
#include "../util/strings.hpp"

namespace am::netlist {

std::string_view to_string(DeviceKind kind) {
  switch (kind) {
    case DeviceKind::NMOS: return "NMOS";
    case DeviceKind::PMOS: return "PMOS";
    case DeviceKind::BJT_NPN: return "BJT_NPN";
    case DeviceKind::BJT_PNP: return "BJT_PNP";
    case DeviceKind::R: return "R";
    case DeviceKind::C: return "C";
    case DeviceKind::L: return "L";
    case DeviceKind::V: return "V";
    case DeviceKind::I: return "I";
    case DeviceKind::D: return "D";
  }
  return "?";
}

std::string_view to_string(PortRole role) {
  switch (role) {
    case PortRole::Drain: return "D";
    case PortRole::Gate: return "G";
    case PortRole::Source: return "S";
    case PortRole::Bulk: return "B";
    case PortRole::Collector: return "C";
    case PortRole::Base: return "B";
    case PortRole::Emitter: return "E";
    case PortRole::Pos: return "+";
    case PortRole::Neg: return "-";
    case PortRole::Anode: return "A";
    case PortRole::Cathode: return "K";
    case PortRole::Terminal: return "T";
  }
  return "?";
}

std::string_view to_string(RailRole role) {
  switch (role) {
    case RailRole::VDD: return "VDD";
    case RailRole::GND: return "GND";
    case RailRole::Input: return "input";
    case RailRole::Output: return "output";
  }
  return "?";
}

std::optional<DeviceKind> kind_from_string(std::string_view s) {
  for (DeviceKind k : {DeviceKind::NMOS, DeviceKind::PMOS, DeviceKind::BJT_NPN,
                       DeviceKind::BJT_PNP, DeviceKind::R, DeviceKind::C, DeviceKind::L,
                       DeviceKind::V, DeviceKind::I, DeviceKind::D}) {
    if (util::iequals(to_string(k), s)) return k;
  }
  return std::nullopt;
}

bool is_mos(DeviceKind kind) { return kind == DeviceKind::NMOS || kind == DeviceKind::PMOS; }
bool is_bjt(DeviceKind kind) {
  return kind == DeviceKind::BJT_NPN || kind == DeviceKind::BJT_PNP;
}

const std::vector<PortRole>& port_roles(DeviceKind kind) {
  static const std::vector<PortRole> mos{PortRole::Drain, PortRole::Gate, PortRole::Source,
                                         PortRole::Bulk};
  static const std::vector<PortRole> bjt{PortRole::Collector, PortRole::Base, PortRole::Emitter};
  static const std::vector<PortRole> passive{PortRole::Terminal, PortRole::Terminal};
  static const std::vector<PortRole> source{PortRole::Pos, PortRole::Neg};
  static const std::vector<PortRole> diode{PortRole::Anode, PortRole::Cathode};
  switch (kind) {
    case DeviceKind::NMOS:
    case DeviceKind::PMOS: return mos;
    case DeviceKind::BJT_NPN:
    case DeviceKind::BJT_PNP: return bjt;
    case DeviceKind::R:
    case DeviceKind::C:
    case DeviceKind::L: return passive;
    case DeviceKind::V:
    case DeviceKind::I: return source;
    case DeviceKind::D: return diode;
  }
  return passive;
}

const std::string& Device::net(PortRole role) const {
  for (const auto& p : ports) {
    if (p.role == role) return p.net;
  }
  throw InvalidNetlist(id + " has no port " + std::string(to_string(role)));
}

const RailConfig& RailConfig::defaults() {
  static const RailConfig config{{
      {"vdd", RailRole::VDD},   {"vcc", RailRole::VDD},    {"avdd", RailRole::VDD},
      {"gnd", RailRole::GND},   {"vss", RailRole::GND},    {"agnd", RailRole::GND},
      {"in", RailRole::Input},  {"vin", RailRole::Input},  {"inp", RailRole::Input},
      {"inn", RailRole::Input}, {"vinp", RailRole::Input}, {"vinn", RailRole::Input},
      {"vip", RailRole::Input}, {"vim", RailRole::Input},  {"out", RailRole::Output},
      {"vout", RailRole::Output}, {"outp", RailRole::Output}, {"outn", RailRole::Output},
      {"voutp", RailRole::Output}, {"voutn", RailRole::Output},
  }};
  return config;
}

std::optional<RailRole> RailConfig::role_of(std::string_view net) const {
  auto it = names.find(util::lower(net));
  if (it == names.end()) return std::nullopt;
  return it->second;
}

const Device* NetlistIR::find(std::string_view id) const {
  for (const auto& d : devices) {
    if (util::iequals(d.id, id)) return &d;
  }
  return nullptr;
}

Device* NetlistIR::find(std::string_view id) {
  for (auto& d : devices) {
    if (util::iequals(d.id, id)) return &d;
  }
  return nullptr;
}

void NetlistIR::rebuild_nets(const RailConfig& rails) {
  nets.clear();
  named_rails.clear();
  for (const auto& d : devices) {
    for (const auto& p : d.ports) nets.insert(p.net);
  }
  for (const auto& n : nets) {
    if (auto role = rails.role_of(n)) named_rails[n] = *role;
  }
}

}  // namespace am::netlist
