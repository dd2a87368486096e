#include <algorithm>
#include <nlohmann/json.hpp>
#include <set>

#include "amflow/placement.hpp"
#include "../util/strings.hpp"

namespace am::placement {

using json = nlohmann::json;
using netlist::Device;
using netlist::DeviceKind;
using netlist::PortRole;
using netlist::RailRole;

namespace {

double param(const Device& d, const char* key) {
  const auto it = d.params.find(key);
  return it == d.params.end() ? 0.0 : it->second;
}

bool same_geometry(const Device& a, const Device& b) {
  return param(a, "w") == param(b, "w") && param(a, "l") == param(b, "l");
}

}  // namespace

std::vector<SymmetryPair> derive_symmetry_pairs(const netlist::NetlistIR& ir, bool require_equal_geometry) {
  std::vector<const Device*> mos;
  for (const auto& d : ir.devices)
    if (netlist::is_mos(d.kind)) mos.push_back(&d);
  std::sort(mos.begin(), mos.end(), [](auto* a, auto* b) { return util::natural_less(a->id, b->id); });

  auto is_input = [&](const std::string& net) {
    const auto it = ir.named_rails.find(net);
    return it != ir.named_rails.end() && it->second == RailRole::Input;
  };
  std::set<const Device*> used;
  std::vector<SymmetryPair> out;
  auto scan = [&](auto&& match) {
    for (std::size_t i = 0; i < mos.size(); ++i) {
      for (std::size_t j = i + 1; j < mos.size(); ++j) {
        const Device* a = mos[i];
        const Device* b = mos[j];
        if (used.count(a) || used.count(b) || a->kind != b->kind) continue;
        if (a->net(PortRole::Source) != b->net(PortRole::Source)) continue;
        if (require_equal_geometry && !same_geometry(*a, *b)) continue;
        if (!match(*a, *b)) continue;
        used.insert(a);
        used.insert(b);
        out.emplace_back(a->id, b->id);
      }
    }
  };
  // Differential input pair.
  scan([&](const Device& a, const Device& b) {
    const auto& ga = a.net(PortRole::Gate);
    const auto& gb = b.net(PortRole::Gate);
    return ga != gb && is_input(ga) && is_input(gb);
  });
  // Mirror loads.
  scan([&](const Device& a, const Device& b) {
    return a.net(PortRole::Gate) == b.net(PortRole::Gate) && a.net(PortRole::Drain) != b.net(PortRole::Drain);
  });
  return out;
}

std::size_t Instance::index_of(const std::string& id) const {
  for (std::size_t i = 0; i < blocks.size(); ++i)
    if (blocks[i].id == id) return i;
  throw InvalidInstance("no block '" + id + "'");
}

std::map<std::string, std::vector<std::pair<std::size_t, std::size_t>>> Instance::net_pins() const {
  std::map<std::string, std::vector<std::pair<std::size_t, std::size_t>>> out;
  for (std::size_t b = 0; b < blocks.size(); ++b)
    for (std::size_t k = 0; k < blocks[b].pins.size(); ++k) out[blocks[b].pins[k].net].emplace_back(b, k);
  return out;
}

void validate(const Instance& inst) {
  std::set<std::string> ids;
  for (const auto& b : inst.blocks) {
    if (!(b.w > 0.0) || !(b.h > 0.0)) throw InvalidInstance("block '" + b.id + "' has non-positive size");
    if (!ids.insert(b.id).second) throw InvalidInstance("duplicate block '" + b.id + "'");
    for (const auto& p : b.pins)
      if (p.dx < 0.0 || p.dx > b.w || p.dy < 0.0 || p.dy > b.h)
        throw InvalidInstance("pin of '" + b.id + "' outside its block");
  }
  if (inst.spacing < 0.0) throw InvalidInstance("negative spacing");
  std::set<std::string> paired;
  for (const auto& [a, b] : inst.symmetry_pairs) {
    const auto& ba = inst.blocks[inst.index_of(a)];
    const auto& bb = inst.blocks[inst.index_of(b)];
    if (a == b || !paired.insert(a).second || !paired.insert(b).second)
      throw InvalidInstance("block in more than one symmetry pair");
    if (ba.w != bb.w || ba.h != bb.h) throw InvalidInstance("pair " + a + "/" + b + " differs in size");
  }
}

Instance instance_from_netlist(const netlist::NetlistIR& ir, double spacing) {
  Instance inst;
  inst.spacing = spacing;
  std::vector<const Device*> devs;
  for (const auto& d : ir.devices) devs.push_back(&d);
  std::sort(devs.begin(), devs.end(), [](auto* a, auto* b) { return util::natural_less(a->id, b->id); });
  for (const auto* d : devs) {
    Block b;
    b.id = d->id;
    if (netlist::is_mos(d->kind)) {
      b.w = param(*d, "w") * 1e6 + 2 * kEnclosure;
      b.h = param(*d, "l") * 1e6 + 2 * kEnclosure;
      b.pins = {{d->net(PortRole::Gate), 0.0, b.h / 2},
                {d->net(PortRole::Drain), b.w / 2, b.h},
                {d->net(PortRole::Source), b.w / 2, 0.0}};
    } else if (d->kind == DeviceKind::R || d->kind == DeviceKind::C) {
      b.w = b.h = 2.0;
      b.pins = {{d->ports[0].net, 1.0, 2.0}, {d->ports[1].net, 1.0, 0.0}};
    } else {
      continue;
    }
    inst.blocks.push_back(std::move(b));
  }
  inst.symmetry_pairs = derive_symmetry_pairs(ir, true);
  validate(inst);
  return inst;
}

std::vector<Cell> cells_of(const Instance& inst) {
  std::map<std::size_t, std::size_t> partner;  // first member -> second
  std::set<std::size_t> second;
  for (const auto& [a, b] : inst.symmetry_pairs) {
    partner[inst.index_of(a)] = inst.index_of(b);
    second.insert(inst.index_of(b));
  }
  std::vector<Cell> cells;
  for (std::size_t i = 0; i < inst.blocks.size(); ++i) {
    if (second.count(i)) continue;
    const auto it = partner.find(i);
    cells.push_back({static_cast<int>(i), it == partner.end() ? -1 : static_cast<int>(it->second)});
  }
  return cells;
}

std::string to_json(const Instance& inst) {
  json j;
  j["spacing"] = inst.spacing;
  j["blocks"] = json::array();
  for (const auto& b : inst.blocks) {
    json jb{{"id", b.id}, {"w", b.w}, {"h", b.h}, {"pins", json::array()}};
    for (const auto& p : b.pins) jb["pins"].push_back({{"net", p.net}, {"dx", p.dx}, {"dy", p.dy}});
    j["blocks"].push_back(std::move(jb));
  }
  j["symmetry_pairs"] = json::array();
  for (const auto& [a, b] : inst.symmetry_pairs) j["symmetry_pairs"].push_back({a, b});
  return j.dump(2);
}

Instance instance_from_json(const std::string& text) {
  Instance inst;
  try {
    const json j = json::parse(text);
    inst.spacing = j.value("spacing", 0.0);
    for (const auto& jb : j.at("blocks")) {
      Block b;
      b.id = jb.at("id").get<std::string>();
      b.w = jb.at("w").get<double>();
      b.h = jb.at("h").get<double>();
      for (const auto& jp : jb.value("pins", json::array()))
        b.pins.push_back({jp.at("net").get<std::string>(), jp.at("dx").get<double>(), jp.at("dy").get<double>()});
      inst.blocks.push_back(std::move(b));
    }
    for (const auto& pr : j.value("symmetry_pairs", json::array()))
      inst.symmetry_pairs.emplace_back(pr.at(0).get<std::string>(), pr.at(1).get<std::string>());
  } catch (const json::exception& e) {
    throw InvalidInstance(std::string("malformed instance JSON: ") + e.what());
  }
  validate(inst);
  return inst;
}

std::string to_json(const Placement& p, const Instance& inst) {
  json j;
  j["width"] = p.width;
  j["height"] = p.height;
  j["blocks"] = json::array();
  for (std::size_t i = 0; i < inst.blocks.size(); ++i)
    j["blocks"].push_back({{"id", inst.blocks[i].id},
                           {"x", p.x[i]},
                           {"y", p.y[i]},
                           {"w", p.w_of(inst, i)},
                           {"h", p.h_of(inst, i)},
                           {"rotated", static_cast<bool>(p.rotated[i])}});
  return j.dump(2);
}

Placement placement_from_json(const std::string& text, const Instance& inst) {
  Placement p;
  const std::size_t n = inst.blocks.size();
  p.x.assign(n, 0.0);
  p.y.assign(n, 0.0);
  p.rotated.assign(n, false);
  std::vector<bool> seen(n, false);
  try {
    const json j = json::parse(text);
    p.width = j.at("width").get<double>();
    p.height = j.at("height").get<double>();
    for (const auto& jb : j.at("blocks")) {
      const std::size_t i = inst.index_of(jb.at("id").get<std::string>());
      p.x[i] = jb.at("x").get<double>();
      p.y[i] = jb.at("y").get<double>();
      p.rotated[i] = jb.value("rotated", false);
      seen[i] = true;
    }
  } catch (const json::exception& e) {
    throw InvalidInstance(std::string("malformed placement JSON: ") + e.what());
  }
  for (std::size_t i = 0; i < n; ++i)
    if (!seen[i]) throw InvalidInstance("placement has no position for block " + inst.blocks[i].id);
  return p;
}

}  // namespace am::placement
