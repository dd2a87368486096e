#include <cmath>
#include <nlohmann/json.hpp>

#include "amflow/placement.hpp"
#include "amflow/sizing.hpp"
#include "../util/strings.hpp"

namespace am::sizing {

using netlist::DeviceKind;
using netlist::NetlistIR;
using json = nlohmann::json;

std::string_view to_string(Scale s) { return s == Scale::Log ? "log" : "linear"; }

const Dim* ParameterSpace::find(const std::string& name) const {
  for (const auto& d : dims)
    if (d.name == name) return &d;
  return nullptr;
}

Dim* ParameterSpace::find(const std::string& name) {
  for (auto& d : dims)
    if (d.name == name) return &d;
  return nullptr;
}

namespace {

struct ParamRef {
  std::string device;
  std::string key;
};

ParamRef split_name(const std::string& name) {
  const auto dot = name.rfind('.');
  if (dot == std::string::npos || dot == 0 || dot + 1 == name.size())
    throw InvalidSpace("dim name '" + name + "' is not <device>.<param>");
  return {name.substr(0, dot), util::lower(name.substr(dot + 1))};
}

bool param_allowed(DeviceKind kind, const std::string& key) {
  switch (kind) {
    case DeviceKind::NMOS:
    case DeviceKind::PMOS: return key == "w" || key == "l";
    case DeviceKind::R:
    case DeviceKind::C:
    case DeviceKind::L: return key == "value";
    case DeviceKind::V:
    case DeviceKind::I: return key == "dc";
    default: return false;
  }
}

void check_ref(const NetlistIR& ir, const std::string& name) {
  const auto ref = split_name(name);
  const auto* dev = ir.find(ref.device);
  if (!dev) throw InvalidSpace("dim '" + name + "': no device " + ref.device);
  if (!param_allowed(dev->kind, ref.key)) throw InvalidSpace("dim '" + name + "': not a sizable parameter");
}

bool touches_supply(const NetlistIR& ir, const netlist::Device& d) {
  for (const auto& p : d.ports) {
    const auto it = ir.named_rails.find(p.net);
    if (it != ir.named_rails.end() && it->second == netlist::RailRole::VDD) return true;
  }
  return false;
}

}  // namespace

void ParameterSpace::check(const NetlistIR& ir) const {
  std::set<std::string> seen;
  for (const auto& d : dims) {
    if (!(d.lo < d.hi)) throw InvalidSpace("dim '" + d.name + "': lo must be below hi");
    if (d.scale == Scale::Log && !(d.lo > 0.0)) throw InvalidSpace("dim '" + d.name + "': log scale needs lo > 0");
    if (!seen.insert(d.name).second) throw InvalidSpace("duplicate dim '" + d.name + "'");
    check_ref(ir, d.name);
    for (const auto& t : d.ties) {
      if (!seen.insert(t).second) throw InvalidSpace("parameter '" + t + "' bound twice");
      check_ref(ir, t);
    }
  }
}

double to_unit(const Dim& d, double value) { return d.scale == Scale::Log ? std::log(value) : value; }
double from_unit(const Dim& d, double u) { return d.scale == Scale::Log ? std::exp(u) : u; }

bool in_bounds(const ParameterSpace& space, const Point& x) {
  for (const auto& d : space.dims) {
    const auto it = x.find(d.name);
    if (it == x.end() || !(it->second >= d.lo && it->second <= d.hi)) return false;
  }
  return true;
}

NetlistIR apply_point(const NetlistIR& ir, const ParameterSpace& space, const Point& x) {
  NetlistIR out = ir;
  auto set = [&](const std::string& name, double v) {
    const auto ref = split_name(name);
    auto* dev = out.find(ref.device);
    if (!dev) throw InvalidSpace("dim '" + name + "': no device " + ref.device);
    dev->params[ref.key] = v;
  };
  for (const auto& d : space.dims) {
    const auto it = x.find(d.name);
    if (it == x.end()) throw InvalidSpace("point lacks dim '" + d.name + "'");
    set(d.name, it->second);
    for (const auto& t : d.ties) set(t, it->second);
  }
  return out;
}

ParameterSpace fallback_space(const NetlistIR& ir) {
  std::map<std::string, std::string> follower;  // member -> leader
  for (const auto& [a, b] : placement::derive_symmetry_pairs(ir, false)) follower[b] = a;

  std::vector<const netlist::Device*> devs;
  for (const auto& d : ir.devices) devs.push_back(&d);
  std::sort(devs.begin(), devs.end(), [](auto* a, auto* b) { return util::natural_less(a->id, b->id); });

  ParameterSpace s;
  s.provenance = "fallback";
  for (const auto* d : devs) {
    switch (d->kind) {
      case DeviceKind::NMOS:
      case DeviceKind::PMOS: {
        if (follower.count(d->id)) break;
        Dim w{d->id + ".W", 0.42e-6, 100e-6, Scale::Log, "m", {}};
        Dim l{d->id + ".L", 0.15e-6, 4e-6, Scale::Log, "m", {}};
        for (const auto& [member, leader] : follower) {
          if (leader != d->id) continue;
          w.ties.push_back(member + ".W");
          l.ties.push_back(member + ".L");
        }
        s.dims.push_back(std::move(w));
        s.dims.push_back(std::move(l));
        break;
      }
      case DeviceKind::R: s.dims.push_back({d->id + ".value", 100.0, 1e6, Scale::Log, "ohm", {}}); break;
      case DeviceKind::C: s.dims.push_back({d->id + ".value", 10e-15, 10e-12, Scale::Log, "F", {}}); break;
      case DeviceKind::V:
        if (!touches_supply(ir, *d)) s.dims.push_back({d->id + ".dc", 0.0, 1.8, Scale::Linear, "V", {}});
        break;
      case DeviceKind::I: s.dims.push_back({d->id + ".dc", 1e-6, 1e-3, Scale::Log, "A", {}}); break;
      default: break;
    }
  }
  return s;
}

// ---- spec and figure of merit ----

Spec parse_spec(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw InvalidSpec(std::string("spec is not JSON: ") + e.what());
  }
  if (j.is_object() && j.contains("targets")) j = j["targets"];
  if (!j.is_array()) throw InvalidSpec("spec must be a list of targets");
  Spec spec;
  for (const auto& t : j) {
    Target tg;
    try {
      tg.metric = t.at("metric").get<std::string>();
      const auto dir = t.at("dir").get<std::string>();
      if (dir == ">=" || dir == "ge" || dir == "≥") {
        tg.dir = Direction::AtLeast;
      } else if (dir == "<=" || dir == "le" || dir == "≤") {
        tg.dir = Direction::AtMost;
      } else {
        throw InvalidSpec("target '" + tg.metric + "': unknown dir '" + dir + "'");
      }
      tg.threshold = t.at("threshold").get<double>();
      tg.weight = t.value("weight", 1.0);
    } catch (const json::exception& e) {
      throw InvalidSpec(std::string("malformed target: ") + e.what());
    }
    if (!(tg.weight > 0.0)) throw InvalidSpec("target '" + tg.metric + "': weight must be positive");
    if (!(tg.threshold > 0.0)) throw InvalidSpec("target '" + tg.metric + "': threshold must be positive");
    spec.targets.push_back(tg);
  }
  return spec;
}

std::string to_json(const Spec& spec) {
  json j = json::array();
  for (const auto& t : spec.targets)
    j.push_back({{"metric", t.metric},
                 {"dir", t.dir == Direction::AtLeast ? ">=" : "<="},
                 {"threshold", t.threshold},
                 {"weight", t.weight}});
  return j.dump(2);
}

MissingMetric::MissingMetric(const std::string& name) : Error("metric '" + name + "' missing from evaluation") {}

namespace {

double metric_of(const Metrics& m, const std::string& name) {
  const auto it = m.find(name);
  if (it == m.end()) throw MissingMetric(name);
  return it->second;
}

}  // namespace

double fom(const Metrics& metrics, const Spec& spec) {
  double total = 0.0;
  for (const auto& t : spec.targets) {
    const double v = metric_of(metrics, t.metric);
    if (std::isnan(v)) return kFailedFom;
    double ratio;
    if (t.dir == Direction::AtLeast) {
      ratio = v / t.threshold;
    } else {
      ratio = v <= 0.0 ? 1.0 : t.threshold / v;
    }
    total += t.weight * std::min(1.0, ratio);
  }
  return total;
}

bool spec_met(const Metrics& metrics, const Spec& spec) {
  for (const auto& t : spec.targets) {
    const double v = metric_of(metrics, t.metric);
    if (t.dir == Direction::AtLeast ? !(v >= t.threshold) : !(v <= t.threshold)) return false;
  }
  return true;
}

}  // namespace am::sizing
