#include <Eigen/Dense>
#include <cmath>

#include "amflow/placement.hpp"
#include "amflow/sizing.hpp"
#include "../util/strings.hpp"

namespace am::sizing {

using netlist::Device;
using netlist::DeviceKind;
using netlist::NetlistIR;
using netlist::PortRole;
using netlist::RailRole;

std::string_view to_string(Topology t) {
  switch (t) {
    case Topology::CommonSource: return "common_source";
    case Topology::DiffPair5T: return "diff_pair_5t";
    case Topology::Cascode: return "cascode";
    case Topology::Unsupported: return "unsupported";
  }
  return "unsupported";
}

namespace {

bool has_role(const NetlistIR& ir, const std::string& net, RailRole role) {
  const auto it = ir.named_rails.find(net);
  return it != ir.named_rails.end() && it->second == role;
}

bool is_ground(const NetlistIR& ir, const std::string& net) { return net == "0" || has_role(ir, net, RailRole::GND); }

std::vector<const Device*> mos_of(const NetlistIR& ir) {
  std::vector<const Device*> out;
  for (const auto& d : ir.devices)
    if (netlist::is_mos(d.kind)) out.push_back(&d);
  return out;
}

}  // namespace

Topology classify_topology(const NetlistIR& ir) {
  bool has_out = false, has_in = false;
  for (const auto& [net, role] : ir.named_rails) {
    has_out |= role == RailRole::Output;
    has_in |= role == RailRole::Input;
  }
  if (!has_out || !has_in) return Topology::Unsupported;
  for (const auto& d : ir.devices) {
    switch (d.kind) {
      case DeviceKind::NMOS:
      case DeviceKind::PMOS:
      case DeviceKind::R:
      case DeviceKind::C:
      case DeviceKind::V:
      case DeviceKind::I: break;
      default: return Topology::Unsupported;
    }
  }
  const auto mos = mos_of(ir);
  auto gated_by_input = [&](const Device* d) { return has_role(ir, d->net(PortRole::Gate), RailRole::Input); };

  if (mos.size() == 5) {
    const auto pairs = placement::derive_symmetry_pairs(ir, false);
    const Device* in_a = nullptr;
    bool mirror = false;
    for (const auto& [a, b] : pairs) {
      const Device* da = ir.find(a);
      if (gated_by_input(da)) {
        in_a = da;
      } else {
        mirror = true;
      }
    }
    if (in_a && mirror) {
      const std::string& tail = in_a->net(PortRole::Source);
      for (const auto* d : mos)
        if (d->net(PortRole::Drain) == tail && d->kind == in_a->kind) return Topology::DiffPair5T;
    }
  }
  if (mos.size() <= 4) {
    for (const auto* a : mos) {
      if (!gated_by_input(a)) continue;
      for (const auto* b : mos) {
        if (b == a || b->kind != a->kind || gated_by_input(b)) continue;
        if (b->net(PortRole::Source) == a->net(PortRole::Drain) &&
            has_role(ir, b->net(PortRole::Drain), RailRole::Output))
          return Topology::Cascode;
      }
    }
  }
  if (mos.size() <= 2) {
    for (const auto* a : mos) {
      if (!gated_by_input(a) || !has_role(ir, a->net(PortRole::Drain), RailRole::Output)) continue;
      const auto& s = a->net(PortRole::Source);
      if ((a->kind == DeviceKind::NMOS && is_ground(ir, s)) || (a->kind == DeviceKind::PMOS && has_role(ir, s, RailRole::VDD)))
        return Topology::CommonSource;
    }
  }
  return Topology::Unsupported;
}

int input_polarity(std::string_view net) {
  const std::string l = util::lower(net);
  auto ends = [&](std::string_view suf) { return l.size() >= suf.size() && l.compare(l.size() - suf.size(), suf.size(), suf) == 0; };
  const bool neg = ends("-") || ends("nn") || ends("_n") || ends("inm") || l == "vim" ||
                   l.find("neg") != std::string::npos || l.find("minus") != std::string::npos;
  return neg ? -1 : 1;
}

double common_source_gain_db(double gm, double ro, double r_load) {
  const double r = std::isinf(r_load) ? ro : ro * r_load / (ro + r_load);
  return 20.0 * std::log10(gm * r);
}

namespace {

constexpr double kGmin = 1e-12;

struct VSource {
  int pos = -1;  // node index, -1 = ground
  int neg = -1;
  double dc = 0.0;
  double ac = 0.0;
  bool supply = false;
};

struct MosEval {
  double i = 0.0;  // into drain terminal
  double dvd = 0.0, dvg = 0.0, dvs = 0.0;
  double vov = 0.0, vds = 0.0, gm = 0.0, gds = 0.0;
  std::string region;
};

// Square law with exp(lambda*Vds) channel-length modulation, n-type
// internals; p-type handled by voltage and current sign flips.
MosEval eval_mos(double vd, double vg, double vs, double polarity, double beta, double vth, double lambda) {
  vd *= polarity;
  vg *= polarity;
  vs *= polarity;
  MosEval e;
  const bool reversed = vd < vs;
  const double d = reversed ? vs : vd;
  const double s = reversed ? vd : vs;
  const double vgs = vg - s, vds = d - s;
  const double vov = vgs - vth;
  double f = 0.0, gm = 0.0, gds = 0.0;
  if (vov <= 0.0) {
    e.region = "cutoff";
  } else {
    const double ex = std::exp(lambda * vds);
    if (vds >= vov) {
      f = 0.5 * beta * vov * vov * ex;
      gm = beta * vov * ex;
      gds = lambda * f;
      e.region = "saturation";
    } else {
      f = beta * (vov * vds - 0.5 * vds * vds) * ex;
      gm = beta * vds * ex;
      gds = beta * (vov - vds) * ex + lambda * f;
      e.region = "triode";
    }
  }
  e.vov = vov;
  e.vds = vds;
  e.gm = gm;
  e.gds = gds;
  // Current from internal drain to internal source is f.
  if (!reversed) {
    e.i = f;
    e.dvd = gds;
    e.dvg = gm;
    e.dvs = -gm - gds;
  } else {
    e.i = -f;
    e.dvd = gm + gds;
    e.dvg = -gm;
    e.dvs = -gds;
  }
  e.i *= polarity;
  return e;
}

struct Circuit {
  std::map<std::string, int> node;
  std::vector<std::string> names;
  std::vector<VSource> vsrc;
  const NetlistIR* ir = nullptr;
  ProcessModel pm;
  int output = -1;

  int n() const { return static_cast<int>(names.size()); }
  int size() const { return n() + static_cast<int>(vsrc.size()); }

  int idx(const std::string& net) const {
    if (is_ground(*ir, net)) return -1;
    return node.at(net);
  }

  double v(const Eigen::VectorXd& x, int i) const { return i < 0 ? 0.0 : x[i]; }
};

Circuit build_circuit(const NetlistIR& ir, const ProcessModel& pm) {
  Circuit c;
  c.ir = &ir;
  c.pm = pm;
  std::set<std::string> nets;
  for (const auto& d : ir.devices)
    for (const auto& p : d.ports)
      if (!is_ground(ir, p.net)) nets.insert(p.net);
  for (const auto& net : nets) {
    c.node[net] = c.n();
    c.names.push_back(net);
  }
  std::set<std::string> driven;
  for (const auto& d : ir.devices) {
    if (d.kind == DeviceKind::BJT_NPN || d.kind == DeviceKind::BJT_PNP || d.kind == DeviceKind::D)
      throw UnsupportedTopology("analytic model has no " + std::string(netlist::to_string(d.kind)) + " device");
    if (d.kind != DeviceKind::V) continue;
    VSource s;
    s.pos = c.idx(d.ports[0].net);
    s.neg = c.idx(d.ports[1].net);
    const auto it = d.params.find("dc");
    s.dc = it == d.params.end() ? 0.0 : it->second;
    s.supply = has_role(ir, d.ports[0].net, RailRole::VDD) || has_role(ir, d.ports[1].net, RailRole::VDD);
    c.vsrc.push_back(s);
    driven.insert(d.ports[0].net);
    driven.insert(d.ports[1].net);
  }
  for (const auto& net : nets) {
    const auto role = ir.named_rails.find(net);
    if (role == ir.named_rails.end() || driven.count(net)) continue;
    if (role->second == RailRole::VDD) {
      c.vsrc.push_back({c.node[net], -1, pm.vdd, 0.0, true});
    } else if (role->second == RailRole::Input) {
      c.vsrc.push_back({c.node[net], -1, pm.input_cm, 0.5 * input_polarity(net), false});
    }
  }
  std::vector<VSource*> inputs;
  for (auto& s : c.vsrc)
    if (s.ac != 0.0) inputs.push_back(&s);
  if (inputs.size() == 1) inputs.front()->ac = inputs.front()->ac > 0 ? 1.0 : -1.0;
  for (const auto& net : nets)
    if (has_role(ir, net, RailRole::Output)) c.output = c.node[net];
  return c;
}

double param(const Device& d, const char* key, double fallback) {
  const auto it = d.params.find(key);
  return it == d.params.end() ? fallback : it->second;
}

struct MosGeom {
  double beta, vth, lambda, polarity;
};

MosGeom geom(const Device& d, const ProcessModel& pm) {
  const double w = param(d, "w", 1e-6), l = param(d, "l", 1e-6);
  if (!(w > 0.0) || !(l > 0.0)) throw Error("device " + d.id + " has non-positive geometry");
  const bool n = d.kind == DeviceKind::NMOS;
  return {(n ? pm.kp_n : pm.kp_p) * w / l, n ? pm.vth_n : pm.vth_p, pm.lambda_l / l, n ? 1.0 : -1.0};
}

// KCL residual (currents leaving each node) and Jacobian. `scale` ramps
// independent sources for source stepping.
void stamp(const Circuit& c, const Eigen::VectorXd& x, double scale, Eigen::VectorXd& f, Eigen::MatrixXd& j) {
  const int n = c.n();
  f.setZero(c.size());
  j.setZero(c.size(), c.size());
  auto add_f = [&](int i, double val) {
    if (i >= 0) f[i] += val;
  };
  auto add_j = [&](int r, int col, double val) {
    if (r >= 0 && col >= 0) j(r, col) += val;
  };
  for (int i = 0; i < n; ++i) {
    f[i] += kGmin * x[i];
    j(i, i) += kGmin;
  }
  for (const auto& d : c.ir->devices) {
    switch (d.kind) {
      case DeviceKind::R:
      case DeviceKind::L: {
        const double r = d.kind == DeviceKind::R ? param(d, "value", 1e3) : 1e-3;
        const double g = 1.0 / std::max(r, 1e-6);
        const int a = c.idx(d.ports[0].net), b = c.idx(d.ports[1].net);
        const double i = g * (c.v(x, a) - c.v(x, b));
        add_f(a, i);
        add_f(b, -i);
        add_j(a, a, g);
        add_j(a, b, -g);
        add_j(b, a, -g);
        add_j(b, b, g);
        break;
      }
      case DeviceKind::I: {
        const double i = scale * param(d, "dc", 0.0);
        add_f(c.idx(d.ports[0].net), i);
        add_f(c.idx(d.ports[1].net), -i);
        break;
      }
      case DeviceKind::NMOS:
      case DeviceKind::PMOS: {
        const auto g = geom(d, c.pm);
        const int nd = c.idx(d.net(PortRole::Drain)), ng = c.idx(d.net(PortRole::Gate)), ns = c.idx(d.net(PortRole::Source));
        const auto e = eval_mos(c.v(x, nd), c.v(x, ng), c.v(x, ns), g.polarity, g.beta, g.vth, g.lambda);
        add_f(nd, e.i);
        add_f(ns, -e.i);
        add_j(nd, nd, e.dvd);
        add_j(nd, ng, e.dvg);
        add_j(nd, ns, e.dvs);
        add_j(ns, nd, -e.dvd);
        add_j(ns, ng, -e.dvg);
        add_j(ns, ns, -e.dvs);
        break;
      }
      default: break;
    }
  }
  for (std::size_t k = 0; k < c.vsrc.size(); ++k) {
    const auto& s = c.vsrc[k];
    const int row = n + static_cast<int>(k);
    const double ib = x[row];  // current from pos through the source to neg
    add_f(s.pos, ib);
    add_f(s.neg, -ib);
    add_j(s.pos, row, 1.0);
    add_j(s.neg, row, -1.0);
    f[row] = c.v(x, s.pos) - c.v(x, s.neg) - scale * s.dc;
    add_j(row, s.pos, 1.0);
    add_j(row, s.neg, -1.0);
  }
}

bool newton(const Circuit& c, Eigen::VectorXd& x, double scale) {
  Eigen::VectorXd f;
  Eigen::MatrixXd j;
  for (int it = 0; it < 300; ++it) {
    stamp(c, x, scale, f, j);
    Eigen::VectorXd dx = j.fullPivLu().solve(-f);
    if (!dx.allFinite()) return false;
    double step = 0.0;
    for (int i = 0; i < c.n(); ++i) step = std::max(step, std::abs(dx[i]));
    const double damp = step > 0.2 ? 0.2 / step : 1.0;
    x += damp * dx;
    if (step < 1e-12 || (damp == 1.0 && step < 1e-10)) {
      stamp(c, x, scale, f, j);
      return f.cwiseAbs().maxCoeff() < 1e-9;
    }
  }
  return false;
}

Eigen::VectorXd solve_dc(const Circuit& c) {
  Eigen::VectorXd x = Eigen::VectorXd::Constant(c.size(), 0.5 * c.pm.vdd);
  for (std::size_t k = 0; k < c.vsrc.size(); ++k) x[c.n() + static_cast<int>(k)] = 0.0;
  Eigen::VectorXd start = x;
  if (newton(c, x, 1.0)) return x;
  x = start;
  for (int step = 1; step <= 20; ++step)
    if (!newton(c, x, step / 20.0)) throw Error("operating point did not converge");
  return x;
}

}  // namespace

OperatingPoint solve_operating_point(const NetlistIR& ir, const ProcessModel& pm) {
  const Circuit c = build_circuit(ir, pm);
  const Eigen::VectorXd x = solve_dc(c);
  OperatingPoint op;
  for (int i = 0; i < c.n(); ++i) op.node_voltage[c.names[static_cast<std::size_t>(i)]] = x[i];
  for (const auto& [net, role] : ir.named_rails)
    if (is_ground(ir, net)) op.node_voltage[net] = 0.0;
  for (const auto& d : ir.devices) {
    if (!netlist::is_mos(d.kind)) continue;
    const auto g = geom(d, pm);
    const auto e = eval_mos(c.v(x, c.idx(d.net(PortRole::Drain))), c.v(x, c.idx(d.net(PortRole::Gate))),
                            c.v(x, c.idx(d.net(PortRole::Source))), g.polarity, g.beta, g.vth, g.lambda);
    op.devices.push_back({d.id, std::abs(e.i), e.vov, e.vds, e.gm, e.gds > 0.0 ? 1.0 / e.gds : INFINITY, e.region});
  }
  for (std::size_t k = 0; k < c.vsrc.size(); ++k) {
    // Delivered current flows out of the positive terminal: -ib.
    const double delivered = -x[c.n() + static_cast<int>(k)];
    if (c.vsrc[k].supply) op.supply_current += delivered;
  }
  return op;
}

Metrics analytic_evaluate(const NetlistIR& ir_in, const ParameterSpace& space, const Point& x_pt,
                          const ProcessModel& pm) {
  const NetlistIR ir = space.dims.empty() ? ir_in : apply_point(ir_in, space, x_pt);
  const Topology topo = classify_topology(ir);
  if (topo == Topology::Unsupported) throw UnsupportedTopology("circuit matches no analytic template");
  const Circuit c = build_circuit(ir, pm);
  if (c.output < 0) throw UnsupportedTopology("no output net");
  const Eigen::VectorXd x = solve_dc(c);

  Eigen::VectorXd f;
  Eigen::MatrixXd j;
  stamp(c, x, 1.0, f, j);
  const auto lu = j.fullPivLu();

  // Low-frequency transfer: AC stimulus on input sources only.
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(c.size());
  for (std::size_t k = 0; k < c.vsrc.size(); ++k) rhs[c.n() + static_cast<int>(k)] = c.vsrc[k].ac;
  const double a0 = std::abs(lu.solve(rhs)[c.output]);

  // Output resistance with inputs quiet.
  Eigen::VectorXd probe = Eigen::VectorXd::Zero(c.size());
  probe[c.output] = 1.0;
  const double r_out = std::abs(lu.solve(probe)[c.output]);

  double c_out = pm.c_load;
  const std::string out_net = c.names[static_cast<std::size_t>(c.output)];
  for (const auto& d : ir.devices)
    if (d.kind == DeviceKind::C && (d.ports[0].net == out_net || d.ports[1].net == out_net))
      c_out += param(d, "value", 0.0);

  double power = 0.0;
  for (std::size_t k = 0; k < c.vsrc.size(); ++k) power += c.vsrc[k].dc * -x[c.n() + static_cast<int>(k)];

  double area = 0.0;
  std::size_t sat = 0, mos = 0;
  for (const auto& d : ir.devices) {
    if (!netlist::is_mos(d.kind)) continue;
    ++mos;
    area += param(d, "w", 0.0) * param(d, "l", 0.0) * 1e12;
    const auto g = geom(d, pm);
    const auto e = eval_mos(c.v(x, c.idx(d.net(PortRole::Drain))), c.v(x, c.idx(d.net(PortRole::Gate))),
                            c.v(x, c.idx(d.net(PortRole::Source))), g.polarity, g.beta, g.vth, g.lambda);
    sat += e.region == "saturation";
  }

  Metrics m;
  m["gain_db"] = a0 > 0.0 ? 20.0 * std::log10(a0) : -300.0;
  m["gbw_hz"] = a0 / (2.0 * M_PI * r_out * c_out);
  m["power_w"] = power;
  m["area_um2"] = area;
  m["sat_fraction"] = mos ? static_cast<double>(sat) / static_cast<double>(mos) : 1.0;
  return m;
}

}  // namespace am::sizing
