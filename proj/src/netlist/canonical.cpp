#include <algorithm>
#include <map>
#include <numeric>
#include <sstream>

#include "amflow/digest.hpp"
#include "amflow/netlist.hpp"

namespace am::netlist {

namespace {

// Bipartite device/net graph; edge labels are port roles.
struct IncidenceGraph {
  std::size_t n_dev = 0;
  std::size_t n_net = 0;
  std::vector<std::string> net_names;
  std::vector<std::vector<std::pair<int, int>>> adj;  // (role, neighbour)
  std::vector<int> initial;
};

IncidenceGraph build_graph(const NetlistIR& ir) {
  IncidenceGraph g;
  g.n_dev = ir.devices.size();
  g.net_names.assign(ir.nets.begin(), ir.nets.end());
  g.n_net = g.net_names.size();
  std::map<std::string, int> net_index;
  for (std::size_t i = 0; i < g.n_net; ++i) net_index[g.net_names[i]] = static_cast<int>(i);

  const std::size_t n = g.n_dev + g.n_net;
  g.adj.resize(n);
  std::vector<std::string> keys(n);
  for (std::size_t d = 0; d < g.n_dev; ++d) {
    const Device& dev = ir.devices[d];
    keys[d] = "d:" + std::string(to_string(dev.kind));
    for (const auto& port : dev.ports) {
      const int net = static_cast<int>(g.n_dev) + net_index.at(port.net);
      const int role = static_cast<int>(port.role);
      g.adj[d].emplace_back(role, net);
      g.adj[static_cast<std::size_t>(net)].emplace_back(role, static_cast<int>(d));
    }
  }
  for (std::size_t k = 0; k < g.n_net; ++k) {
    const auto& name = g.net_names[k];
    keys[g.n_dev + k] = ir.named_rails.count(name) ? "r:" + name : "n";
  }
  // "d:*" sorts before "n" and "r:*", so device colours stay below net colours.
  std::vector<std::string> uniq = keys;
  std::sort(uniq.begin(), uniq.end());
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
  g.initial.resize(n);
  for (std::size_t v = 0; v < n; ++v) {
    g.initial[v] = static_cast<int>(std::lower_bound(uniq.begin(), uniq.end(), keys[v]) -
                                    uniq.begin());
  }
  return g;
}

std::size_t count_colors(const std::vector<int>& colors) {
  std::vector<int> c = colors;
  std::sort(c.begin(), c.end());
  return static_cast<std::size_t>(std::unique(c.begin(), c.end()) - c.begin());
}

// Colour refinement to the coarsest equitable partition finer than
// `colors`. New ids are ranks of (old colour, neighbour multiset), so the
// relative order of existing cells is preserved.
void refine(const IncidenceGraph& g, std::vector<int>& colors) {
  const std::size_t n = colors.size();
  using Signature = std::pair<int, std::vector<std::pair<int, int>>>;
  std::size_t cells = count_colors(colors);
  std::vector<Signature> sig(n);
  std::vector<std::size_t> idx(n);
  for (;;) {
    for (std::size_t v = 0; v < n; ++v) {
      sig[v].first = colors[v];
      auto& nb = sig[v].second;
      nb.clear();
      for (const auto& [role, u] : g.adj[v]) nb.emplace_back(role, colors[static_cast<std::size_t>(u)]);
      std::sort(nb.begin(), nb.end());
    }
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return sig[a] < sig[b]; });
    int next = -1;
    for (std::size_t k = 0; k < n; ++k) {
      if (k == 0 || sig[idx[k]] != sig[idx[k - 1]]) ++next;
      colors[idx[k]] = next;
    }
    const std::size_t now = static_cast<std::size_t>(next + 1);
    if (now == cells) return;
    cells = now;
  }
}

struct Leaf {
  std::string certificate;
  std::vector<std::size_t> device_order;
  std::vector<std::size_t> net_order;
};

Leaf make_leaf(const NetlistIR& ir, const IncidenceGraph& g, const std::vector<int>& colors) {
  Leaf leaf;
  leaf.device_order.resize(g.n_dev);
  leaf.net_order.resize(g.n_net);
  std::vector<int> net_rank(g.n_net);
  for (std::size_t d = 0; d < g.n_dev; ++d) {
    leaf.device_order[static_cast<std::size_t>(colors[d])] = d;
  }
  for (std::size_t k = 0; k < g.n_net; ++k) {
    const int rank = colors[g.n_dev + k] - static_cast<int>(g.n_dev);
    net_rank[k] = rank;
    leaf.net_order[static_cast<std::size_t>(rank)] = k;
  }
  std::map<std::string, int> name_to_net;
  for (std::size_t k = 0; k < g.n_net; ++k) name_to_net[g.net_names[k]] = static_cast<int>(k);

  std::ostringstream out;
  for (std::size_t d : leaf.device_order) {
    const Device& dev = ir.devices[d];
    std::vector<std::pair<int, int>> ports;
    for (const auto& p : dev.ports) {
      ports.emplace_back(static_cast<int>(p.role),
                         net_rank[static_cast<std::size_t>(name_to_net.at(p.net))]);
    }
    std::sort(ports.begin(), ports.end());
    out << to_string(dev.kind) << '(';
    for (std::size_t i = 0; i < ports.size(); ++i) {
      out << (i ? "," : "") << ports[i].first << ':' << ports[i].second;
    }
    out << ')';
  }
  out << '|';
  for (std::size_t k : leaf.net_order) {
    const auto& name = g.net_names[k];
    out << (ir.named_rails.count(name) ? name : std::string("~")) << ';';
  }
  leaf.certificate = out.str();
  return leaf;
}

// Individualisation-refinement search; keeps the lexicographically
// smallest certificate over all leaves.
void search(const NetlistIR& ir, const IncidenceGraph& g, std::vector<int> colors,
            std::optional<Leaf>& best) {
  refine(g, colors);
  const std::size_t n = colors.size();
  std::vector<std::size_t> counts(n, 0);
  for (int c : colors) ++counts[static_cast<std::size_t>(c)];
  int target = -1;
  for (std::size_t c = 0; c < n; ++c) {
    if (counts[c] > 1) {
      target = static_cast<int>(c);
      break;
    }
  }
  if (target < 0) {
    Leaf leaf = make_leaf(ir, g, colors);
    if (!best || leaf.certificate < best->certificate) best = std::move(leaf);
    return;
  }
  for (std::size_t v = 0; v < n; ++v) {
    if (colors[v] != target) continue;
    std::vector<int> next(n);
    for (std::size_t u = 0; u < n; ++u) next[u] = 2 * colors[u] + 1;
    next[v] = 2 * colors[v];
    search(ir, g, std::move(next), best);
  }
}

}  // namespace

std::string CanonicalForm::hash() const { return sha256_hex(certificate); }

CanonicalForm canonicalize(const NetlistIR& ir) {
  const IncidenceGraph g = build_graph(ir);
  std::optional<Leaf> best;
  search(ir, g, g.initial, best);
  CanonicalForm form;
  form.certificate = best->certificate;
  form.device_order = best->device_order;
  for (std::size_t k : best->net_order) form.net_order.push_back(g.net_names[k]);
  return form;
}

}  // namespace am::netlist
