#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <set>
#include <tuple>

#include "amflow/routing.hpp"

namespace am::routing {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

int manhattan(const GridCell& a, const GridCell& b) { return std::abs(a.ix - b.ix) + std::abs(a.iy - b.iy); }

void neighbours_of(const GridCell& c, GridCell* out) {
  out[0] = {c.layer, c.ix + 1, c.iy};
  out[1] = {c.layer, c.ix - 1, c.iy};
  out[2] = {c.layer, c.ix, c.iy + 1};
  out[3] = {c.layer, c.ix, c.iy - 1};
  out[4] = {1 - c.layer, c.ix, c.iy};
}

// Fills length, vias and cost from the segments.
void measure(Route& r, const RoutingGrid& grid, const SearchSpace& space, const RouterWeights& w) {
  r.length_um = 0.0;
  r.via_count = 0;
  r.cost = 0.0;
  for (const auto& seg : r.segments)
    for (std::size_t i = 1; i < seg.size(); ++i) {
      if (seg[i].layer != seg[i - 1].layer)
        ++r.via_count;
      else
        r.length_um += grid.rules.pitch;
      r.cost += step_cost(seg[i - 1], seg[i], space, grid, w);
    }
}

std::optional<Route> route_in(const RoutingGrid& grid, const SearchSpace& space, int net, std::size_t root,
                              const RouterWeights& w) {
  const auto& pins = grid.pins[static_cast<std::size_t>(net)];
  if (pins.empty()) return std::nullopt;
  root = std::min(root, pins.size() - 1);
  for (const auto& p : pins)
    if (space.blocked[grid.index(p)]) return std::nullopt;

  Route r;
  r.net = grid.nets[static_cast<std::size_t>(net)];
  std::vector<GridCell> tree{pins[root]};
  std::set<GridCell> in_tree{pins[root]};
  std::vector<bool> done(pins.size(), false);
  done[root] = true;
  for (std::size_t left = pins.size() - 1; left > 0; --left) {
    std::size_t next = pins.size();
    int best = std::numeric_limits<int>::max();
    for (std::size_t k = 0; k < pins.size(); ++k) {
      if (done[k]) continue;
      for (const auto& t : tree) {
        const int d = manhattan(t, pins[k]) + std::abs(t.layer - pins[k].layer);
        if (d < best) {
          best = d;
          next = k;
        }
      }
    }
    done[next] = true;
    if (in_tree.count(pins[next])) continue;
    auto found = astar(grid, space, tree, pins[next], w);
    if (!found) return std::nullopt;
    for (const auto& c : found->path)
      if (in_tree.insert(c).second) tree.push_back(c);
    r.segments.push_back(std::move(found->path));
  }
  measure(r, grid, space, w);
  return r;
}

void commit(RoutingGrid& grid, const Route& r, int net) {
  for (const auto& seg : r.segments)
    for (const auto& c : seg) grid.owner[grid.index(c)] = net;
}

}  // namespace

double step_cost(const GridCell& a, const GridCell& b, const SearchSpace& space, const RoutingGrid& grid,
                 const RouterWeights& w) {
  double c = 1.0 + space.extra[grid.index(b)];
  if (a.layer != b.layer)
    c += w.via;
  else if (wrong_direction(a, b))
    c += w.wrong_direction;
  return c;
}

std::optional<SearchResult> astar(const RoutingGrid& grid, const SearchSpace& space, const std::vector<GridCell>& sources,
                                  const GridCell& target, const RouterWeights& weights) {
  if (!grid.contains(target) || space.blocked[grid.index(target)]) return std::nullopt;
  const std::size_t n = grid.size();
  std::vector<double> g(n, kInf);
  std::vector<std::int64_t> parent(n, -1);
  std::vector<std::uint8_t> closed(n, 0);
  using Entry = std::tuple<double, double, std::size_t>;  // f, -g, index
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
  const std::size_t goal = grid.index(target);
  for (const auto& s : sources) {
    if (!grid.contains(s) || space.blocked[grid.index(s)]) continue;
    const auto i = grid.index(s);
    if (g[i] == 0.0) continue;
    g[i] = 0.0;
    open.emplace(static_cast<double>(manhattan(s, target)), 0.0, i);
  }

  SearchResult result;
  GridCell nb[5];
  while (!open.empty()) {
    const auto [f, neg_g, i] = open.top();
    open.pop();
    if (closed[i]) continue;
    closed[i] = 1;
    ++result.expanded;
    if (i == goal) {
      result.cost = g[i];
      for (auto k = static_cast<std::int64_t>(i); k >= 0; k = parent[static_cast<std::size_t>(k)])
        result.path.push_back(grid.cell_at(static_cast<std::size_t>(k)));
      std::reverse(result.path.begin(), result.path.end());
      return result;
    }
    const GridCell c = grid.cell_at(i);
    neighbours_of(c, nb);
    for (const auto& d : nb) {
      if (!grid.contains(d)) continue;
      const auto j = grid.index(d);
      if (closed[j] || space.blocked[j]) continue;
      const double cand = g[i] + step_cost(c, d, space, grid, weights);
      if (cand < g[j]) {
        g[j] = cand;
        parent[j] = static_cast<std::int64_t>(i);
        open.emplace(cand + manhattan(d, target), -cand, j);
      }
    }
  }
  return std::nullopt;
}

SearchResult astar_route(const RoutingGrid& grid, const GridCell& src, const GridCell& dst,
                         const RouterWeights& weights, int net) {
  const auto space = search_space(grid, net, weights);
  auto r = astar(grid, space, {src}, dst, weights);
  if (!r) throw Unreachable(net >= 0 ? grid.nets[static_cast<std::size_t>(net)] : std::string("(anonymous)"));
  return std::move(*r);
}

std::vector<GridCell> Route::cells() const {
  std::vector<GridCell> out;
  for (const auto& s : segments) out.insert(out.end(), s.begin(), s.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::optional<Route> route_net(const RoutingGrid& grid, int net, std::size_t root, const RouterWeights& weights) {
  return route_in(grid, search_space(grid, net, weights), net, root, weights);
}

std::optional<Route> mirror_route(const Route& r, const RoutingGrid& grid, double axis_x, const std::string& net) {
  // Cell ix mirrors to k - ix where centres satisfy x + x' = 2 axis.
  const double k = (2 * axis_x - 2 * grid.x0) / grid.rules.pitch - 1.0;
  const double kr = std::round(k);
  if (std::abs(k - kr) > 1e-6) return std::nullopt;
  Route m;
  m.net = net;
  for (const auto& seg : r.segments) {
    Path p;
    for (const auto& c : seg) {
      const GridCell d{c.layer, static_cast<int>(kr) - c.ix, c.iy};
      if (!grid.contains(d)) return std::nullopt;
      p.push_back(d);
    }
    m.segments.push_back(std::move(p));
  }
  m.length_um = r.length_um;
  m.via_count = r.via_count;
  return m;
}

RoutingReport route_all(RoutingGrid& grid, const std::vector<NetPair>& pairs, const RouteOptions& opt) {
  RoutingReport report;
  // Pins are reserved up front so early nets keep clear of later ones.
  for (std::size_t k = 0; k < grid.nets.size(); ++k)
    for (const auto& p : grid.pins[k]) grid.owner[grid.index(p)] = static_cast<int>(k);

  std::vector<int> order;
  for (std::size_t k = 0; k < grid.nets.size(); ++k)
    if (grid.pins[k].size() >= 2) order.push_back(static_cast<int>(k));
  if (opt.sort_nets) {
    auto key = [&](int k) {
      const auto& pins = grid.pins[static_cast<std::size_t>(k)];
      int x0 = pins[0].ix, x1 = x0, y0 = pins[0].iy, y1 = y0;
      for (const auto& p : pins) {
        x0 = std::min(x0, p.ix);
        x1 = std::max(x1, p.ix);
        y0 = std::min(y0, p.iy);
        y1 = std::max(y1, p.iy);
      }
      return std::make_tuple(pins.size(), (x1 - x0) + (y1 - y0), grid.nets[static_cast<std::size_t>(k)]);
    };
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return key(a) < key(b); });
  }

  std::map<std::string, std::size_t> routed;  // net -> index in report.routes
  for (const int k : order) {
    const std::string& name = grid.nets[static_cast<std::size_t>(k)];
    report.order.push_back(name);
    const auto space = search_space(grid, k, opt.weights);

    std::optional<Route> chosen;
    for (const auto& pr : pairs) {
      const std::string* partner = pr.a == name ? &pr.b : pr.b == name ? &pr.a : nullptr;
      if (!partner) continue;
      const auto it = routed.find(*partner);
      if (it == routed.end()) break;
      auto m = mirror_route(report.routes[it->second], grid, pr.axis_x, name);
      if (m) {
        const auto cells = m->cells();
        bool legal = std::all_of(cells.begin(), cells.end(), [&](const GridCell& c) { return !space.blocked[grid.index(c)]; });
        for (const auto& p : grid.pins[static_cast<std::size_t>(k)])
          legal = legal && std::binary_search(cells.begin(), cells.end(), p);
        if (legal) {
          measure(*m, grid, space, opt.weights);
          chosen = std::move(m);
          report.mirrored.push_back(name);
        }
      }
      if (!chosen) report.asymmetric.push_back(pr.a + "/" + pr.b);
      break;
    }

    if (!chosen) {
      const std::size_t n = std::min(std::max<std::size_t>(opt.candidates, 1), grid.pins[static_cast<std::size_t>(k)].size());
      std::vector<std::optional<Route>> cands(n);
      const auto& cgrid = grid;
      if (opt.exec == Exec::Parallel) {
#pragma omp parallel for schedule(dynamic)
        for (std::size_t c = 0; c < n; ++c) cands[c] = route_in(cgrid, space, k, c, opt.weights);
      } else {
        for (std::size_t c = 0; c < n; ++c) cands[c] = route_in(cgrid, space, k, c, opt.weights);
      }
      for (auto& c : cands)
        if (c && (!chosen || c->cost < chosen->cost)) chosen = std::move(c);
    }

    if (!chosen) {
      report.unrouted.push_back(name);
      continue;
    }
    commit(grid, *chosen, k);
    routed[name] = report.routes.size();
    report.routes.push_back(std::move(*chosen));
  }
  return report;
}

}  // namespace am::routing
