#pragma once

// Independent recomputations for routing tests.

#include <cstdlib>
#include <limits>
#include <optional>
#include <random>
#include <set>

#include "amflow/routing.hpp"

namespace am::testing {

// Step cost from the raw grid fields only; valid for grids with no owners.
inline double oracle_step(const routing::RoutingGrid& g, const routing::GridCell& a, const routing::GridCell& b,
                          const routing::RouterWeights& w) {
  double c = 1.0 + g.cost[g.index(b)];
  if (a.layer != b.layer) return c + w.via;
  const bool horizontal = a.iy == b.iy;
  if ((a.layer == 0) != horizontal) c += w.wrong_direction;
  return c;
}

inline std::optional<double> dijkstra(const routing::RoutingGrid& g, const routing::GridCell& s, const routing::GridCell& t,
                                      const routing::RouterWeights& w) {
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(g.size(), inf);
  if (g.obstacle[g.index(s)] || g.obstacle[g.index(t)]) return std::nullopt;
  std::set<std::pair<double, std::size_t>> frontier;
  dist[g.index(s)] = 0.0;
  frontier.insert({0.0, g.index(s)});
  while (!frontier.empty()) {
    const auto [d, i] = *frontier.begin();
    frontier.erase(frontier.begin());
    if (i == g.index(t)) return d;
    const auto c = g.cell_at(i);
    const routing::GridCell nb[5] = {{c.layer, c.ix + 1, c.iy}, {c.layer, c.ix - 1, c.iy}, {c.layer, c.ix, c.iy + 1},
                                     {c.layer, c.ix, c.iy - 1}, {1 - c.layer, c.ix, c.iy}};
    for (const auto& n : nb) {
      if (!g.contains(n) || g.obstacle[g.index(n)]) continue;
      const double nd = d + oracle_step(g, c, n, w);
      const auto j = g.index(n);
      if (nd < dist[j]) {
        frontier.erase({dist[j], j});
        dist[j] = nd;
        frontier.insert({nd, j});
      }
    }
  }
  return std::nullopt;
}

inline bool contiguous(const routing::Path& p) {
  for (std::size_t i = 1; i < p.size(); ++i) {
    const auto& a = p[i - 1];
    const auto& b = p[i];
    const int planar = std::abs(a.ix - b.ix) + std::abs(a.iy - b.iy);
    const bool ok = a.layer == b.layer ? planar == 1 : (planar == 0 && std::abs(a.layer - b.layer) == 1);
    if (!ok) return false;
  }
  return true;
}

struct SpacingCount {
  std::size_t spacing = 0;
  std::size_t shorts = 0;
};

// All pairs of (cell, net) occupancy entries.
inline SpacingCount brute_force_spacing(const std::vector<routing::Route>& routes, int min_spacing) {
  std::set<std::pair<routing::GridCell, std::string>> entries;
  for (const auto& r : routes)
    for (const auto& c : r.cells()) entries.insert({c, r.net});
  const std::vector<std::pair<routing::GridCell, std::string>> v(entries.begin(), entries.end());
  SpacingCount out;
  for (std::size_t i = 0; i < v.size(); ++i)
    for (std::size_t j = i + 1; j < v.size(); ++j) {
      const auto& [a, na] = v[i];
      const auto& [b, nb] = v[j];
      if (na == nb || a.layer != b.layer) continue;
      const int d = std::max(std::abs(a.ix - b.ix), std::abs(a.iy - b.iy));
      if (d == 0)
        ++out.shorts;
      else if (d < min_spacing)
        ++out.spacing;
    }
  return out;
}

}  // namespace am::testing
