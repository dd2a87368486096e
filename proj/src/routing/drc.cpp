#include <algorithm>
#include <cstdlib>
#include <map>
#include <set>

#include "amflow/routing.hpp"

namespace am::routing {

std::string to_string(ViolationKind k) {
  switch (k) {
    case ViolationKind::Spacing: return "spacing";
    case ViolationKind::Short: return "short";
    case ViolationKind::Obstacle: return "obstacle";
    case ViolationKind::Discontinuous: return "discontinuous";
    case ViolationKind::OutOfGrid: return "out_of_grid";
    case ViolationKind::StackedVia: return "stacked_via";
  }
  return "unknown";
}

namespace {

bool is_via(const GridCell& a, const GridCell& b) { return a.layer != b.layer; }

bool adjacent(const GridCell& a, const GridCell& b) {
  if (is_via(a, b)) return a.ix == b.ix && a.iy == b.iy && std::abs(a.layer - b.layer) == 1;
  return std::abs(a.ix - b.ix) + std::abs(a.iy - b.iy) == 1;
}

}  // namespace

std::vector<Violation> drc_check(const std::vector<Route>& routes, const RoutingGrid& grid, int min_spacing) {
  std::vector<Violation> out;
  std::map<std::size_t, std::set<std::string>> occupancy;
  for (const auto& r : routes) {
    for (const auto& seg : r.segments) {
      for (std::size_t i = 0; i < seg.size(); ++i) {
        const auto& c = seg[i];
        if (!grid.contains(c)) {
          out.push_back({ViolationKind::OutOfGrid, r.net, r.net, c, c});
          continue;
        }
        if (grid.obstacle[grid.index(c)]) out.push_back({ViolationKind::Obstacle, r.net, r.net, c, c});
        occupancy[grid.index(c)].insert(r.net);
        if (i == 0) continue;
        if (!adjacent(seg[i - 1], c)) out.push_back({ViolationKind::Discontinuous, r.net, r.net, seg[i - 1], c});
        if (i >= 2 && is_via(seg[i - 2], seg[i - 1]) && is_via(seg[i - 1], c))
          out.push_back({ViolationKind::StackedVia, r.net, r.net, seg[i - 2], c});
      }
    }
  }

  for (const auto& [idx, nets] : occupancy) {
    const GridCell c = grid.cell_at(idx);
    for (auto a = nets.begin(); a != nets.end(); ++a)
      for (auto b = std::next(a); b != nets.end(); ++b) out.push_back({ViolationKind::Short, *a, *b, c, c});
  }

  // Each unordered cell pair is visited once, from its lower index.
  const int reach = min_spacing - 1;
  for (const auto& [idx, nets] : occupancy) {
    const GridCell c = grid.cell_at(idx);
    for (int dy = -reach; dy <= reach; ++dy)
      for (int dx = -reach; dx <= reach; ++dx) {
        if (dx == 0 && dy == 0) continue;
        const GridCell d{c.layer, c.ix + dx, c.iy + dy};
        if (!grid.contains(d) || grid.index(d) <= idx) continue;
        const auto it = occupancy.find(grid.index(d));
        if (it == occupancy.end()) continue;
        for (const auto& na : nets)
          for (const auto& nb : it->second)
            if (na != nb) out.push_back({ViolationKind::Spacing, na, nb, c, d});
      }
  }
  return out;
}

}  // namespace am::routing
