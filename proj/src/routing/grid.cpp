#include <algorithm>
#include <cmath>

#include "amflow/routing.hpp"

namespace am::routing {

namespace {

constexpr double kEps = 1e-9;

int cells_for(double span, double pitch) { return std::max(1, static_cast<int>(std::ceil(span / pitch - kEps))); }

}  // namespace

RoutingGrid::RoutingGrid(int nx_, int ny_, const RoutingRules& rules_) : rules(rules_), nx(nx_), ny(ny_) {
  if (nx <= 0 || ny <= 0) throw InvalidGrid("grid dimensions must be positive");
  const auto n = static_cast<std::size_t>(2 * nx * ny);
  obstacle.assign(n, 0);
  cost.assign(n, 0.0);
  owner.assign(n, -1);
}

bool RoutingGrid::contains(const GridCell& c) const {
  return c.layer >= 0 && c.layer < 2 && c.ix >= 0 && c.ix < nx && c.iy >= 0 && c.iy < ny;
}

std::size_t RoutingGrid::index(const GridCell& c) const {
  return static_cast<std::size_t>((c.layer * ny + c.iy) * nx + c.ix);
}

GridCell RoutingGrid::cell_at(std::size_t index) const {
  const int i = static_cast<int>(index);
  return {i / (nx * ny), i % nx, (i / nx) % ny};
}

int RoutingGrid::net_index(const std::string& name) const {
  const auto it = std::find(nets.begin(), nets.end(), name);
  return it == nets.end() ? -1 : static_cast<int>(it - nets.begin());
}

int RoutingGrid::add_net(const std::string& name, std::vector<GridCell> net_pins, bool is_sensitive) {
  if (net_index(name) >= 0) throw InvalidGrid("duplicate net '" + name + "'");
  for (const auto& c : net_pins)
    if (!contains(c)) throw PinOffGrid("pin of net '" + name + "' lies outside the grid");
  std::sort(net_pins.begin(), net_pins.end());
  net_pins.erase(std::unique(net_pins.begin(), net_pins.end()), net_pins.end());
  nets.push_back(name);
  sensitive.push_back(is_sensitive);
  pins.push_back(std::move(net_pins));
  return static_cast<int>(nets.size()) - 1;
}

std::pair<double, double> RoutingGrid::center(const GridCell& c) const {
  return {x0 + (c.ix + 0.5) * rules.pitch, y0 + (c.iy + 0.5) * rules.pitch};
}

bool wrong_direction(const GridCell& from, const GridCell& to) {
  if (from.layer != to.layer) return false;
  return from.layer == 0 ? from.iy != to.iy : from.ix != to.ix;
}

SearchSpace search_space(const RoutingGrid& grid, int net, const RouterWeights& weights) {
  SearchSpace s;
  s.blocked.assign(grid.size(), 0);
  s.extra = grid.cost;
  const int halo = std::max(0, grid.rules.min_spacing - 1);
  const int ring = std::max(1, grid.rules.min_spacing);
  std::vector<std::uint8_t> near_sensitive(grid.size(), 0);
  std::vector<int> neighbours(grid.size(), 0);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (grid.obstacle[i]) s.blocked[i] = 1;
    const int o = grid.owner[i];
    if (o < 0 || o == net) continue;
    const GridCell c = grid.cell_at(i);
    const bool sens = static_cast<std::size_t>(o) < grid.sensitive.size() && grid.sensitive[static_cast<std::size_t>(o)];
    for (int dy = -ring; dy <= ring; ++dy)
      for (int dx = -ring; dx <= ring; ++dx) {
        const GridCell d{c.layer, c.ix + dx, c.iy + dy};
        if (!grid.contains(d)) continue;
        const auto j = grid.index(d);
        if (std::max(std::abs(dx), std::abs(dy)) <= halo) {
          s.blocked[j] = 1;
        } else {
          ++neighbours[j];
          if (sens) near_sensitive[j] = 1;
        }
      }
  }
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (grid.owner[i] == net && net >= 0 && !grid.obstacle[i]) s.blocked[i] = 0;
    s.extra[i] += weights.congestion * neighbours[i] + (near_sensitive[i] ? weights.sensitivity : 0.0);
  }
  return s;
}

RoutingGrid build_grid(const placement::Placement& p, const placement::Instance& inst, const RoutingRules& rules) {
  if (!(rules.pitch > 0.0) || rules.margin < 0.0) throw InvalidGrid("pitch must be positive and margin non-negative");
  if (!inst.blocks.empty() && !placement::overlap_free(p, inst)) throw InvalidGrid("placement overlaps");
  RoutingGrid g(cells_for(p.width + 2 * rules.margin, rules.pitch), cells_for(p.height + 2 * rules.margin, rules.pitch),
                rules);
  g.x0 = -rules.margin;
  g.y0 = -rules.margin;
  const double pitch = rules.pitch;

  for (std::size_t i = 0; i < inst.blocks.size(); ++i) {
    const BlockRect r{inst.blocks[i].id, p.x[i], p.y[i], p.w_of(inst, i), p.h_of(inst, i)};
    g.blocks.push_back(r);
    const int ix0 = static_cast<int>(std::floor((r.x - g.x0) / pitch + kEps));
    const int iy0 = static_cast<int>(std::floor((r.y - g.y0) / pitch + kEps));
    for (int iy = iy0; iy < g.ny; ++iy) {
      if (g.y0 + iy * pitch >= r.y + r.h - kEps) break;
      for (int ix = ix0; ix < g.nx; ++ix) {
        if (g.x0 + ix * pitch >= r.x + r.w - kEps) break;
        g.obstacle[g.index({0, ix, iy})] = 1;
      }
    }
  }

  std::map<std::size_t, std::string> taken;
  for (const auto& [net, refs] : inst.net_pins()) {
    std::vector<GridCell> cells;
    for (const auto& [b, k] : refs) {
      const auto [px, py] = placement::pin_position(p, inst, b, inst.blocks[b].pins[k]);
      const auto& r = g.blocks[b];
      const double d[4] = {px - r.x, r.x + r.w - px, py - r.y, r.y + r.h - py};
      const int side = static_cast<int>(std::min_element(d, d + 4) - d);
      const double nx = side == 0 ? -1.0 : side == 1 ? 1.0 : 0.0;
      const double ny = side == 2 ? -1.0 : side == 3 ? 1.0 : 0.0;
      // Off-lattice edges leave the first outward cell straddling the block;
      // step outward until the cell clears it.
      const double qx = px + nx * pitch / 2, qy = py + ny * pitch / 2;
      GridCell c{0, static_cast<int>(std::floor((qx - g.x0) / pitch)),
                 static_cast<int>(std::floor((qy - g.y0) / pitch))};
      auto inside_own = [&](const GridCell& q) {
        const double cx0 = g.x0 + q.ix * pitch, cy0 = g.y0 + q.iy * pitch;
        return cx0 < r.x + r.w && cx0 + pitch > r.x && cy0 < r.y + r.h && cy0 + pitch > r.y;
      };
      for (int step = 0; step < 2 && g.contains(c) && inside_own(c); ++step) {
        c.ix += static_cast<int>(nx);
        c.iy += static_cast<int>(ny);
      }
      if (!g.contains(c) || g.obstacle[g.index(c)])
        throw PinOffGrid("pin of " + r.id + " on net '" + net + "' projects onto an obstacle");
      const auto [it, fresh] = taken.emplace(g.index(c), net);
      if (!fresh && it->second != net)
        throw PinOffGrid("pins of nets '" + it->second + "' and '" + net + "' share a grid cell");
      cells.push_back(c);
    }
    g.add_net(net, std::move(cells));
  }
  return g;
}

}  // namespace am::routing
