#pragma once

// Two-layer grid maze router. Layer 0 prefers horizontal runs and carries
// device obstacles; layer 1 prefers vertical runs and is obstacle-free.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "amflow/error.hpp"
#include "amflow/exec.hpp"
#include "amflow/placement.hpp"

namespace am::routing {

struct GridCell {
  int layer = 0;
  int ix = 0;
  int iy = 0;
  friend bool operator==(const GridCell&, const GridCell&) = default;
  friend auto operator<=>(const GridCell&, const GridCell&) = default;
};

using Path = std::vector<GridCell>;

struct RoutingRules {
  double pitch = 0.5;    // µm
  double margin = 5.0;   // µm around the placement bbox
  int min_spacing = 2;   // Chebyshev distance between different nets, grid units
};

struct RouterWeights {
  double wrong_direction = 1.0;
  double via = 3.0;
  double sensitivity = 2.0;
  double congestion = 1.0;
};

class InvalidGrid : public Error {
 public:
  using Error::Error;
};

class PinOffGrid : public Error {
 public:
  using Error::Error;
};

class Unreachable : public Error {
 public:
  explicit Unreachable(const std::string& net) : Error("net '" + net + "' is unreachable"), net_(net) {}
  const std::string& net() const { return net_; }

 private:
  std::string net_;
};

struct BlockRect {
  std::string id;
  double x, y, w, h;
};

struct RoutingGrid {
  RoutingRules rules;
  double x0 = 0.0;  // µm coordinate of cell (0, 0)'s lower-left corner
  double y0 = 0.0;
  int nx = 0;
  int ny = 0;
  std::vector<std::uint8_t> obstacle;  // per cell, both layers
  std::vector<double> cost;            // static surcharge per cell, >= 0
  std::vector<int> owner;              // committed net index or -1
  std::vector<std::string> nets;
  std::vector<bool> sensitive;         // parallel to nets
  std::vector<std::vector<GridCell>> pins;  // parallel to nets
  std::vector<BlockRect> blocks;

  RoutingGrid() = default;
  RoutingGrid(int nx, int ny, const RoutingRules& rules = {});

  std::size_t size() const { return obstacle.size(); }
  bool contains(const GridCell& c) const;
  std::size_t index(const GridCell& c) const;
  GridCell cell_at(std::size_t index) const;
  int net_index(const std::string& name) const;  // -1 when absent
  int add_net(const std::string& name, std::vector<GridCell> pins, bool sensitive = false);
  // Cell centre in µm.
  std::pair<double, double> center(const GridCell& c) const;
};

// Horizontal on layer 0, vertical on layer 1.
bool wrong_direction(const GridCell& from, const GridCell& to);

// Per-net view of the grid: which cells the net may enter and the
// surcharge for entering them.
struct SearchSpace {
  std::vector<std::uint8_t> blocked;
  std::vector<double> extra;
};

// Obstacles and other nets' cells (plus their spacing halo) are blocked.
// Cells within min_spacing of other committed nets pay congestion per
// neighbour and a flat sensitivity surcharge near sensitive nets.
SearchSpace search_space(const RoutingGrid& grid, int net, const RouterWeights& weights);

// Cost of stepping from `a` into neighbouring cell `b`.
double step_cost(const GridCell& a, const GridCell& b, const SearchSpace& space, const RoutingGrid& grid,
                 const RouterWeights& weights);

struct SearchResult {
  Path path;  // from a source cell to the target
  double cost = 0.0;
  std::size_t expanded = 0;
};

// Multi-source A* with heuristic Manhattan distance times the minimum step
// cost (1), which is consistent for the step costs above.
std::optional<SearchResult> astar(const RoutingGrid& grid, const SearchSpace& space, const std::vector<GridCell>& sources,
                                  const GridCell& target, const RouterWeights& weights);

// Single-pair convenience using the net's search space; net -1 treats every
// owned cell as foreign.
SearchResult astar_route(const RoutingGrid& grid, const GridCell& src, const GridCell& dst,
                         const RouterWeights& weights, int net = -1);

struct Route {
  std::string net;
  std::vector<Path> segments;  // each contiguous; later segments start on earlier ones
  double length_um = 0.0;
  int via_count = 0;
  double cost = 0.0;
  std::vector<GridCell> cells() const;  // sorted, unique
};

// Sequential nearest-pin Steiner tree rooted at pins[root].
std::optional<Route> route_net(const RoutingGrid& grid, int net, std::size_t root, const RouterWeights& weights);

struct NetPair {
  std::string a;
  std::string b;
  double axis_x = 0.0;  // µm
};

struct RouteOptions {
  RouterWeights weights;
  bool sort_nets = true;        // (pin count, bbox) ascending; input order otherwise
  std::size_t candidates = 4;   // Steiner roots explored per net
  Exec exec = Exec::Parallel;
};

struct RoutingReport {
  std::vector<Route> routes;
  std::vector<std::string> order;
  std::vector<std::string> unrouted;
  std::vector<std::string> mirrored;    // second member accepted as mirror image
  std::vector<std::string> asymmetric;  // pairs routed independently
  bool complete() const { return unrouted.empty(); }
};

// Routes every net with two or more pins and commits each result into
// grid.owner.
RoutingReport route_all(RoutingGrid& grid, const std::vector<NetPair>& pairs, const RouteOptions& options = {});

// Mirror image about x = axis_x; empty when the axis does not fall on the
// cell lattice or a cell leaves the grid.
std::optional<Route> mirror_route(const Route& r, const RoutingGrid& grid, double axis_x, const std::string& net);

enum class ViolationKind { Spacing, Short, Obstacle, Discontinuous, OutOfGrid, StackedVia };

struct Violation {
  ViolationKind kind;
  std::string net_a;
  std::string net_b;
  GridCell a;
  GridCell b;
};

std::string to_string(ViolationKind k);

// Same-layer cell pairs of different nets closer than min_spacing are one
// violation each; shorts are counted per shared cell and net pair.
std::vector<Violation> drc_check(const std::vector<Route>& routes, const RoutingGrid& grid, int min_spacing);

// Pins are projected outward from the nearest block edge into the first
// cell clear of the block.
RoutingGrid build_grid(const placement::Placement& p, const placement::Instance& inst, const RoutingRules& rules = {});

std::string to_json(const RoutingReport& report, const RoutingGrid& grid);
RoutingReport report_from_json(const std::string& text);
std::string to_svg(const RoutingReport& report, const RoutingGrid& grid);

}  // namespace am::routing
