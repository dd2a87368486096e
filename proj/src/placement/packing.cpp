#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "amflow/placement.hpp"

namespace am::placement {

double Placement::w_of(const Instance& inst, std::size_t i) const {
  return rotated[i] ? inst.blocks[i].h : inst.blocks[i].w;
}

double Placement::h_of(const Instance& inst, std::size_t i) const {
  return rotated[i] ? inst.blocks[i].w : inst.blocks[i].h;
}

Placement realize(const SequencePair& sp, const Instance& inst, const std::vector<bool>& rotated) {
  const auto cells = cells_of(inst);
  const std::size_t n = cells.size();
  if (sp.pos.size() != n || sp.neg.size() != n) throw InvalidInstance("sequence pair does not cover every cell");

  std::vector<int> rank_pos(n), rank_neg(n);
  for (std::size_t i = 0; i < n; ++i) {
    rank_pos[static_cast<std::size_t>(sp.pos[i])] = static_cast<int>(i);
    rank_neg[static_cast<std::size_t>(sp.neg[i])] = static_cast<int>(i);
  }

  Placement p;
  p.x.assign(inst.blocks.size(), 0.0);
  p.y.assign(inst.blocks.size(), 0.0);
  p.rotated.assign(inst.blocks.size(), false);
  std::vector<double> cw(n), ch(n), cx(n, 0.0), cy(n, 0.0);
  for (std::size_t c = 0; c < n; ++c) {
    const bool rot = !rotated.empty() && rotated[c];
    const auto& blk = inst.blocks[static_cast<std::size_t>(cells[c].a)];
    const double w = rot ? blk.h : blk.w, h = rot ? blk.w : blk.h;
    cw[c] = cells[c].b < 0 ? w : 2 * w + inst.spacing;
    ch[c] = h;
    p.rotated[static_cast<std::size_t>(cells[c].a)] = rot;
    if (cells[c].b >= 0) p.rotated[static_cast<std::size_t>(cells[c].b)] = rot;
  }

  // Gamma- order is a topological order of both constraint graphs.
  for (std::size_t k = 0; k < n; ++k) {
    const auto j = static_cast<std::size_t>(sp.neg[k]);
    for (std::size_t m = 0; m < k; ++m) {
      const auto i = static_cast<std::size_t>(sp.neg[m]);
      if (rank_pos[i] < rank_pos[j]) {
        cx[j] = std::max(cx[j], cx[i] + cw[i] + inst.spacing);  // i left of j
      } else {
        cy[j] = std::max(cy[j], cy[i] + ch[i] + inst.spacing);  // i below j
      }
    }
  }
  for (std::size_t c = 0; c < n; ++c) {
    p.width = std::max(p.width, cx[c] + cw[c]);
    p.height = std::max(p.height, cy[c] + ch[c]);
    const auto a = static_cast<std::size_t>(cells[c].a);
    p.x[a] = cx[c];
    p.y[a] = cy[c];
    if (cells[c].b >= 0) {
      const auto b = static_cast<std::size_t>(cells[c].b);
      p.x[b] = cx[c] + p.w_of(inst, a) + inst.spacing;
      p.y[b] = cy[c];
    }
  }
  return p;
}

std::pair<double, double> pin_position(const Placement& p, const Instance& inst, std::size_t i, const PinOffset& pin) {
  const auto& b = inst.blocks[i];
  double lx = pin.dx, ly = pin.dy;
  if (p.rotated[i]) {
    lx = b.h - pin.dy;
    ly = pin.dx;
  }
  for (const auto& pr : inst.symmetry_pairs) {
    if (pr.second == b.id) {
      lx = p.w_of(inst, i) - lx;
      break;
    }
  }
  return {p.x[i] + lx, p.y[i] + ly};
}

CostBreakdown cost(const Placement& p, const Instance& inst, const CostWeights& weights) {
  CostBreakdown c;
  c.area = p.width * p.height;
  for (const auto& [net, pins] : inst.net_pins()) {
    if (pins.size() < 2) continue;
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (const auto& [b, k] : pins) {
      const auto [x, y] = pin_position(p, inst, b, inst.blocks[b].pins[k]);
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
      y0 = std::min(y0, y);
      y1 = std::max(y1, y);
    }
    c.hpwl += (x1 - x0) + (y1 - y0);
  }
  if (!inst.symmetry_pairs.empty()) {
    std::vector<double> centers;
    for (const auto& [a, b] : inst.symmetry_pairs) {
      const auto ia = inst.index_of(a), ib = inst.index_of(b);
      centers.push_back(0.5 * ((p.x[ia] + 0.5 * p.w_of(inst, ia)) + (p.x[ib] + 0.5 * p.w_of(inst, ib))));
      c.symmetry += std::abs(p.y[ia] - p.y[ib]);
    }
    double axis = 0.0;
    for (double v : centers) axis += v;
    axis /= static_cast<double>(centers.size());
    for (double v : centers) c.symmetry += std::abs(v - axis);
  }
  c.total = weights.area * c.area + weights.wirelength * c.hpwl + weights.symmetry * c.symmetry;
  return c;
}

bool overlap_free(const Placement& p, const Instance& inst, double eps) {
  const std::size_t n = inst.blocks.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (p.x[i] < -eps || p.y[i] < -eps || p.x[i] + p.w_of(inst, i) > p.width + eps ||
        p.y[i] + p.h_of(inst, i) > p.height + eps)
      return false;
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool apart_x = p.x[i] + p.w_of(inst, i) + inst.spacing <= p.x[j] + eps ||
                           p.x[j] + p.w_of(inst, j) + inst.spacing <= p.x[i] + eps;
      const bool apart_y = p.y[i] + p.h_of(inst, i) + inst.spacing <= p.y[j] + eps ||
                           p.y[j] + p.h_of(inst, j) + inst.spacing <= p.y[i] + eps;
      if (!apart_x && !apart_y) return false;
    }
  }
  return true;
}

namespace {

void normalize(Placement& p, const Instance& inst) {
  double minx = std::numeric_limits<double>::infinity(), miny = minx;
  for (std::size_t i = 0; i < inst.blocks.size(); ++i) {
    minx = std::min(minx, p.x[i]);
    miny = std::min(miny, p.y[i]);
  }
  p.width = p.height = 0.0;
  for (std::size_t i = 0; i < inst.blocks.size(); ++i) {
    p.x[i] -= minx;
    p.y[i] -= miny;
    p.width = std::max(p.width, p.x[i] + p.w_of(inst, i));
    p.height = std::max(p.height, p.y[i] + p.h_of(inst, i));
  }
}

}  // namespace

bool snap_symmetry(Placement& p, const Instance& inst) {
  if (inst.blocks.empty()) return true;
  struct PairIdx {
    std::size_t a, b;
  };
  std::vector<PairIdx> pairs;
  for (const auto& [a, b] : inst.symmetry_pairs) pairs.push_back({inst.index_of(a), inst.index_of(b)});
  auto center = [&](const Placement& q, const PairIdx& pr) {
    return 0.5 * ((q.x[pr.a] + 0.5 * q.w_of(inst, pr.a)) + (q.x[pr.b] + 0.5 * q.w_of(inst, pr.b)));
  };
  bool aligned = true;
  for (const auto& pr : pairs) {
    aligned &= p.y[pr.a] == p.y[pr.b];
    aligned &= std::abs(center(p, pr) - center(p, pairs.front())) < 1e-9;
  }
  if (pairs.size() <= 1 || aligned) return aligned || pairs.size() <= 1;

  std::optional<Placement> best;
  for (const auto& target : pairs) {
    Placement q = p;
    const double axis = center(p, target);
    for (const auto& pr : pairs) {
      const double top = std::max(q.y[pr.a], q.y[pr.b]);
      q.y[pr.a] = q.y[pr.b] = top;
      const double shift = axis - center(q, pr);
      q.x[pr.a] += shift;
      q.x[pr.b] += shift;
    }
    normalize(q, inst);
    if (!overlap_free(q, inst)) continue;
    if (!best || q.width * q.height < best->width * best->height - 1e-12) best = std::move(q);
  }
  if (!best) return false;
  p = std::move(*best);
  return true;
}

}  // namespace am::placement
