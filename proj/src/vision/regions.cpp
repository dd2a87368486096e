#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "amflow/vision.hpp"

namespace am::vision {

std::string_view to_string(Side side) {
  switch (side) {
    case Side::Left: return "left";
    case Side::Right: return "right";
    case Side::Top: return "top";
    case Side::Bottom: return "bottom";
  }
  return "left";
}

namespace {

// Renumbers `raw` (arbitrary positive ids, 0 = background) densely in
// raster order of first pixel and recomputes area and centroid.
RegionLabeling densify(int width, int height, const std::vector<int>& raw, int max_raw) {
  RegionLabeling out;
  out.width = width;
  out.height = height;
  out.labels.assign(raw.size(), 0);
  std::vector<int> remap(static_cast<std::size_t>(max_raw) + 1, 0);
  int next = 0;
  std::vector<double> sx, sy;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const int r = raw[i];
    if (r == 0) continue;
    int& id = remap[static_cast<std::size_t>(r)];
    if (id == 0) {
      id = ++next;
      out.stats.emplace_back();
      sx.push_back(0.0);
      sy.push_back(0.0);
    }
    out.labels[i] = id;
    const auto k = static_cast<std::size_t>(id - 1);
    out.stats[k].area += 1;
    sx[k] += static_cast<double>(i % static_cast<std::size_t>(width));
    sy[k] += static_cast<double>(i / static_cast<std::size_t>(width));
  }
  for (std::size_t k = 0; k < out.stats.size(); ++k) {
    const double a = static_cast<double>(out.stats[k].area);
    out.stats[k].cx = sx[k] / a;
    out.stats[k].cy = sy[k] / a;
  }
  return out;
}

int root_of(std::vector<int>& parent, int a) {
  while (parent[static_cast<std::size_t>(a)] != a) {
    parent[static_cast<std::size_t>(a)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(a)])];
    a = parent[static_cast<std::size_t>(a)];
  }
  return a;
}

}  // namespace

RegionLabeling label_regions(const Mask& mask, std::size_t area_threshold, int dilation_radius,
                             Exec exec) {
  const Mask grown = dilate(mask, dilation_radius, exec);
  int count = 0;
  const auto comp = connected_components(grown, count, exec);

  std::vector<std::size_t> area(static_cast<std::size_t>(count) + 1, 0);
  for (std::size_t i = 0; i < comp.size(); ++i) {
    if (mask.bits[i]) area[static_cast<std::size_t>(comp[i])] += 1;
  }
  std::vector<int> raw(comp.size(), 0);
  for (std::size_t i = 0; i < comp.size(); ++i) {
    if (mask.bits[i] && area[static_cast<std::size_t>(comp[i])] >= area_threshold) raw[i] = comp[i];
  }
  return densify(mask.width, mask.height, raw, count);
}

RegionLabeling merge_nodes(const RegionLabeling& labeling, double centroid_eps) {
  RegionLabeling cur = labeling;
  const double eps2 = centroid_eps * centroid_eps;
  for (;;) {
    const int k = static_cast<int>(cur.region_count());
    std::vector<int> parent(static_cast<std::size_t>(k) + 1);
    std::iota(parent.begin(), parent.end(), 0);
    bool merged = false;
    for (int a = 1; a <= k; ++a) {
      for (int b = a + 1; b <= k; ++b) {
        const auto& sa = cur.stats[static_cast<std::size_t>(a - 1)];
        const auto& sb = cur.stats[static_cast<std::size_t>(b - 1)];
        const double dx = sa.cx - sb.cx, dy = sa.cy - sb.cy;
        if (dx * dx + dy * dy > eps2) continue;
        const int ra = root_of(parent, a), rb = root_of(parent, b);
        if (ra != rb) {
          parent[static_cast<std::size_t>(std::max(ra, rb))] = std::min(ra, rb);
          merged = true;
        }
      }
    }
    if (!merged) return cur;

    std::vector<int> raw(cur.labels.size(), 0);
    for (std::size_t i = 0; i < raw.size(); ++i) {
      if (cur.labels[i]) raw[i] = root_of(parent, cur.labels[i]);
    }
    RegionLabeling next = densify(cur.width, cur.height, raw, k);
    // Carry touch lists across the merge.
    std::vector<int> new_id(static_cast<std::size_t>(k) + 1, 0);
    for (std::size_t i = 0; i < raw.size(); ++i) {
      if (cur.labels[i]) new_id[static_cast<std::size_t>(cur.labels[i])] = next.labels[i];
    }
    for (int a = 1; a <= k; ++a) {
      const auto& touches = cur.stats[static_cast<std::size_t>(a - 1)].touches;
      if (touches.empty()) continue;
      const int id = new_id[static_cast<std::size_t>(a)];
      auto& dst = next.stats[static_cast<std::size_t>(id - 1)].touches;
      for (const auto& t : touches) {
        if (std::find(dst.begin(), dst.end(), t) == dst.end()) dst.push_back(t);
      }
    }
    cur = std::move(next);
  }
}

void attach_touches(RegionLabeling& labeling, const DetectionSet& det, const VisionConfig& config) {
  for (auto& s : labeling.stats) s.touches.clear();
  const int tol = std::max(1, config.touch_tolerance);
  auto probe = [&](const Component& c, Side side, int x0, int x1, int y0, int y1) {
    x0 = std::max(0, x0);
    y0 = std::max(0, y0);
    x1 = std::min(labeling.width, x1);
    y1 = std::min(labeling.height, y1);
    for (int y = y0; y < y1; ++y) {
      for (int x = x0; x < x1; ++x) {
        const int id = labeling.at(x, y);
        if (id == 0) continue;
        auto& touches = labeling.stats[static_cast<std::size_t>(id - 1)].touches;
        const PortTouch t{c.id, side};
        if (std::find(touches.begin(), touches.end(), t) == touches.end()) touches.push_back(t);
      }
    }
  };
  for (const auto& c : det.components) {
    const Rect r = c.bbox.expanded(config.dilation_radius);
    // Side strips exclude the corner squares.
    probe(c, Side::Left, r.x - tol, r.x, r.y, r.y + r.h);
    probe(c, Side::Right, r.x + r.w, r.x + r.w + tol, r.y, r.y + r.h);
    probe(c, Side::Top, r.x, r.x + r.w, r.y - tol, r.y);
    probe(c, Side::Bottom, r.x, r.x + r.w, r.y + r.h, r.y + r.h + tol);
  }
}

}  // namespace am::vision
