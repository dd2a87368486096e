// Pixel kernels. Each has a serial reference path and an OpenMP path over
// rows (or row strips); they must agree bit for bit.

#include <omp.h>

#include <algorithm>
#include <numeric>

#include "amflow/vision.hpp"

namespace am::vision {

std::size_t Mask::count() const {
  return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

namespace {

void clear_row(const DetectionSet& det, int margin, int y, int width, std::uint8_t* row) {
  auto clear = [&](const Rect& box) {
    const Rect r = box.expanded(margin);
    if (y < r.y || y >= r.y + r.h) return;
    const int x0 = std::max(0, r.x);
    const int x1 = std::min(width, r.x + r.w);
    for (int x = x0; x < x1; ++x) row[x] = 0;
  };
  for (const auto& c : det.components) clear(c.bbox);
  for (const auto& t : det.text_boxes) clear(t);
}

void wire_row(const GrayImage& image, const DetectionSet& det, const VisionConfig& config, int y,
              Mask& out) {
  const int w = image.width;
  std::uint8_t* row = out.bits.data() + static_cast<std::size_t>(y) * w;
  const std::uint8_t* src = image.pixels.data() + static_cast<std::size_t>(y) * w;
  for (int x = 0; x < w; ++x) row[x] = src[x] <= config.threshold ? 1 : 0;
  clear_row(det, config.dilation_radius, y, w, row);
}

// Running-window OR along one line of `n` samples with stride.
void dilate_line(const std::uint8_t* in, std::uint8_t* out, int n, std::ptrdiff_t stride, int r) {
  int window = 0;
  for (int i = 0; i < std::min(n, r); ++i) window += in[i * stride];
  for (int i = 0; i < n; ++i) {
    const int enter = i + r;
    const int leave = i - r - 1;
    if (enter < n) window += in[enter * stride];
    if (leave >= 0) window -= in[leave * stride];
    out[i * stride] = window > 0 ? 1 : 0;
  }
}

struct DisjointSet {
  std::vector<int> parent;
  explicit DisjointSet(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int a) {
    while (parent[static_cast<std::size_t>(a)] != a) {
      parent[static_cast<std::size_t>(a)] =
          parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(a)])];
      a = parent[static_cast<std::size_t>(a)];
    }
    return a;
  }
  int find_readonly(int a) const {
    while (parent[static_cast<std::size_t>(a)] != a) a = parent[static_cast<std::size_t>(a)];
    return a;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (a < b) std::swap(a, b);
    parent[static_cast<std::size_t>(a)] = b;
  }
};

// Unions foreground pixels in rows [y0, y1) with their already-visited
// 8-neighbours inside the same row range.
void label_strip(const Mask& mask, int y0, int y1, DisjointSet& ds) {
  const int w = mask.width;
  for (int y = y0; y < y1; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!mask.at(x, y)) continue;
      const int idx = y * w + x;
      if (x > 0 && mask.at(x - 1, y)) ds.unite(idx, idx - 1);
      if (y > y0) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int nx = x + dx;
          if (nx >= 0 && nx < w && mask.at(nx, y - 1)) ds.unite(idx, idx - w + dx);
        }
      }
    }
  }
}

void stitch_row(const Mask& mask, int y, DisjointSet& ds) {
  const int w = mask.width;
  for (int x = 0; x < w; ++x) {
    if (!mask.at(x, y)) continue;
    const int idx = y * w + x;
    for (int dx = -1; dx <= 1; ++dx) {
      const int nx = x + dx;
      if (nx >= 0 && nx < w && mask.at(nx, y - 1)) ds.unite(idx, idx - w + dx);
    }
  }
}

}  // namespace

Mask derive_wire_mask(const GrayImage& image, const DetectionSet& det, const VisionConfig& config,
                      Exec exec) {
  if (image.width != det.width || image.height != det.height) {
    throw DimensionMismatch("image is " + std::to_string(image.width) + "x" +
                            std::to_string(image.height) + " but detections describe " +
                            std::to_string(det.width) + "x" + std::to_string(det.height));
  }
  Mask out(image.width, image.height);
  if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(static)
    for (int y = 0; y < image.height; ++y) wire_row(image, det, config, y, out);
  } else {
    for (int y = 0; y < image.height; ++y) wire_row(image, det, config, y, out);
  }
  return out;
}

Mask dilate(const Mask& mask, int radius, Exec exec) {
  if (radius <= 0) return mask;
  const int w = mask.width, h = mask.height;
  Mask horiz(w, h), out(w, h);
  if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(static)
    for (int y = 0; y < h; ++y) {
      const std::size_t off = static_cast<std::size_t>(y) * w;
      dilate_line(mask.bits.data() + off, horiz.bits.data() + off, w, 1, radius);
    }
#pragma omp parallel for schedule(static)
    for (int x = 0; x < w; ++x) dilate_line(horiz.bits.data() + x, out.bits.data() + x, h, w, radius);
  } else {
    for (int y = 0; y < h; ++y) {
      const std::size_t off = static_cast<std::size_t>(y) * w;
      dilate_line(mask.bits.data() + off, horiz.bits.data() + off, w, 1, radius);
    }
    for (int x = 0; x < w; ++x) dilate_line(horiz.bits.data() + x, out.bits.data() + x, h, w, radius);
  }
  return out;
}

std::vector<int> connected_components(const Mask& mask, int& count, Exec exec) {
  const int w = mask.width, h = mask.height;
  const std::size_t n = static_cast<std::size_t>(w) * h;
  DisjointSet ds(n);

  if (exec == Exec::Parallel && h > 1) {
    const int strips = std::max(1, std::min(h, omp_get_max_threads() * 4));
    std::vector<int> starts(static_cast<std::size_t>(strips) + 1);
    for (int s = 0; s <= strips; ++s) starts[static_cast<std::size_t>(s)] = static_cast<int>(
        static_cast<long long>(h) * s / strips);
    // Strips only touch their own pixels' parent slots, so no races.
#pragma omp parallel for schedule(dynamic)
    for (int s = 0; s < strips; ++s) {
      label_strip(mask, starts[static_cast<std::size_t>(s)], starts[static_cast<std::size_t>(s) + 1], ds);
    }
    for (int s = 1; s < strips; ++s) {
      const int y = starts[static_cast<std::size_t>(s)];
      if (y > 0 && y < h) stitch_row(mask, y, ds);
    }
  } else {
    label_strip(mask, 0, h, ds);
  }

  std::vector<int> roots(n, -1);
  if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
      if (mask.bits[static_cast<std::size_t>(i)]) roots[static_cast<std::size_t>(i)] = ds.find_readonly(static_cast<int>(i));
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      if (mask.bits[i]) roots[i] = ds.find(static_cast<int>(i));
    }
  }

  // Roots are the minimum pixel index of each set, so raster-order
  // numbering is just a scan.
  std::vector<int> labels(n, 0);
  std::vector<int> id_of_root(n, 0);
  count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (roots[i] < 0) continue;
    int& id = id_of_root[static_cast<std::size_t>(roots[i])];
    if (id == 0) id = ++count;
    labels[i] = id;
  }
  return labels;
}

}  // namespace am::vision
