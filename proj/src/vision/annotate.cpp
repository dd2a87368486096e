#include <array>
#include <cmath>
#include <cstdio>
#include <set>

#include "amflow/vision.hpp"
#include "json.hpp"

namespace am::vision {

namespace {

Rgb hsv_to_rgb(double h, double s, double v) {
  const double c = v * s;
  const double hp = h * 6.0;
  const double x = c * (1.0 - std::fabs(std::fmod(hp, 2.0) - 1.0));
  double r = 0, g = 0, b = 0;
  switch (static_cast<int>(hp) % 6) {
    case 0: r = c; g = x; break;
    case 1: r = x; g = c; break;
    case 2: g = c; b = x; break;
    case 3: g = x; b = c; break;
    case 4: r = x; b = c; break;
    default: r = c; b = x; break;
  }
  const double m = v - c;
  auto q = [m](double t) { return static_cast<std::uint8_t>(std::lround((t + m) * 255.0)); };
  return {q(r), q(g), q(b)};
}

std::string hex(Rgb c) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", c[0], c[1], c[2]);
  return buf;
}

// 3x5 glyphs, rows top to bottom, bit 2 = leftmost column.
constexpr std::array<std::array<std::uint8_t, 5>, 11> kGlyphs{{
    {7, 5, 5, 5, 7}, {2, 6, 2, 2, 7}, {7, 1, 7, 4, 7}, {7, 1, 7, 1, 7}, {5, 5, 7, 1, 1},
    {7, 4, 7, 1, 7}, {7, 4, 7, 5, 7}, {7, 1, 1, 1, 1}, {7, 5, 7, 5, 7}, {7, 5, 7, 1, 7},
    {5, 7, 7, 7, 5},  // N
}};

void draw_text(RgbImage& img, int x, int y, const std::string& text, Rgb ink, int scale) {
  for (char ch : text) {
    const int g = ch == 'N' ? 10 : (ch >= '0' && ch <= '9' ? ch - '0' : -1);
    if (g >= 0) {
      for (int row = 0; row < 5; ++row)
        for (int col = 0; col < 3; ++col)
          if (kGlyphs[static_cast<std::size_t>(g)][static_cast<std::size_t>(row)] & (4 >> col))
            for (int sy = 0; sy < scale; ++sy)
              for (int sx = 0; sx < scale; ++sx)
                img.set(x + col * scale + sx, y + row * scale + sy, ink);
    }
    x += 4 * scale;
  }
}

void draw_rect(RgbImage& img, const Rect& r, Rgb ink) {
  for (int x = r.x; x < r.x + r.w; ++x) {
    img.set(x, r.y, ink);
    img.set(x, r.y + r.h - 1, ink);
  }
  for (int y = r.y; y < r.y + r.h; ++y) {
    img.set(r.x, y, ink);
    img.set(r.x + r.w - 1, y, ink);
  }
}

}  // namespace

std::vector<Rgb> region_palette(std::size_t count) {
  constexpr double kGolden = 0.6180339887498949;
  std::vector<Rgb> out;
  std::set<Rgb> used{{255, 255, 255}, {0, 0, 0}};
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double h = std::fmod(0.11 + static_cast<double>(i) * kGolden, 1.0);
    // Later cycles of the hue sequence drift in value so colours stay distinct.
    double v = 0.92 - 0.07 * static_cast<double>((i / 12) % 6);
    Rgb c = hsv_to_rgb(h, 0.8, v);
    while (used.count(c)) {
      v -= 1.0 / 255.0;
      if (v < 0.2) v = 0.95;
      c = hsv_to_rgb(h, 0.8, v);
    }
    used.insert(c);
    out.push_back(c);
  }
  return out;
}

AnnotatedBundle annotate(const GrayImage& image, const DetectionSet& det,
                         const RegionLabeling& labeling, const VisionConfig&) {
  if (image.width != labeling.width || image.height != labeling.height) {
    throw DimensionMismatch("labeling does not match image dimensions");
  }
  const auto palette = region_palette(labeling.region_count());
  AnnotatedBundle out;
  out.regions = RgbImage(image.width, image.height);
  out.overlay = RgbImage(image.width, image.height);
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      const std::uint8_t g = image.at(x, y);
      // Faded source underneath the overlay.
      const auto faded = static_cast<std::uint8_t>(160 + g * 95 / 255);
      out.overlay.set(x, y, {faded, faded, faded});
      const int id = labeling.at(x, y);
      if (id > 0) {
        const Rgb c = palette[static_cast<std::size_t>(id - 1)];
        out.regions.set(x, y, c);
        out.overlay.set(x, y, c);
      }
    }
  }
  for (const auto& c : det.components) draw_rect(out.overlay, c.bbox, {200, 30, 30});
  for (const auto& t : det.text_boxes) draw_rect(out.overlay, t, {120, 120, 220});
  const int scale = std::max(1, std::min(image.width, image.height) / 200);
  for (std::size_t k = 0; k < labeling.region_count(); ++k) {
    const auto& s = labeling.stats[k];
    draw_text(out.overlay, static_cast<int>(s.cx) + 2, static_cast<int>(s.cy) - 6 * scale,
              "N" + std::to_string(k + 1), {0, 0, 0}, scale);
  }

  nlohmann::json doc;
  doc["regions"] = nlohmann::json::array();
  for (std::size_t k = 0; k < labeling.region_count(); ++k) {
    const auto& s = labeling.stats[k];
    nlohmann::json touches = nlohmann::json::array();
    for (const auto& t : s.touches) {
      touches.push_back({{"component", t.component}, {"side", std::string(to_string(t.side))}});
    }
    doc["regions"].push_back({{"id", k + 1},
                              {"color", hex(palette[k])},
                              {"area", s.area},
                              {"centroid", {std::round(s.cx * 100) / 100, std::round(s.cy * 100) / 100}},
                              {"touches", touches}});
  }
  doc["components"] = nlohmann::json::array();
  for (const auto& c : det.components) {
    doc["components"].push_back({{"id", c.id},
                                 {"class", std::string(to_string(c.cls))},
                                 {"bbox", {c.bbox.x, c.bbox.y, c.bbox.w, c.bbox.h}}});
  }
  out.node_map = doc.dump(2);
  return out;
}

ExtractionResult extract(const GrayImage& image, const DetectionSet& det, const VisionConfig& config,
                         Exec exec) {
  ExtractionResult r;
  r.wire_mask = derive_wire_mask(image, det, config, exec);
  r.labeling = merge_nodes(
      label_regions(r.wire_mask, config.area_threshold, config.dilation_radius, exec),
      config.centroid_eps);
  attach_touches(r.labeling, det, config);
  r.bundle = annotate(image, det, r.labeling, config);
  return r;
}

}  // namespace am::vision
