#pragma once

// Schematic image connectivity analysis: wire-only masking from detector
// boxes, morphological region labeling, duplicate-node merging and the
// annotated artifacts fed to the reasoning branches.

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "amflow/error.hpp"
#include "amflow/exec.hpp"

namespace am::vision {

struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  GrayImage() = default;
  GrayImage(int w, int h, std::uint8_t fill = 255)
      : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill) {}
  std::uint8_t at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
};

using Rgb = std::array<std::uint8_t, 3>;

struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;  // interleaved RGB

  RgbImage() = default;
  RgbImage(int w, int h, Rgb fill = {255, 255, 255});
  Rgb get(int x, int y) const;
  void set(int x, int y, Rgb c);
};

// Binary raster; 1 = foreground.
struct Mask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;

  Mask() = default;
  Mask(int w, int h) : width(w), height(h), bits(static_cast<std::size_t>(w) * h, 0) {}
  std::uint8_t at(int x, int y) const { return bits[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t& at(int x, int y) { return bits[static_cast<std::size_t>(y) * width + x]; }
  std::size_t count() const;
};

// Integer pixel rectangle [x, x+w) x [y, y+h).
struct Rect {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;

  Rect expanded(int margin) const { return {x - margin, y - margin, w + 2 * margin, h + 2 * margin}; }
  bool contains(int px, int py) const { return px >= x && px < x + w && py >= y && py < y + h; }
  bool operator==(const Rect&) const = default;
};

// The twelve detector classes.
enum class ComponentClass {
  AcSource, Bjt, Battery, Capacitor, CurrentSource, DcSource,
  Diode, Ground, Inductor, Mosfet, Resistor, VoltageSource,
};

std::string_view to_string(ComponentClass c);

struct Component {
  std::string id;
  ComponentClass cls = ComponentClass::Resistor;
  Rect bbox;
  double confidence = 1.0;
};

struct DetectionSet {
  int width = 0;
  int height = 0;
  std::vector<Component> components;
  std::vector<Rect> text_boxes;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class InvalidDetections : public Error {
 public:
  using Error::Error;
};

// JSON: {image:{w,h}, components:[{class,bbox:[x,y,w,h],conf[,id]}], text_boxes:[[x,y,w,h]...]}.
// Components without an id are named "<class>_<index>".
DetectionSet parse_detections(std::string_view json_text);
std::string to_json(const DetectionSet& det);

struct VisionConfig {
  std::uint8_t threshold = 128;  // gray <= threshold is ink
  int dilation_radius = 2;       // also the box-clearing margin
  std::size_t area_threshold = 25;
  double centroid_eps = 8.0;
  int touch_tolerance = 2;  // ring width scanned around cleared boxes
};

// Clears component and text boxes (expanded by the dilation radius) and
// binarizes the remaining ink.
Mask derive_wire_mask(const GrayImage& image, const DetectionSet& det,
                      const VisionConfig& config = {}, Exec exec = Exec::Parallel);

// Square (Chebyshev) structuring element of the given radius.
Mask dilate(const Mask& mask, int radius, Exec exec = Exec::Parallel);

// 8-connected components, ids dense 1..K in raster order of first pixel.
std::vector<int> connected_components(const Mask& mask, int& count, Exec exec = Exec::Parallel);

enum class Side { Left, Right, Top, Bottom };
std::string_view to_string(Side side);

struct PortTouch {
  std::string component;
  Side side;
  bool operator==(const PortTouch&) const = default;
};

struct RegionStats {
  std::size_t area = 0;
  double cx = 0.0;
  double cy = 0.0;
  std::vector<PortTouch> touches;
};

struct RegionLabeling {
  int width = 0;
  int height = 0;
  std::vector<int> labels;          // 0 = background, else region id
  std::vector<RegionStats> stats;   // stats[id - 1]

  std::size_t region_count() const { return stats.size(); }
  int at(int x, int y) const { return labels[static_cast<std::size_t>(y) * width + x]; }
};

// Dilates to bridge clearing gaps, labels 8-connected components of the
// dilated mask and assigns each original foreground pixel the id of its
// component. Regions with fewer than `area_threshold` original pixels are
// dropped.
RegionLabeling label_regions(const Mask& mask, std::size_t area_threshold, int dilation_radius,
                             Exec exec = Exec::Parallel);

// Merges regions whose centroids are within `centroid_eps`, repeating
// until no pair qualifies. Idempotent.
RegionLabeling merge_nodes(const RegionLabeling& labeling, double centroid_eps);

// Fills RegionStats::touches from a scan of the ring just outside each
// cleared component box.
void attach_touches(RegionLabeling& labeling, const DetectionSet& det,
                    const VisionConfig& config = {});

// Deterministic palette: golden-ratio hue sequence, distinct per id.
std::vector<Rgb> region_palette(std::size_t count);

struct AnnotatedBundle {
  RgbImage regions;      // palette colour per region on white
  std::string node_map;  // JSON
  RgbImage overlay;      // source image + regions + boxes + node labels
};

AnnotatedBundle annotate(const GrayImage& image, const DetectionSet& det,
                         const RegionLabeling& labeling, const VisionConfig& config = {});

// End-to-end helper: mask, label, merge, touch scan, annotate.
struct ExtractionResult {
  Mask wire_mask;
  RegionLabeling labeling;
  AnnotatedBundle bundle;
};
ExtractionResult extract(const GrayImage& image, const DetectionSet& det,
                         const VisionConfig& config = {}, Exec exec = Exec::Parallel);

// Raster IO. PNG via libpng (any colour type, converted); PGM P5/P2.
GrayImage read_gray_image(const std::string& path);
GrayImage read_pgm(const std::string& path);
GrayImage read_png_gray(const std::string& path);
void write_pgm(const std::string& path, const GrayImage& image);
void write_png(const std::string& path, const RgbImage& image);
void write_png(const std::string& path, const GrayImage& image);

}  // namespace am::vision
