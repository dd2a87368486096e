#pragma once

// Tiny synthetic schematic renderer for fixture authoring: wires are
// thick polylines, component bodies and labels are ink scribbles inside
// their boxes (cleared again by the wire mask).

#include <string>
#include <utility>
#include <vector>

#include "amflow/vision.hpp"

namespace art {

using am::vision::ComponentClass;
using am::vision::GrayImage;
using am::vision::Rect;

struct Sheet {
  GrayImage image;
  am::vision::DetectionSet det;

  Sheet(int w, int h) : image(w, h) {
    det.width = w;
    det.height = h;
  }

  void ink(int x, int y) {
    if (x >= 0 && y >= 0 && x < image.width && y < image.height) image.at(x, y) = 20;
  }

  // Axis-aligned segment, 2 px thick.
  void wire(int x0, int y0, int x1, int y1) {
    if (y0 == y1) {
      for (int x = std::min(x0, x1); x <= std::max(x0, x1); ++x) {
        ink(x, y0);
        ink(x, y0 + 1);
      }
    } else {
      for (int y = std::min(y0, y1); y <= std::max(y0, y1); ++y) {
        ink(x0, y);
        ink(x0 + 1, y);
      }
    }
  }

  void path(const std::vector<std::pair<int, int>>& pts) {
    for (std::size_t i = 1; i < pts.size(); ++i) wire(pts[i - 1].first, pts[i - 1].second, pts[i].first, pts[i].second);
  }

  void component(const std::string& id, ComponentClass cls, Rect box, double conf = 0.93) {
    for (int x = box.x + 3; x < box.x + box.w - 3; ++x) {
      ink(x, box.y + 3);
      ink(x, box.y + box.h - 4);
    }
    for (int y = box.y + 3; y < box.y + box.h - 3; ++y) {
      ink(box.x + 3, y);
      ink(box.x + box.w - 4, y);
      ink(box.x + box.w / 2, y);
    }
    det.components.push_back({id, cls, box, conf});
  }

  void label(Rect box) {
    for (int y = box.y + 2; y < box.y + box.h - 2; y += 2)
      for (int x = box.x + 2; x < box.x + box.w - 2; x += 3) ink(x, y);
    det.text_boxes.push_back(box);
  }
};

// Common-source stage with resistive load.
inline Sheet common_source_sheet() {
  Sheet s(240, 240);
  s.wire(40, 30, 200, 30);                 // vdd rail
  s.label({4, 22, 30, 16});
  s.component("R1", ComponentClass::Resistor, {100, 50, 40, 40});
  s.wire(120, 30, 120, 50);
  s.component("M1", ComponentClass::Mosfet, {100, 130, 40, 40});
  s.path({{120, 90}, {120, 130}});
  s.path({{120, 110}, {200, 110}});        // out
  s.label({204, 102, 30, 16});
  s.path({{40, 150}, {100, 150}});         // in
  s.label({4, 142, 30, 16});
  s.path({{120, 170}, {120, 210}});
  s.wire(40, 210, 200, 210);               // gnd rail
  s.component("GND1", ComponentClass::Ground, {110, 213, 20, 20});
  return s;
}

// Common-source stage drawn on a wider sheet with the load to the right.
inline Sheet cs_sheet() {
  Sheet s(300, 260);
  s.wire(40, 30, 260, 30);                 // vdd rail
  s.label({4, 22, 30, 16});
  s.component("R1", ComponentClass::Resistor, {180, 60, 40, 40});
  s.wire(200, 30, 200, 60);
  s.component("M1", ComponentClass::Mosfet, {110, 140, 40, 40});
  s.path({{200, 100}, {200, 120}, {130, 120}, {130, 140}});
  s.path({{200, 120}, {260, 120}});        // out
  s.label({264, 112, 30, 16});
  s.path({{50, 160}, {110, 160}});         // in
  s.label({14, 152, 30, 16});
  s.path({{130, 180}, {130, 220}});
  s.wire(40, 220, 260, 220);               // gnd rail
  s.component("GND1", ComponentClass::Ground, {120, 223, 20, 20});
  return s;
}

// Five-transistor OTA: NMOS pair, PMOS mirror, NMOS tail, bias source.
inline Sheet amp5t_sheet() {
  Sheet s(400, 380);
  s.wire(60, 30, 340, 30);   // vdd
  s.label({12, 22, 40, 16});
  s.component("M3", ComponentClass::Mosfet, {90, 60, 40, 40});
  s.component("M4", ComponentClass::Mosfet, {270, 60, 40, 40});
  s.wire(110, 30, 110, 60);
  s.wire(290, 30, 290, 60);
  s.wire(130, 80, 270, 80);                       // mirror gates
  s.path({{110, 100}, {110, 160}});               // n1: M3 drain to M1 drain
  s.path({{110, 130}, {200, 130}, {200, 80}});    // diode connection
  s.component("M1", ComponentClass::Mosfet, {90, 160, 40, 40});
  s.component("M2", ComponentClass::Mosfet, {270, 160, 40, 40});
  s.path({{290, 100}, {290, 160}});               // out
  s.path({{290, 130}, {360, 130}});
  s.label({362, 122, 34, 16});
  s.path({{40, 180}, {90, 180}});                 // inp
  s.label({2, 172, 34, 16});
  s.path({{310, 180}, {360, 180}});               // inn
  s.label({362, 172, 34, 16});
  s.path({{110, 200}, {110, 230}, {290, 230}, {290, 200}});  // tail
  s.component("M5", ComponentClass::Mosfet, {180, 250, 40, 40});
  s.path({{200, 230}, {200, 250}});
  s.component("Vb", ComponentClass::VoltageSource, {90, 250, 40, 40});
  s.path({{130, 270}, {180, 270}});               // vb
  s.path({{200, 290}, {200, 330}});
  s.path({{110, 290}, {110, 330}});
  s.wire(60, 330, 340, 330);                      // gnd
  s.component("GND1", ComponentClass::Ground, {190, 333, 20, 20});
  return s;
}

}  // namespace art
