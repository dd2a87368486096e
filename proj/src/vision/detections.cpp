#include <array>
#include <map>

#include "amflow/vision.hpp"
#include "json.hpp"

namespace am::vision {

namespace {

using nlohmann::json;

constexpr std::array<std::pair<ComponentClass, std::string_view>, 12> kClassNames{{
    {ComponentClass::AcSource, "ac_source"},
    {ComponentClass::Bjt, "bjt"},
    {ComponentClass::Battery, "battery"},
    {ComponentClass::Capacitor, "capacitor"},
    {ComponentClass::CurrentSource, "current_source"},
    {ComponentClass::DcSource, "dc_source"},
    {ComponentClass::Diode, "diode"},
    {ComponentClass::Ground, "ground"},
    {ComponentClass::Inductor, "inductor"},
    {ComponentClass::Mosfet, "mosfet"},
    {ComponentClass::Resistor, "resistor"},
    {ComponentClass::VoltageSource, "voltage_source"},
}};

ComponentClass class_from(const std::string& s) {
  for (const auto& [cls, name] : kClassNames) {
    if (name == s) return cls;
  }
  throw InvalidDetections("unknown component class '" + s + "'");
}

Rect rect_from(const json& j, int width, int height, const std::string& what) {
  if (!j.is_array() || j.size() != 4) throw InvalidDetections(what + ": bbox must be [x,y,w,h]");
  Rect r{j[0].get<int>(), j[1].get<int>(), j[2].get<int>(), j[3].get<int>()};
  if (r.w <= 0 || r.h <= 0 || r.x < 0 || r.y < 0 || r.x + r.w > width || r.y + r.h > height) {
    throw InvalidDetections(what + ": bbox outside image bounds");
  }
  return r;
}

json rect_json(const Rect& r) { return json::array({r.x, r.y, r.w, r.h}); }

}  // namespace

std::string_view to_string(ComponentClass c) {
  for (const auto& [cls, name] : kClassNames) {
    if (cls == c) return name;
  }
  return "resistor";
}

DetectionSet parse_detections(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw InvalidDetections(std::string("malformed detections JSON: ") + e.what());
  }
  DetectionSet det;
  try {
    det.width = doc.at("image").at("w").get<int>();
    det.height = doc.at("image").at("h").get<int>();
    if (det.width <= 0 || det.height <= 0) throw InvalidDetections("image size must be positive");

    std::map<ComponentClass, int> per_class;
    std::size_t index = 0;
    for (const auto& c : doc.value("components", json::array())) {
      Component comp;
      comp.cls = class_from(c.at("class").get<std::string>());
      const std::string label = "component " + std::to_string(index++);
      comp.bbox = rect_from(c.at("bbox"), det.width, det.height, label);
      comp.confidence = c.value("conf", 1.0);
      if (!(comp.confidence >= 0.0 && comp.confidence <= 1.0)) {
        throw InvalidDetections(label + ": confidence outside [0,1]");
      }
      const int n = per_class[comp.cls]++;
      comp.id = c.contains("id") ? c["id"].get<std::string>()
                                 : std::string(to_string(comp.cls)) + "_" + std::to_string(n);
      det.components.push_back(std::move(comp));
    }
    std::size_t t = 0;
    for (const auto& b : doc.value("text_boxes", json::array())) {
      det.text_boxes.push_back(rect_from(b, det.width, det.height, "text box " + std::to_string(t++)));
    }
  } catch (const json::exception& e) {
    throw InvalidDetections(std::string("bad detections field: ") + e.what());
  }
  return det;
}

std::string to_json(const DetectionSet& det) {
  json doc;
  doc["image"] = {{"w", det.width}, {"h", det.height}};
  doc["components"] = json::array();
  for (const auto& c : det.components) {
    doc["components"].push_back({{"id", c.id},
                                 {"class", std::string(to_string(c.cls))},
                                 {"bbox", rect_json(c.bbox)},
                                 {"conf", c.confidence}});
  }
  doc["text_boxes"] = json::array();
  for (const auto& t : det.text_boxes) doc["text_boxes"].push_back(rect_json(t));
  return doc.dump(2);
}

}  // namespace am::vision
