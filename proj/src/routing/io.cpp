#include <nlohmann/json.hpp>
#include <sstream>

#include "amflow/routing.hpp"
#include "../util/strings.hpp"

namespace am::routing {

using json = nlohmann::json;

std::string to_json(const RoutingReport& report, const RoutingGrid& grid) {
  json j;
  j["grid"] = {{"pitch", grid.rules.pitch}, {"x0", grid.x0}, {"y0", grid.y0}, {"nx", grid.nx}, {"ny", grid.ny},
               {"min_spacing", grid.rules.min_spacing}};
  j["order"] = report.order;
  j["unrouted"] = report.unrouted;
  j["mirrored"] = report.mirrored;
  j["asymmetric"] = report.asymmetric;
  j["routes"] = json::array();
  for (const auto& r : report.routes) {
    json jr{{"net", r.net}, {"length_um", r.length_um}, {"via_count", r.via_count}, {"cost", r.cost},
            {"segments", json::array()}};
    for (const auto& seg : r.segments) {
      json js = json::array();
      for (const auto& c : seg) js.push_back({c.layer, c.ix, c.iy});
      jr["segments"].push_back(std::move(js));
    }
    j["routes"].push_back(std::move(jr));
  }
  return j.dump(2);
}

RoutingReport report_from_json(const std::string& text) {
  RoutingReport rep;
  try {
    const json j = json::parse(text);
    rep.order = j.value("order", std::vector<std::string>{});
    rep.unrouted = j.value("unrouted", std::vector<std::string>{});
    rep.mirrored = j.value("mirrored", std::vector<std::string>{});
    rep.asymmetric = j.value("asymmetric", std::vector<std::string>{});
    for (const auto& jr : j.at("routes")) {
      Route r;
      r.net = jr.at("net").get<std::string>();
      r.length_um = jr.at("length_um").get<double>();
      r.via_count = jr.at("via_count").get<int>();
      r.cost = jr.at("cost").get<double>();
      for (const auto& js : jr.at("segments")) {
        Path p;
        for (const auto& c : js) p.push_back({c.at(0).get<int>(), c.at(1).get<int>(), c.at(2).get<int>()});
        r.segments.push_back(std::move(p));
      }
      rep.routes.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    throw InvalidGrid(std::string("malformed routing JSON: ") + e.what());
  }
  return rep;
}

namespace {

constexpr double kScale = 20.0;  // px per µm

std::string num(double v) { return util::format_double(v); }

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out += c;
  }
  return out;
}

}  // namespace

std::string to_svg(const RoutingReport& report, const RoutingGrid& grid) {
  const double p = grid.rules.pitch;
  const double w = grid.nx * p * kScale, h = grid.ny * p * kScale;
  auto sx = [&](double x) { return (x - grid.x0) * kScale; };
  auto sy = [&](double y) { return h - (y - grid.y0) * kScale; };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(w) << "\" height=\"" << num(h)
     << "\" viewBox=\"0 0 " << num(w) << ' ' << num(h) << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (const auto& b : grid.blocks) {
    os << "<rect x=\"" << num(sx(b.x)) << "\" y=\"" << num(sy(b.y + b.h)) << "\" width=\"" << num(b.w * kScale)
       << "\" height=\"" << num(b.h * kScale) << "\" fill=\"#e0e0e0\" stroke=\"#404040\"/>\n";
    os << "<text x=\"" << num(sx(b.x + b.w / 2)) << "\" y=\"" << num(sy(b.y + b.h / 2))
       << "\" font-size=\"10\" text-anchor=\"middle\">" << escape(b.id) << "</text>\n";
  }
  const char* colour[2] = {"#d62728", "#1f77b4"};
  const double stroke = 0.4 * p * kScale;
  for (const auto& r : report.routes) {
    for (const auto& seg : r.segments)
      for (std::size_t i = 1; i < seg.size(); ++i) {
        const auto [ax, ay] = grid.center(seg[i - 1]);
        const auto [bx, by] = grid.center(seg[i]);
        if (seg[i].layer != seg[i - 1].layer) {
          const double s = 0.6 * p * kScale;
          os << "<rect class=\"via\" x=\"" << num(sx(ax) - s / 2) << "\" y=\"" << num(sy(ay) - s / 2) << "\" width=\""
             << num(s) << "\" height=\"" << num(s) << "\" fill=\"black\"/>\n";
          continue;
        }
        os << "<line class=\"m" << seg[i].layer + 1 << "\" x1=\"" << num(sx(ax)) << "\" y1=\"" << num(sy(ay))
           << "\" x2=\"" << num(sx(bx)) << "\" y2=\"" << num(sy(by)) << "\" stroke=\"" << colour[seg[i].layer]
           << "\" stroke-width=\"" << num(stroke) << "\" stroke-linecap=\"square\"/>\n";
      }
    if (!r.segments.empty() && !r.segments.front().empty()) {
      const auto [lx, ly] = grid.center(r.segments.front().front());
      os << "<text x=\"" << num(sx(lx) + 3) << "\" y=\"" << num(sy(ly) - 3) << "\" font-size=\"8\" fill=\"#202020\">"
         << escape(r.net) << "</text>\n";
    }
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace am::routing
