#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <sstream>

#include "amflow/netlist.hpp"
#include "../util/strings.hpp"

namespace am::netlist {

namespace {

using util::lower;

struct Card {
  std::size_t line = 0;
  std::vector<std::string> tokens;
};

constexpr std::array<std::string_view, 22> kIgnoredDirectives = {
    ".op",      ".ac",    ".dc",  ".tran", ".noise",   ".meas",  ".measure", ".print",
    ".plot",    ".save",  ".option", ".options", ".param", ".include", ".inc", ".lib",
    ".endl",    ".temp",  ".global", ".title", ".ic",   ".nodeset"};

std::string strip_inline_comment(const std::string& line) {
  std::size_t cut = line.find(';');
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '$' && (i == 0 || std::isspace(static_cast<unsigned char>(line[i - 1])))) {
      cut = std::min(cut, i);
      break;
    }
  }
  return cut == std::string::npos ? line : line.substr(0, cut);
}

// Folds "W = 1u" into "W=1u" and drops .model parentheses.
std::vector<std::string> tokenize(std::string text) {
  for (char& c : text) {
    if (c == '(' || c == ')' || c == ',') c = ' ';
  }
  std::string folded;
  folded.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] == '=') {
      while (!folded.empty() && std::isspace(static_cast<unsigned char>(folded.back())))
        folded.pop_back();
      folded.push_back('=');
      while (i + 1 < text.size() && std::isspace(static_cast<unsigned char>(text[i + 1]))) ++i;
    } else {
      folded.push_back(text[i]);
    }
  }
  return util::split_ws(folded);
}

std::vector<Card> logical_cards(std::string_view text) {
  std::vector<Card> cards;
  const auto lines = util::split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::string_view raw = util::trim(lines[i]);
    if (raw.empty() || raw.front() == '*') continue;
    std::string body = strip_inline_comment(std::string(raw));
    if (util::trim(body).empty()) continue;
    if (body.front() == '+') {
      if (cards.empty()) throw SyntaxError(i + 1, "continuation line without a card");
      auto more = tokenize(body.substr(1));
      cards.back().tokens.insert(cards.back().tokens.end(), more.begin(), more.end());
      continue;
    }
    cards.push_back(Card{i + 1, tokenize(body)});
  }
  return cards;
}

std::string normalize_net(std::string_view name) {
  std::string n = lower(name);
  if (n == "0") return "gnd";
  return n;
}

bool is_param_token(const std::string& tok) { return tok.find('=') != std::string::npos; }

void parse_params(const Card& card, std::size_t from, std::map<std::string, double>& out) {
  for (std::size_t i = from; i < card.tokens.size(); ++i) {
    const std::string& tok = card.tokens[i];
    const std::size_t eq = tok.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw SyntaxError(card.line, "expected name=value, got '" + tok + "'");
    }
    const auto value = parse_si_value(std::string_view(tok).substr(eq + 1));
    if (!value) throw SyntaxError(card.line, "bad numeric value in '" + tok + "'");
    out[lower(tok.substr(0, eq))] = *value;
  }
}

std::optional<DeviceKind> kind_from_model_type(std::string_view type) {
  const std::string t = lower(type);
  if (t == "nmos") return DeviceKind::NMOS;
  if (t == "pmos") return DeviceKind::PMOS;
  if (t == "npn") return DeviceKind::BJT_NPN;
  if (t == "pnp") return DeviceKind::BJT_PNP;
  if (t == "d") return DeviceKind::D;
  return std::nullopt;
}

std::optional<DeviceKind> guess_mos_kind(const std::string& model) {
  for (std::string_view p : {"pfet", "pmos", "pch"}) {
    if (model.find(p) != std::string::npos) return DeviceKind::PMOS;
  }
  for (std::string_view n : {"nfet", "nmos", "nch"}) {
    if (model.find(n) != std::string::npos) return DeviceKind::NMOS;
  }
  return std::nullopt;
}

std::optional<DeviceKind> guess_bjt_kind(const std::string& model) {
  if (model.find("pnp") != std::string::npos) return DeviceKind::BJT_PNP;
  if (model.find("npn") != std::string::npos) return DeviceKind::BJT_NPN;
  return std::nullopt;
}

void require_positive(const Card& card, const Device& dev, std::string_view key) {
  auto it = dev.params.find(std::string(key));
  if (it != dev.params.end() && !(it->second > 0.0 && std::isfinite(it->second))) {
    throw SyntaxError(card.line, dev.id + ": " + std::string(key) + " must be positive");
  }
}

Device parse_terminal_device(const Card& card, DeviceKind kind, std::size_t n_nets,
                             bool has_model) {
  const auto& t = card.tokens;
  const std::size_t positional = 1 + n_nets + (has_model ? 1 : 0);
  std::size_t head = 1;
  while (head < t.size() && !is_param_token(t[head])) ++head;
  if (head < positional) {
    std::ostringstream why;
    why << t[0] << ": needs " << n_nets << " nets" << (has_model ? " + model" : "");
    throw SyntaxError(card.line, why.str());
  }
  if (head > positional) {
    throw SyntaxError(card.line, t[0] + ": unexpected token '" + t[positional] + "'");
  }
  Device dev;
  dev.id = t[0];
  dev.kind = kind;
  const auto& roles = port_roles(kind);
  for (std::size_t i = 0; i < n_nets; ++i) {
    dev.ports.push_back(Port{roles[i], normalize_net(t[1 + i])});
  }
  if (has_model) dev.model = lower(t[1 + n_nets]);
  parse_params(card, positional, dev.params);
  return dev;
}

Device parse_passive(const Card& card, DeviceKind kind) {
  const auto& t = card.tokens;
  if (t.size() < 3) throw SyntaxError(card.line, t[0] + ": needs 2 nets and a value");
  Device dev;
  dev.id = t[0];
  dev.kind = kind;
  dev.ports = {Port{PortRole::Terminal, normalize_net(t[1])},
               Port{PortRole::Terminal, normalize_net(t[2])}};
  std::size_t next = 3;
  if (next < t.size() && !is_param_token(t[next])) {
    const auto v = parse_si_value(t[next]);
    if (!v) throw SyntaxError(card.line, t[0] + ": bad value '" + t[next] + "'");
    dev.params["value"] = *v;
    ++next;
  }
  parse_params(card, next, dev.params);
  // Accept R=10k style as an alias of the positional value.
  for (std::string_view alias : {"r", "c", "l"}) {
    auto it = dev.params.find(std::string(alias));
    if (it != dev.params.end() && !dev.params.count("value")) {
      dev.params["value"] = it->second;
      dev.params.erase(it);
    }
  }
  if (!dev.params.count("value")) throw SyntaxError(card.line, t[0] + ": missing value");
  require_positive(card, dev, "value");
  return dev;
}

Device parse_source(const Card& card, DeviceKind kind) {
  const auto& t = card.tokens;
  if (t.size() < 3) throw SyntaxError(card.line, t[0] + ": needs 2 nets");
  Device dev;
  dev.id = t[0];
  dev.kind = kind;
  dev.ports = {Port{PortRole::Pos, normalize_net(t[1])}, Port{PortRole::Neg, normalize_net(t[2])}};
  std::size_t i = 3;
  while (i < t.size() && !is_param_token(t[i])) {
    const std::string key = lower(t[i]);
    if (key == "dc" || key == "ac") {
      if (i + 1 >= t.size()) throw SyntaxError(card.line, t[0] + ": " + key + " needs a value");
      const auto v = parse_si_value(t[i + 1]);
      if (!v) throw SyntaxError(card.line, t[0] + ": bad " + key + " value '" + t[i + 1] + "'");
      dev.params[key] = *v;
      i += 2;
      continue;
    }
    const auto v = parse_si_value(t[i]);
    if (!v || dev.params.count("dc")) {
      throw SyntaxError(card.line, t[0] + ": unsupported source specification '" + t[i] + "'");
    }
    dev.params["dc"] = *v;
    ++i;
  }
  parse_params(card, i, dev.params);
  if (!dev.params.count("dc")) dev.params["dc"] = 0.0;
  return dev;
}

}  // namespace

SyntaxError::SyntaxError(std::size_t line, const std::string& reason)
    : Error("line " + std::to_string(line) + ": " + reason), line_(line) {}

UnsupportedCard::UnsupportedCard(const std::string& name)
    : Error("unsupported card '" + name + "'") {}

std::optional<double> parse_si_value(std::string_view token) {
  token = util::trim(token);
  if (token.empty()) return std::nullopt;
  std::size_t i = 0;
  if (token[i] == '+' || token[i] == '-') ++i;
  const std::size_t digits_start = i;
  bool any_digit = false;
  while (i < token.size() && std::isdigit(static_cast<unsigned char>(token[i]))) {
    ++i;
    any_digit = true;
  }
  if (i < token.size() && token[i] == '.') {
    ++i;
    while (i < token.size() && std::isdigit(static_cast<unsigned char>(token[i]))) {
      ++i;
      any_digit = true;
    }
  }
  if (!any_digit || digits_start > token.size()) return std::nullopt;
  std::string mantissa(token.substr(0, i));
  int exponent = 0;
  if (i < token.size() && (token[i] == 'e' || token[i] == 'E')) {
    std::size_t j = i + 1;
    if (j < token.size() && (token[j] == '+' || token[j] == '-')) ++j;
    const std::size_t exp_digits = j;
    while (j < token.size() && std::isdigit(static_cast<unsigned char>(token[j]))) ++j;
    if (j > exp_digits) {
      exponent = std::atoi(std::string(token.substr(i + 1, j - i - 1)).c_str());
      i = j;
    }
  }
  const std::string rest = lower(token.substr(i));
  int scale = 0;
  std::size_t used = 0;
  if (util::starts_with_ci(rest, "meg")) {
    scale = 6;
    used = 3;
  } else if (!rest.empty()) {
    used = 1;
    switch (rest[0]) {
      case 'f': scale = -15; break;
      case 'p': scale = -12; break;
      case 'n': scale = -9; break;
      case 'u': scale = -6; break;
      case 'm': scale = -3; break;
      case 'k': scale = 3; break;
      case 'g': scale = 9; break;
      case 't': scale = 12; break;
      default: used = 0; break;
    }
  }
  for (std::size_t k = used; k < rest.size(); ++k) {
    if (!std::isalpha(static_cast<unsigned char>(rest[k]))) return std::nullopt;
  }
  // One correctly rounded conversion: "0.15u" parses exactly like "1.5e-7".
  const std::string sci = mantissa + "e" + std::to_string(exponent + scale);
  char* end = nullptr;
  const double v = std::strtod(sci.c_str(), &end);
  if (end != sci.c_str() + sci.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

NetlistIR parse_spice(std::string_view text, const ParseOptions& options) {
  const RailConfig& rails = options.rails ? *options.rails : RailConfig::defaults();
  auto warn = [&](std::string msg) {
    if (options.warnings) options.warnings->push_back(std::move(msg));
  };

  NetlistIR ir;
  std::vector<std::size_t> device_lines;
  std::set<std::string> seen_ids;
  const auto cards = logical_cards(text);

  for (std::size_t ci = 0; ci < cards.size(); ++ci) {
    const Card& card = cards[ci];
    const std::string& head = card.tokens.front();
    const std::string key = lower(head);

    if (key.front() == '.') {
      if (key == ".end") break;
      if (key == ".model") {
        if (card.tokens.size() < 3) throw SyntaxError(card.line, ".model needs a name and type");
        ir.models[lower(card.tokens[1])] = lower(card.tokens[2]);
        continue;
      }
      if (key == ".control") {
        warn("line " + std::to_string(card.line) + ": skipped .control block");
        while (ci + 1 < cards.size() && lower(cards[ci + 1].tokens.front()) != ".endc") ++ci;
        if (ci + 1 < cards.size()) ++ci;
        continue;
      }
      if (key == ".subckt") {
        if (card.tokens.size() < 2) throw SyntaxError(card.line, ".subckt needs a name");
        Subckt sub;
        sub.name = lower(card.tokens[1]);
        for (std::size_t i = 2; i < card.tokens.size(); ++i) {
          sub.pins.push_back(normalize_net(card.tokens[i]));
        }
        bool closed = false;
        while (ci + 1 < cards.size()) {
          ++ci;
          const auto& body = cards[ci].tokens;
          if (lower(body.front()) == ".ends") {
            closed = true;
            break;
          }
          std::string joined;
          for (const auto& tok : body) joined += (joined.empty() ? "" : " ") + tok;
          sub.body.push_back(std::move(joined));
        }
        if (!closed) throw SyntaxError(card.line, ".subckt " + sub.name + " without .ends");
        ir.subckts.push_back(std::move(sub));
        continue;
      }
      if (std::find(kIgnoredDirectives.begin(), kIgnoredDirectives.end(), key) !=
          kIgnoredDirectives.end()) {
        warn("line " + std::to_string(card.line) + ": ignored directive " + key);
        continue;
      }
      throw UnsupportedCard(head);
    }

    Device dev;
    switch (key.front()) {
      case 'm':
        dev = parse_terminal_device(card, DeviceKind::NMOS, 4, true);
        require_positive(card, dev, "w");
        require_positive(card, dev, "l");
        break;
      case 'q':
        dev = parse_terminal_device(card, DeviceKind::BJT_NPN, 3, true);
        break;
      case 'd':
        dev = parse_terminal_device(card, DeviceKind::D, 2, true);
        break;
      case 'r': dev = parse_passive(card, DeviceKind::R); break;
      case 'c': dev = parse_passive(card, DeviceKind::C); break;
      case 'l': dev = parse_passive(card, DeviceKind::L); break;
      case 'v': dev = parse_source(card, DeviceKind::V); break;
      case 'i': dev = parse_source(card, DeviceKind::I); break;
      default: throw UnsupportedCard(head);
    }
    if (!seen_ids.insert(lower(dev.id)).second) {
      throw SyntaxError(card.line, "duplicate device id " + dev.id);
    }
    ir.devices.push_back(std::move(dev));
    device_lines.push_back(card.line);
  }

  // Polarity needs the .model table, which may follow the element cards.
  for (std::size_t i = 0; i < ir.devices.size(); ++i) {
    Device& dev = ir.devices[i];
    if (!is_mos(dev.kind) && !is_bjt(dev.kind)) continue;
    std::optional<DeviceKind> kind;
    if (auto it = ir.models.find(dev.model); it != ir.models.end()) {
      kind = kind_from_model_type(it->second);
    }
    if (!kind) kind = is_mos(dev.kind) ? guess_mos_kind(dev.model) : guess_bjt_kind(dev.model);
    if (!kind || is_mos(*kind) != is_mos(dev.kind)) {
      throw SyntaxError(device_lines[i], dev.id + ": cannot determine polarity of model '" +
                                             dev.model + "'");
    }
    dev.kind = *kind;
  }

  ir.rebuild_nets(rails);
  return ir;
}

std::string serialize(const NetlistIR& ir) {
  std::vector<const Device*> order;
  order.reserve(ir.devices.size());
  for (const auto& d : ir.devices) order.push_back(&d);
  std::stable_sort(order.begin(), order.end(), [](const Device* a, const Device* b) {
    return util::natural_less(a->id, b->id);
  });

  std::ostringstream out;
  for (const Device* d : order) {
    out << d->id;
    for (const auto& p : d->ports) out << ' ' << p.net;
    std::map<std::string, double> rest = d->params;
    switch (d->kind) {
      case DeviceKind::R:
      case DeviceKind::C:
      case DeviceKind::L:
        if (auto it = rest.find("value"); it != rest.end()) {
          out << ' ' << util::format_double(it->second);
          rest.erase(it);
        }
        break;
      case DeviceKind::V:
      case DeviceKind::I:
        for (const char* k : {"dc", "ac"}) {
          if (auto it = rest.find(k); it != rest.end()) {
            out << ' ' << util::upper(k) << ' ' << util::format_double(it->second);
            rest.erase(it);
          }
        }
        break;
      default:
        out << ' ' << d->model;
        break;
    }
    for (const auto& [k, v] : rest) out << ' ' << k << '=' << util::format_double(v);
    out << '\n';
  }
  for (const auto& [name, type] : ir.models) out << ".model " << name << ' ' << type << '\n';
  for (const auto& sub : ir.subckts) {
    out << ".subckt " << sub.name;
    for (const auto& p : sub.pins) out << ' ' << p;
    out << '\n';
    for (const auto& line : sub.body) out << line << '\n';
    out << ".ends\n";
  }
  out << ".end";
  return out.str();
}

bool structurally_equal(const NetlistIR& a, const NetlistIR& b) {
  auto sorted = [](const NetlistIR& ir) {
    NetlistIR out = ir;
    std::stable_sort(out.devices.begin(), out.devices.end(), [](const Device& x, const Device& y) {
      return util::natural_less(x.id, y.id);
    });
    return out;
  };
  return sorted(a) == sorted(b);
}

void validate(const NetlistIR& ir) {
  std::set<std::string> ids;
  std::set<std::string> touched;
  for (const auto& d : ir.devices) {
    if (!ids.insert(lower(d.id)).second) throw InvalidNetlist("duplicate device id " + d.id);
    const auto& roles = port_roles(d.kind);
    if (d.ports.size() != roles.size()) {
      throw InvalidNetlist(d.id + ": expected " + std::to_string(roles.size()) + " ports");
    }
    for (std::size_t i = 0; i < roles.size(); ++i) {
      if (d.ports[i].role != roles[i]) throw InvalidNetlist(d.id + ": port role order");
      if (!ir.nets.count(d.ports[i].net)) {
        throw InvalidNetlist(d.id + ": port references unknown net " + d.ports[i].net);
      }
      touched.insert(d.ports[i].net);
    }
    for (const auto& [k, v] : d.params) {
      if (!std::isfinite(v)) throw InvalidNetlist(d.id + ": non-finite " + k);
    }
    for (const char* k : {"w", "l", "value"}) {
      auto it = d.params.find(k);
      if (it != d.params.end() && d.kind != DeviceKind::V && d.kind != DeviceKind::I &&
          !(it->second > 0.0)) {
        throw InvalidNetlist(d.id + ": " + k + " must be positive");
      }
    }
  }
  for (const auto& n : ir.nets) {
    if (!touched.count(n)) throw InvalidNetlist("dangling net " + n);
  }
  for (const auto& [n, role] : ir.named_rails) {
    (void)role;
    if (!ir.nets.count(n)) throw InvalidNetlist("rail " + n + " is not a net");
  }
}

}  // namespace am::netlist
