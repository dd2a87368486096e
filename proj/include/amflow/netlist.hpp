#pragma once

// SPICE netlist intermediate representation: parsing, canonical
// serialization, isomorphism-invariant canonical forms and the
// recovery scorer used to judge extracted netlists against ground truth.

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "amflow/error.hpp"

namespace am::netlist {

enum class DeviceKind { NMOS, PMOS, BJT_NPN, BJT_PNP, R, C, L, V, I, D };

// Port roles. Resistors, capacitors and inductors use `Terminal` on both
// ends, which makes them orientation-free for comparison purposes.
enum class PortRole {
  Drain, Gate, Source, Bulk,
  Collector, Base, Emitter,
  Pos, Neg,
  Anode, Cathode,
  Terminal,
};

enum class RailRole { VDD, GND, Input, Output };

std::string_view to_string(DeviceKind kind);
std::string_view to_string(PortRole role);
std::string_view to_string(RailRole role);
std::optional<DeviceKind> kind_from_string(std::string_view s);

bool is_mos(DeviceKind kind);
bool is_bjt(DeviceKind kind);
// Port roles in card order for a device kind (MOS = D,G,S,B).
const std::vector<PortRole>& port_roles(DeviceKind kind);

struct Port {
  PortRole role;
  std::string net;

  bool operator==(const Port&) const = default;
};

struct Device {
  std::string id;
  DeviceKind kind = DeviceKind::R;
  std::vector<Port> ports;
  // Model name for M/Q/D cards; empty for passives and sources.
  std::string model;
  // SI base units. Passives store their value under "value", sources
  // under "dc" / "ac"; MOS geometry under "w" / "l".
  std::map<std::string, double> params;

  const std::string& net(PortRole role) const;
  bool operator==(const Device&) const = default;
};

struct Subckt {
  std::string name;
  std::vector<std::string> pins;
  std::vector<std::string> body;

  bool operator==(const Subckt&) const = default;
};

// Exact-name rail identification (case-insensitive). Names not listed
// here are ordinary nets and may be renamed freely.
struct RailConfig {
  std::map<std::string, RailRole> names;

  static const RailConfig& defaults();
  std::optional<RailRole> role_of(std::string_view net) const;
};

struct NetlistIR {
  std::vector<Device> devices;
  std::set<std::string> nets;
  std::map<std::string, RailRole> named_rails;
  std::map<std::string, std::string> models;  // model name -> type (nmos, pnp, ...)
  std::vector<Subckt> subckts;

  const Device* find(std::string_view id) const;
  Device* find(std::string_view id);
  // Recomputes `nets` and `named_rails` from device ports.
  void rebuild_nets(const RailConfig& rails = RailConfig::defaults());

  bool operator==(const NetlistIR&) const = default;
};

class SyntaxError : public Error {
 public:
  SyntaxError(std::size_t line, const std::string& reason);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class UnsupportedCard : public Error {
 public:
  explicit UnsupportedCard(const std::string& name);
};

class InvalidNetlist : public Error {
 public:
  using Error::Error;
};

struct ParseOptions {
  const RailConfig* rails = nullptr;  // defaults() when null
  std::vector<std::string>* warnings = nullptr;
};

// Parses a SPICE value with SI suffix (f p n u m k meg g t; 'M' = milli).
// Trailing unit letters (e.g. "10kohm", "1uF") are ignored.
std::optional<double> parse_si_value(std::string_view token);

NetlistIR parse_spice(std::string_view text, const ParseOptions& options = {});

// Canonical text: devices in natural id order, params in name order,
// shortest round-trip numerics, then .model cards, subcircuits and .end.
std::string serialize(const NetlistIR& ir);

// Equality up to device order (devices compared in natural id order).
bool structurally_equal(const NetlistIR& a, const NetlistIR& b);

// Throws InvalidNetlist when a structural invariant is violated.
void validate(const NetlistIR& ir);

// Isomorphism-invariant description of a netlist's topology. Device ids,
// non-rail net names and params do not participate.
struct CanonicalForm {
  std::string certificate;
  // Devices / nets in canonical order (indices into the source IR's
  // devices, and net names).
  std::vector<std::size_t> device_order;
  std::vector<std::string> net_order;

  // Stable SHA-256 hex digest of the certificate, for golden files.
  std::string hash() const;

  bool operator==(const CanonicalForm& other) const {
    return certificate == other.certificate;
  }
};

CanonicalForm canonicalize(const NetlistIR& ir);

struct RecoveryReport {
  bool exact_match = false;
  double component_accuracy = 0.0;
  double edge_accuracy = 0.0;
  std::vector<std::string> mismatches;
};

RecoveryReport recovery_score(const NetlistIR& pred, const NetlistIR& truth);

// Best device/net correspondence of `pred` onto `truth`: exact when the two
// are isomorphic, otherwise alternating assignment maximizing kind and
// incidence agreement.
struct Correspondence {
  bool isomorphic = false;
  std::vector<int> device_map;                 // truth device -> pred device, -1 if none
  std::map<std::string, std::string> net_map;  // pred net -> truth net
};

Correspondence align(const NetlistIR& pred, const NetlistIR& truth);

}  // namespace am::netlist
