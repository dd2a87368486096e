#pragma once

// Sequence-pair placement with mirror-symmetry pairs, annealed over an
// area + wirelength + symmetry cost.

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "amflow/error.hpp"
#include "amflow/exec.hpp"
#include "amflow/netlist.hpp"

namespace am::placement {

using SymmetryPair = std::pair<std::string, std::string>;

// Same-kind MOS pairs sharing a source net and gated by two distinct
// input nets, plus mirror loads sharing source and gate. With
// `require_equal_geometry` members must also agree on W and L.
std::vector<SymmetryPair> derive_symmetry_pairs(const netlist::NetlistIR& ir, bool require_equal_geometry = true);

struct PinOffset {
  std::string net;
  double dx = 0.0;  // from block lower-left, unrotated
  double dy = 0.0;
};

struct Block {
  std::string id;
  double w = 1.0;
  double h = 1.0;
  std::vector<PinOffset> pins;
};

// Nets are the pin groups sharing a net name across blocks.
struct Instance {
  std::vector<Block> blocks;
  std::vector<SymmetryPair> symmetry_pairs;
  double spacing = 0.0;

  std::size_t index_of(const std::string& id) const;
  std::map<std::string, std::vector<std::pair<std::size_t, std::size_t>>> net_pins() const;
};

class InvalidInstance : public Error {
 public:
  using Error::Error;
};

void validate(const Instance& inst);

inline constexpr double kEnclosure = 0.5;  // um, per side

// MOS blocks are (W + 2e) x (L + 2e) um with gate on the left edge, drain
// on top and source at the bottom; R and C get 2 x 2 um. Sources are
// off-layout. Bulk terminals are not pins.
Instance instance_from_netlist(const netlist::NetlistIR& ir, double spacing = 0.5);

// Packing unit: one per unpaired block, one per symmetry pair (members
// abut left-to-right at equal y, spacing apart; the right member's pins
// are mirrored). Ordered by first member.
struct Cell {
  int a = -1;
  int b = -1;  // -1 for a single block
};

std::vector<Cell> cells_of(const Instance& inst);

// Permutations of cell indices.
struct SequencePair {
  std::vector<int> pos;
  std::vector<int> neg;
};

struct Placement {
  std::vector<double> x, y;   // lower-left per block
  std::vector<bool> rotated;  // 90 degree turn swaps w and h
  double width = 0.0;
  double height = 0.0;

  double w_of(const Instance& inst, std::size_t i) const;
  double h_of(const Instance& inst, std::size_t i) const;
};

// Longest-path packing; `rotated` holds per-cell turns (none when empty).
Placement realize(const SequencePair& sp, const Instance& inst, const std::vector<bool>& rotated = {});

// Pin location of `pin` on block i, honoring rotation.
std::pair<double, double> pin_position(const Placement& p, const Instance& inst, std::size_t i, const PinOffset& pin);

struct CostWeights {
  double area = 1.0;
  double wirelength = 0.5;
  double symmetry = 10.0;
};

struct CostBreakdown {
  double area = 0.0;
  double hpwl = 0.0;
  double symmetry = 0.0;
  double total = 0.0;
};

CostBreakdown cost(const Placement& p, const Instance& inst, const CostWeights& weights = {});

// True when blocks keep at least `spacing` apart on x or y.
bool overlap_free(const Placement& p, const Instance& inst, double eps = 1e-9);

struct Schedule {
  double alpha = 0.95;
  std::size_t moves_per_temperature = 200;
  std::size_t calibration_moves = 50;
  double initial_acceptance = 0.8;
  double stop_ratio = 1e-3;
  double t0 = 0.0;  // calibrated when <= 0
  bool greedy = false;  // accept improving moves only
};

struct AnnealResult {
  Placement placement;
  SequencePair sp;
  std::vector<bool> rotated;  // per cell
  CostBreakdown cost;
  std::vector<double> best_trace;  // best-seen cost after each temperature
  std::size_t moves = 0;
  std::uint64_t seed = 0;
};

AnnealResult anneal(const Instance& inst, const Schedule& schedule, std::uint64_t seed,
                    const CostWeights& weights = {});

// Independent seeded restarts (OpenMP when `parallel`); min cost wins,
// ties to the lowest seed.
AnnealResult anneal_restarts(const Instance& inst, const Schedule& schedule, std::uint64_t seed,
                             std::size_t restarts, Exec exec = Exec::Parallel, const CostWeights& weights = {});

// Moves each pair onto its shared axis at equal y; keeps the result only
// when it stays overlap-free.
bool snap_symmetry(Placement& p, const Instance& inst);

std::string to_json(const Instance& inst);
Instance instance_from_json(const std::string& text);
std::string to_json(const Placement& p, const Instance& inst);
// Every block of `inst` must appear; throws InvalidInstance otherwise.
Placement placement_from_json(const std::string& text, const Instance& inst);

}  // namespace am::placement
