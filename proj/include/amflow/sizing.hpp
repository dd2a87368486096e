#pragma once

// Device sizing: agent-compressed parameter space, figure of merit, TPE
// suggestion with median pruning, and circuit evaluators (square-law
// analytic model and an external SPICE adapter).

#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "amflow/error.hpp"
#include "amflow/llm.hpp"
#include "amflow/netlist.hpp"

namespace am::sizing {

enum class Scale { Linear, Log };
std::string_view to_string(Scale s);

// Dim names are "<device id>.<param>", e.g. "M1.W" (param matched
// case-insensitively: W, L, value, dc). Tied params take the
// same value as the dim (matched devices share one dimension).
struct Dim {
  std::string name;
  double lo = 0.0;
  double hi = 1.0;
  Scale scale = Scale::Linear;
  std::string unit;
  std::vector<std::string> ties;
};

class InvalidSpace : public Error {
 public:
  using Error::Error;
};

struct ParameterSpace {
  std::vector<Dim> dims;
  std::string provenance;

  const Dim* find(const std::string& name) const;
  Dim* find(const std::string& name);
  // Throws InvalidSpace on lo >= hi, non-positive log bounds or names
  // that do not resolve to a device parameter of `ir`.
  void check(const netlist::NetlistIR& ir) const;
};

using Point = std::map<std::string, double>;
using Metrics = std::map<std::string, double>;

// Parameter-space coordinate: identity or natural log.
double to_unit(const Dim& d, double value);
double from_unit(const Dim& d, double u);
bool in_bounds(const ParameterSpace& space, const Point& x);

// Copies `x` (and ties) into the device params of `ir`.
netlist::NetlistIR apply_point(const netlist::NetlistIR& ir, const ParameterSpace& space, const Point& x);

// Sizable dims with the fallback ranges; matched pairs share a dim.
ParameterSpace fallback_space(const netlist::NetlistIR& ir);

enum class Direction { AtLeast, AtMost };

struct Target {
  std::string metric;
  Direction dir = Direction::AtLeast;
  double threshold = 1.0;
  double weight = 1.0;
};

struct Spec {
  std::vector<Target> targets;
};

class InvalidSpec : public Error {
 public:
  using Error::Error;
};

// JSON [{metric, dir: ">=" | "<=", threshold, weight}].
Spec parse_spec(const std::string& json_text);
std::string to_json(const Spec& spec);

class MissingMetric : public Error {
 public:
  explicit MissingMetric(const std::string& name);
};

inline constexpr double kFailedFom = -std::numeric_limits<double>::infinity();

// Sum of weight * min(1, ratio); ratio = metric/threshold for AtLeast,
// threshold/metric for AtMost.
double fom(const Metrics& metrics, const Spec& spec);
bool spec_met(const Metrics& metrics, const Spec& spec);

enum class TrialState { Running, Complete, Pruned, Failed };
std::string_view to_string(TrialState s);

struct Trial {
  int number = 0;
  Point x;
  Metrics metrics;
  double fom = kFailedFom;
  TrialState state = TrialState::Running;
  std::vector<double> steps;  // intermediate value per reported step
};

struct TpeConfig {
  double gamma = 0.25;
  std::size_t n_startup = 10;
  std::size_t n_ei_candidates = 24;
  bool prior = true;  // one wide prior component per density
};

Point random_point(const ParameterSpace& space, std::mt19937_64& rng);

// Random until n_startup completed trials, then argmax l(x)/g(x) over
// candidates drawn from the good density.
Point tpe_suggest(const std::vector<Trial>& study, const ParameterSpace& space, std::mt19937_64& rng,
                  const TpeConfig& config = {});

// True iff at least n_warmup completed trials reported `step` and the
// trial's value there is below their median.
bool median_prune(const std::vector<Trial>& study, const Trial& trial, std::size_t step,
                  std::size_t n_warmup = 5);

// Handed to evaluators; report() returns true when the trial should stop.
class TrialContext {
 public:
  TrialContext(const std::vector<Trial>& study, Trial& trial, std::size_t n_warmup)
      : study_(study), trial_(trial), n_warmup_(n_warmup) {}
  bool report(double value);
  bool pruned() const { return pruned_; }

 private:
  const std::vector<Trial>& study_;
  Trial& trial_;
  std::size_t n_warmup_;
  bool pruned_ = false;
};

struct Evaluation {
  Metrics metrics;
  bool failed = false;
};

using Evaluator = std::function<Evaluation(const Point&, TrialContext&)>;
using Objective = std::function<double(const Metrics&)>;

class AllTrialsFailed : public Error {
 public:
  using Error::Error;
};

struct OptimizeConfig {
  std::size_t budget = 100;
  std::uint64_t seed = 42;
  TpeConfig tpe;
  std::size_t n_warmup = 5;
};

struct Study {
  std::vector<Trial> trials;
  int best = -1;  // index into trials

  const Trial& best_trial() const { return trials.at(static_cast<std::size_t>(best)); }
};

Study optimize(const ParameterSpace& space, const Evaluator& evaluator, const Objective& objective,
               const OptimizeConfig& config = {});
Study optimize(const ParameterSpace& space, const Evaluator& evaluator, const Spec& spec,
               const OptimizeConfig& config = {});

// One JSON object per line.
std::string study_to_jsonl(const Study& study);
Study study_from_jsonl(const std::string& text);

// ---- analytic evaluator ----

// -1 for the inverting input of a differential pair ("inn", "vim", "in-").
int input_polarity(std::string_view net);

enum class Topology { CommonSource, DiffPair5T, Cascode, Unsupported };
std::string_view to_string(Topology t);
Topology classify_topology(const netlist::NetlistIR& ir);

class UnsupportedTopology : public Error {
 public:
  using Error::Error;
};

struct ProcessModel {
  double vdd = 1.8;
  double kp_n = 270e-6;   // A/V^2
  double kp_p = 90e-6;
  double vth_n = 0.45;
  double vth_p = 0.45;    // magnitude
  double lambda_l = 0.05e-6;  // lambda = lambda_l / L
  double c_load = 1e-12;
  double input_cm = 0.9;  // DC level of undriven input nets
};

struct MosOperatingPoint {
  std::string id;
  double id_a = 0.0;   // drain current magnitude
  double vov = 0.0;
  double vds = 0.0;    // magnitude
  double gm = 0.0;
  double ro = 0.0;
  std::string region;  // cutoff | triode | saturation
};

struct OperatingPoint {
  std::map<std::string, double> node_voltage;
  std::vector<MosOperatingPoint> devices;
  double supply_current = 0.0;
};

// Square-law DC solution (channel-length modulation as exp(lambda*Vds),
// so gm = 2 I/Vov and ro = 1/(lambda I) are exact derivatives).
OperatingPoint solve_operating_point(const netlist::NetlistIR& ir, const ProcessModel& pm = {});

// Intrinsic gain of a common-source stage with a resistive load
// (infinite load gives gm*ro).
double common_source_gain_db(double gm, double ro, double r_load = std::numeric_limits<double>::infinity());

// gain_db, gbw_hz, power_w, area_um2. Throws UnsupportedTopology.
Metrics analytic_evaluate(const netlist::NetlistIR& ir, const ParameterSpace& space, const Point& x,
                          const ProcessModel& pm = {});

// ---- external simulator ----

class SimulatorNotFound : public Error {
 public:
  using Error::Error;
};
class SimulationTimeout : public Error {
 public:
  using Error::Error;
};
class MeasureParseError : public Error {
 public:
  using Error::Error;
};

struct SpiceAdapterConfig {
  std::string simulator = "ngspice";
  std::string pdk_include;
  std::string corner = "tt";
  double temperature_c = 25.0;
  double timeout_seconds = 60.0;
  std::string work_dir;  // temp dir when empty
  double vdd = 1.8;
  double input_cm = 0.9;
  double c_load = 1e-12;
  std::vector<std::string> measures{"gain_db", "gbw_hz", "power_w"};
  std::vector<std::string> extra_control;  // appended before quit
};

// Resolves the simulator on PATH; empty when absent.
std::string find_simulator(const std::string& name);

std::string build_deck(const netlist::NetlistIR& sized, const SpiceAdapterConfig& config);
Metrics parse_measures(const std::string& output, const std::vector<std::string>& names);

Metrics spice_evaluate(const netlist::NetlistIR& ir, const ParameterSpace& space, const Point& x,
                       const SpiceAdapterConfig& config);

// ---- search-space agent ----

struct AgentConfig {
  std::size_t max_steps = 24;
  llm::TruncationPolicy truncation{};
  std::string model = "gpt-4o";
  double temperature = 0.2;
  std::string tag_prefix;
  ProcessModel process;
};

struct AgentResult {
  ParameterSpace space;
  llm::Transcript transcript;
  std::size_t steps = 0;
  std::vector<std::string> fallback_dims;  // filled from the fallback table
  std::size_t peak_tokens = 0;
};

// Carries the partial result with fallback fills.
class AgentBudgetExhausted : public Error {
 public:
  explicit AgentBudgetExhausted(AgentResult partial);
  const AgentResult& result() const { return result_; }

 private:
  AgentResult result_;
};

AgentResult plan_search_space(const netlist::NetlistIR& ir, const std::string& compressed_context,
                              llm::Gateway& gw, const AgentConfig& config = {});

// Tool implementations, exposed for tests and fixture authoring.
std::string tool_topology_query(const netlist::NetlistIR& ir, const ParameterSpace& fallback);
std::string tool_operating_point_probe(const netlist::NetlistIR& ir, const ParameterSpace& fallback,
                                       const Point& x, const ProcessModel& pm);

}  // namespace am::sizing
