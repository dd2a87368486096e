#pragma once

// Pass@k estimation and the per-case benchmark harness.

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "amflow/error.hpp"
#include "amflow/exec.hpp"

namespace am::evaluation {

// 1 - C(n-c, k) / C(n, k) as a running product; requires 0 <= c <= n and
// 1 <= k <= n, otherwise DomainError.
double pass_at_k(std::size_t n, std::size_t c, std::size_t k);

enum class Stage { Netlist, Sizing, Placement, Routing, None };
std::string_view to_string(Stage s);

// Which checks make up "success". Netlist-only comparisons disable the
// later stages.
struct SuccessCriteria {
  bool netlist = true;  // exact match against the golden netlist
  bool spec = true;     // sizing met every target
  bool drc = true;      // layout routed completely and DRC-clean
};

struct AttemptOutcome {
  bool netlist_exact = false;
  bool spec_met = false;
  bool placed = false;
  bool drc_clean = false;
  std::optional<Stage> error_stage;  // stage that threw, if any
  std::string error;
};

// First stage whose required check failed, or None.
Stage failure_stage(const AttemptOutcome& a, const SuccessCriteria& criteria);

struct CaseResult {
  std::string id;
  std::size_t n = 0;
  std::size_t c = 0;
  std::vector<Stage> stage_of_failure;  // per attempt
  std::vector<std::string> notes;       // per attempt error text, may be empty
};

class MissingFixture : public Error {
 public:
  explicit MissingFixture(const std::string& case_id, const std::string& what)
      : Error("case '" + case_id + "': missing " + what), case_id_(case_id) {}
  const std::string& case_id() const { return case_id_; }

 private:
  std::string case_id_;
};

struct CaseSpec {
  std::string id;
  std::string dir;
};

// Files every case directory must hold.
inline const std::vector<std::string>& required_case_files() {
  static const std::vector<std::string> files{"schematic.png", "detections.json", "golden.sp", "spec.json", "replay"};
  return files;
}

// Subdirectories of corpus_dir in natural order.
std::vector<CaseSpec> discover_cases(const std::string& corpus_dir);
void check_case(const CaseSpec& c);  // throws MissingFixture

using AttemptRunner = std::function<AttemptOutcome(const CaseSpec&, std::size_t attempt)>;

struct BenchmarkOptions {
  std::size_t n = 15;
  std::vector<std::size_t> ks{1, 5};
  SuccessCriteria criteria;
  Exec exec = Exec::Serial;
};

struct BenchmarkTable {
  std::vector<std::size_t> ks;
  std::vector<CaseResult> rows;
};

BenchmarkTable run_benchmark(const std::vector<CaseSpec>& cases, const AttemptRunner& runner,
                             const BenchmarkOptions& options = {});

// Pass@k as a percentage rounded to one decimal, e.g. "73.6".
std::string percent(double p);

std::string to_csv(const BenchmarkTable& t);
std::string to_markdown(const BenchmarkTable& t);

}  // namespace am::evaluation
