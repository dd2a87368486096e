#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <sstream>

#include "amflow/evaluation.hpp"
#include "../util/strings.hpp"

namespace am::evaluation {

namespace fs = std::filesystem;

double pass_at_k(std::size_t n, std::size_t c, std::size_t k) {
  if (c > n || k < 1 || k > n)
    throw DomainError("pass_at_k needs 0 <= c <= n and 1 <= k <= n (n=" + std::to_string(n) +
                      ", c=" + std::to_string(c) + ", k=" + std::to_string(k) + ")");
  if (k == 1) return static_cast<double>(c) / static_cast<double>(n);
  if (k > n - c) return 1.0;
  double miss = 1.0;
  for (std::size_t i = 0; i < k; ++i)
    miss *= static_cast<double>(n - c - i) / static_cast<double>(n - i);
  return 1.0 - miss;
}

std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::Netlist: return "netlist";
    case Stage::Sizing: return "sizing";
    case Stage::Placement: return "placement";
    case Stage::Routing: return "routing";
    case Stage::None: return "none";
  }
  return "none";
}

Stage failure_stage(const AttemptOutcome& a, const SuccessCriteria& cr) {
  // Stages after the last required check do not affect success.
  const Stage last = cr.drc ? Stage::Routing : cr.spec ? Stage::Sizing : cr.netlist ? Stage::Netlist : Stage::None;
  const bool threw = a.error_stage && static_cast<int>(*a.error_stage) <= static_cast<int>(last);
  auto before_throw = [&](Stage s) { return !threw || static_cast<int>(s) < static_cast<int>(*a.error_stage); };
  if (cr.netlist && !a.netlist_exact && before_throw(Stage::Netlist)) return Stage::Netlist;
  if (cr.spec && !a.spec_met && before_throw(Stage::Sizing)) return Stage::Sizing;
  if (cr.drc && !a.placed && before_throw(Stage::Placement)) return Stage::Placement;
  if (cr.drc && !a.drc_clean && before_throw(Stage::Routing)) return Stage::Routing;
  return threw ? *a.error_stage : Stage::None;
}

std::vector<CaseSpec> discover_cases(const std::string& corpus_dir) {
  if (!fs::is_directory(corpus_dir)) throw MissingFixture("*", "corpus directory " + corpus_dir);
  std::vector<CaseSpec> out;
  for (const auto& e : fs::directory_iterator(corpus_dir))
    if (e.is_directory()) out.push_back({e.path().filename().string(), e.path().string()});
  std::sort(out.begin(), out.end(), [](const CaseSpec& a, const CaseSpec& b) { return util::natural_less(a.id, b.id); });
  return out;
}

void check_case(const CaseSpec& c) {
  for (const auto& f : required_case_files())
    if (!fs::exists(fs::path(c.dir) / f)) throw MissingFixture(c.id, f);
}

BenchmarkTable run_benchmark(const std::vector<CaseSpec>& cases, const AttemptRunner& runner,
                             const BenchmarkOptions& opt) {
  for (const auto& c : cases) check_case(c);
  for (const auto k : opt.ks)
    if (k < 1 || k > opt.n) throw DomainError("k=" + std::to_string(k) + " outside 1..n");

  const std::size_t total = cases.size() * opt.n;
  std::vector<Stage> stage(total, Stage::None);
  std::vector<std::string> note(total);
  auto one = [&](std::size_t idx) {
    const auto& c = cases[idx / opt.n];
    AttemptOutcome o;
    try {
      o = runner(c, idx % opt.n);
    } catch (const std::exception& e) {
      // Runners tag their own stage errors; anything escaping is charged to the first stage.
      o.error_stage = Stage::Netlist;
      o.error = e.what();
    }
    stage[idx] = failure_stage(o, opt.criteria);
    note[idx] = o.error;
  };
  if (opt.exec == Exec::Parallel) {
#pragma omp parallel for schedule(dynamic)
    for (std::size_t i = 0; i < total; ++i) one(i);
  } else {
    for (std::size_t i = 0; i < total; ++i) one(i);
  }

  BenchmarkTable t;
  t.ks = opt.ks;
  for (std::size_t ci = 0; ci < cases.size(); ++ci) {
    CaseResult r;
    r.id = cases[ci].id;
    r.n = opt.n;
    for (std::size_t a = 0; a < opt.n; ++a) {
      r.stage_of_failure.push_back(stage[ci * opt.n + a]);
      r.notes.push_back(note[ci * opt.n + a]);
      r.c += stage[ci * opt.n + a] == Stage::None;
    }
    t.rows.push_back(std::move(r));
  }
  return t;
}

std::string percent(double p) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", 100.0 * p + 1e-9);
  return buf;
}

namespace {

const Stage kStages[] = {Stage::Netlist, Stage::Sizing, Stage::Placement, Stage::Routing};

std::size_t failures(const CaseResult& r, Stage s) {
  return static_cast<std::size_t>(std::count(r.stage_of_failure.begin(), r.stage_of_failure.end(), s));
}

}  // namespace

std::string to_csv(const BenchmarkTable& t) {
  std::ostringstream os;
  os << "case,n,c";
  for (auto k : t.ks) os << ",pass@" << k;
  for (auto s : kStages) os << ",fail_" << to_string(s);
  os << "\n";
  for (const auto& r : t.rows) {
    os << r.id << ',' << r.n << ',' << r.c;
    for (auto k : t.ks) os << ',' << percent(pass_at_k(r.n, r.c, k));
    for (auto s : kStages) os << ',' << failures(r, s);
    os << "\n";
  }
  return os.str();
}

std::string to_markdown(const BenchmarkTable& t) {
  std::ostringstream os;
  os << "| Case | n | c |";
  for (auto k : t.ks) os << " Pass@" << k << " |";
  for (auto s : kStages) os << " fail: " << to_string(s) << " |";
  os << "\n|---|---|---|";
  for (std::size_t i = 0; i < t.ks.size() + 4; ++i) os << "---|";
  os << "\n";
  for (const auto& r : t.rows) {
    os << "| " << r.id << " | " << r.n << " | " << r.c << " |";
    for (auto k : t.ks) os << ' ' << percent(pass_at_k(r.n, r.c, k)) << " |";
    for (auto s : kStages) os << ' ' << failures(r, s) << " |";
    os << "\n";
  }
  return os.str();
}

}  // namespace am::evaluation
