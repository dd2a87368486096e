#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>

#include "amflow/sizing.hpp"
#include "../util/strings.hpp"

namespace am::sizing {

using json = nlohmann::json;

std::string_view to_string(TrialState s) {
  switch (s) {
    case TrialState::Running: return "running";
    case TrialState::Complete: return "complete";
    case TrialState::Pruned: return "pruned";
    case TrialState::Failed: return "failed";
  }
  return "running";
}

namespace {

TrialState state_from(const std::string& s) {
  if (s == "complete") return TrialState::Complete;
  if (s == "pruned") return TrialState::Pruned;
  if (s == "failed") return TrialState::Failed;
  if (s == "running") return TrialState::Running;
  throw Error("unknown trial state '" + s + "'");
}

constexpr double kSqrt2 = 1.4142135623730951;
constexpr double kLogSqrt2Pi = 0.91893853320467274;

double norm_cdf(double z) { return 0.5 * std::erfc(-z / kSqrt2); }

// One-dimensional truncated Gaussian mixture on [lo, hi], equal weights.
struct Parzen {
  std::vector<double> mu;
  std::vector<double> sigma;
  double lo = 0.0;
  double hi = 1.0;

  Parzen(const std::vector<double>& obs, double lo_, double hi_, bool prior) : lo(lo_), hi(hi_) {
    const double range = hi - lo;
    const std::size_t count = obs.size() + (prior ? 1 : 0);
    const double bw = range / std::sqrt(static_cast<double>(std::max<std::size_t>(count, 1)));
    for (double o : obs) {
      mu.push_back(o);
      sigma.push_back(bw);
    }
    if (prior || mu.empty()) {
      mu.push_back(0.5 * (lo + hi));
      sigma.push_back(range);
    }
  }

  double log_pdf(double x) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i) {
      const double z = (x - mu[i]) / sigma[i];
      const double mass = norm_cdf((hi - mu[i]) / sigma[i]) - norm_cdf((lo - mu[i]) / sigma[i]);
      acc += std::exp(-0.5 * z * z - kLogSqrt2Pi) / (sigma[i] * std::max(mass, 1e-300));
    }
    return std::log(std::max(acc / static_cast<double>(mu.size()), 1e-300));
  }

  double sample(std::mt19937_64& rng) const {
    std::uniform_int_distribution<std::size_t> pick(0, mu.size() - 1);
    const std::size_t c = pick(rng);
    std::normal_distribution<double> n(mu[c], sigma[c]);
    for (int attempt = 0; attempt < 64; ++attempt) {
      const double v = n(rng);
      if (v >= lo && v <= hi) return v;
    }
    return std::clamp(mu[c], lo, hi);
  }
};

}  // namespace

Point random_point(const ParameterSpace& space, std::mt19937_64& rng) {
  Point x;
  for (const auto& d : space.dims) {
    std::uniform_real_distribution<double> u(to_unit(d, d.lo), to_unit(d, d.hi));
    x[d.name] = std::clamp(from_unit(d, u(rng)), d.lo, d.hi);
  }
  return x;
}

Point tpe_suggest(const std::vector<Trial>& study, const ParameterSpace& space, std::mt19937_64& rng,
                  const TpeConfig& config) {
  std::vector<const Trial*> complete, rest;
  for (const auto& t : study) {
    if (t.state == TrialState::Complete && std::isfinite(t.fom)) {
      complete.push_back(&t);
    } else if (t.state == TrialState::Pruned || t.state == TrialState::Failed) {
      rest.push_back(&t);
    }
  }
  if (complete.size() < std::max<std::size_t>(config.n_startup, 1)) return random_point(space, rng);

  std::stable_sort(complete.begin(), complete.end(), [](const Trial* a, const Trial* b) { return a->fom > b->fom; });
  const auto n_good = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(config.gamma * static_cast<double>(complete.size()))));
  std::vector<const Trial*> good(complete.begin(), complete.begin() + static_cast<std::ptrdiff_t>(n_good));
  std::vector<const Trial*> bad(complete.begin() + static_cast<std::ptrdiff_t>(n_good), complete.end());
  bad.insert(bad.end(), rest.begin(), rest.end());

  std::vector<Parzen> l, g;
  for (const auto& d : space.dims) {
    const double lo = to_unit(d, d.lo), hi = to_unit(d, d.hi);
    auto coords = [&](const std::vector<const Trial*>& set) {
      std::vector<double> out;
      for (const auto* t : set) {
        const auto it = t->x.find(d.name);
        if (it != t->x.end()) out.push_back(std::clamp(to_unit(d, it->second), lo, hi));
      }
      return out;
    };
    l.emplace_back(coords(good), lo, hi, config.prior);
    g.emplace_back(coords(bad), lo, hi, config.prior);
  }

  Point best;
  double best_score = -std::numeric_limits<double>::infinity();
  const std::size_t n_cand = std::max<std::size_t>(config.n_ei_candidates, 1);
  for (std::size_t c = 0; c < n_cand; ++c) {
    Point x;
    double score = 0.0;
    for (std::size_t k = 0; k < space.dims.size(); ++k) {
      const auto& d = space.dims[k];
      const double u = l[k].sample(rng);
      score += l[k].log_pdf(u) - g[k].log_pdf(u);
      x[d.name] = std::clamp(from_unit(d, u), d.lo, d.hi);
    }
    if (score > best_score) {
      best_score = score;
      best = std::move(x);
    }
  }
  return best;
}

bool median_prune(const std::vector<Trial>& study, const Trial& trial, std::size_t step, std::size_t n_warmup) {
  if (step >= trial.steps.size()) return false;
  std::vector<double> at;
  for (const auto& t : study)
    if (t.state == TrialState::Complete && t.number != trial.number && step < t.steps.size())
      at.push_back(t.steps[step]);
  if (at.empty() || at.size() < n_warmup) return false;
  std::sort(at.begin(), at.end());
  const std::size_t m = at.size();
  const double median = m % 2 ? at[m / 2] : 0.5 * (at[m / 2 - 1] + at[m / 2]);
  return trial.steps[step] < median;
}

bool TrialContext::report(double value) {
  trial_.steps.push_back(value);
  if (!pruned_ && median_prune(study_, trial_, trial_.steps.size() - 1, n_warmup_)) pruned_ = true;
  return pruned_;
}

Study optimize(const ParameterSpace& space, const Evaluator& evaluator, const Objective& objective,
               const OptimizeConfig& config) {
  std::mt19937_64 rng(config.seed);
  Study study;
  study.trials.reserve(config.budget);
  for (std::size_t i = 0; i < config.budget; ++i) {
    Trial t;
    t.number = static_cast<int>(i);
    t.x = tpe_suggest(study.trials, space, rng, config.tpe);
    TrialContext ctx(study.trials, t, config.n_warmup);
    Evaluation ev;
    bool threw = false;
    try {
      ev = evaluator(t.x, ctx);
    } catch (const MissingMetric&) {
      throw;
    } catch (const Error&) {
      threw = true;
    }
    t.metrics = ev.metrics;
    if (threw || ev.failed) {
      t.state = TrialState::Failed;
      t.fom = kFailedFom;
    } else if (ctx.pruned()) {
      t.state = TrialState::Pruned;
      t.fom = t.steps.back();
    } else {
      t.fom = objective(ev.metrics);
      t.state = std::isfinite(t.fom) ? TrialState::Complete : TrialState::Failed;
      if (!std::isfinite(t.fom)) t.fom = kFailedFom;
    }
    study.trials.push_back(std::move(t));
  }
  for (std::size_t i = 0; i < study.trials.size(); ++i) {
    const auto& t = study.trials[i];
    if (t.state != TrialState::Complete) continue;
    if (study.best < 0 || t.fom > study.best_trial().fom) study.best = static_cast<int>(i);
  }
  if (study.best < 0) throw AllTrialsFailed("none of " + std::to_string(config.budget) + " trials completed");
  return study;
}

Study optimize(const ParameterSpace& space, const Evaluator& evaluator, const Spec& spec, const OptimizeConfig& config) {
  return optimize(space, evaluator, [&spec](const Metrics& m) { return fom(m, spec); }, config);
}

namespace {

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

std::string study_to_jsonl(const Study& study) {
  std::string out;
  for (const auto& t : study.trials) {
    json j;
    j["number"] = t.number;
    j["state"] = std::string(to_string(t.state));
    j["fom"] = finite_or_null(t.fom);
    j["x"] = json::object();
    for (const auto& [k, v] : t.x) j["x"][k] = v;
    j["metrics"] = json::object();
    for (const auto& [k, v] : t.metrics) j["metrics"][k] = finite_or_null(v);
    j["steps"] = json::array();
    for (double s : t.steps) j["steps"].push_back(finite_or_null(s));
    out += j.dump() + "\n";
  }
  return out;
}

Study study_from_jsonl(const std::string& text) {
  Study study;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (const auto& line : util::split_lines(text)) {
    if (util::trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw Error(std::string("study line is not JSON: ") + e.what());
    }
    Trial t;
    t.number = j.at("number").get<int>();
    t.state = state_from(j.at("state").get<std::string>());
    t.fom = j.at("fom").is_null() ? kFailedFom : j.at("fom").get<double>();
    for (const auto& [k, v] : j.at("x").items()) t.x[k] = v.get<double>();
    for (const auto& [k, v] : j.at("metrics").items()) t.metrics[k] = v.is_null() ? nan : v.get<double>();
    for (const auto& s : j.at("steps")) t.steps.push_back(s.is_null() ? nan : s.get<double>());
    study.trials.push_back(std::move(t));
  }
  for (std::size_t i = 0; i < study.trials.size(); ++i) {
    const auto& t = study.trials[i];
    if (t.state == TrialState::Complete && (study.best < 0 || t.fom > study.best_trial().fom))
      study.best = static_cast<int>(i);
  }
  return study;
}

}  // namespace am::sizing
