#include <omp.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "amflow/placement.hpp"

namespace am::placement {

namespace {

struct State {
  SequencePair sp;
  std::vector<bool> rot;
};

struct Scored {
  Placement placement;
  CostBreakdown cost;
};

Scored evaluate(const State& s, const Instance& inst, const CostWeights& w) {
  Scored out{realize(s.sp, inst, s.rot), {}};
  if (inst.symmetry_pairs.size() > 1) snap_symmetry(out.placement, inst);
  out.cost = cost(out.placement, inst, w);
  return out;
}

void swap_in(std::vector<int>& seq, int a, int b) {
  auto ia = std::find(seq.begin(), seq.end(), a);
  auto ib = std::find(seq.begin(), seq.end(), b);
  std::iter_swap(ia, ib);
}

// Pairs are single cells, so every move carries both members.
State propose(const State& s, std::mt19937_64& rng) {
  State next = s;
  const int n = static_cast<int>(s.sp.pos.size());
  std::uniform_int_distribution<int> pick_cell(0, n - 1);
  const int move = n < 2 ? 2 : std::uniform_int_distribution<int>(0, 2)(rng);
  if (move == 2) {
    const int c = pick_cell(rng);
    next.rot[static_cast<std::size_t>(c)] = !next.rot[static_cast<std::size_t>(c)];
    return next;
  }
  const int a = pick_cell(rng);
  int b = std::uniform_int_distribution<int>(0, n - 2)(rng);
  if (b >= a) ++b;
  if (move == 0) {
    if (std::uniform_int_distribution<int>(0, 1)(rng)) {
      swap_in(next.sp.pos, a, b);
    } else {
      swap_in(next.sp.neg, a, b);
    }
  } else {
    swap_in(next.sp.pos, a, b);
    swap_in(next.sp.neg, a, b);
  }
  return next;
}

}  // namespace

AnnealResult anneal(const Instance& inst, const Schedule& schedule, std::uint64_t seed, const CostWeights& weights) {
  validate(inst);
  const std::size_t n = cells_of(inst).size();
  if (n == 0) throw InvalidInstance("nothing to place");
  std::mt19937_64 rng(seed);

  State cur;
  cur.sp.pos.resize(n);
  std::iota(cur.sp.pos.begin(), cur.sp.pos.end(), 0);
  cur.sp.neg = cur.sp.pos;
  std::shuffle(cur.sp.pos.begin(), cur.sp.pos.end(), rng);
  std::shuffle(cur.sp.neg.begin(), cur.sp.neg.end(), rng);
  cur.rot.assign(n, false);
  Scored cur_s = evaluate(cur, inst, weights);

  AnnealResult res;
  res.seed = seed;
  res.sp = cur.sp;
  res.rotated = cur.rot;
  res.placement = cur_s.placement;
  res.cost = cur_s.cost;

  double t0 = schedule.t0;
  if (!(t0 > 0.0)) {
    // Random walk from the start; mean uphill step fixes the initial acceptance.
    double uphill = 0.0;
    std::size_t count = 0;
    State walk = cur;
    double walk_cost = cur_s.cost.total;
    for (std::size_t k = 0; k < schedule.calibration_moves; ++k) {
      walk = propose(walk, rng);
      const double c = evaluate(walk, inst, weights).cost.total;
      if (c > walk_cost) {
        uphill += c - walk_cost;
        ++count;
      }
      walk_cost = c;
    }
    t0 = count ? -(uphill / static_cast<double>(count)) / std::log(schedule.initial_acceptance) : 1.0;
  }

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (double t = t0; t >= schedule.stop_ratio * t0; t *= schedule.alpha) {
    for (std::size_t m = 0; m < schedule.moves_per_temperature; ++m) {
      State next = propose(cur, rng);
      Scored next_s = evaluate(next, inst, weights);
      const double delta = next_s.cost.total - cur_s.cost.total;
      const bool accept = delta <= 0.0 || (!schedule.greedy && unit(rng) < std::exp(-delta / t));
      ++res.moves;
      if (!accept) continue;
      if (!overlap_free(next_s.placement, inst)) throw Error("packing produced overlapping blocks");
      cur = std::move(next);
      cur_s = std::move(next_s);
      if (cur_s.cost.total < res.cost.total - 1e-12) {
        res.cost = cur_s.cost;
        res.placement = cur_s.placement;
        res.sp = cur.sp;
        res.rotated = cur.rot;
      }
    }
    res.best_trace.push_back(res.cost.total);
  }
  return res;
}

AnnealResult anneal_restarts(const Instance& inst, const Schedule& schedule, std::uint64_t seed, std::size_t restarts,
                             Exec exec, const CostWeights& weights) {
  restarts = std::max<std::size_t>(restarts, 1);
  std::vector<AnnealResult> runs(restarts);
  if (exec == Exec::Parallel) {
    std::vector<std::string> errors(restarts);
#pragma omp parallel for schedule(dynamic)
    for (std::size_t r = 0; r < restarts; ++r) {
      try {
        runs[r] = anneal(inst, schedule, seed + r, weights);
      } catch (const std::exception& e) {
        errors[r] = e.what();
      }
    }
    for (const auto& e : errors)
      if (!e.empty()) throw Error(e);
  } else {
    for (std::size_t r = 0; r < restarts; ++r) runs[r] = anneal(inst, schedule, seed + r, weights);
  }
  std::size_t best = 0;
  for (std::size_t r = 1; r < restarts; ++r)
    if (runs[r].cost.total < runs[best].cost.total) best = r;
  return std::move(runs[best]);
}

}  // namespace am::placement
