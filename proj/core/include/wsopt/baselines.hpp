#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "wsopt/env_aim.hpp"
#include "wsopt/env_rp.hpp"

namespace wsopt {

/// Non-learned budget allocators: spread evenly, front-load per cycle, or
/// spend everything on day one.
enum class BudgetKind { average, static_cycle, normal };

struct BudgetPolicy {
  BudgetKind kind = BudgetKind::average;
  int static_cycles = 2;  // static_cycle only
};

std::string budget_kind_name(BudgetKind k);
BudgetKind budget_kind_from_name(const std::string& name);

/**
 * Allocation vector of length `horizon` summing to exactly `budget`.
 *   average: floor(K/T) everywhere, remainder one-per-day from day 1.
 *   static_cycle: horizon split into d equal cycles (earlier cycles absorb a
 *     length remainder); each cycle's first day gets K/d, earlier cycles absorb
 *     a budget remainder. Throws when d > horizon.
 *   normal: everything on day 1.
 */
std::vector<int> allocate(const BudgetPolicy& policy, int budget, int horizon);

/// Top-k inactive nodes by out-degree, ties to the lowest index. Returns all
/// inactive nodes when fewer than k remain.
std::vector<int> select_degree(const AimEnv& env, const AimEnv::State& s, int k);

/**
 * Top-k inactive nodes by score s_v = sum of p(u,v) over *inactive in-neighbors*
 * u of v. With reversed=true the sum instead runs over inactive out-neighbors
 * (mass v could push outward), which matches the influence-side intuition.
 */
std::vector<int> select_score(const AimEnv& env, const AimEnv::State& s, int k,
                              bool reversed = false);

struct GaConfig {
  int population = 50;
  int generations = 200;
  double mutation_rate = 0.1;
  double crossover_rate = 0.8;
  int tournament = 3;
  int elitism = 1;
  std::uint64_t seed = 0;

  void validate() const;  // throws std::invalid_argument
};

/// An open-loop visiting plan: days[t] lists the cities for day t+1 in visit
/// order. expected_reward is the drift-free episode value of the plan.
struct RpPlan {
  std::vector<std::vector<int>> days;
  double expected_reward = 0.0;
};

/// Drift-free episode value of a plan starting from `s` (profits held at their
/// current values except for the usual pin-to-zero on visit).
double plan_expected_reward(const RpEnv& env, RpEnv::State s,
                            const std::vector<std::vector<int>>& days);

/**
 * Day-by-day greedy under a fixed allocation: each day appends the unvisited
 * city maximizing profit - lambda * (distance from the previous position),
 * K_t times. lambda = 0 reduces to pure profit chasing.
 */
RpPlan rp_greedy(const RpEnv& env, const RpEnv::State& initial, const std::vector<int>& allocation,
                 double lambda = 0.0);

/**
 * Genetic search over joint allocation + selection. Chromosome: per-city day
 * label (-1 = skip) plus a priority key deciding intra-day order; one-point
 * crossover on the city axis, swap mutation plus a single-gene re-roll, budget
 * repair by dropping the lowest-priority picks, tournament selection, elitism.
 * Deterministic per cfg.seed.
 */
RpPlan rp_ga(const RpEnv& env, const RpEnv::State& initial, const GaConfig& cfg);

}  // namespace wsopt
