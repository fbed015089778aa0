#include "wsopt/baselines.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "wsopt/rng.hpp"

namespace wsopt {

std::string budget_kind_name(BudgetKind k) {
  switch (k) {
    case BudgetKind::average: return "average";
    case BudgetKind::static_cycle: return "static";
    case BudgetKind::normal: return "normal";
  }
  throw std::logic_error("budget_kind_name: bad enum");
}

BudgetKind budget_kind_from_name(const std::string& name) {
  if (name == "average") return BudgetKind::average;
  if (name == "static") return BudgetKind::static_cycle;
  if (name == "normal") return BudgetKind::normal;
  throw std::invalid_argument("unknown budget policy '" + name + "'");
}

std::vector<int> allocate(const BudgetPolicy& policy, int budget, int horizon) {
  if (budget < 0 || horizon < 1) throw std::invalid_argument("allocate: need budget >= 0, horizon >= 1");
  std::vector<int> out(horizon, 0);
  switch (policy.kind) {
    case BudgetKind::average: {
      const int base = budget / horizon;
      const int rem = budget % horizon;
      for (int t = 0; t < horizon; ++t) out[t] = base + (t < rem ? 1 : 0);
      break;
    }
    case BudgetKind::static_cycle: {
      const int d = policy.static_cycles;
      if (d < 1 || d > horizon)
        throw std::invalid_argument("allocate: static cycles must be in [1, horizon]");
      const int cycle_base = horizon / d, cycle_rem = horizon % d;
      const int amount_base = budget / d, amount_rem = budget % d;
      int day = 0;
      for (int c = 0; c < d; ++c) {
        out[day] = amount_base + (c < amount_rem ? 1 : 0);
        day += cycle_base + (c < cycle_rem ? 1 : 0);
      }
      break;
    }
    case BudgetKind::normal:
      out[0] = budget;
      break;
  }
  return out;
}

namespace {

/// Top-k inactive nodes under a per-node key, descending, ties to low index.
std::vector<int> top_k_inactive(const AimEnv::State& s, const std::vector<double>& key, int k) {
  std::vector<int> candidates;
  for (int v = 0; v < static_cast<int>(s.node_state.size()); ++v)
    if (s.node_state[v] == AimEnv::kInactive) candidates.push_back(v);
  std::stable_sort(candidates.begin(), candidates.end(),
                   [&](int a, int b) { return key[a] > key[b]; });
  if (static_cast<int>(candidates.size()) > k) candidates.resize(k);
  return candidates;
}

}  // namespace

std::vector<int> select_degree(const AimEnv& env, const AimEnv::State& s, int k) {
  if (k < 0) throw std::invalid_argument("select_degree: k must be >= 0");
  const auto& g = env.graph();
  std::vector<double> key(g.num_nodes());
  for (int v = 0; v < g.num_nodes(); ++v) key[v] = g.out_degree(v);
  return top_k_inactive(s, key, k);
}

std::vector<int> select_score(const AimEnv& env, const AimEnv::State& s, int k, bool reversed) {
  if (k < 0) throw std::invalid_argument("select_score: k must be >= 0");
  const auto& g = env.graph();
  std::vector<double> key(g.num_nodes(), 0.0);
  for (int v = 0; v < g.num_nodes(); ++v) {
    double score = 0.0;
    if (!reversed) {
      for (int u : g.in_neighbors(v))
        if (s.node_state[u] == AimEnv::kInactive) score += env.activation_prob(u, v);
    } else {
      for (int u : g.out_neighbors(v))
        if (s.node_state[u] == AimEnv::kInactive) score += env.activation_prob(v, u);
    }
    key[v] = score;
  }
  return top_k_inactive(s, key, k);
}

void GaConfig::validate() const {
  if (population < 2) throw std::invalid_argument("GaConfig: population must be >= 2");
  if (generations < 1) throw std::invalid_argument("GaConfig: generations must be >= 1");
  if (mutation_rate < 0 || mutation_rate > 1 || crossover_rate < 0 || crossover_rate > 1)
    throw std::invalid_argument("GaConfig: rates must lie in [0,1]");
  if (tournament < 1 || tournament > population)
    throw std::invalid_argument("GaConfig: tournament size must lie in [1, population]");
  if (elitism < 0 || elitism >= population)
    throw std::invalid_argument("GaConfig: elitism must lie in [0, population)");
}

double plan_expected_reward(const RpEnv& env, RpEnv::State s,
                            const std::vector<std::vector<int>>& days) {
  double total = 0.0;
  for (const auto& cities : days) {
    if (s.steps_left <= 0) throw std::invalid_argument("plan_expected_reward: plan exceeds horizon");
    total += env.day_reward(s, cities);
    for (int c : cities) {
      s.visited[c] = 1;
      s.profit[c] = 0.0;
      s.current = c;
    }
    s.budget_left -= static_cast<int>(cities.size());
    s.steps_left -= 1;
  }
  return total;
}

RpPlan rp_greedy(const RpEnv& env, const RpEnv::State& initial, const std::vector<int>& allocation,
                 double lambda) {
  if (static_cast<int>(allocation.size()) != initial.steps_left)
    throw std::invalid_argument("rp_greedy: allocation length must match remaining days");
  const auto& g = env.graph();
  RpPlan plan;
  std::vector<char> visited = initial.visited;
  int position = initial.current;
  int budget = initial.budget_left;
  for (int want : allocation) {
    std::vector<int> today;
    for (int pick = 0; pick < want && budget > 0; ++pick) {
      int best = -1;
      double best_v = 0.0;
      for (int c = 0; c < g.num_nodes(); ++c) {
        if (visited[c]) continue;
        const double v = initial.profit[c] - lambda * g.distance(position, c);
        if (best < 0 || v > best_v) {
          best = c;
          best_v = v;
        }
      }
      if (best < 0) break;
      today.push_back(best);
      visited[best] = 1;
      position = best;
      --budget;
    }
    plan.days.push_back(std::move(today));
  }
  plan.expected_reward = plan_expected_reward(env, initial, plan.days);
  return plan;
}

namespace {

struct Genome {
  std::vector<int> day;      // -1 = not visited
  std::vector<double> key;   // intra-day order: ascending key
  double fitness = 0.0;
};

void repair(Genome& g, int budget, int start_city) {
  g.day[start_city] = -1;
  int chosen = 0;
  for (int d : g.day)
    if (d >= 0) ++chosen;
  while (chosen > budget) {
    int drop = -1;
    for (int c = 0; c < static_cast<int>(g.day.size()); ++c)
      if (g.day[c] >= 0 && (drop < 0 || g.key[c] < g.key[drop])) drop = c;
    g.day[drop] = -1;
    --chosen;
  }
}

std::vector<std::vector<int>> genome_plan(const Genome& g, int horizon) {
  std::vector<std::vector<int>> days(horizon);
  std::vector<int> order(g.day.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return g.key[a] < g.key[b]; });
  for (int c : order)
    if (g.day[c] >= 0) days[g.day[c]].push_back(c);
  return days;
}

void evaluate(Genome& g, const RpEnv& env, const RpEnv::State& initial) {
  g.fitness = plan_expected_reward(env, initial, genome_plan(g, initial.steps_left));
}

}  // namespace

RpPlan rp_ga(const RpEnv& env, const RpEnv::State& initial, const GaConfig& cfg) {
  cfg.validate();
  const int n = env.num_nodes();
  const int horizon = initial.steps_left;
  const int budget = initial.budget_left;
  Rng rng(derive_seed(cfg.seed, {0x6741}));

  auto random_genome = [&]() {
    Genome g;
    g.day.resize(n);
    g.key.resize(n);
    for (int c = 0; c < n; ++c) {
      g.day[c] = initial.visited[c] ? -1 : uniform_int(rng, -1, horizon - 1);
      g.key[c] = uniform01(rng);
    }
    repair(g, budget, env.config().start_city);
    evaluate(g, env, initial);
    return g;
  };

  std::vector<Genome> pop;
  pop.reserve(cfg.population);
  for (int i = 0; i < cfg.population; ++i) pop.push_back(random_genome());

  auto tournament_pick = [&]() -> const Genome& {
    int best = uniform_int(rng, 0, cfg.population - 1);
    for (int i = 1; i < cfg.tournament; ++i) {
      const int j = uniform_int(rng, 0, cfg.population - 1);
      if (pop[j].fitness > pop[best].fitness) best = j;
    }
    return pop[best];
  };

  for (int gen = 0; gen < cfg.generations; ++gen) {
    std::stable_sort(pop.begin(), pop.end(),
                     [](const Genome& a, const Genome& b) { return a.fitness > b.fitness; });
    std::vector<Genome> next(pop.begin(), pop.begin() + cfg.elitism);
    while (static_cast<int>(next.size()) < cfg.population) {
      Genome child = tournament_pick();
      if (bernoulli(rng, cfg.crossover_rate)) {
        const Genome& other = tournament_pick();
        const int cut = uniform_int(rng, 0, n - 1);
        for (int c = cut; c < n; ++c) {
          child.day[c] = other.day[c];
          child.key[c] = other.key[c];
        }
      }
      if (bernoulli(rng, cfg.mutation_rate) && n >= 2) {
        const int a = uniform_int(rng, 0, n - 1);
        const int b = uniform_int(rng, 0, n - 1);
        std::swap(child.day[a], child.day[b]);
        std::swap(child.key[a], child.key[b]);
      }
      if (bernoulli(rng, cfg.mutation_rate)) {
        const int c = uniform_int(rng, 0, n - 1);
        child.day[c] = uniform_int(rng, -1, horizon - 1);
        child.key[c] = uniform01(rng);
      }
      repair(child, budget, env.config().start_city);
      for (int c = 0; c < n; ++c)
        if (initial.visited[c]) child.day[c] = -1;
      evaluate(child, env, initial);
      next.push_back(std::move(child));
    }
    pop = std::move(next);
  }
  const Genome& best = *std::max_element(
      pop.begin(), pop.end(),
      [](const Genome& a, const Genome& b) { return a.fitness < b.fitness; });
  RpPlan plan;
  plan.days = genome_plan(best, horizon);
  plan.expected_reward = best.fitness;
  return plan;
}

}  // namespace wsopt
