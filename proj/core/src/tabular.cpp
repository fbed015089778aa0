#include "wsopt/tabular.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <stdexcept>

#include "json.hpp"
#include "wsopt/baselines.hpp"
#include "wsopt/rng.hpp"

namespace wsopt {

namespace {

constexpr std::size_t kMaxCells = 10000;

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument("toy: " + msg);
}

}  // namespace

std::size_t ToySsco::table_cells() const {
  const std::size_t e = static_cast<std::size_t>(num_core_states);
  const std::size_t k = static_cast<std::size_t>(budget) + 1;
  const std::size_t t = static_cast<std::size_t>(horizon) + 1;
  const std::size_t a = static_cast<std::size_t>(num_nodes) + 1;
  return e * k * t * k * a;
}

void ToySsco::validate() const {
  require(num_core_states >= 1, "needs at least one core state");
  require(num_nodes >= 1 && num_nodes <= 4, "num_nodes must be in [1,4]");
  require(budget >= 1 && budget <= 3, "budget must be in [1,3]");
  require(horizon >= 1 && horizon <= 3, "horizon must be in [1,3]");
  require(gamma > 0.0 && gamma <= 1.0, "gamma must be in (0,1]");
  require(initial_state >= 0 && initial_state < num_core_states,
          "initial_state out of range");
  require(table_cells() <= kMaxCells, "state space too large to enumerate");

  const std::size_t E = static_cast<std::size_t>(num_core_states);
  const std::size_t n = static_cast<std::size_t>(num_nodes);
  require(sel_next.size() == E && sel_reward.size() == E && feasible.size() == E &&
              env_kernel.size() == E && env_reward.size() == E,
          "table row counts must equal num_core_states");
  for (std::size_t e = 0; e < E; ++e) {
    require(sel_next[e].size() == n && sel_reward[e].size() == n &&
                feasible[e].size() == n,
            "selection table width must equal num_nodes");
    bool any = false;
    for (std::size_t a = 0; a < n; ++a) {
      require(sel_next[e][a] >= 0 && sel_next[e][a] < num_core_states,
              "sel_next target out of range");
      if (feasible[e][a]) any = true;
    }
    require(any, "every core state needs a feasible action");
    require(env_kernel[e].size() == E, "kernel row width must equal num_core_states");
    double sum = 0.0;
    for (double p : env_kernel[e]) {
      require(p >= 0.0, "kernel entries must be nonnegative");
      sum += p;
    }
    require(std::abs(sum - 1.0) <= 1e-9, "kernel rows must sum to 1");
  }
}

ToySsco load_toy(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open toy file: " + path);
  nlohmann::json j;
  in >> j;
  ToySsco toy;
  toy.name = j.value("name", std::string("unnamed"));
  toy.num_core_states = j.at("num_core_states").get<int>();
  toy.num_nodes = j.at("num_nodes").get<int>();
  toy.budget = j.at("budget").get<int>();
  toy.horizon = j.at("horizon").get<int>();
  toy.gamma = j.value("gamma", 1.0);
  toy.initial_state = j.value("initial_state", 0);
  toy.sel_next = j.at("sel_next").get<std::vector<std::vector<int>>>();
  toy.sel_reward = j.at("sel_reward").get<std::vector<std::vector<double>>>();
  const auto feas = j.at("feasible").get<std::vector<std::vector<int>>>();
  toy.feasible.resize(feas.size());
  for (std::size_t e = 0; e < feas.size(); ++e)
    for (int f : feas[e]) toy.feasible[e].push_back(static_cast<char>(f != 0));
  toy.env_kernel = j.at("env_kernel").get<std::vector<std::vector<double>>>();
  toy.env_reward = j.at("env_reward").get<std::vector<double>>();
  toy.validate();
  return toy;
}

void save_toy(const ToySsco& toy, const std::string& path) {
  toy.validate();
  nlohmann::json j;
  j["name"] = toy.name;
  j["num_core_states"] = toy.num_core_states;
  j["num_nodes"] = toy.num_nodes;
  j["budget"] = toy.budget;
  j["horizon"] = toy.horizon;
  j["gamma"] = toy.gamma;
  j["initial_state"] = toy.initial_state;
  j["sel_next"] = toy.sel_next;
  j["sel_reward"] = toy.sel_reward;
  std::vector<std::vector<int>> feas(toy.feasible.size());
  for (std::size_t e = 0; e < toy.feasible.size(); ++e)
    for (char f : toy.feasible[e]) feas[e].push_back(f ? 1 : 0);
  j["feasible"] = feas;
  j["env_kernel"] = toy.env_kernel;
  j["env_reward"] = toy.env_reward;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write toy file: " + path);
  out << j.dump(2) << "\n";
}

ToySsco toy_two_phase_surge() {
  ToySsco t;
  t.name = "two_phase_surge";
  t.num_core_states = 2;
  t.num_nodes = 2;
  t.budget = 2;
  t.horizon = 2;
  t.sel_next = {{0, 0}, {1, 1}};
  t.sel_reward = {{0.25, 0.125}, {0.5, 0.375}};
  t.feasible = {{1, 1}, {1, 1}};
  t.env_kernel = {{0.1, 0.9}, {1.0, 0.0}};
  t.env_reward = {0.0, 0.0};
  t.validate();
  return t;
}

ToySsco toy_decay_chain() {
  ToySsco t;
  t.name = "decay_chain";
  t.num_core_states = 3;
  t.num_nodes = 3;
  t.budget = 2;
  t.horizon = 3;
  t.sel_next = {{0, 0, 0}, {1, 1, 1}, {2, 2, 2}};
  t.sel_reward = {{2.0, 1.5, 1.0}, {1.0, 0.75, 0.5}, {0.0, 0.0, 0.0}};
  t.feasible = {{1, 1, 1}, {1, 1, 1}, {1, 1, 1}};
  t.env_kernel = {{0.0, 1.0, 0.0}, {0.0, 0.0, 1.0}, {0.0, 0.0, 1.0}};
  t.env_reward = {0.0, 0.0, 0.0};
  t.validate();
  return t;
}

ToySsco toy_catalyst() {
  ToySsco t;
  t.name = "catalyst";
  t.num_core_states = 2;
  t.num_nodes = 3;
  t.budget = 3;
  t.horizon = 3;
  t.sel_next = {{0, 0, 1}, {1, 1, 1}};
  t.sel_reward = {{0.5, 0.375, 0.25}, {2.0, 1.5, 0.25}};
  t.feasible = {{1, 1, 1}, {1, 1, 1}};
  t.env_kernel = {{1.0, 0.0}, {0.0, 1.0}};
  t.env_reward = {0.0, 0.0};
  t.validate();
  return t;
}

std::vector<ToySsco> bundled_toys() {
  return {toy_two_phase_surge(), toy_decay_chain(), toy_catalyst()};
}

QTables::QTables(int E_, int K_, int T_, int n_) : E(E_), K(K_), T(T_), n(n_) {
  q1.assign(static_cast<std::size_t>(E) * (K + 1) * (T + 1) * (K + 1), 0.0);
  q2.assign(static_cast<std::size_t>(E) * (K + 1) * (T + 1) * (K + 1) * (n + 1), 0.0);
}

std::size_t QTables::idx1(int e, int k, int t, int o) const {
  return ((static_cast<std::size_t>(e) * (K + 1) + k) * (T + 1) + t) * (K + 1) + o;
}

std::size_t QTables::idx2(int e, int k, int t, int j, int a) const {
  return (((static_cast<std::size_t>(e) * (K + 1) + k) * (T + 1) + t) * (K + 1) + j) *
             (n + 1) +
         a;
}

int QTables::greedy_option(int e, int k, int t) const {
  int best = 0;
  double best_q = q1_at(e, k, t, 0);
  for (int o = 1; o <= k; ++o) {
    const double v = q1_at(e, k, t, o);
    if (v > best_q) {
      best_q = v;
      best = o;
    }
  }
  return best;
}

int QTables::greedy_action(const ToySsco& toy, int e, int k, int t, int j) const {
  int best = -1;
  double best_q = -std::numeric_limits<double>::infinity();
  for (int a = 0; a < n; ++a) {
    if (!toy.feasible[e][a]) continue;
    const double v = q2_at(e, k, t, j, a);
    if (v > best_q) {
      best_q = v;
      best = a;
    }
  }
  if (best < 0) throw std::logic_error("no feasible action");
  return best;
}

namespace {

double best_feasible_q2(const ToySsco& toy, const QTables& q, int e, int k, int t,
                        int j) {
  double best = -std::numeric_limits<double>::infinity();
  for (int a = 0; a < toy.num_nodes; ++a)
    if (toy.feasible[e][a]) best = std::max(best, q.q2_at(e, k, t, j, a));
  return best;
}

/// Marks q1/q2 cells reachable from the initial full state. With `allocation`
/// the higher layer is pinned to it; otherwise every option 0..k is expanded.
/// The lower layer expands every feasible action either way.
void sweep_reachable(const ToySsco& toy, const std::vector<int>* allocation,
                     const QTables& layout, std::vector<char>& cell1,
                     std::vector<char>& cell2) {
  cell1.assign(layout.q1.size(), 0);
  cell2.assign(layout.q2.size(), 0);
  std::vector<char> seen(
      static_cast<std::size_t>(toy.num_core_states) * (toy.budget + 1) *
          (toy.horizon + 1),
      0);
  const auto step_id = [&](int e, int k, int t) {
    return (static_cast<std::size_t>(e) * (toy.budget + 1) + k) * (toy.horizon + 1) +
           t;
  };
  std::vector<std::array<int, 3>> stack{{toy.initial_state, toy.budget, toy.horizon}};
  seen[step_id(toy.initial_state, toy.budget, toy.horizon)] = 1;

  const auto spread_kernel = [&](int e_final, int k_final, int t) {
    if (t - 1 < 1) return;
    for (int e2 = 0; e2 < toy.num_core_states; ++e2) {
      if (toy.env_kernel[e_final][e2] <= 0.0) continue;
      if (!seen[step_id(e2, k_final, t - 1)]) {
        seen[step_id(e2, k_final, t - 1)] = 1;
        stack.push_back({e2, k_final, t - 1});
      }
    }
  };

  std::function<void(int, int, int, int)> expand_sub = [&](int e, int k, int t, int j) {
    for (int a = 0; a < toy.num_nodes; ++a) {
      if (!toy.feasible[e][a]) continue;
      cell2[layout.idx2(e, k, t, j, a)] = 1;
      const int ne = toy.sel_next[e][a];
      if (j >= 2)
        expand_sub(ne, k - 1, t, j - 1);
      else
        spread_kernel(ne, k - 1, t);
    }
  };

  while (!stack.empty()) {
    const auto [e, k, t] = stack.back();
    stack.pop_back();
    const int day = toy.horizon - t;
    int lo = 0, hi = k;
    if (allocation) lo = hi = std::min((*allocation)[day], k);
    for (int o = lo; o <= hi; ++o) {
      cell1[layout.idx1(e, k, t, o)] = 1;
      if (o == 0) {
        cell2[layout.idx2(e, k, t, 0, layout.n)] = 1;
        spread_kernel(e, k, t);
      } else {
        expand_sub(e, k, t, o);
      }
    }
  }
}

}  // namespace

QTables brute_force_q(const ToySsco& toy) {
  toy.validate();
  QTables q(toy.num_core_states, toy.budget, toy.horizon, toy.num_nodes);
  // v[e][k] for the current steps-left layer, rebuilt per t.
  std::vector<double> v_prev(
      static_cast<std::size_t>(toy.num_core_states) * (toy.budget + 1), 0.0);
  const auto vid = [&](int e, int k) {
    return static_cast<std::size_t>(e) * (toy.budget + 1) + k;
  };
  std::vector<double> v_cur = v_prev;

  for (int t = 1; t <= toy.horizon; ++t) {
    for (int j = 0; j <= toy.budget; ++j) {
      for (int e = 0; e < toy.num_core_states; ++e) {
        for (int k = j; k <= toy.budget; ++k) {
          if (j == 0) {
            double y = toy.env_reward[e];
            for (int e2 = 0; e2 < toy.num_core_states; ++e2)
              y += toy.gamma * toy.env_kernel[e][e2] * v_prev[vid(e2, k)];
            q.q2_at(e, k, t, 0, q.n) = y;
            continue;
          }
          for (int a = 0; a < toy.num_nodes; ++a) {
            if (!toy.feasible[e][a]) continue;
            const int ne = toy.sel_next[e][a];
            double y = toy.sel_reward[e][a];
            if (j >= 2) {
              y += toy.gamma * best_feasible_q2(toy, q, ne, k - 1, t, j - 1);
            } else {
              // Final selection of the step: bootstrap straight through the
              // interaction into the next step's optimal option value. The
              // interaction reward is not credited to any lower cell.
              for (int e2 = 0; e2 < toy.num_core_states; ++e2)
                y += toy.gamma * toy.env_kernel[ne][e2] * v_prev[vid(e2, k - 1)];
            }
            q.q2_at(e, k, t, j, a) = y;
          }
        }
      }
    }
    for (int e = 0; e < toy.num_core_states; ++e) {
      for (int k = 0; k <= toy.budget; ++k) {
        double best = q.q2_at(e, k, t, 0, q.n);
        q.q1_at(e, k, t, 0) = best;
        for (int o = 1; o <= k; ++o) {
          const double val = best_feasible_q2(toy, q, e, k, t, o);
          q.q1_at(e, k, t, o) = val;
          best = std::max(best, val);
        }
        v_cur[vid(e, k)] = best;
      }
    }
    v_prev = v_cur;
  }
  return q;
}

double optimal_expected_return(const ToySsco& toy) {
  const QTables q = brute_force_q(toy);
  double best = -std::numeric_limits<double>::infinity();
  for (int o = 0; o <= toy.budget; ++o)
    best = std::max(best, q.q1_at(toy.initial_state, toy.budget, toy.horizon, o));
  return best;
}

double greedy_expected_return(const ToySsco& toy, const QTables& q) {
  std::vector<double> memo(
      static_cast<std::size_t>(toy.num_core_states) * (toy.budget + 1) *
          (toy.horizon + 1),
      std::numeric_limits<double>::quiet_NaN());
  const auto mid = [&](int e, int k, int t) {
    return (static_cast<std::size_t>(e) * (toy.budget + 1) + k) * (toy.horizon + 1) +
           t;
  };
  std::function<double(int, int, int)> ret = [&](int e, int k, int t) -> double {
    if (t == 0) return 0.0;
    double& slot = memo[mid(e, k, t)];
    if (!std::isnan(slot)) return slot;
    const int o = q.greedy_option(e, k, t);
    double r_step = 0.0;
    int cur = e, kb = k;
    for (int j = o; j >= 1; --j) {
      const int a = q.greedy_action(toy, cur, kb, t, j);
      r_step += toy.sel_reward[cur][a];
      cur = toy.sel_next[cur][a];
      kb -= 1;
    }
    r_step += toy.env_reward[cur];
    double future = 0.0;
    for (int e2 = 0; e2 < toy.num_core_states; ++e2)
      if (toy.env_kernel[cur][e2] > 0.0)
        future += toy.env_kernel[cur][e2] * ret(e2, kb, t - 1);
    slot = r_step + toy.gamma * future;
    return slot;
  };
  return ret(toy.initial_state, toy.budget, toy.horizon);
}

namespace {

/// Expected two-branch target for one lower cell under a fixed allocation
/// (next-step options pinned) or, with allocation == nullptr, greedy options.
double expected_target(const ToySsco& toy, const QTables& q, int e, int k, int t,
                       int j, int a, const std::vector<int>* allocation) {
  const auto next_option = [&](int e2, int k2, int t2) {
    if (allocation) return std::min((*allocation)[toy.horizon - t2], k2);
    return q.greedy_option(e2, k2, t2);
  };
  if (j == 0) {
    double y = toy.env_reward[e];
    if (t >= 2)
      for (int e2 = 0; e2 < toy.num_core_states; ++e2)
        if (toy.env_kernel[e][e2] > 0.0)
          y += toy.gamma * toy.env_kernel[e][e2] *
               q.q1_at(e2, k, t - 1, next_option(e2, k, t - 1));
    return y;
  }
  const int ne = toy.sel_next[e][a];
  double y = toy.sel_reward[e][a];
  if (j >= 2) {
    y += toy.gamma * best_feasible_q2(toy, q, ne, k - 1, t, j - 1);
  } else if (t >= 2) {
    for (int e2 = 0; e2 < toy.num_core_states; ++e2)
      if (toy.env_kernel[ne][e2] > 0.0)
        y += toy.gamma * toy.env_kernel[ne][e2] *
             q.q1_at(e2, k - 1, t - 1, next_option(e2, k - 1, t - 1));
  }
  return y;
}

double residual_over(const ToySsco& toy, const QTables& q,
                     const std::vector<char>& cell2,
                     const std::vector<int>* allocation) {
  double worst = 0.0;
  for (int e = 0; e < toy.num_core_states; ++e)
    for (int k = 0; k <= toy.budget; ++k)
      for (int t = 1; t <= toy.horizon; ++t)
        for (int j = 0; j <= k; ++j)
          for (int a = 0; a <= toy.num_nodes; ++a) {
            const std::size_t id = q.idx2(e, k, t, j, a);
            if (!cell2[id]) continue;
            const double y = expected_target(toy, q, e, k, t, j, a, allocation);
            worst = std::max(worst, std::abs(q.q2[id] - y));
          }
  return worst;
}

}  // namespace

double lower_bellman_residual(const ToySsco& toy, const QTables& q,
                              const std::vector<int>& allocation) {
  if (static_cast<int>(allocation.size()) != toy.horizon)
    throw std::invalid_argument("allocation length must equal the horizon");
  std::vector<char> cell1, cell2;
  sweep_reachable(toy, &allocation, q, cell1, cell2);
  return residual_over(toy, q, cell2, &allocation);
}

std::pair<double, double> table_errors(const ToySsco& toy, const QTables& learned,
                                       const QTables& oracle) {
  std::vector<char> cell1, cell2;
  sweep_reachable(toy, nullptr, oracle, cell1, cell2);
  double e1 = 0.0, e2 = 0.0;
  for (std::size_t i = 0; i < oracle.q1.size(); ++i)
    if (cell1[i]) e1 = std::max(e1, std::abs(learned.q1[i] - oracle.q1[i]));
  for (std::size_t i = 0; i < oracle.q2.size(); ++i)
    if (cell2[i]) e2 = std::max(e2, std::abs(learned.q2[i] - oracle.q2[i]));
  return {e1, e2};
}

double table_error(const ToySsco& toy, const QTables& learned, const QTables& oracle) {
  const auto [e1, e2] = table_errors(toy, learned, oracle);
  return std::max(e1, e2);
}

void TabularConfig::validate() const {
  if (episodes < 1) throw std::invalid_argument("episodes must be >= 1");
  if (alpha_scale <= 0.0) throw std::invalid_argument("alpha_scale must be > 0");
  if (eps_scale <= 0.0) throw std::invalid_argument("eps_scale must be > 0");
  if (eps_floor < 0.0 || eps_floor >= 1.0)
    throw std::invalid_argument("eps_floor must be in [0,1)");
  if (eps_cutoff < 0.0 || eps_cutoff >= 1.0)
    throw std::invalid_argument("eps_cutoff must be in [0,1)");
  if (sleep_residual_tol <= 0.0)
    throw std::invalid_argument("sleep_residual_tol must be > 0");
  if (sleep_max_fraction < 0.0 || sleep_max_fraction > 1.0)
    throw std::invalid_argument("sleep_max_fraction must be in [0,1]");
  if (residual_check_every < 1)
    throw std::invalid_argument("residual_check_every must be >= 1");
}

TabularResult tabular_ws_option(const ToySsco& toy, const TabularConfig& cfg,
                                const QTables* oracle) {
  toy.validate();
  cfg.validate();
  TabularResult out;
  out.q = QTables(toy.num_core_states, toy.budget, toy.horizon, toy.num_nodes);
  QTables& q = out.q;
  std::vector<long> visits1(q.q1.size(), 0), visits2(q.q2.size(), 0);
  const auto alpha = [&](std::vector<long>& counts, std::size_t id) {
    const double a =
        cfg.alpha_one ? 1.0 : 1.0 / (1.0 + static_cast<double>(counts[id]) / cfg.alpha_scale);
    counts[id] += 1;
    return a;
  };
  const auto nudge2 = [&](std::size_t id, double target) {
    q.q2[id] += alpha(visits2, id) * (target - q.q2[id]);
  };

  const std::vector<int> allocation =
      allocate({BudgetKind::average, 2}, toy.budget, toy.horizon);
  Rng rng(derive_seed(cfg.seed, {0x7ab}));

  const auto sample_kernel = [&](int e) {
    const double u = uniform01(rng);
    double acc = 0.0;
    for (int e2 = 0; e2 < toy.num_core_states; ++e2) {
      acc += toy.env_kernel[e][e2];
      if (u < acc) return e2;
    }
    return toy.num_core_states - 1;
  };
  const auto random_feasible = [&](int e) {
    std::vector<int> open;
    for (int a = 0; a < toy.num_nodes; ++a)
      if (toy.feasible[e][a]) open.push_back(a);
    return open[uniform_int(rng, 0, static_cast<int>(open.size()) - 1)];
  };

  // Exploring starts. Enumerate every reachable step state and mid-step
  // sub-context once; during wake, alternate natural rollouts with rollouts
  // seeded at a uniform draw from these lists, first choice forced uniform.
  // An annealed eps alone gives cells that need several simultaneous
  // off-greedy choices a summable visit probability, i.e. finitely many
  // visits ever; seeded starts keep every cell's visit rate bounded away
  // from zero, which is what the convergence assumptions require.
  std::vector<std::array<int, 3>> es_steps, sleep_steps;
  std::vector<std::array<int, 4>> es_contexts, sleep_contexts;
  const auto collect_starts = [&](const std::vector<int>* alloc,
                                  std::vector<std::array<int, 3>>& steps,
                                  std::vector<std::array<int, 4>>& contexts) {
    std::vector<char> any1, any2;
    sweep_reachable(toy, alloc, q, any1, any2);
    for (int e = 0; e < toy.num_core_states; ++e)
      for (int k = 0; k <= toy.budget; ++k)
        for (int t = 1; t <= toy.horizon; ++t) {
          bool step_seen = false;
          for (int o = 0; o <= k; ++o)
            if (any1[q.idx1(e, k, t, o)]) step_seen = true;
          if (step_seen) steps.push_back({e, k, t});
          for (int j = 1; j <= k; ++j) {
            bool ctx_seen = false;
            for (int a = 0; a < toy.num_nodes; ++a)
              if (any2[q.idx2(e, k, t, j, a)]) ctx_seen = true;
            if (ctx_seen) contexts.push_back({e, k, t, j});
          }
        }
  };
  collect_starts(nullptr, es_steps, es_contexts);
  collect_starts(&allocation, sleep_steps, sleep_contexts);

  // Checkpoint instrumentation: per-episode max-norm error against the
  // oracle, maximised over each geometric window (the decay envelope).
  std::vector<char> reach1, reach2;
  if (oracle) sweep_reachable(toy, nullptr, q, reach1, reach2);
  double window_max = 0.0;
  const auto current_error = [&]() {
    double worst = 0.0;
    for (std::size_t i = 0; i < q.q1.size(); ++i)
      if (reach1[i]) worst = std::max(worst, std::abs(q.q1[i] - oracle->q1[i]));
    for (std::size_t i = 0; i < q.q2.size(); ++i)
      if (reach2[i]) worst = std::max(worst, std::abs(q.q2[i] - oracle->q2[i]));
    return worst;
  };

  const long sleep_cap =
      static_cast<long>(cfg.sleep_max_fraction * static_cast<double>(cfg.episodes));
  bool sleeping = sleep_cap > 0;
  out.sleep_exit_residual =
      sleeping ? std::numeric_limits<double>::quiet_NaN() : 0.0;
  long next_checkpoint = 1;

  struct Pending {
    std::size_t cell;
    double reward;
  };
  struct StepRecord {
    std::size_t cell;
    double reward;
  };

  for (long ep = 0; ep < cfg.episodes; ++ep) {
    if (sleeping && (ep % cfg.residual_check_every == 0 || ep >= sleep_cap)) {
      const double res = lower_bellman_residual(toy, q, allocation);
      if (res < cfg.sleep_residual_tol || ep >= sleep_cap) {
        sleeping = false;
        out.sleep_episodes = ep;
        out.sleep_exit_residual = res;

      }
    }
    // Exploring starts own state coverage, so eps only smooths the on-path
    // action mix; one global anneal keeps wake returns clean from the start.
    // With alpha = 1 every update overwrites its cell, so a late exploratory
    // return would clobber a converged value; eps is dropped entirely there.
    const double sched = 1.0 / (1.0 + static_cast<double>(ep) / cfg.eps_scale);
    const double eps =
        cfg.alpha_one && !sleeping
            ? 0.0
            : std::max(cfg.eps_floor, sched < cfg.eps_cutoff ? 0.0 : sched);

    int e = toy.initial_state, k = toy.budget, t = toy.horizon;
    int forced_option = -1, start_j = -1;
    // 1/4 natural episodes, 3/8 step starts, 3/8 sub-context starts.
    const long m = ep % 8;
    if (m != 0 && m != 4) {
      const auto& steps = sleeping ? sleep_steps : es_steps;
      const auto& contexts = sleeping ? sleep_contexts : es_contexts;
      if ((m == 1 || m == 3 || m == 5) && !steps.empty()) {
        const auto& s = steps[static_cast<std::size_t>(
            uniform_int(rng, 0, static_cast<int>(steps.size()) - 1))];
        e = s[0], k = s[1], t = s[2];
        // Sleeping keeps the option pinned to the allocation; only the start
        // state is randomised.
        if (!sleeping) forced_option = uniform_int(rng, 0, k);
      } else if (!contexts.empty()) {
        const auto& s = contexts[static_cast<std::size_t>(
            uniform_int(rng, 0, static_cast<int>(contexts.size()) - 1))];
        e = s[0], k = s[1], t = s[2];
        start_j = s[3];
      }
    }
    std::vector<Pending> pending;
    std::vector<StepRecord> traj;
    bool first = true;
    while (t >= 1) {
      // A sub-context start drops into the middle of a step: its remaining
      // selections are trained, but the step is incomplete so it must not
      // feed the higher table's regression.
      const bool partial = first && start_j >= 0;
      int o;
      if (partial)
        o = start_j;
      else if (first && forced_option >= 0)
        o = forced_option;
      else if (sleeping)
        o = std::min(allocation[toy.horizon - t], k);
      else if (uniform01(rng) < eps)
        o = uniform_int(rng, 0, k);
      else
        o = q.greedy_option(e, k, t);
      first = false;

      for (const Pending& p : pending) {
        const double y = p.reward + toy.gamma * q.q1_at(e, k, t, o);
        nudge2(p.cell, y);
      }
      pending.clear();

      double r_step = 0.0;
      int e_final, k_final;
      if (o == 0) {
        const std::size_t cell = q.idx2(e, k, t, 0, q.n);
        const double r = toy.env_reward[e];
        r_step += r;
        if (t == 1)
          nudge2(cell, r);
        else
          pending.push_back({cell, r});
        e_final = e;
        k_final = k;
      } else {
        int cur = e, kb = k;
        for (int j = o; j >= 1; --j) {
          const bool explore = (partial && j == o) || uniform01(rng) < eps;
          const int a = explore ? random_feasible(cur)
                                : q.greedy_action(toy, cur, kb, t, j);
          const std::size_t cell = q.idx2(cur, kb, t, j, a);
          const double r = toy.sel_reward[cur][a];
          r_step += r;
          const int ne = toy.sel_next[cur][a];
          if (j >= 2) {
            nudge2(cell, r + toy.gamma * best_feasible_q2(toy, q, ne, kb - 1, t, j - 1));
          } else if (t == 1) {
            nudge2(cell, r);
          } else {
            pending.push_back({cell, r});
          }
          cur = ne;
          kb -= 1;
        }
        r_step += toy.env_reward[cur];
        e_final = cur;
        k_final = kb;
      }
      if (!partial) traj.push_back({q.idx1(e, k, t, o), r_step});
      e = sample_kernel(e_final);
      k = k_final;
      t -= 1;
    }

    // Sleep trains the lower table only. Freezing q1 there also makes every
    // sleep-stage target deterministic given q2 (boundary bootstraps read a
    // constant), so the stage residual genuinely converges instead of
    // hovering at the sampling-noise floor.
    if (!sleeping) {
      double g = 0.0;
      for (auto it = traj.rbegin(); it != traj.rend(); ++it) {
        g = it->reward + toy.gamma * g;
        q.q1[it->cell] += alpha(visits1, it->cell) * (g - q.q1[it->cell]);
      }
    }

    if (oracle) {
      window_max = std::max(window_max, current_error());
      if (ep + 1 == next_checkpoint) {
        out.error_checkpoints.emplace_back(ep + 1, window_max);
        window_max = 0.0;
        next_checkpoint *= 4;
      }
    }
  }
  if (sleeping) {
    out.sleep_episodes = cfg.episodes;
    out.sleep_exit_residual = lower_bellman_residual(toy, q, allocation);
  }
  if (oracle && (out.error_checkpoints.empty() ||
                 out.error_checkpoints.back().first != cfg.episodes))
    out.error_checkpoints.emplace_back(cfg.episodes, window_max);
  return out;
}

}  // namespace wsopt
