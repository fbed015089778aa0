#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace wsopt {

/**
 * Fully enumerable two-layer decision problem for verifying the convergence
 * claims in the tabular regime. A "core state" e evolves deterministically
 * through selections (sel_next / sel_reward / feasible) and stochastically at
 * the end of each time step (env_kernel row for the state reached, plus
 * env_reward emitted on interaction). The agent's full state is
 * (e, budget left, steps left); within a step the remaining-selections count j
 * is part of the lower layer's context (j = 0 is the null context).
 */
struct ToySsco {
  std::string name;
  int num_core_states = 0;
  int num_nodes = 0;  // selection actions
  int budget = 0;
  int horizon = 0;
  double gamma = 1.0;
  int initial_state = 0;
  std::vector<std::vector<int>> sel_next;       // [E][n]
  std::vector<std::vector<double>> sel_reward;  // [E][n]
  std::vector<std::vector<char>> feasible;      // [E][n], at least one per state
  std::vector<std::vector<double>> env_kernel;  // [E][E], rows sum to 1
  std::vector<double> env_reward;               // [E]

  /// Throws std::invalid_argument on inconsistent dimensions, kernel rows not
  /// summing to 1, out-of-range transitions, states without feasible actions,
  /// or sizes beyond the enumerable limits (n <= 4, K <= 3, T <= 3, and at
  /// most 10^4 table cells).
  void validate() const;
  std::size_t table_cells() const;
};

ToySsco load_toy(const std::string& path);
void save_toy(const ToySsco& toy, const std::string& path);

/// Three hand-analyzed instances: deferring budget to a surge phase beats
/// uniform allocation; a decaying chain rewards spending everything up front;
/// a low-reward catalyst selection unlocks high rewards within the same step.
ToySsco toy_two_phase_surge();
ToySsco toy_decay_chain();
ToySsco toy_catalyst();
std::vector<ToySsco> bundled_toys();

/**
 * Flat Q tables. q1 is indexed by (e, budget left k, steps left t, option o);
 * q2 by (e, k, t, remaining selections j, action a) with a == num_nodes
 * denoting the null action. Cells with t = 0 stay at zero (terminal).
 */
struct QTables {
  int E = 0, K = 0, T = 0, n = 0;
  std::vector<double> q1;
  std::vector<double> q2;

  QTables() = default;
  QTables(int E_, int K_, int T_, int n_);

  std::size_t idx1(int e, int k, int t, int o) const;
  std::size_t idx2(int e, int k, int t, int j, int a) const;
  double q1_at(int e, int k, int t, int o) const { return q1[idx1(e, k, t, o)]; }
  double q2_at(int e, int k, int t, int j, int a) const { return q2[idx2(e, k, t, j, a)]; }
  double& q1_at(int e, int k, int t, int o) { return q1[idx1(e, k, t, o)]; }
  double& q2_at(int e, int k, int t, int j, int a) { return q2[idx2(e, k, t, j, a)]; }

  /// Highest-value option at (e,k,t) over 0..k, ties to the smallest.
  int greedy_option(int e, int k, int t) const;
  /// Highest-value feasible action at (e,k,t,j), ties to the smallest.
  int greedy_action(const ToySsco& toy, int e, int k, int t, int j) const;
};

/**
 * Exact optimal tables by backward induction over steps-left. The lower table
 * follows the learner's target structure: within a step the backup maxes over
 * feasible actions; the final selection of a step bootstraps through the
 * environment kernel into the next step's optimal option value (the reward
 * emitted by that interaction is credited to no lower cell); the null cell
 * carries the interaction reward itself. q1(s,o) equals max_a q2(s,j=o,a) by
 * construction. Throws when the toy exceeds the enumerable limits.
 */
QTables brute_force_q(const ToySsco& toy);

/// max_o q1(e0, K, T, o): the optimal expected return from the initial state.
double optimal_expected_return(const ToySsco& toy);

/// Exact expected return of acting greedily w.r.t. the given tables.
double greedy_expected_return(const ToySsco& toy, const QTables& q);

/**
 * Max |q2 - expected two-branch target| over the cells reachable when the
 * higher layer follows `allocation` and the lower layer explores every
 * feasible action. Boundary targets bootstrap q1 at the allocation's next
 * option. This is the sleep-stage convergence gauge.
 */
double lower_bellman_residual(const ToySsco& toy, const QTables& q,
                              const std::vector<int>& allocation);

struct TabularConfig {
  long episodes = 1000000;
  double alpha_scale = 100.0;  // alpha(visits) = 1 / (1 + visits / alpha_scale)
  bool alpha_one = false;      // pure replacement updates (deterministic toys)
  double eps_scale = 50.0;     // eps(episode) = max(floor, 1 / (1 + episode / eps_scale))
  double eps_floor = 0.0;
  // Anneal hits exactly 0 once the schedule dips below this (unless a
  // positive floor keeps it up). Exploring starts already guarantee
  // coverage; a persistent trickle of exploration only leaves rare
  // hot-step-size kicks on the error envelope.
  double eps_cutoff = 0.02;
  double sleep_residual_tol = 1e-6;
  double sleep_max_fraction = 0.2;  // give up waiting for the residual here
  int residual_check_every = 500;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TabularResult {
  QTables q;
  long sleep_episodes = 0;
  double sleep_exit_residual = 0.0;
  /// Geometric checkpoints (episodes 1, 4, 16, ...) recorded when an oracle
  /// is supplied: entry (episode, err) holds the max-norm error vs the
  /// oracle over exploration-reachable cells, maximised over the window
  /// since the previous checkpoint. Windowing measures the error's decay
  /// envelope; a pointwise sample would alias the brief excursions an
  /// eps-greedy kick leaves behind.
  std::vector<std::pair<long, double>> error_checkpoints;
};

/**
 * Tabular two-layer learner: sleep stage under the fixed average allocation
 * until the lower residual drops below tolerance (or the episode cap), then
 * eps-greedy co-training. The lower layer runs online Q-learning with the
 * two-branch target (boundary cells bootstrap q1 at the option actually taken
 * next); the higher layer regresses each episode's Monte-Carlo gains. Step
 * sizes follow a per-cell Robbins-Monro schedule unless alpha_one is set.
 */
TabularResult tabular_ws_option(const ToySsco& toy, const TabularConfig& cfg,
                                const QTables* oracle = nullptr);

/// Max-norm distances (higher layer, lower layer) over exploration-reachable cells.
std::pair<double, double> table_errors(const ToySsco& toy, const QTables& learned,
                                       const QTables& oracle);
/// max of both layers' errors.
double table_error(const ToySsco& toy, const QTables& learned, const QTables& oracle);

}  // namespace wsopt
