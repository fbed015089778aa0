#pragma once

#include <cstdint>
#include <vector>

#include "wsopt/graph.hpp"
#include "wsopt/view.hpp"

namespace wsopt {

/**
 * Adaptive influence maximization under the independent cascade model.
 * Nodes are inactive / active / removed; an edge (u,v) activates with
 * probability 1/in_degree(v). Each step: the chosen seed set is activated,
 * then every active node attempts each inactive out-neighbor once and becomes
 * removed. Step reward = newly influenced nodes (effective seeds + cascade).
 */
class AimEnv {
 public:
  static constexpr const char* kName = "aim";
  static constexpr bool kStochasticReward = true;
  static constexpr int kFeatureDim = 5;

  enum NodeState : char { kInactive = 0, kActive = 1, kRemoved = 2 };

  struct State {
    std::vector<char> node_state;
    int budget_left = 0;
    int steps_left = 0;
  };

  struct Outcome {
    State next;
    double reward = 0.0;
  };

  AimEnv(DirectedGraph graph, int horizon, int budget);

  const DirectedGraph& graph() const { return graph_; }
  int num_nodes() const { return graph_.num_nodes(); }
  int horizon() const { return horizon_; }
  int budget() const { return budget_; }

  /// All nodes inactive, full budget/horizon. Seed unused (kept for symmetry).
  State initial_state(std::uint64_t seed = 0) const;

  /// 1/in_degree(v); throws if u is not an in-neighbor of v.
  double activation_prob(int u, int v) const;

  /// Listed inactive nodes become active; active/removed entries are tolerated
  /// and consume budget without effect. Throws on out-of-range/duplicate nodes
  /// or when the list exceeds the remaining budget.
  State seed_nodes(const State& s, const std::vector<int>& nodes) const;

  struct PropagateResult {
    State next;
    int newly_active = 0;
  };
  /// One synchronous cascade round: every active node attempts each inactive
  /// out-neighbor once (node v flips with prob 1 - prod(1 - p(u,v)) over its
  /// active in-neighbors), then all attempting nodes become removed.
  PropagateResult propagate(const State& s, std::uint64_t seed) const;

  int influenced_count(const State& s) const;  // active + removed

  /// Full time step: seed, cascade, advance the clock.
  Outcome step(const State& s, const std::vector<int>& nodes, std::uint64_t seed) const;

  /// Deterministic single-node seeding used for the selection sub-states.
  void apply_selection(State& s, int node) const;

  /// No node is ever environment-invalid here: re-seeding active nodes is
  /// permitted (it wastes budget and earns nothing).
  std::vector<char> invalid_mask(const State& s) const;

  /// Nodes whose selection cannot yield gain (already active or removed).
  std::vector<char> ineffective_mask(const State& s) const;

  StateView view(const State& s) const;

  /// Environment share of a step reward: r minus the count of selections that
  /// were inactive at selection time (the effective seeds).
  double null_share(const State& step_start, const std::vector<int>& actions, double reward) const;

  bool terminal(const State& s) const { return s.steps_left == 0; }

 private:
  DirectedGraph graph_;
  int horizon_ = 0;
  int budget_ = 0;
  std::vector<double> inv_indeg_;
  double inv_max_outdeg_ = 0.0;
};

}  // namespace wsopt
