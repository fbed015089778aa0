#pragma once

#include <cstdint>
#include <vector>

#include "wsopt/graph.hpp"
#include "wsopt/view.hpp"

namespace wsopt {

/**
 * Multi-day route planning with drifting profits. Each day the agent visits an
 * ordered set of unvisited cities starting from its current position. Day
 * reward = sum of profits - eta * max(|C|-1, 0)^2, minus penalty_coef times the
 * distance overrun beyond d_max (= dmax_factor * largest pairwise distance).
 * The return leg to the start city is appended on the final day. After the
 * reward, visited profits pin to 0 and unvisited profits drift by U(-drift,
 * +drift), clamped at 0.
 */
class RpEnv {
 public:
  static constexpr const char* kName = "rp";
  static constexpr bool kStochasticReward = false;
  static constexpr int kFeatureDim = 5;

  struct Config {
    int horizon = 10;
    int budget = 10;
    double eta = 0.1;
    double penalty_coef = 5.0;
    double dmax_factor = 1.5;
    double drift = 0.05;
    double profit_lo = 0.5;
    double profit_hi = 1.0;
    double coord_scale = 100.0;  // feature normalization only
    int start_city = 0;
    bool return_leg_every_day = false;
  };

  struct State {
    std::vector<double> profit;
    std::vector<char> visited;
    int current = 0;
    int budget_left = 0;
    int steps_left = 0;
  };

  struct Outcome {
    State next;
    double reward = 0.0;
  };

  RpEnv(EuclideanGraph graph, Config cfg);

  const EuclideanGraph& graph() const { return graph_; }
  const Config& config() const { return cfg_; }
  int num_nodes() const { return graph_.num_nodes(); }
  int horizon() const { return cfg_.horizon; }
  int budget() const { return cfg_.budget; }
  double d_max() const { return d_max_; }

  /// Profits ~ U(profit_lo, profit_hi); the start city begins visited with 0.
  State initial_state(std::uint64_t seed) const;

  /// f(C): profit mass less the crowding penalty eta * max(|C|-1,0)^2.
  double combined_profit(const State& s, const std::vector<int>& cities) const;

  /// Travel distance current -> cities in order, optionally + return to start.
  double path_length(const State& s, const std::vector<int>& cities, bool include_return) const;

  /// Reward of visiting `cities` today (validates: distinct, unvisited, within
  /// budget). Includes the return leg when this is the final day.
  double day_reward(const State& s, const std::vector<int>& cities) const;

  /// Full day: reward, mark visited (profit 0), drift unvisited profits, move.
  Outcome step(const State& s, const std::vector<int>& cities, std::uint64_t seed) const;

  void apply_selection(State& s, int city) const;
  std::vector<char> invalid_mask(const State& s) const;  // visited cities
  /// Same as invalid_mask: a visited city has no profit left.
  std::vector<char> ineffective_mask(const State& s) const { return invalid_mask(s); }
  StateView view(const State& s) const;
  double null_share(const State&, const std::vector<int>&, double) const { return 0.0; }
  bool terminal(const State& s) const { return s.steps_left == 0; }

 private:
  void validate_cities(const State& s, const std::vector<int>& cities) const;
  bool include_return_leg(const State& s) const {
    return cfg_.return_leg_every_day || s.steps_left == 1;
  }

  EuclideanGraph graph_;
  Config cfg_;
  double d_max_ = 0.0;
};

}  // namespace wsopt
