#include "wsopt/env_rp.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>
#include <unordered_set>

namespace wsopt {

RpEnv::RpEnv(EuclideanGraph graph, Config cfg) : graph_(std::move(graph)), cfg_(cfg) {
  if (cfg_.horizon < 1) throw std::invalid_argument("RpEnv: horizon must be >= 1");
  if (cfg_.budget < 0) throw std::invalid_argument("RpEnv: budget must be >= 0");
  if (graph_.num_nodes() < 1) throw std::invalid_argument("RpEnv: need at least one city");
  if (cfg_.start_city < 0 || cfg_.start_city >= graph_.num_nodes())
    throw std::invalid_argument("RpEnv: start city out of range");
  if (cfg_.eta < 0.0 || cfg_.penalty_coef < 0.0 || cfg_.dmax_factor <= 0.0 || cfg_.drift < 0.0)
    throw std::invalid_argument("RpEnv: negative penalty/drift configuration");
  if (cfg_.profit_lo > cfg_.profit_hi)
    throw std::invalid_argument("RpEnv: profit_lo > profit_hi");
  d_max_ = cfg_.dmax_factor * graph_.max_distance();
}

RpEnv::State RpEnv::initial_state(std::uint64_t seed) const {
  Rng rng(seed);
  const int n = graph_.num_nodes();
  State s;
  s.profit.resize(n);
  for (int i = 0; i < n; ++i) s.profit[i] = uniform_real(rng, cfg_.profit_lo, cfg_.profit_hi);
  s.visited.assign(n, 0);
  s.visited[cfg_.start_city] = 1;
  s.profit[cfg_.start_city] = 0.0;
  s.current = cfg_.start_city;
  s.budget_left = cfg_.budget;
  s.steps_left = cfg_.horizon;
  return s;
}

double RpEnv::combined_profit(const State& s, const std::vector<int>& cities) const {
  double p = 0.0;
  for (int c : cities) p += s.profit[c];
  const double extra = std::max(static_cast<int>(cities.size()) - 1, 0);
  return p - cfg_.eta * extra * extra;
}

double RpEnv::path_length(const State& s, const std::vector<int>& cities,
                          bool include_return) const {
  double len = 0.0;
  int at = s.current;
  for (int c : cities) {
    len += graph_.distance(at, c);
    at = c;
  }
  if (include_return) len += graph_.distance(at, cfg_.start_city);
  return len;
}

void RpEnv::validate_cities(const State& s, const std::vector<int>& cities) const {
  if (static_cast<int>(cities.size()) > s.budget_left)
    throw std::invalid_argument("RpEnv: selection exceeds remaining budget");
  std::unordered_set<int> seen;
  for (int c : cities) {
    if (c < 0 || c >= graph_.num_nodes())
      throw std::invalid_argument("RpEnv: city out of range");
    if (s.visited[c])
      throw std::invalid_argument("RpEnv: city " + std::to_string(c) + " already visited");
    if (!seen.insert(c).second)
      throw std::invalid_argument("RpEnv: duplicate city " + std::to_string(c));
  }
}

double RpEnv::day_reward(const State& s, const std::vector<int>& cities) const {
  validate_cities(s, cities);
  const double len = path_length(s, cities, include_return_leg(s));
  const double overrun = std::max(0.0, len - d_max_);
  return combined_profit(s, cities) - cfg_.penalty_coef * overrun;
}

RpEnv::Outcome RpEnv::step(const State& s, const std::vector<int>& cities,
                           std::uint64_t seed) const {
  if (s.steps_left <= 0) throw std::invalid_argument("RpEnv::step: episode already over");
  Outcome out;
  out.reward = day_reward(s, cities);
  out.next = s;
  for (int c : cities) {
    out.next.visited[c] = 1;
    out.next.profit[c] = 0.0;
  }
  if (!cities.empty()) out.next.current = cities.back();
  if (include_return_leg(s)) out.next.current = cfg_.start_city;
  Rng rng(seed);
  for (int i = 0; i < graph_.num_nodes(); ++i) {
    if (out.next.visited[i]) continue;
    out.next.profit[i] =
        std::max(0.0, out.next.profit[i] + uniform_real(rng, -cfg_.drift, cfg_.drift));
  }
  out.next.budget_left = s.budget_left - static_cast<int>(cities.size());
  out.next.steps_left = s.steps_left - 1;
  return out;
}

void RpEnv::apply_selection(State& s, int city) const {
  if (city < 0 || city >= graph_.num_nodes())
    throw std::invalid_argument("RpEnv::apply_selection: city out of range");
  if (s.visited[city])
    throw std::invalid_argument("RpEnv::apply_selection: city already visited");
  if (s.budget_left <= 0) throw std::invalid_argument("RpEnv::apply_selection: no budget left");
  s.visited[city] = 1;
  s.profit[city] = 0.0;
  s.current = city;
  s.budget_left -= 1;
}

std::vector<char> RpEnv::invalid_mask(const State& s) const {
  return std::vector<char>(s.visited.begin(), s.visited.end());
}

StateView RpEnv::view(const State& s) const {
  const int n = graph_.num_nodes();
  StateView v;
  v.features = Tensor(n, kFeatureDim);
  const double inv_scale = 1.0 / cfg_.coord_scale;
  for (int i = 0; i < n; ++i) {
    v.features.at(i, 0) = graph_.coords()[i].first * inv_scale;
    v.features.at(i, 1) = graph_.coords()[i].second * inv_scale;
    v.features.at(i, 2) = s.profit[i];
    v.features.at(i, 3) = (i == s.current) ? 1.0 : 0.0;
    v.features.at(i, 4) = (i == cfg_.start_city) ? 1.0 : 0.0;
  }
  v.globals = {cfg_.budget > 0 ? static_cast<double>(s.budget_left) / cfg_.budget : 0.0,
               static_cast<double>(s.steps_left) / cfg_.horizon};
  v.current = s.current;
  v.start = cfg_.start_city;
  v.graph = nullptr;
  return v;
}

}  // namespace wsopt
