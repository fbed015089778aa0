#include "wsopt/env_aim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <unordered_set>

namespace wsopt {

AimEnv::AimEnv(DirectedGraph graph, int horizon, int budget)
    : graph_(std::move(graph)), horizon_(horizon), budget_(budget) {
  if (horizon_ < 1) throw std::invalid_argument("AimEnv: horizon must be >= 1");
  if (budget_ < 0) throw std::invalid_argument("AimEnv: budget must be >= 0");
  const int n = graph_.num_nodes();
  inv_indeg_.resize(n, 0.0);
  for (int v = 0; v < n; ++v)
    if (graph_.in_degree(v) > 0) inv_indeg_[v] = 1.0 / graph_.in_degree(v);
  const int mo = graph_.max_out_degree();
  inv_max_outdeg_ = mo > 0 ? 1.0 / mo : 0.0;
}

AimEnv::State AimEnv::initial_state(std::uint64_t) const {
  State s;
  s.node_state.assign(graph_.num_nodes(), kInactive);
  s.budget_left = budget_;
  s.steps_left = horizon_;
  return s;
}

double AimEnv::activation_prob(int u, int v) const {
  if (v < 0 || v >= graph_.num_nodes() || u < 0 || u >= graph_.num_nodes())
    throw std::invalid_argument("AimEnv::activation_prob: node out of range");
  const auto& ins = graph_.in_neighbors(v);
  if (std::find(ins.begin(), ins.end(), u) == ins.end())
    throw std::invalid_argument("AimEnv::activation_prob: (" + std::to_string(u) + "," +
                                std::to_string(v) + ") is not an edge");
  return inv_indeg_[v];
}

AimEnv::State AimEnv::seed_nodes(const State& s, const std::vector<int>& nodes) const {
  if (static_cast<int>(nodes.size()) > s.budget_left)
    throw std::invalid_argument("AimEnv::seed_nodes: selection exceeds remaining budget");
  State next = s;
  std::unordered_set<int> seen;
  for (int v : nodes) {
    if (v < 0 || v >= graph_.num_nodes())
      throw std::invalid_argument("AimEnv::seed_nodes: node out of range");
    if (!seen.insert(v).second)
      throw std::invalid_argument("AimEnv::seed_nodes: duplicate node " + std::to_string(v));
    if (next.node_state[v] == kInactive) next.node_state[v] = kActive;
  }
  next.budget_left -= static_cast<int>(nodes.size());
  return next;
}

AimEnv::PropagateResult AimEnv::propagate(const State& s, std::uint64_t seed) const {
  const int n = graph_.num_nodes();
  PropagateResult out;
  out.next = s;
  std::vector<char> newly(n, 0);
  for (int v = 0; v < n; ++v) {
    if (s.node_state[v] != kInactive) continue;
    int active_in = 0;
    for (int u : graph_.in_neighbors(v))
      if (s.node_state[u] == kActive) ++active_in;
    if (active_in == 0) continue;
    // 1 - prod(1 - p) over active in-neighbors; p = 1/in_degree(v) for all.
    // Each node draws from its own (seed, v) hash stream, so the same seed
    // gives every node the same threshold regardless of which other nodes are
    // active — simulations with shared seeds become common-random-number runs.
    const double stay = std::pow(1.0 - inv_indeg_[v], active_in);
    const double u01 =
        static_cast<double>(splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(v) + 1)) >>
                            11) *
        0x1.0p-53;
    if (u01 < 1.0 - stay) {
      newly[v] = 1;
      ++out.newly_active;
    }
  }
  for (int v = 0; v < n; ++v) {
    if (s.node_state[v] == kActive) out.next.node_state[v] = kRemoved;
    if (newly[v]) out.next.node_state[v] = kActive;
  }
  return out;
}

int AimEnv::influenced_count(const State& s) const {
  int c = 0;
  for (char ns : s.node_state)
    if (ns != kInactive) ++c;
  return c;
}

AimEnv::Outcome AimEnv::step(const State& s, const std::vector<int>& nodes,
                             std::uint64_t seed) const {
  if (s.steps_left <= 0) throw std::invalid_argument("AimEnv::step: episode already over");
  const int before = influenced_count(s);
  State seeded = seed_nodes(s, nodes);
  PropagateResult prop = propagate(seeded, seed);
  Outcome out;
  out.next = std::move(prop.next);
  out.next.steps_left = s.steps_left - 1;
  out.reward = static_cast<double>(influenced_count(out.next) - before);
  return out;
}

void AimEnv::apply_selection(State& s, int node) const {
  if (node < 0 || node >= graph_.num_nodes())
    throw std::invalid_argument("AimEnv::apply_selection: node out of range");
  if (s.budget_left <= 0) throw std::invalid_argument("AimEnv::apply_selection: no budget left");
  if (s.node_state[node] == kInactive) s.node_state[node] = kActive;
  s.budget_left -= 1;
}

std::vector<char> AimEnv::invalid_mask(const State& s) const {
  return std::vector<char>(s.node_state.size(), 0);
}

std::vector<char> AimEnv::ineffective_mask(const State& s) const {
  std::vector<char> m(s.node_state.size(), 0);
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = s.node_state[i] != kInactive;
  return m;
}

StateView AimEnv::view(const State& s) const {
  const int n = graph_.num_nodes();
  StateView v;
  v.features = Tensor(n, kFeatureDim);
  for (int i = 0; i < n; ++i) {
    v.features.at(i, s.node_state[i]) = 1.0;  // one-hot of the node lifecycle
    v.features.at(i, 3) = graph_.out_degree(i) * inv_max_outdeg_;
    double score_out = 0.0;  // mass this node could push onto inactive out-neighbors
    for (int u : graph_.out_neighbors(i))
      if (s.node_state[u] == kInactive) score_out += inv_indeg_[u];
    v.features.at(i, 4) = score_out * inv_max_outdeg_;
  }
  v.globals = {budget_ > 0 ? static_cast<double>(s.budget_left) / budget_ : 0.0,
               static_cast<double>(s.steps_left) / horizon_};
  v.graph = &graph_;
  return v;
}

double AimEnv::null_share(const State& step_start, const std::vector<int>& actions,
                          double reward) const {
  int k_eff = 0;
  for (int v : actions)
    if (step_start.node_state[v] == kInactive) ++k_eff;
  return reward - static_cast<double>(k_eff);
}

}  // namespace wsopt
