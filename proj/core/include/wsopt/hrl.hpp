#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <vector>

#include "wsopt/nets.hpp"
#include "wsopt/rng.hpp"

namespace wsopt {

/// Action id used for "interact with the environment without selecting".
constexpr int kNullAction = -1;

/// One environment time step as executed: the state it started from, the
/// budget the higher layer granted, the nodes the lower layer picked (in
/// order; empty = null action), and the realized reward.
template <class Env>
struct EpisodeStep {
  typename Env::State state;
  int option = 0;
  std::vector<int> actions;
  double reward = 0.0;
};

template <class Env>
struct EpisodeTrace {
  std::vector<EpisodeStep<Env>> steps;
  typename Env::State final_state;

  double total_reward() const {
    double r = 0.0;
    for (const auto& s : steps) r += s.reward;
    return r;
  }
};

/// Higher-layer sample: regression target is the Monte-Carlo return.
template <class Env>
struct HigherTransition {
  std::shared_ptr<const Env> env;
  typename Env::State state;
  int option = 0;
  double gain = 0.0;
  int episode = 0;
  int step = 0;
};

/**
 * Lower-layer sample. `remaining` counts the selections still owed in the
 * current step including this one (0 for the null action); the binary option
 * is min(remaining, 1) and the numeric encoding feeds `remaining` directly.
 * next_remaining == 0 marks a step boundary, where the TD bootstrap switches
 * to the higher net at `next_higher_option`.
 */
template <class Env>
struct LowerTransition {
  std::shared_ptr<const Env> env;
  typename Env::State state;
  int remaining = 0;
  int action = kNullAction;
  double reward = 0.0;
  typename Env::State next_state;
  int next_remaining = 0;
  int next_higher_option = 0;
  bool terminal = false;
};

/// Fixed-capacity FIFO; index 0 = oldest surviving element.
template <class T>
class RingBuffer {
 public:
  explicit RingBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity_ == 0) throw std::invalid_argument("RingBuffer: capacity must be positive");
  }
  void push(T item) {
    if (items_.size() < capacity_) {
      items_.push_back(std::move(item));
    } else {
      items_[head_] = std::move(item);
      head_ = (head_ + 1) % capacity_;
    }
  }
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  const T& operator[](std::size_t i) const { return items_[(head_ + i) % items_.size()]; }

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;
  std::vector<T> items_;
};

/// Indices of the newest min(batch, size) elements, oldest-first.
template <class T>
std::vector<std::size_t> sample_recent(const RingBuffer<T>& buf, std::size_t batch) {
  const std::size_t take = std::min(batch, buf.size());
  std::vector<std::size_t> idx(take);
  for (std::size_t i = 0; i < take; ++i) idx[i] = buf.size() - take + i;
  return idx;
}

/// A uniformly placed contiguous window of min(batch, size) elements.
template <class T>
std::vector<std::size_t> sample_window(const RingBuffer<T>& buf, std::size_t batch, Rng& rng) {
  const std::size_t take = std::min(batch, buf.size());
  if (take == 0) return {};
  const std::size_t start =
      static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(buf.size() - take)));
  std::vector<std::size_t> idx(take);
  for (std::size_t i = 0; i < take; ++i) idx[i] = start + i;
  return idx;
}

/// min(batch, size) distinct indices, uniform without replacement.
template <class T>
std::vector<std::size_t> sample_uniform(const RingBuffer<T>& buf, std::size_t batch, Rng& rng) {
  const std::size_t n = buf.size();
  const std::size_t take = std::min(batch, n);
  std::vector<std::size_t> pool(n);
  for (std::size_t i = 0; i < n; ++i) pool[i] = i;
  for (std::size_t i = 0; i < take; ++i) {
    const std::size_t j =
        i + static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(n - 1 - i)));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(take);
  return pool;
}

template <class Env>
struct ReplayBuffers {
  explicit ReplayBuffers(std::size_t higher_capacity = 512, std::size_t lower_capacity = 20000)
      : m1(higher_capacity), m2(lower_capacity) {}
  RingBuffer<HigherTransition<Env>> m1;
  RingBuffer<LowerTransition<Env>> m2;
};

struct PolicyConfig {
  bool use_fixed_higher = false;
  std::vector<int> fixed_allocation;  // required when use_fixed_higher
  double eps1 = 0.0;
  double eps2 = 0.0;
  bool lower_option_numeric = false;  // feed remaining count instead of 0/1
};

/// Greedy argmax with ties to the lowest index.
inline int argmax_ties_low(const std::vector<double>& v) {
  if (v.empty()) throw std::invalid_argument("argmax_ties_low: empty input");
  int best = 0;
  for (int i = 1; i < static_cast<int>(v.size()); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

/**
 * Runs one episode. Per step: the higher layer grants a budget (fixed
 * allocation or eps1-greedy over 0..min(remaining budget, feasible nodes)),
 * then the lower layer picks that many nodes one at a time (eps2-greedy,
 * masking nodes already picked this step and environment-invalid ones), and
 * the whole selection executes as a single environment step.
 */
template <class Env>
EpisodeTrace<Env> run_episode(const Env& env, const HigherNet& higher, ParamStore& higher_params,
                              const LowerNet& lower, ParamStore& lower_params,
                              const PolicyConfig& cfg, std::uint64_t seed) {
  if (cfg.eps1 < 0 || cfg.eps1 > 1 || cfg.eps2 < 0 || cfg.eps2 > 1)
    throw std::invalid_argument("run_episode: exploration rates must lie in [0,1]");
  if (cfg.use_fixed_higher &&
      static_cast<int>(cfg.fixed_allocation.size()) != env.horizon())
    throw std::invalid_argument("run_episode: fixed allocation must cover the horizon");

  Rng explore(derive_seed(seed, {0}));
  EpisodeTrace<Env> trace;
  typename Env::State state = env.initial_state(derive_seed(seed, {1}));
  const int n = env.num_nodes();

  for (int t = 1; state.steps_left > 0; ++t) {
    const std::vector<char> env_mask = env.invalid_mask(state);
    int feasible = 0;
    for (char m : env_mask)
      if (!m) ++feasible;
    const int cap = std::min(state.budget_left, feasible);

    int option = 0;
    if (cfg.use_fixed_higher) {
      option = std::min(cfg.fixed_allocation[t - 1], cap);
    } else if (cap > 0) {
      if (bernoulli(explore, cfg.eps1)) {
        option = uniform_int(explore, 0, cap);
      } else {
        std::vector<double> option_inputs(cap + 1);
        for (int o = 0; o <= cap; ++o) option_inputs[o] = o;
        option = argmax_ties_low(higher.q_options(higher_params, env.view(state), option_inputs));
      }
    }

    typename Env::State sel_state = state;
    std::vector<char> mask = env_mask;
    std::vector<int> actions;
    for (int k = 1; k <= option; ++k) {
      std::vector<int> open;
      for (int v = 0; v < n; ++v)
        if (!mask[v]) open.push_back(v);
      if (open.empty()) break;
      int chosen;
      if (bernoulli(explore, cfg.eps2)) {
        chosen = open[uniform_int(explore, 0, static_cast<int>(open.size()) - 1)];
      } else {
        const double opt_in = cfg.lower_option_numeric ? option - k + 1 : 1.0;
        std::vector<double> q = lower.q_all(lower_params, env.view(sel_state), opt_in);
        q.resize(n);  // the null action is not available while selections remain
        chosen = masked_argmax(q, mask);
      }
      actions.push_back(chosen);
      env.apply_selection(sel_state, chosen);
      mask = env.invalid_mask(sel_state);
      for (int a : actions) mask[a] = 1;
    }

    typename Env::Outcome out = env.step(state, actions, derive_seed(seed, {2, static_cast<std::uint64_t>(t)}));
    trace.steps.push_back({state, option, actions, out.reward});
    state = std::move(out.next);
  }
  trace.final_state = std::move(state);
  return trace;
}

/**
 * Per-action marginal rewards for an ordered selection: m_j = R(s, first j
 * actions) - R(s, first j-1), where R averages the one-step reward over
 * n_sims simulations sharing seeds across prefixes (common random numbers).
 * Deterministic-reward environments collapse to a single simulation.
 */
template <class Env>
std::vector<double> marginal_rewards(const Env& env, const typename Env::State& s,
                                     const std::vector<int>& actions, int n_sims,
                                     std::uint64_t seed) {
  if (actions.empty()) return {};
  if (n_sims < 1) throw std::invalid_argument("marginal_rewards: n_sims must be >= 1");
  const int sims = Env::kStochasticReward ? n_sims : 1;
  std::vector<std::uint64_t> sim_seeds(sims);
  for (int i = 0; i < sims; ++i) sim_seeds[i] = derive_seed(seed, {static_cast<std::uint64_t>(i)});

  auto mean_reward = [&](const std::vector<int>& prefix) {
    double total = 0.0;
    for (std::uint64_t ss : sim_seeds) total += env.step(s, prefix, ss).reward;
    return total / sims;
  };

  std::vector<double> marginals(actions.size());
  std::vector<int> prefix;
  double prev = mean_reward(prefix);
  for (std::size_t j = 0; j < actions.size(); ++j) {
    prefix.push_back(actions[j]);
    const double cur = mean_reward(prefix);
    marginals[j] = cur - prev;
    prev = cur;
  }
  return marginals;
}

/**
 * Distributes (r_step - r_null) across the selections proportionally to their
 * marginals, so the lower layer's per-step mass plus the null share equals the
 * higher layer's reward. Negative marginals clamp to zero (simulation noise
 * must not flip reward signs); an all-zero mass falls back to an equal split.
 */
inline std::vector<double> scale_rewards(const std::vector<double>& marginals, double r_step,
                                         double r_null) {
  if (marginals.empty()) throw std::invalid_argument("scale_rewards: need at least one action");
  std::vector<double> w(marginals.size());
  double mass = 0.0;
  for (std::size_t i = 0; i < marginals.size(); ++i) {
    w[i] = std::max(0.0, marginals[i]);
    mass += w[i];
  }
  const double pool = r_step - r_null;
  std::vector<double> out(marginals.size());
  for (std::size_t i = 0; i < marginals.size(); ++i)
    out[i] = mass > 0.0 ? w[i] / mass * pool : pool / static_cast<double>(marginals.size());
  return out;
}

struct StoreConfig {
  double gamma = 0.99;
  int n_sims = 10;
  /// Default gain: sum_i gamma^(i-t) r_i from the transition's own step. The
  /// literal variant weights by gamma^(i-1) from episode start instead.
  bool gain_exponent_literal = false;
};

/**
 * Unrolls an episode into both replay buffers: per step one higher transition
 * with its Monte-Carlo gain, then one lower transition per selected node
 * (marginal-scaled rewards, sub-state chain) or a single null transition
 * carrying the environment share when nothing was selected. The last lower
 * transition of each step points at the next step's start state.
 */
template <class Env>
void store_transitions(const std::shared_ptr<const Env>& env, const EpisodeTrace<Env>& trace,
                       ReplayBuffers<Env>& buffers, const StoreConfig& cfg, std::uint64_t seed,
                       int episode_id) {
  const int T = static_cast<int>(trace.steps.size());
  std::vector<double> gain(T + 1, 0.0);
  for (int t = T - 1; t >= 0; --t) {
    const double w = cfg.gain_exponent_literal ? std::pow(cfg.gamma, t) : 1.0;
    gain[t] = w * trace.steps[t].reward +
              (cfg.gain_exponent_literal ? gain[t + 1] : cfg.gamma * gain[t + 1]);
  }

  for (int t = 0; t < T; ++t) {
    const EpisodeStep<Env>& step = trace.steps[t];
    buffers.m1.push(HigherTransition<Env>{env, step.state, step.option, gain[t], episode_id, t + 1});

    const bool last_step = t + 1 == T;
    const typename Env::State& boundary_state =
        last_step ? trace.final_state : trace.steps[t + 1].state;
    const int next_option = last_step ? 0 : trace.steps[t + 1].option;
    const double r_null = env->null_share(step.state, step.actions, step.reward);

    if (step.actions.empty()) {
      buffers.m2.push(LowerTransition<Env>{env, step.state, 0, kNullAction, r_null, boundary_state,
                                           0, next_option, last_step});
      continue;
    }

    const std::vector<double> marginals = marginal_rewards(
        *env, step.state, step.actions, cfg.n_sims, derive_seed(seed, {static_cast<std::uint64_t>(t)}));
    const std::vector<double> scaled = scale_rewards(marginals, step.reward, r_null);

    const int k_total = static_cast<int>(step.actions.size());
    typename Env::State sub = step.state;
    for (int j = 0; j < k_total; ++j) {
      typename Env::State next_sub = sub;
      env->apply_selection(next_sub, step.actions[j]);
      const bool boundary = j + 1 == k_total;
      buffers.m2.push(LowerTransition<Env>{env, sub, k_total - j, step.actions[j], scaled[j],
                                           boundary ? boundary_state : next_sub,
                                           k_total - j - 1, next_option,
                                           boundary && last_step});
      sub = std::move(next_sub);
    }
  }
}

}  // namespace wsopt
