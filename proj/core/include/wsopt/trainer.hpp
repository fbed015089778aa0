#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <memory>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "wsopt/baselines.hpp"
#include "wsopt/hrl.hpp"
#include "wsopt/nets.hpp"

namespace wsopt {

struct TrainConfig {
  int epochs = 20;
  int episodes_per_epoch = 10;
  double sleep_fraction = 0.5;
  double gamma = 0.99;
  double lr_high = 1e-3;
  double lr_low = 1e-4;
  int batch = 32;
  int target_sync_every = 10;
  double eps0 = 0.9;
  double eps_decay = 0.98;
  double eps_floor = 0.1;
  double eps1_override = -1.0;  // >= 0 pins the higher-layer exploration rate
  double eps2_override = -1.0;
  int updates_per_pass = 8;  // gradient steps per layer per epoch
  int n_sims = 10;
  bool gain_exponent_literal = false;
  bool lower_option_numeric = false;
  double grad_clip = 10.0;
  int m1_capacity = 512;
  int m2_capacity = 20000;
  std::uint64_t seed = 1;

  void validate() const {
    if (epochs < 1 || episodes_per_epoch < 1) throw std::invalid_argument("TrainConfig: need epochs, episodes >= 1");
    if (sleep_fraction <= 0.0 || sleep_fraction >= 1.0)
      throw std::invalid_argument("TrainConfig: sleep fraction must lie in (0,1)");
    if (gamma < 0.0 || gamma > 1.0) throw std::invalid_argument("TrainConfig: gamma must lie in [0,1]");
    if (lr_high <= 0.0 || lr_low <= 0.0) throw std::invalid_argument("TrainConfig: learning rates must be positive");
    if (batch < 1 || updates_per_pass < 1 || n_sims < 1)
      throw std::invalid_argument("TrainConfig: batch, updates and simulations must be >= 1");
    if (target_sync_every < 1) throw std::invalid_argument("TrainConfig: target sync period must be >= 1");
    if (eps0 < 0 || eps0 > 1 || eps_decay <= 0 || eps_decay > 1 || eps_floor < 0 || eps_floor > 1)
      throw std::invalid_argument("TrainConfig: epsilon schedule out of range");
    if (m1_capacity < 1 || m2_capacity < 1) throw std::invalid_argument("TrainConfig: buffer capacities must be >= 1");
    if (grad_clip <= 0.0) throw std::invalid_argument("TrainConfig: gradient clip must be positive");
  }
};

/// Exploration rate after k completed training passes.
inline double epsilon_at(const TrainConfig& cfg, int passes) {
  return std::max(cfg.eps_floor, cfg.eps0 * std::pow(cfg.eps_decay, passes));
}

/// Number of leading epochs that run with the fixed average allocation.
inline int sleep_epochs(const TrainConfig& cfg) {
  return static_cast<int>(std::ceil(cfg.sleep_fraction * cfg.epochs - 1e-12));
}

/// Hard copy every `every`-th episode (1-based counter), otherwise a no-op.
inline void sync_target(const ParamStore& online, ParamStore& target, int episode_counter,
                        int every) {
  if (every > 0 && episode_counter % every == 0) target.copy_values_from(online);
}

struct MetricsRow {
  int epoch = 0;
  int episode = 0;
  double cumulative_reward = 0.0;
  double eps = 0.0;
  double loss_high = std::numeric_limits<double>::quiet_NaN();
  double loss_low = std::numeric_limits<double>::quiet_NaN();
};

inline void write_metrics_csv(const std::vector<MetricsRow>& rows, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("write_metrics_csv: cannot open " + path);
  os << "epoch,episode,cumulative_reward,eps,loss_high,loss_low\n";
  os << std::setprecision(17);
  for (const auto& r : rows)
    os << r.epoch << ',' << r.episode << ',' << r.cumulative_reward << ',' << r.eps << ','
       << r.loss_high << ',' << r.loss_low << '\n';
}

/// One MSE regression step of q^I(s, o) onto the Monte-Carlo gains.
template <class Env>
double mc_update_higher(const HigherNet& higher, ParamStore& params,
                        const RingBuffer<HigherTransition<Env>>& m1,
                        const std::vector<std::size_t>& idx, double lr, double grad_clip) {
  if (idx.empty()) throw std::invalid_argument("mc_update_higher: empty batch");
  Tape tape(&params);
  Tape::Id loss = -1;
  for (std::size_t i : idx) {
    const HigherTransition<Env>& tr = m1[i];
    Tape::Id q = higher.q_node(tape, tr.env->view(tr.state), tr.option);
    Tape::Id d = tape.sub(q, tape.constant(Tensor(1, 1, {tr.gain})));
    Tape::Id sq = tape.mul(d, d);
    loss = loss < 0 ? sq : tape.add(loss, sq);
  }
  loss = tape.scale(loss, 1.0 / static_cast<double>(idx.size()));
  params.zero_grad();
  tape.backward(loss);
  params.clip_gradients(grad_clip);
  params.adam_step(lr);
  const double value = tape.value(loss).at(0, 0);
  if (!std::isfinite(value) || !params.all_finite())
    throw std::runtime_error("mc_update_higher: non-finite update");
  return value;
}

/**
 * One double-Q TD step for the lower layer. Targets: r alone at episode end;
 * r + gamma * target-net Q at the online argmax over still-selectable nodes
 * while the step continues; r + gamma * q^I(s_{t+1}, o_{t+1}) from the online
 * higher net at a step boundary.
 */
template <class Env>
double td_update_lower(const LowerNet& lower, const HigherNet& higher, ParamStore& lower_params,
                       ParamStore& target_params, ParamStore& higher_params,
                       const RingBuffer<LowerTransition<Env>>& m2,
                       const std::vector<std::size_t>& idx, double gamma, double lr,
                       double grad_clip, bool option_numeric) {
  if (idx.empty()) throw std::invalid_argument("td_update_lower: empty batch");

  std::vector<double> targets;
  targets.reserve(idx.size());
  for (std::size_t i : idx) {
    const LowerTransition<Env>& tr = m2[i];
    double y = tr.reward;
    if (!tr.terminal) {
      if (tr.next_remaining >= 1) {
        const StateView nv = tr.env->view(tr.next_state);
        const double opt_in = option_numeric ? static_cast<double>(tr.next_remaining) : 1.0;
        const int n = tr.env->num_nodes();
        std::vector<double> q_online = lower.q_all(lower_params, nv, opt_in);
        q_online.resize(n);
        std::vector<char> mask = tr.env->ineffective_mask(tr.next_state);
        bool any_open = false;
        for (char m : mask)
          if (!m) any_open = true;
        if (!any_open) mask.assign(n, 0);  // everything is spent; fall back to unmasked
        const int a_star = masked_argmax(q_online, mask);
        const std::vector<double> q_target = lower.q_all(target_params, nv, opt_in);
        y += gamma * q_target[a_star];
      } else {
        const double q1 = higher.q_options(higher_params, tr.env->view(tr.next_state),
                                           {static_cast<double>(tr.next_higher_option)})[0];
        y += gamma * q1;
      }
    }
    targets.push_back(y);
  }

  Tape tape(&lower_params);
  Tape::Id loss = -1;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const LowerTransition<Env>& tr = m2[idx[k]];
    const int n = tr.env->num_nodes();
    const int action_index = tr.action == kNullAction ? n : tr.action;
    const double opt_in = option_numeric ? static_cast<double>(tr.remaining)
                                         : (tr.remaining > 0 ? 1.0 : 0.0);
    Tape::Id q = lower.q_action(tape, tr.env->view(tr.state), opt_in, action_index);
    Tape::Id d = tape.sub(q, tape.constant(Tensor(1, 1, {targets[k]})));
    Tape::Id sq = tape.mul(d, d);
    loss = loss < 0 ? sq : tape.add(loss, sq);
  }
  loss = tape.scale(loss, 1.0 / static_cast<double>(idx.size()));
  lower_params.zero_grad();
  tape.backward(loss);
  lower_params.clip_gradients(grad_clip);
  lower_params.adam_step(lr);
  const double value = tape.value(loss).at(0, 0);
  if (!std::isfinite(value) || !lower_params.all_finite())
    throw std::runtime_error("td_update_lower: non-finite update");
  return value;
}

struct TrainResult {
  ParamStore higher_params;
  ParamStore lower_params;
  ParamStore lower_target;
  std::vector<MetricsRow> metrics;
};

/**
 * Wake-sleep training. Sleep epochs (the leading ceil(sleep_fraction * N))
 * act with the fixed average allocation while both layers keep learning from
 * the produced trajectories; wake epochs switch the higher layer to eps-greedy
 * control. Per epoch: sample an environment, run M episodes, store their
 * transitions, then run `updates_per_pass` gradient steps per layer — the
 * higher layer regresses on sequential recent slices of M1, the lower layer on
 * uniform draws from M2. Epsilon decays once per pass. Deterministic given
 * (config, nets); checkpoints land in checkpoint_dir when provided.
 */
template <class Env>
TrainResult train(const HigherNet& higher, const LowerNet& lower,
                  const std::function<std::shared_ptr<const Env>(std::uint64_t)>& env_factory,
                  const TrainConfig& cfg, const std::string& checkpoint_dir = "",
                  std::ostream* log = nullptr) {
  cfg.validate();
  Rng init_rng(derive_seed(cfg.seed, {100}));
  TrainResult out;
  higher.init_params(out.higher_params, init_rng);
  lower.init_params(out.lower_params, init_rng);
  out.lower_target = out.lower_params;

  ReplayBuffers<Env> buffers(cfg.m1_capacity, cfg.m2_capacity);
  Rng sample_rng(derive_seed(cfg.seed, {101}));
  const int n_sleep = sleep_epochs(cfg);
  int global_episode = 0;
  int passes = 0;

  auto checkpoint = [&](const std::string& tag) {
    if (checkpoint_dir.empty()) return;
    save_checkpoint(out.higher_params, higher.spec().topology_id(),
                    checkpoint_dir + "/" + tag + "_higher.ck");
    save_checkpoint(out.lower_params, lower.spec().topology_id(),
                    checkpoint_dir + "/" + tag + "_lower.ck");
  };

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shared_ptr<const Env> env =
        env_factory(derive_seed(cfg.seed, {1, static_cast<std::uint64_t>(epoch)}));
    const double eps = epsilon_at(cfg, passes);
    PolicyConfig pc;
    pc.use_fixed_higher = epoch <= n_sleep;
    pc.fixed_allocation = allocate({BudgetKind::average, 2}, env->budget(), env->horizon());
    pc.eps1 = cfg.eps1_override >= 0 ? cfg.eps1_override : eps;
    pc.eps2 = cfg.eps2_override >= 0 ? cfg.eps2_override : eps;
    pc.lower_option_numeric = cfg.lower_option_numeric;

    const std::size_t first_row = out.metrics.size();
    for (int j = 1; j <= cfg.episodes_per_epoch; ++j) {
      EpisodeTrace<Env> trace = run_episode(
          *env, higher, out.higher_params, lower, out.lower_params, pc,
          derive_seed(cfg.seed, {2, static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(j)}));
      store_transitions(env, trace, buffers, StoreConfig{cfg.gamma, cfg.n_sims, cfg.gain_exponent_literal},
                        derive_seed(cfg.seed, {3, static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(j)}),
                        global_episode);
      ++global_episode;
      sync_target(out.lower_params, out.lower_target, global_episode, cfg.target_sync_every);
      out.metrics.push_back(MetricsRow{epoch, global_episode, trace.total_reward(), eps,
                                       std::numeric_limits<double>::quiet_NaN(),
                                       std::numeric_limits<double>::quiet_NaN()});
    }

    double loss_high = std::numeric_limits<double>::quiet_NaN();
    if (buffers.m1.size() > 0) {
      double acc = 0.0;
      for (int u = 0; u < cfg.updates_per_pass; ++u) {
        const auto idx = u == 0 ? sample_recent(buffers.m1, cfg.batch)
                                : sample_window(buffers.m1, cfg.batch, sample_rng);
        acc += mc_update_higher(higher, out.higher_params, buffers.m1, idx, cfg.lr_high,
                                cfg.grad_clip);
      }
      loss_high = acc / cfg.updates_per_pass;
    } else if (log) {
      *log << "epoch " << epoch << ": higher buffer empty, update skipped\n";
    }

    double loss_low = std::numeric_limits<double>::quiet_NaN();
    if (buffers.m2.size() > 0) {
      double acc = 0.0;
      for (int u = 0; u < cfg.updates_per_pass; ++u) {
        const auto idx = sample_uniform(buffers.m2, cfg.batch, sample_rng);
        acc += td_update_lower(lower, higher, out.lower_params, out.lower_target,
                               out.higher_params, buffers.m2, idx, cfg.gamma, cfg.lr_low,
                               cfg.grad_clip, cfg.lower_option_numeric);
      }
      loss_low = acc / cfg.updates_per_pass;
    } else if (log) {
      *log << "epoch " << epoch << ": lower buffer empty, update skipped\n";
    }
    ++passes;

    double epoch_reward = 0.0;
    for (std::size_t r = first_row; r < out.metrics.size(); ++r) {
      out.metrics[r].loss_high = loss_high;
      out.metrics[r].loss_low = loss_low;
      epoch_reward += out.metrics[r].cumulative_reward;
    }
    if (log) {
      *log << "epoch " << epoch << (epoch <= n_sleep ? " (sleep)" : " (wake)")
           << " mean_reward=" << epoch_reward / cfg.episodes_per_epoch << " eps=" << eps
           << " loss_high=" << loss_high << " loss_low=" << loss_low << "\n";
    }

    std::ostringstream tag;
    tag << "epoch_" << std::setw(2) << std::setfill('0') << epoch;
    checkpoint(tag.str());
  }
  checkpoint("final");
  return out;
}

}  // namespace wsopt
