#pragma once

#include <atomic>
#include <fstream>
#include <functional>
#include <iomanip>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "wsopt/baselines.hpp"
#include "wsopt/env_aim.hpp"
#include "wsopt/env_rp.hpp"
#include "wsopt/hrl.hpp"
#include "wsopt/stats.hpp"

namespace wsopt {

inline void parallel_for(int count, int workers, const std::function<void(int)>& fn) {
  workers = std::max(1, std::min(workers, count));
  if (workers == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) fn(i);
    });
  for (auto& th : pool) th.join();
}

/// Episode i draws the same seed for every method, so all methods face the
/// same initial states and environment randomness (paired comparisons).
inline std::uint64_t episode_seed(std::uint64_t master, int i) {
  return derive_seed(master, {0x5e, static_cast<std::uint64_t>(i)});
}

/// Greedy rollouts of a trained two-layer policy (exploration forced to 0).
template <class Env>
std::vector<double> eval_learned(const std::shared_ptr<const Env>& env,
                                 const HigherNet& higher, ParamStore& higher_params,
                                 const LowerNet& lower, ParamStore& lower_params,
                                 PolicyConfig pol, int episodes, std::uint64_t seed,
                                 int workers = 1) {
  pol.eps1 = 0.0;
  pol.eps2 = 0.0;
  std::vector<double> out(static_cast<std::size_t>(episodes), 0.0);
  parallel_for(episodes, workers, [&](int i) {
    out[i] = run_episode(*env, higher, higher_params, lower, lower_params, pol,
                         episode_seed(seed, i))
                 .total_reward();
  });
  return out;
}

enum class AimSelector { degree, score, score_reversed };

inline std::vector<double> eval_aim_heuristic(const std::shared_ptr<const AimEnv>& env,
                                              const BudgetPolicy& policy,
                                              AimSelector sel, int episodes,
                                              std::uint64_t seed, int workers = 1) {
  const std::vector<int> alloc = allocate(policy, env->budget(), env->horizon());
  std::vector<double> out(static_cast<std::size_t>(episodes), 0.0);
  parallel_for(episodes, workers, [&](int i) {
    const std::uint64_t ep = episode_seed(seed, i);
    AimEnv::State state = env->initial_state(derive_seed(ep, {1}));
    double total = 0.0;
    for (int t = 1; state.steps_left > 0; ++t) {
      const int day = env->horizon() - state.steps_left;
      const int k = std::min(alloc[day], state.budget_left);
      const std::vector<int> picks =
          sel == AimSelector::degree
              ? select_degree(*env, state, k)
              : select_score(*env, state, k, sel == AimSelector::score_reversed);
      const auto step = env->step(state, picks,
                                  derive_seed(ep, {2, static_cast<std::uint64_t>(t)}));
      total += step.reward;
      state = step.next;
    }
    out[i] = total;
  });
  return out;
}

/// Open-loop plan baselines: the plan is built once from the episode's initial
/// profits and then executed against the drifting environment.
inline std::vector<double> eval_rp_plan(
    const std::shared_ptr<const RpEnv>& env,
    const std::function<RpPlan(const RpEnv&, const RpEnv::State&, std::uint64_t)>& planner,
    int episodes, std::uint64_t seed, int workers = 1) {
  std::vector<double> out(static_cast<std::size_t>(episodes), 0.0);
  parallel_for(episodes, workers, [&](int i) {
    const std::uint64_t ep = episode_seed(seed, i);
    RpEnv::State state = env->initial_state(derive_seed(ep, {1}));
    const RpPlan plan = planner(*env, state, ep);
    double total = 0.0;
    for (int t = 1; state.steps_left > 0; ++t) {
      const int day = env->horizon() - state.steps_left;
      std::vector<int> actions;
      if (day < static_cast<int>(plan.days.size())) actions = plan.days[day];
      const auto step = env->step(state, actions,
                                  derive_seed(ep, {2, static_cast<std::uint64_t>(t)}));
      total += step.reward;
      state = step.next;
    }
    out[i] = total;
  });
  return out;
}

inline RpPlan plan_rp_greedy(const RpEnv& env, const RpEnv::State& s, double lambda) {
  const std::vector<int> alloc =
      allocate({BudgetKind::average, 2}, s.budget_left, s.steps_left);
  return rp_greedy(env, s, alloc, lambda);
}

inline RpPlan plan_rp_ga(const RpEnv& env, const RpEnv::State& s, GaConfig cfg,
                         std::uint64_t ep_seed) {
  cfg.seed = derive_seed(ep_seed, {0x6a});
  return rp_ga(env, s, cfg);
}

struct MethodSamples {
  std::string name;
  std::vector<double> rewards;

  double mean_reward() const { return mean(rewards); }
};

struct EvalReport {
  std::string env_name;
  int n = 0;
  int horizon = 0;
  int budget = 0;
  std::string reference;  // method the t-tests compare against
  std::vector<MethodSamples> methods;

  const MethodSamples* find(const std::string& name) const {
    for (const auto& m : methods)
      if (m.name == name) return &m;
    return nullptr;
  }
};

inline void write_report_csv(const EvalReport& r, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write report: " + path);
  out << "env,n,horizon,budget,method,episodes,mean,t_vs_reference,p_vs_reference,reference\n";
  const MethodSamples* ref = r.find(r.reference);
  out << std::setprecision(12);
  for (const auto& m : r.methods) {
    out << r.env_name << ',' << r.n << ',' << r.horizon << ',' << r.budget << ','
        << m.name << ',' << m.rewards.size() << ',' << m.mean_reward() << ',';
    if (ref && m.rewards.size() >= 2 && ref->rewards.size() >= 2) {
      const WelchResult w = welch_t_test(m.rewards, ref->rewards);
      out << w.t << ',' << w.p_two_sided;
    } else {
      out << ',';
    }
    out << ',' << r.reference << '\n';
  }
}

inline std::string format_report_text(const EvalReport& r) {
  std::ostringstream out;
  out << r.env_name << "  n=" << r.n << "  T=" << r.horizon << "  K=" << r.budget
      << "  (reference: " << r.reference << ")\n";
  out << std::left << std::setw(24) << "method" << std::right << std::setw(12)
      << "mean" << std::setw(12) << "p-value" << '\n';
  const MethodSamples* ref = r.find(r.reference);
  for (const auto& m : r.methods) {
    out << std::left << std::setw(24) << m.name << std::right << std::fixed
        << std::setprecision(4) << std::setw(12) << m.mean_reward();
    out.unsetf(std::ios::fixed);
    if (ref && m.name != r.reference && m.rewards.size() >= 2 &&
        ref->rewards.size() >= 2) {
      const WelchResult w = welch_t_test(m.rewards, ref->rewards);
      out << std::setw(12) << std::setprecision(3) << w.p_two_sided;
    } else {
      out << std::setw(12) << "-";
    }
    out << '\n';
  }
  return out.str();
}

inline const char* aim_selector_name(AimSelector s) {
  switch (s) {
    case AimSelector::degree:
      return "degree";
    case AimSelector::score:
      return "score";
    default:
      return "score-reversed";
  }
}

/// The six allocator x selector heuristics, labeled "average-degree" etc.
inline void add_aim_heuristics(EvalReport& report,
                               const std::shared_ptr<const AimEnv>& env, int episodes,
                               std::uint64_t seed, int workers,
                               bool score_reversed = false) {
  const AimSelector selectors[2] = {
      AimSelector::degree,
      score_reversed ? AimSelector::score_reversed : AimSelector::score};
  for (const BudgetKind kind :
       {BudgetKind::average, BudgetKind::static_cycle, BudgetKind::normal}) {
    for (const AimSelector sel : selectors) {
      const std::string label =
          budget_kind_name(kind) + "-" +
          (sel == AimSelector::degree ? "degree" : "score");
      report.methods.push_back(
          {label, eval_aim_heuristic(env, {kind, 2}, sel, episodes, seed, workers)});
    }
  }
}

/// Full AIM comparison: learned policy (when nets are given) plus the six
/// heuristics, referenced against average-degree.
inline EvalReport aim_report(const std::shared_ptr<const AimEnv>& env,
                             const HigherNet* higher, ParamStore* higher_params,
                             const LowerNet* lower, ParamStore* lower_params,
                             int episodes, std::uint64_t seed, int workers = 1) {
  EvalReport report;
  report.env_name = "aim";
  report.n = env->num_nodes();
  report.horizon = env->horizon();
  report.budget = env->budget();
  report.reference = "average-degree";
  if (higher && lower)
    report.methods.push_back(
        {"ws-option", eval_learned(env, *higher, *higher_params, *lower,
                                   *lower_params, {}, episodes, seed, workers)});
  add_aim_heuristics(report, env, episodes, seed, workers);
  return report;
}

/// RP comparison: learned policy plus single-shot greedy and genetic planners,
/// referenced against greedy.
inline EvalReport rp_report(const std::shared_ptr<const RpEnv>& env,
                            const HigherNet* higher, ParamStore* higher_params,
                            const LowerNet* lower, ParamStore* lower_params,
                            int episodes, std::uint64_t seed, int workers = 1,
                            double greedy_lambda = 0.0, GaConfig ga = {}) {
  EvalReport report;
  report.env_name = "rp";
  report.n = env->num_nodes();
  report.horizon = env->horizon();
  report.budget = env->budget();
  report.reference = "greedy";
  if (higher && lower)
    report.methods.push_back(
        {"ws-option", eval_learned(env, *higher, *higher_params, *lower,
                                   *lower_params, {}, episodes, seed, workers)});
  report.methods.push_back(
      {"greedy", eval_rp_plan(
                     env,
                     [greedy_lambda](const RpEnv& e, const RpEnv::State& s,
                                     std::uint64_t) {
                       return plan_rp_greedy(e, s, greedy_lambda);
                     },
                     episodes, seed, workers)});
  report.methods.push_back(
      {"ga", eval_rp_plan(
                 env,
                 [ga](const RpEnv& e, const RpEnv::State& s, std::uint64_t ep) {
                   return plan_rp_ga(e, s, ga, ep);
                 },
                 episodes, seed, workers)});
  return report;
}

/// Lower layer pinned to the learned selector; allocators swapped out.
template <class Env>
EvalReport isolation_fix_lower(const std::shared_ptr<const Env>& env,
                               const HigherNet& higher, ParamStore& higher_params,
                               const LowerNet& lower, ParamStore& lower_params,
                               int episodes, std::uint64_t seed, int workers = 1) {
  EvalReport report;
  report.env_name = Env::kName;
  report.n = env->num_nodes();
  report.horizon = env->horizon();
  report.budget = env->budget();
  report.reference = "average-allocator";
  const auto with_alloc = [&](const std::string& label, const PolicyConfig& pol) {
    report.methods.push_back(
        {label, eval_learned(env, higher, higher_params, lower, lower_params, pol,
                             episodes, seed, workers)});
  };
  with_alloc("learned-allocator", {});
  for (const BudgetKind kind :
       {BudgetKind::average, BudgetKind::normal, BudgetKind::static_cycle}) {
    PolicyConfig pol;
    pol.use_fixed_higher = true;
    pol.fixed_allocation = allocate({kind, 2}, env->budget(), env->horizon());
    with_alloc(budget_kind_name(kind) + "-allocator", pol);
  }
  return report;
}

/// Higher layer pinned to the average allocation; node selectors swapped out.
inline EvalReport isolation_fix_higher(const std::shared_ptr<const AimEnv>& env,
                                       const HigherNet& higher,
                                       ParamStore& higher_params,
                                       const LowerNet& lower,
                                       ParamStore& lower_params, int episodes,
                                       std::uint64_t seed, int workers = 1) {
  EvalReport report;
  report.env_name = "aim";
  report.n = env->num_nodes();
  report.horizon = env->horizon();
  report.budget = env->budget();
  report.reference = "learned-selector";
  PolicyConfig pol;
  pol.use_fixed_higher = true;
  pol.fixed_allocation =
      allocate({BudgetKind::average, 2}, env->budget(), env->horizon());
  report.methods.push_back(
      {"learned-selector", eval_learned(env, higher, higher_params, lower,
                                        lower_params, pol, episodes, seed, workers)});
  report.methods.push_back(
      {"degree-selector", eval_aim_heuristic(env, {BudgetKind::average, 2},
                                             AimSelector::degree, episodes, seed,
                                             workers)});
  report.methods.push_back(
      {"score-selector", eval_aim_heuristic(env, {BudgetKind::average, 2},
                                            AimSelector::score, episodes, seed,
                                            workers)});
  return report;
}

struct SweepRow {
  int n = 0;
  EvalReport report;
};

/// Evaluates one trained checkpoint across graph sizes without retraining;
/// the encoders share weights across n, so the same stores serve every size.
inline std::vector<SweepRow> generalization_sweep_aim(
    const HigherNet& higher, ParamStore& higher_params, const LowerNet& lower,
    ParamStore& lower_params, double er_p, bool undirected,
    const std::vector<int>& sizes, int horizon, int budget, int episodes,
    std::uint64_t seed, int workers = 1) {
  std::vector<SweepRow> rows;
  for (const int n : sizes) {
    const auto env = std::make_shared<const AimEnv>(
        generate_er(n, er_p, derive_seed(seed, {0x97, static_cast<std::uint64_t>(n)}),
                    undirected),
        horizon, budget);
    rows.push_back({n, aim_report(env, &higher, &higher_params, &lower,
                                  &lower_params, episodes, seed, workers)});
  }
  return rows;
}

/// hist[day][option] over greedy rollouts; feeds the allocation plots.
template <class Env>
std::vector<std::vector<long>> option_histogram(const std::shared_ptr<const Env>& env,
                                                const HigherNet& higher,
                                                ParamStore& higher_params,
                                                const LowerNet& lower,
                                                ParamStore& lower_params,
                                                PolicyConfig pol, int episodes,
                                                std::uint64_t seed) {
  pol.eps1 = 0.0;
  pol.eps2 = 0.0;
  std::vector<std::vector<long>> hist(
      static_cast<std::size_t>(env->horizon()),
      std::vector<long>(static_cast<std::size_t>(env->budget()) + 1, 0));
  for (int i = 0; i < episodes; ++i) {
    const auto trace = run_episode(*env, higher, higher_params, lower, lower_params,
                                   pol, episode_seed(seed, i));
    for (std::size_t day = 0; day < trace.steps.size(); ++day)
      hist[day][trace.steps[day].option] += 1;
  }
  return hist;
}

inline void write_option_histogram_csv(const std::vector<std::vector<long>>& hist,
                                       const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write histogram: " + path);
  out << "day,option,count\n";
  for (std::size_t d = 0; d < hist.size(); ++d)
    for (std::size_t o = 0; o < hist[d].size(); ++o)
      out << d + 1 << ',' << o << ',' << hist[d][o] << '\n';
}

}  // namespace wsopt
