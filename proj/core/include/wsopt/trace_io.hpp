#pragma once

#include <ostream>
#include <string>

#include "json.hpp"
#include "wsopt/env_aim.hpp"
#include "wsopt/env_rp.hpp"
#include "wsopt/hrl.hpp"

namespace wsopt {

inline nlohmann::json state_record(const AimEnv::State& s) {
  return {{"node_state", std::vector<int>(s.node_state.begin(), s.node_state.end())},
          {"budget_left", s.budget_left},
          {"steps_left", s.steps_left}};
}

inline nlohmann::json state_record(const RpEnv::State& s) {
  return {{"profit", s.profit},
          {"visited", std::vector<int>(s.visited.begin(), s.visited.end())},
          {"current", s.current},
          {"budget_left", s.budget_left},
          {"steps_left", s.steps_left}};
}

/// One JSON object per line: steps first (state/option/actions/reward), then a
/// closing record with the final state and episode total.
template <class Env>
void write_trace_jsonl(const EpisodeTrace<Env>& trace, std::ostream& os) {
  int t = 1;
  for (const auto& step : trace.steps) {
    nlohmann::json row = {{"step", t++},
                          {"state", state_record(step.state)},
                          {"option", step.option},
                          {"actions", step.actions},
                          {"reward", step.reward}};
    os << row.dump() << "\n";
  }
  nlohmann::json tail = {{"final_state", state_record(trace.final_state)},
                         {"total_reward", trace.total_reward()}};
  os << tail.dump() << "\n";
}

}  // namespace wsopt
