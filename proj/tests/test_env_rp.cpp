#include <cmath>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "wsopt/env_rp.hpp"
#include "wsopt/rng.hpp"

using namespace wsopt;

namespace {

RpEnv::Config base_cfg() {
  RpEnv::Config c;
  c.horizon = 3;
  c.budget = 3;
  return c;
}

EuclideanGraph square() {
  return EuclideanGraph({{0.0, 0.0}, {10.0, 0.0}, {10.0, 10.0}, {0.0, 10.0}});
}

}  // namespace

TEST_SUITE("env-rp") {

TEST_CASE("constructor validation") {
  RpEnv::Config c = base_cfg();
  c.horizon = 0;
  CHECK_THROWS_AS(RpEnv(square(), c), std::invalid_argument);
  c = base_cfg();
  c.budget = -1;
  CHECK_THROWS_AS(RpEnv(square(), c), std::invalid_argument);
  c = base_cfg();
  c.start_city = 4;
  CHECK_THROWS_AS(RpEnv(square(), c), std::invalid_argument);
  c = base_cfg();
  c.profit_lo = 2.0;  // > profit_hi
  CHECK_THROWS_AS(RpEnv(square(), c), std::invalid_argument);
  c = base_cfg();
  c.drift = -0.5;
  CHECK_THROWS_AS(RpEnv(square(), c), std::invalid_argument);
  CHECK_THROWS_AS(RpEnv(EuclideanGraph(std::vector<std::pair<double, double>>{}), base_cfg()),
                  std::invalid_argument);
}

TEST_CASE("initial profits are uniform in [lo,hi] and the start is visited") {
  RpEnv env(square(), base_cfg());
  const auto s = env.initial_state(42);
  CHECK(s.current == 0);
  CHECK(s.visited == std::vector<char>{1, 0, 0, 0});
  CHECK(s.profit[0] == 0.0);
  for (int i = 1; i < 4; ++i) {
    REQUIRE(s.profit[i] >= 0.5);
    REQUIRE(s.profit[i] <= 1.0);
  }
  CHECK(s.budget_left == 3);
  CHECK(s.steps_left == 3);

  // distribution check: mean of U(0.5, 1) is 0.75
  RpEnv::Config big = base_cfg();
  RpEnv env1(square(), big);
  double total = 0.0;
  const int reps = 100000;
  for (int i = 0; i < reps; ++i) {
    const auto st = env1.initial_state(derive_seed(5, {static_cast<std::uint64_t>(i)}));
    total += st.profit[1] + st.profit[2] + st.profit[3];
  }
  CHECK(std::abs(total / (3.0 * reps) - 0.75) < 0.005);
}

TEST_CASE("combined profit applies the quadratic crowding discount") {
  RpEnv env(square(), base_cfg());
  auto s = env.initial_state(1);
  s.profit = {0.0, 0.8, 0.6, 0.9};

  CHECK(env.combined_profit(s, {}) == doctest::Approx(0.0));
  CHECK(env.combined_profit(s, {1}) == doctest::Approx(0.8));
  CHECK(env.combined_profit(s, {1, 2}) == doctest::Approx(0.8 + 0.6 - 0.1));
  CHECK(env.combined_profit(s, {1, 2, 3}) == doctest::Approx(0.8 + 0.6 + 0.9 - 0.1 * 4.0));
}

TEST_CASE("path length follows the visit order") {
  RpEnv env(square(), base_cfg());
  const auto s = env.initial_state(1);  // current = 0
  CHECK(env.path_length(s, {1}, false) == doctest::Approx(10.0));
  CHECK(env.path_length(s, {1}, true) == doctest::Approx(20.0));
  CHECK(env.path_length(s, {1, 2}, false) == doctest::Approx(20.0));
  CHECK(env.path_length(s, {1, 2}, true) == doctest::Approx(20.0 + std::sqrt(200.0)));
  CHECK(env.path_length(s, {2, 1}, false) == doctest::Approx(std::sqrt(200.0) + 10.0));
  CHECK(env.path_length(s, {}, true) == doctest::Approx(0.0));
}

TEST_CASE("day reward charges exactly the overrun beyond d_max") {
  // line: cities at 0, 1, 4; max distance 4 -> d_max = 6 with factor 1.5.
  // day path 0 -> c2(4) -> c1(1) -> back to 0 = 4 + 3 + 1 = 8, overrun 2.
  RpEnv::Config c = base_cfg();
  c.horizon = 1;
  c.budget = 2;
  c.eta = 0.0;
  c.penalty_coef = 5.0;
  c.dmax_factor = 1.5;
  RpEnv env(EuclideanGraph({{0.0, 0.0}, {1.0, 0.0}, {4.0, 0.0}}), c);
  auto s = env.initial_state(3);
  s.profit = {0.0, 0.5, 0.5};

  CHECK(env.d_max() == doctest::Approx(6.0));
  CHECK(env.path_length(s, {2, 1}, true) == doctest::Approx(8.0));
  // profits 1.0 minus penalty 5 * 2 = 10
  CHECK(env.day_reward(s, {2, 1}) == doctest::Approx(1.0 - 10.0));
  // the shorter order stays within d_max: 1 + 3 + 4 = 8 ... also over, but
  // visiting just the near city is free of penalty: 0 -> 1 -> 0 = 2 <= 6
  CHECK(env.day_reward(s, {1}) == doctest::Approx(0.5));
}

TEST_CASE("day reward validates the city list") {
  RpEnv env(square(), base_cfg());
  auto s = env.initial_state(7);
  CHECK_THROWS_AS(env.day_reward(s, {0}), std::invalid_argument);     // visited
  CHECK_THROWS_AS(env.day_reward(s, {1, 1}), std::invalid_argument);  // duplicate
  CHECK_THROWS_AS(env.day_reward(s, {9}), std::invalid_argument);     // range
  CHECK_THROWS_AS(env.day_reward(s, {1, 2, 3, 1}), std::invalid_argument);
  auto tight = s;
  tight.budget_left = 1;
  CHECK_THROWS_AS(env.day_reward(tight, {1, 2}), std::invalid_argument);  // budget
}

TEST_CASE("null day earns zero") {
  RpEnv env(square(), base_cfg());
  auto s = env.initial_state(11);
  CHECK(env.day_reward(s, {}) == doctest::Approx(0.0));
  const auto out = env.step(s, {}, 12);
  CHECK(out.reward == doctest::Approx(0.0));
  CHECK(out.next.steps_left == 2);
  CHECK(out.next.budget_left == 3);
  CHECK(out.next.current == 0);
}

TEST_CASE("return leg applies on the last day or every day when configured") {
  RpEnv env(square(), base_cfg());
  auto s = env.initial_state(2);
  s.profit = {0.0, 1.0, 1.0, 1.0};
  CHECK(s.steps_left == 3);
  // not the last day: no return leg in the reward and current moves
  const double r_mid = env.day_reward(s, {1});
  CHECK(r_mid == doctest::Approx(1.0));  // 10 <= d_max = 1.5 * sqrt(200)
  auto mid = env.step(s, {1}, 5).next;
  CHECK(mid.current == 1);

  auto last = s;
  last.steps_left = 1;
  const double r_last = env.day_reward(last, {1});
  CHECK(r_last == doctest::Approx(1.0));  // 20 <= 21.2
  auto done = env.step(last, {1}, 6);
  CHECK(done.next.current == 0);  // returned to start
  CHECK(env.terminal(done.next));

  RpEnv::Config every = base_cfg();
  every.return_leg_every_day = true;
  RpEnv env2(square(), every);
  auto s2 = env2.initial_state(2);
  const auto out2 = env2.step(s2, {1}, 7);
  CHECK(out2.next.current == 0);  // home every night
}

TEST_CASE("step pins visited profits to zero and drifts the rest") {
  RpEnv::Config c = base_cfg();
  c.drift = 0.05;
  RpEnv env(square(), c);
  auto s = env.initial_state(21);
  const auto before = s.profit;
  const auto out = env.step(s, {1, 2}, 31);

  CHECK(out.next.visited == std::vector<char>{1, 1, 1, 0});
  CHECK(out.next.profit[1] == 0.0);
  CHECK(out.next.profit[2] == 0.0);
  CHECK(out.next.profit[3] >= 0.0);
  CHECK(std::abs(out.next.profit[3] - before[3]) <= 0.05 + 1e-12);
  CHECK(out.next.budget_left == 1);
  CHECK(out.next.current == 2);

  // drift is clamped at zero from below
  auto low = s;
  low.profit = {0.0, 0.01, 0.01, 0.01};
  for (int i = 0; i < 200; ++i) {
    const auto o = env.step(low, {}, derive_seed(9, {static_cast<std::uint64_t>(i)}));
    for (double p : o.next.profit) REQUIRE(p >= 0.0);
  }
}

TEST_CASE("apply_selection advances the selection sub-state") {
  RpEnv env(square(), base_cfg());
  auto s = env.initial_state(13);
  env.apply_selection(s, 1);
  CHECK(s.current == 1);
  CHECK(s.visited[1] == 1);
  CHECK(s.budget_left == 2);
  CHECK(s.profit[1] == 0.0);  // consumed immediately so the next view sees it

  CHECK_THROWS_AS(env.apply_selection(s, 1), std::invalid_argument);  // revisit
  CHECK_THROWS_AS(env.apply_selection(s, 9), std::invalid_argument);
  auto broke = s;
  broke.budget_left = 0;
  CHECK_THROWS_AS(env.apply_selection(broke, 2), std::invalid_argument);
}

TEST_CASE("masks flag visited cities both ways") {
  RpEnv env(square(), base_cfg());
  auto s = env.initial_state(1);
  s.visited = {1, 0, 1, 0};
  CHECK(env.invalid_mask(s) == std::vector<char>{1, 0, 1, 0});
  CHECK(env.ineffective_mask(s) == env.invalid_mask(s));
}

TEST_CASE("view encodes coordinates, profits and rover position") {
  RpEnv::Config c = base_cfg();
  c.coord_scale = 100.0;
  RpEnv env(square(), c);
  auto s = env.initial_state(17);
  s.profit = {0.0, 0.6, 0.7, 0.8};
  auto mid = env.step(s, {2}, 3).next;
  const StateView v = env.view(mid);

  REQUIRE(v.features.rows == 4);
  REQUIRE(v.features.cols == 5);
  CHECK(v.graph == nullptr);
  CHECK(v.current == 2);
  CHECK(v.start == 0);

  CHECK(v.features.at(1, 0) == doctest::Approx(0.1));  // x/scale
  CHECK(v.features.at(2, 1) == doctest::Approx(0.1));  // y/scale
  CHECK(v.features.at(3, 2) == doctest::Approx(mid.profit[3]));
  CHECK(v.features.at(2, 3) == 1.0);  // current marker
  CHECK(v.features.at(0, 4) == 1.0);  // start marker
  CHECK(v.features.at(1, 3) == 0.0);

  CHECK(v.globals[0] == doctest::Approx(2.0 / 3.0));
  CHECK(v.globals[1] == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("null share is always zero") {
  RpEnv env(square(), base_cfg());
  const auto s = env.initial_state(1);
  CHECK(env.null_share(s, {1, 2}, 5.0) == 0.0);
  CHECK(env.null_share(s, {}, -2.0) == 0.0);
}

TEST_CASE("reward is deterministic given the action (profits known)") {
  RpEnv env(square(), base_cfg());
  auto s = env.initial_state(77);
  const double direct = env.day_reward(s, {1, 2});
  const auto o1 = env.step(s, {1, 2}, 100);
  const auto o2 = env.step(s, {1, 2}, 999);  // different seed, same reward
  CHECK(o1.reward == doctest::Approx(direct));
  CHECK(o2.reward == doctest::Approx(direct));
  CHECK_FALSE(RpEnv::kStochasticReward);
}

}  // TEST_SUITE
