#include <gtest/gtest.h>

#include "dss/agents.hpp"
#include "dss/evaluation.hpp"

using namespace dss;

TEST(NearestAction, TiesPreferMoreLte) {
  const auto a3 = action_space(3, 25);
  EXPECT_EQ(nearest_action(a3, 6.25), 0);
  EXPECT_EQ(nearest_action(a3, 6.5), 1);
  EXPECT_EQ(nearest_action(a3, 19.0), 2);
  EXPECT_EQ(nearest_action(action_space(2, 25), 12.5), 1);
  EXPECT_EQ(nearest_action(action_space(4, 25), 12.5), 2);
}

TEST(Proportional, FirstSubframeOfScenario1) {
  // Demand: LTE 15 PRBs, NR 45 PRBs -> LTE share 25 * 15/60 = 6.25 -> 0 PRBs.
  Environment env(build_scenario(1));
  const auto d = prb_demand(env.pending_state());
  EXPECT_EQ(d.lte, 15);
  EXPECT_EQ(d.nr, 45);
  ProportionalAgent agent;
  EXPECT_EQ(agent.act(env), 0);
}

TEST(Proportional, NoDemandPicksFirstAction) {
  Environment env(build_scenario(3));  // nothing arrives at p = 0
  ProportionalAgent agent;
  EXPECT_EQ(agent.act(env), 0);
}

TEST(Proportional, LteOnlyDemandTakesWholeBand) {
  ScenarioConfig s = build_scenario(1);
  s.users[0].packet_bits = 0;
  Environment env(s);
  ProportionalAgent agent;
  EXPECT_EQ(agent.act(env), 2);
}

TEST(EqualSplit, MiddleAction) {
  EqualSplitAgent agent;
  EXPECT_EQ(agent.act(Environment(build_scenario(1))), 1);
  EXPECT_EQ(Environment(build_scenario(1)).actions()[1].lte_prbs, 13);
  EXPECT_EQ(agent.act(Environment(build_scenario(2))), 1);
}

TEST(Alternating, ParityAndPhase) {
  Environment env(build_scenario(4));
  AlternatingAgent nr_first, lte_first(1);
  EXPECT_EQ(nr_first.name(), "alternating");
  EXPECT_EQ(lte_first.name(), "alternating-lte-first");
  std::vector<int> a, b;
  while (!env.done()) {
    a.push_back(nr_first.act(env));
    b.push_back(lte_first.act(env));
    env.step(a.back());
  }
  for (std::size_t p = 0; p < a.size(); ++p) {
    EXPECT_EQ(a[p], p % 2 == 0 ? 0 : 2);
    EXPECT_EQ(b[p], p % 2 == 0 ? 2 : 0);
  }
}

TEST(Scripted, RepeatsLastAction) {
  ScriptedAgent agent("s", {2, 1});
  const auto r = run_episode(agent, Environment(build_scenario(1)));
  ASSERT_EQ(r.actions.size(), 16u);
  EXPECT_EQ(r.actions[0], 2);
  for (std::size_t p = 1; p < 16; ++p) EXPECT_EQ(r.actions[p], 1);
}

TEST(Evaluation, ScoresAreRewardSums) {
  EqualSplitAgent agent;
  const auto r = run_episode(agent, Environment(build_scenario(2)));
  double sum = 0.0;
  for (double x : r.rewards) sum += x;
  EXPECT_DOUBLE_EQ(r.score, sum);
  EXPECT_LE(r.score, 16.0);
  const auto st = evaluate_agent(agent, build_scenario(2), {0, 1, 2});
  EXPECT_EQ(st.scores.size(), 3u);
  EXPECT_DOUBLE_EQ(st.median, r.score);  // deterministic without fading
}

TEST(Evaluation, Median) {
  EXPECT_EQ(median({3.0, 1.0, 2.0}), 2.0);
  EXPECT_EQ(median({4.0, 1.0, 2.0, 3.0}), 2.5);
  EXPECT_TRUE(std::isnan(median({})));
}
