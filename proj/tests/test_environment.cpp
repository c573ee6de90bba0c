#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "dss/agents.hpp"
#include "dss/environment.hpp"
#include "dss/scenario.hpp"

using namespace dss;

namespace {

ScenarioConfig empty_traffic() {
  ScenarioConfig s = build_scenario(3);
  for (auto& u : s.users) u.packet_bits = 0;
  return s;
}

double play(Environment env, const std::vector<int>& actions) {
  double total = 0.0;
  for (int a : actions) total += env.step(a).reward;
  return total;
}

}  // namespace

TEST(UserWeight, Branches) {
  UserConfig u;
  u.weight_slope = 1e-5;
  u.step_delay = 3;
  u.step_weight = 5.0;
  EXPECT_EQ(user_weight(7, u, true), 0.0);
  EXPECT_DOUBLE_EQ(user_weight(2, u, false), 2e-5);
  EXPECT_DOUBLE_EQ(user_weight(3, u, false), 5.00003);
  EXPECT_DOUBLE_EQ(user_weight(0, u, false), 0.0);
}

TEST(SubframeReward, Values) {
  EXPECT_EQ(subframe_reward({0.0, 0.0}), 1.0);
  EXPECT_NEAR(subframe_reward({5.0}), 6.737946999085467e-3, 1e-15);
  EXPECT_NEAR(subframe_reward({0.5, 0.5}), 0.36787944117144233, 1e-15);
}

TEST(WaitingTime, CountsArrivalSubframe) {
  EXPECT_EQ(waiting_time(4, 4), 1);
  EXPECT_EQ(waiting_time(6, 4), 3);
}

TEST(ActionSpace, Quantization) {
  auto lte = [](int n) {
    std::vector<int> v;
    for (const auto& a : action_space(n, 25)) {
      EXPECT_EQ(a.lte_prbs + a.nr_prbs, 25);
      v.push_back(a.lte_prbs);
    }
    return v;
  };
  EXPECT_EQ(lte(2), (std::vector<int>{0, 25}));
  EXPECT_EQ(lte(3), (std::vector<int>{0, 13, 25}));
  EXPECT_EQ(lte(4), (std::vector<int>{0, 8, 17, 25}));
  EXPECT_THROW(action_space(1, 25), ConfigError);
}

TEST(ActionSpace, MatchesRoundHalfUpForManySizes) {
  for (int c = 1; c <= 60; ++c)
    for (int n = 2; n <= 12; ++n) {
      const auto acts = action_space(n, c);
      for (int i = 0; i < n; ++i) {
        const double exact = static_cast<double>(c) * i / (n - 1);
        EXPECT_EQ(acts[static_cast<std::size_t>(i)].lte_prbs, static_cast<int>(std::floor(exact + 0.5)))
            << "c=" << c << " n=" << n << " i=" << i;
        if (i > 0) {
          const auto k = static_cast<std::size_t>(i);
          EXPECT_GE(acts[k].lte_prbs, acts[k - 1].lte_prbs);
        }
      }
    }
}

TEST(PacketQueue, DrainsOldestFirst) {
  PacketQueue q;
  q.push(0, 100);
  q.push(2, 50);
  q.push(3, 0);  // ignored
  EXPECT_EQ(q.total_bits(), 150);
  EXPECT_EQ(q.drain(120), 120);
  EXPECT_EQ(q.oldest_arrival(), 2);
  EXPECT_EQ(q.total_bits(), 30);
  EXPECT_EQ(q.drain(1000), 30);
  EXPECT_TRUE(q.empty());
}

TEST(Capacity, PrbsNeededIsSmallestCover) {
  EXPECT_EQ(prbs_needed(0, 1000.0), 0);
  EXPECT_EQ(prbs_needed(15000, 1000.0), 15);
  EXPECT_EQ(prbs_needed(15001, 1000.0), 16);
  EXPECT_EQ(prbs_needed(100, 0.0), -1);
  const double bpp = 12576.0 / 25.0;
  for (std::int64_t bits : {1, 503, 504, 14000, 12576}) {
    const int k = prbs_needed(bits, bpp);
    EXPECT_GE(prb_capacity(k, bpp), bits);
    EXPECT_LT(prb_capacity(k - 1, bpp), bits);
  }
}

TEST(Capacity, Scenario4FullBandTransportBlocks) {
  const auto s = build_scenario(4);
  SubframeContext ctx = make_context(s, 0);
  ctx.lte_scheduled = false;
  EXPECT_EQ(prb_capacity(25, bits_per_prb(s, 0, ctx, 0)), 14112);
  ctx.lte_scheduled = true;
  EXPECT_EQ(prb_capacity(25, bits_per_prb(s, 0, ctx, 0)), 12576);
}

TEST(Capacity, LinkBudgetWithoutOverride) {
  ScenarioConfig s = build_scenario(1);
  for (auto& u : s.users) u.bits_per_prb_override.reset();
  SubframeContext ctx = make_context(s, 0);
  // Cap binds at 100 m: 999000 bit/s * 1 ms * symbols/14.
  EXPECT_NEAR(bits_per_prb(s, 0, ctx, 0), 999.0 * 13.0 / 14.0, 1e-9);
  ctx.lte_scheduled = true;
  EXPECT_NEAR(bits_per_prb(s, 0, ctx, 0), 999.0 * 11.0 / 14.0, 1e-9);
  EXPECT_NEAR(bits_per_prb(s, 1, ctx, 0), 999.0 * 12.0 / 14.0, 1e-9);
}

TEST(Capacity, MbsfnAndInterferenceZeroCapacity) {
  const auto s1 = build_scenario(1);
  EXPECT_EQ(bits_per_prb(s1, 1, make_context(s1, 2), 0), 0.0);
  EXPECT_EQ(bits_per_prb(s1, 1, make_context(s1, 3), 0), 0.0);
  EXPECT_GT(bits_per_prb(s1, 1, make_context(s1, 1), 0), 0.0);
  EXPECT_GT(bits_per_prb(s1, 0, make_context(s1, 2), 0), 0.0);
  const auto s2 = build_scenario(2);
  EXPECT_EQ(bits_per_prb(s2, 1, make_context(s2, 3), 0), 0.0);
  EXPECT_GT(bits_per_prb(s2, 1, make_context(s2, 4), 0), 0.0);
}

TEST(Fading, CounterBasedAndPositive) {
  double sum = 0.0;
  for (int p = 0; p < 20000; ++p) {
    const double g = fading_gain(42, p, 0);
    EXPECT_GT(g, 0.0);
    EXPECT_EQ(g, fading_gain(42, p, 0));
    sum += g;
  }
  EXPECT_NEAR(sum / 20000.0, 1.0, 0.05);  // Exp(1) mean
  EXPECT_NE(fading_gain(42, 3, 0), fading_gain(43, 3, 0));
}

TEST(Arrivals, Periodic) {
  const auto s = build_scenario(1);
  EXPECT_TRUE(arrives_at(s.users[0], 4));
  EXPECT_FALSE(arrives_at(s.users[0], 5));
  const auto s3 = build_scenario(3);
  EXPECT_FALSE(arrives_at(s3.users[0], 0));
  EXPECT_TRUE(arrives_at(s3.users[0], 1));
  EXPECT_TRUE(arrives_at(s3.users[1], 1));
  EXPECT_FALSE(arrives_at(s3.users[1], 9));
  const auto s2 = build_scenario(2);
  EXPECT_FALSE(arrives_at(s2.users[0], 1));
}

TEST(Arrivals, EnqueueStampedPacket) {
  auto state = make_state(std::make_shared<const ScenarioConfig>(build_scenario(1)), 0);
  state.subframe = 4;
  apply_arrivals(state);
  ASSERT_EQ(state.queues[0].packets().size(), 1u);
  EXPECT_EQ(state.queues[0].packets()[0], (Packet{4, 45000}));
}

TEST(Schedule, EmptyBuffersRewardOne) {
  Environment env(empty_traffic());
  for (int a = 0; a < 3 && !env.done(); ++a) {
    const auto r = env.step(a);
    EXPECT_EQ(r.reward, 1.0);
    for (auto b : r.schedule.served_bits) EXPECT_EQ(b, 0);
  }
}

TEST(Schedule, Scenario3AllNrAtArrival) {
  Environment env(build_scenario(3));
  env.step(0);
  const auto r = env.step(0);
  EXPECT_EQ(r.schedule.served_bits[0], 25000);
  EXPECT_EQ(r.schedule.served_bits[1], 0);
  EXPECT_EQ(r.schedule.allocated_prbs[0], 25);
}

TEST(Schedule, MbsfnBlocksLte) {
  Environment env(build_scenario(1));
  env.step(2);
  env.step(2);
  const auto r = env.step(1);  // p = 2, 13 LTE PRBs
  EXPECT_EQ(r.schedule.served_bits[1], 0);
  EXPECT_EQ(r.schedule.allocated_prbs[1], 0);
}

TEST(Schedule, WeightsAndRewardAfterDrain) {
  // Scenario 1, p=0, all LTE: LTE 15000 bits fit, NR waits one subframe.
  Environment env(build_scenario(1));
  const auto r = env.step(2);
  EXPECT_EQ(r.schedule.served_bits[1], 15000);
  EXPECT_EQ(r.schedule.weights[1], 0.0);
  EXPECT_DOUBLE_EQ(r.schedule.weights[0], 1e-5);
  EXPECT_DOUBLE_EQ(r.reward, std::exp(-1e-5));
}

TEST(Episode, EmptyTrafficScoresSixteen) {
  Environment env(empty_traffic());
  EXPECT_EQ(play(env, std::vector<int>(16, 1)), 16.0);
}

TEST(Episode, Scenario3NrFirstIsNearPerfect) {
  const std::vector<int> seq = {0, 0, 0, 0, 0, 2, 2, 2, 2, 0, 0, 0, 0, 0, 0, 0};
  Environment env(build_scenario(3));
  double score = 0.0;
  for (int a : seq) {
    const auto r = env.step(a);
    for (double w : r.schedule.weights) EXPECT_LE(w, 1e-5 * 8);
    score += r.reward;
  }
  EXPECT_GT(score, 16.0 - 16 * (1 - std::exp(-2e-5 * 8)));
  EXPECT_LT(score, 16.0);
}

TEST(Episode, Scenario1ProportionalMissesLteDeadline) {
  Environment env(build_scenario(1));
  ProportionalAgent agent;
  bool missed = false;
  while (!env.done()) {
    const auto r = env.step(agent.act(env));
    if (r.reward <= std::exp(-5.0)) missed = true;
  }
  EXPECT_TRUE(missed);
}

TEST(Episode, SteppingFinishedEpisodeThrows) {
  Environment env(empty_traffic());
  for (int p = 0; p < 16; ++p) env.step(0);
  EXPECT_TRUE(env.done());
  EXPECT_THROW(env.step(0), UsageError);
}

TEST(Episode, InvalidActionThrows) {
  Environment env(build_scenario(1));
  EXPECT_THROW(env.step(3), UsageError);
  EXPECT_THROW(env.step(-1), UsageError);
}

TEST(Episode, DeterministicReplay) {
  ScenarioConfig s = build_scenario(2);
  s.rayleigh_fading = true;
  for (auto& u : s.users) u.bits_per_prb_override.reset();
  Environment a(s, 99), b(s, 99);
  Rng rng(1);
  for (int p = 0; p < 16; ++p) {
    const int act = static_cast<int>(uniform_int(rng, 0, 1));
    const auto ra = a.step(act);
    const auto rb = b.step(act);
    EXPECT_EQ(ra.reward, rb.reward);
    EXPECT_EQ(ra.schedule.served_bits, rb.schedule.served_bits);
    EXPECT_TRUE(a.state() == b.state());
  }
}

TEST(Observation, LayoutAndMbsfnRow) {
  Environment env(build_scenario(1));
  const auto obs = env.observation();
  ASSERT_EQ(obs.values.size(), 64u);
  EXPECT_EQ(Observation::dim(2, 10), 64);
  EXPECT_EQ(obs.nr_support(0), 1.0);
  EXPECT_EQ(obs.nr_support(1), 0.0);
  const std::vector<double> expect = {0, 0, 1, 1, 0, 0, 1, 1, 0, 0};
  for (int c = 0; c < 10; ++c) {
    EXPECT_EQ(obs.mbsfn(1, c), expect[static_cast<std::size_t>(c)]);
    EXPECT_EQ(obs.mbsfn(0, c), 0.0);
  }
  // Raw offsets: block 0 starts at 2J = 4, user 1 row at +10.
  EXPECT_EQ(obs.values[4 + 10 + 2], 1.0);
}

TEST(Observation, ArrivalMarksAndBufferBeforeArrival) {
  ScenarioConfig s = build_scenario(2);
  const auto obs = Environment(s).observation(4);
  EXPECT_EQ(obs.buffer(0), 0.0);
  const double nr_mark = 16000.0 / s.max_packet_bits();
  EXPECT_EQ(obs.arrivals(0, 0), nr_mark);
  EXPECT_EQ(obs.arrivals(0, 1), 0.0);
  EXPECT_EQ(obs.arrivals(0, 2), nr_mark);
  EXPECT_EQ(obs.arrivals(0, 3), 0.0);
  EXPECT_EQ(obs.arrivals(1, 0), 14000.0 / 16000.0);
  // Interfered LTE subframes show zero predicted capacity.
  EXPECT_EQ(obs.bits_per_prb(1, 0), 0.0);
  EXPECT_EQ(obs.bits_per_prb(1, 1), 1.0);
  EXPECT_EQ(obs.bits_per_prb(1, 3), 0.0);
}

TEST(Observation, BufferReflectsLeftovers) {
  Environment env(build_scenario(1));
  env.step(2);  // NR 45000 untouched
  const auto obs = env.observation();
  EXPECT_DOUBLE_EQ(obs.buffer(0), 1.0);
  EXPECT_EQ(obs.buffer(1), 0.0);
}

TEST(Observation, Scenario4AloneCapacityOnlyWithoutLte) {
  ScenarioConfig s = build_scenario(4);
  const auto obs = Environment(s).observation();
  // Not MBSFN: LTE may transmit, so NR look-ahead uses the shared value.
  EXPECT_NEAR(obs.bits_per_prb(0, 0), 12576.0 / 14112.0, 1e-12);
  EXPECT_DOUBLE_EQ(obs.bits_per_prb(1, 0), 12.0 / 13.0);
}

// Fuzzed properties over random scenarios, states and actions.
class EnvironmentFuzz : public ::testing::TestWithParam<int> {};

TEST_P(EnvironmentFuzz, RewardBoundsBudgetsConservation) {
  Rng rng(static_cast<std::uint64_t>(GetParam()));
  RandomizationSpec spec;
  for (int episode = 0; episode < 200; ++episode) {
    const int id = static_cast<int>(uniform_int(rng, 1, 4));
    const int n = static_cast<int>(uniform_int(rng, 2, 5));
    ScenarioConfig s = sample_environment(build_scenario(id, n), spec, rng);
    if (uniform01(rng) < 0.3) {
      s.rayleigh_fading = true;
      for (auto& u : s.users) u.bits_per_prb_override.reset();
    }
    Environment env(s, rng());
    while (!env.done()) {
      const int a = static_cast<int>(uniform_int(rng, 0, env.action_count() - 1));
      const auto& act = env.actions()[static_cast<std::size_t>(a)];
      const bool mbsfn = s.is_mbsfn(env.subframe());
      const auto r = env.step(a);
      EXPECT_GT(r.reward, 0.0);
      EXPECT_LE(r.reward, 1.0);
      bool all_empty = true;
      for (const auto& q : env.state().queues) all_empty = all_empty && q.empty();
      EXPECT_EQ(r.reward == 1.0, all_empty);
      int lte = 0, nr = 0;
      for (int u = 0; u < s.num_users(); ++u) {
        const auto ui = static_cast<std::size_t>(u);
        (s.users[ui].rat == Rat::LTE ? lte : nr) += r.schedule.allocated_prbs[ui];
        if (s.users[ui].rat == Rat::LTE && mbsfn) {
          EXPECT_EQ(r.schedule.served_bits[ui], 0);
        }
        if (env.state().queues[ui].empty()) {
          EXPECT_EQ(r.schedule.weights[ui], 0.0);
        }
        EXPECT_EQ(env.state().queues[ui].total_bits(),
                  env.state().arrived_bits[ui] - env.state().served_bits[ui]);
      }
      EXPECT_LE(lte, act.lte_prbs);
      EXPECT_LE(nr, act.nr_prbs);
    }
  }
}

INSTANTIATE_TEST_SUITE_P(Seeds, EnvironmentFuzz, ::testing::Values(1, 2, 3));

TEST(Monotonicity, MoreLtePrbsNeverServeLessLte) {
  ScenarioConfig s = build_scenario(1, 6);
  Rng rng(3);
  for (int trial = 0; trial < 300; ++trial) {
    Environment env(s);
    const int steps = static_cast<int>(uniform_int(rng, 0, 10));
    for (int k = 0; k < steps; ++k) env.step(static_cast<int>(uniform_int(rng, 0, 5)));
    if (s.is_mbsfn(env.subframe())) continue;
    std::int64_t prev = -1;
    for (int a = 0; a < 6; ++a) {
      Environment e = env;
      const auto served = e.step(a).schedule.served_bits[1];
      EXPECT_GE(served, prev);
      prev = served;
    }
  }
}
