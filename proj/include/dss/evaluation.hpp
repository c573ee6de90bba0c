#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <vector>

#include "dss/agents.hpp"
#include "dss/environment.hpp"

namespace dss {

inline double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct EpisodeResult {
  double score = 0.0;
  std::vector<int> actions;
  std::vector<double> rewards;
};

/// Plays one full episode of `env` with `agent`.
inline EpisodeResult run_episode(Agent& agent, Environment env) {
  agent.reset();
  EpisodeResult out;
  while (!env.done()) {
    const int a = agent.act(env);
    const double r = env.step(a).reward;
    out.actions.push_back(a);
    out.rewards.push_back(r);
    out.score += r;
  }
  return out;
}

struct EvalStats {
  std::vector<std::uint64_t> seeds;
  std::vector<double> scores;
  double median = 0.0;
  double min = 0.0;
};

/// Episode score of `agent` on `scenario` for each environment seed.
inline EvalStats evaluate_agent(Agent& agent, const ScenarioConfig& scenario,
                                const std::vector<std::uint64_t>& seeds) {
  EvalStats st;
  st.seeds = seeds;
  for (auto seed : seeds) st.scores.push_back(run_episode(agent, Environment(scenario, seed)).score);
  st.median = median(st.scores);
  st.min = st.scores.empty() ? 0.0 : *std::min_element(st.scores.begin(), st.scores.end());
  return st;
}

}  // namespace dss
