#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "dss/agents.hpp"
#include "dss/environment.hpp"
#include "dss/error.hpp"

namespace dss {

/// Ground-truth planner over the true environment.
///
/// Exact maximizer of the summed reward over `horizon` subframes. Values are
/// memoized per network state (subframe + queue contents), which collapses
/// the N^horizon sequence tree to the set of distinct reachable states. An
/// optional `allowed(subframe, action)` mask restricts the search, used to
/// compare the optimum against constrained strategies.
struct OracleOptions {
  std::function<bool(int subframe, int action)> allowed;
  std::size_t node_budget = 10'000'000;
};

struct OraclePlan {
  std::vector<int> actions;
  double score = 0.0;
  std::size_t nodes = 0;
};

class OracleSolver {
 public:
  OracleSolver(Environment start, int horizon, OracleOptions opts = {})
      : start_(std::move(start)), end_(start_.subframe() + horizon), opts_(std::move(opts)) {
    if (horizon < 0 || horizon > start_.remaining())
      throw ConfigError("oracle horizon " + std::to_string(horizon) + " exceeds the " +
                        std::to_string(start_.remaining()) + " remaining subframes");
  }

  const Environment& start() const { return start_; }
  int end_subframe() const { return end_; }
  std::size_t nodes() const { return nodes_; }

  /// Best achievable reward sum from `env` until the horizon; -inf when the
  /// constraint leaves no feasible sequence.
  double value(const Environment& env) {
    if (env.subframe() >= end_) return 0.0;
    const auto key = state_key(env.state());
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;
    double best = -std::numeric_limits<double>::infinity();
    for (double q : q_values(env)) best = std::max(best, q);
    memo_.emplace(key, best);
    return best;
  }

  /// Q*(env, a) for every action; -inf for masked actions.
  std::vector<double> q_values(const Environment& env) {
    std::vector<double> q(static_cast<std::size_t>(env.action_count()),
                          -std::numeric_limits<double>::infinity());
    for (int a = 0; a < env.action_count(); ++a) {
      if (opts_.allowed && !opts_.allowed(env.subframe(), a)) continue;
      if (++nodes_ > opts_.node_budget)
        throw BudgetError("oracle node budget of " + std::to_string(opts_.node_budget) +
                          " exceeded; shorten the horizon");
      Environment next = env;
      const double r = next.step(a).reward;
      q[static_cast<std::size_t>(a)] = r + value(next);
    }
    return q;
  }

  /// Actions within `tol` of the optimum at `env`.
  std::vector<int> optimal_actions(const Environment& env, double tol = 1e-9) {
    const auto q = q_values(env);
    const double best = *std::max_element(q.begin(), q.end());
    std::vector<int> out;
    if (!std::isfinite(best)) return out;
    for (std::size_t a = 0; a < q.size(); ++a)
      if (q[a] >= best - tol) out.push_back(static_cast<int>(a));
    return out;
  }

  /// Optimal sequence from the start state, lowest action index among ties.
  OraclePlan plan() {
    OraclePlan out;
    out.score = value(start_);
    Environment env = start_;
    while (env.subframe() < end_ && std::isfinite(out.score)) {
      const int a = optimal_actions(env).front();
      out.actions.push_back(a);
      env.step(a);
    }
    out.nodes = nodes_;
    return out;
  }

  /// Visits every state on some optimal path exactly once, calling
  /// `visit(state_env, optimal_action, next_env, step)` for each optimal edge.
  template <typename Visit>
  void for_each_optimal_edge(Visit&& visit, double tol = 1e-9) {
    std::unordered_map<std::string, bool> seen;
    std::vector<Environment> stack{start_};
    while (!stack.empty()) {
      Environment env = std::move(stack.back());
      stack.pop_back();
      if (env.subframe() >= end_) continue;
      if (!seen.emplace(state_key(env.state()), true).second) continue;
      for (int a : optimal_actions(env, tol)) {
        Environment next = env;
        const StepResult step = next.step(a);
        visit(env, a, next, step);
        stack.push_back(std::move(next));
      }
    }
  }

 private:
  static std::string state_key(const NetworkState& s) {
    std::string key;
    auto put = [&key](std::int64_t v) {
      key.append(reinterpret_cast<const char*>(&v), sizeof v);
    };
    put(s.subframe);
    for (const auto& q : s.queues) {
      put(static_cast<std::int64_t>(q.packets().size()));
      for (const auto& pk : q.packets()) {
        put(pk.arrival);
        put(pk.remaining_bits);
      }
    }
    return key;
  }

  Environment start_;
  int end_;
  OracleOptions opts_;
  std::size_t nodes_ = 0;
  std::unordered_map<std::string, double> memo_;
};

inline OraclePlan oracle_plan(const ScenarioConfig& scenario, int horizon,
                              OracleOptions opts = {}, std::uint64_t seed = 0) {
  OracleSolver solver(Environment(scenario, seed), horizon, std::move(opts));
  return solver.plan();
}

/// Brute-force enumeration of all N^horizon sequences (limit 1e7), calling
/// `visit(sequence, score)` for each.
template <typename Visit>
void exhaustive_search(const Environment& start, int horizon, Visit&& visit) {
  const double count = std::pow(start.action_count(), horizon);
  if (count > 1e7)
    throw BudgetError("exhaustive search over " + std::to_string(count) +
                      " sequences exceeds 1e7; shorten the horizon");
  if (horizon > start.remaining())
    throw ConfigError("exhaustive search horizon exceeds the episode");
  std::vector<int> seq;
  std::function<void(const Environment&, double)> rec = [&](const Environment& env, double acc) {
    if (static_cast<int>(seq.size()) == horizon) {
      visit(static_cast<const std::vector<int>&>(seq), acc);
      return;
    }
    for (int a = 0; a < env.action_count(); ++a) {
      Environment next = env;
      const double r = next.step(a).reward;
      seq.push_back(a);
      rec(next, acc + r);
      seq.pop_back();
    }
  };
  rec(start, 0.0);
}

/// Plays the oracle's optimal action in each subframe of the episode.
class OracleAgent final : public Agent {
 public:
  std::string name() const override { return "oracle"; }
  void reset() override { solver_.reset(); }
  int act(const Environment& env) override {
    if (!solver_) solver_ = std::make_unique<OracleSolver>(env, env.remaining());
    return solver_->optimal_actions(env).front();
  }

 private:
  std::unique_ptr<OracleSolver> solver_;
};

}  // namespace dss
