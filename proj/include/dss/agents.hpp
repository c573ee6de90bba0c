#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "dss/environment.hpp"

namespace dss {

/// Uniform decision interface shared by the learned controller, the scripted
/// baselines and the oracle.
class Agent {
 public:
  virtual ~Agent() = default;
  virtual std::string name() const = 0;
  /// Called before every episode.
  virtual void reset() {}
  virtual int act(const Environment& env) = 0;
};

/// Action whose LTE share is closest to `lte_target`; ties go to the larger LTE share.
inline int nearest_action(const std::vector<Action>& actions, double lte_target) {
  int best = 0;
  double best_d = std::abs(actions[0].lte_prbs - lte_target);
  for (const auto& a : actions) {
    const double d = std::abs(a.lte_prbs - lte_target);
    const bool tie = std::abs(d - best_d) <= 1e-12;
    if (d < best_d - 1e-12 ||
        (tie && a.lte_prbs > actions[static_cast<std::size_t>(best)].lte_prbs)) {
      best = a.index;
      best_d = d;
    }
  }
  return best;
}

/// Per-PRB capacity a buffer-driven scheduler assumes: clean subframe,
/// both RATs active, no fading.
inline double nominal_bits_per_prb(const ScenarioConfig& cfg, int user) {
  const auto& uc = cfg.users[static_cast<std::size_t>(user)];
  if (uc.bits_per_prb_override) return *uc.bits_per_prb_override;
  return link_bits_per_prb(cfg.radio, uc, false, 1.0);
}

struct PrbDemand {
  int lte = 0;
  int nr = 0;
};

/// PRBs each RAT needs to empty its buffers, counted over users in weight order.
/// `state` must already contain this subframe's arrivals.
inline PrbDemand prb_demand(const NetworkState& state) {
  const auto& cfg = state.cfg();
  const auto weights = current_weights(state);
  std::vector<int> order;
  for (int u = 0; u < cfg.num_users(); ++u)
    if (!state.queues[static_cast<std::size_t>(u)].empty()) order.push_back(u);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return weights[static_cast<std::size_t>(a)] > weights[static_cast<std::size_t>(b)];
  });
  PrbDemand d;
  for (int u : order) {
    const int need = prbs_needed(state.queues[static_cast<std::size_t>(u)].total_bits(),
                                 nominal_bits_per_prb(cfg, u));
    if (need <= 0) continue;
    (cfg.users[static_cast<std::size_t>(u)].rat == Rat::LTE ? d.lte : d.nr) += need;
  }
  return d;
}

/// Proportional baseline: split the band in proportion to each RAT's PRB demand.
/// Works from buffer status only (no MBSFN or interference awareness).
inline int baseline_proportional_act(const NetworkState& pending,
                                     const std::vector<Action>& actions) {
  const PrbDemand d = prb_demand(pending);
  if (d.lte + d.nr == 0) return 0;
  const int c = actions.front().lte_prbs + actions.front().nr_prbs;
  const double target = static_cast<double>(c) * d.lte / (d.lte + d.nr);
  return nearest_action(actions, target);
}

inline int equal_split_act(const std::vector<Action>& actions) {
  const int c = actions.front().lte_prbs + actions.front().nr_prbs;
  return nearest_action(actions, c / 2.0);
}

/// Full band to NR on subframes of parity `nr_phase`, to LTE on the others.
inline int alternating_act(int p, const std::vector<Action>& actions, int nr_phase = 0) {
  return (p % 2 == nr_phase) ? 0 : static_cast<int>(actions.size()) - 1;
}

class ProportionalAgent final : public Agent {
 public:
  std::string name() const override { return "proportional"; }
  int act(const Environment& env) override {
    return baseline_proportional_act(env.pending_state(), env.actions());
  }
};

class EqualSplitAgent final : public Agent {
 public:
  std::string name() const override { return "equal"; }
  int act(const Environment& env) override { return equal_split_act(env.actions()); }
};

class AlternatingAgent final : public Agent {
 public:
  explicit AlternatingAgent(int nr_phase = 0) : nr_phase_(nr_phase) {}
  std::string name() const override {
    return nr_phase_ == 0 ? "alternating" : "alternating-lte-first";
  }
  int act(const Environment& env) override {
    return alternating_act(env.subframe(), env.actions(), nr_phase_);
  }

 private:
  int nr_phase_;
};

/// Replays a fixed action sequence (index p), then repeats the last action.
class ScriptedAgent final : public Agent {
 public:
  ScriptedAgent(std::string name, std::vector<int> actions)
      : name_(std::move(name)), actions_(std::move(actions)) {}
  std::string name() const override { return name_; }
  int act(const Environment& env) override {
    if (actions_.empty()) return 0;
    const auto p = static_cast<std::size_t>(env.subframe());
    return actions_[std::min(p, actions_.size() - 1)];
  }

 private:
  std::string name_;
  std::vector<int> actions_;
};

}  // namespace dss
