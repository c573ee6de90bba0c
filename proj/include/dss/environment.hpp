#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "dss/error.hpp"
#include "dss/radio.hpp"
#include "dss/rng.hpp"
#include "dss/scenario.hpp"

namespace dss {

// ---------------------------------------------------------------------------
// Traffic and QoS

struct Packet {
  int arrival = 0;
  std::int64_t remaining_bits = 0;

  bool operator==(const Packet&) const = default;
};

/// FIFO of partially served packets. Arrivals are nondecreasing, every stored
/// packet has remaining_bits > 0.
class PacketQueue {
 public:
  void push(int arrival, std::int64_t bits) {
    if (bits <= 0) return;
    packets_.push_back({arrival, bits});
    total_ += bits;
  }

  /// Serves up to `bits`, oldest packet first. Returns bits actually served.
  std::int64_t drain(std::int64_t bits) {
    std::int64_t served = 0;
    std::size_t head = 0;
    while (head < packets_.size() && bits > 0) {
      auto& pk = packets_[head];
      const std::int64_t take = std::min(bits, pk.remaining_bits);
      pk.remaining_bits -= take;
      bits -= take;
      served += take;
      if (pk.remaining_bits == 0) ++head;
    }
    packets_.erase(packets_.begin(), packets_.begin() + static_cast<std::ptrdiff_t>(head));
    total_ -= served;
    return served;
  }

  bool empty() const { return packets_.empty(); }
  std::int64_t total_bits() const { return total_; }
  int oldest_arrival() const { return packets_.front().arrival; }
  const std::vector<Packet>& packets() const { return packets_; }

  bool operator==(const PacketQueue&) const = default;

 private:
  std::vector<Packet> packets_;
  std::int64_t total_ = 0;
};

/// Subframes the oldest packet has waited at the end of subframe p, counting
/// the subframe it arrived in: a packet that arrives in p and is left
/// unserved has waited 1.
inline int waiting_time(int p, int arrival) { return p - arrival + 1; }

/// Piecewise-linear delay weight with a step at `step_delay`.
inline double user_weight(int t, const UserConfig& cfg, bool buffer_empty) {
  if (buffer_empty) return 0.0;
  const double w = cfg.weight_slope * t;
  return t < cfg.step_delay ? w : w + cfg.step_weight;
}

inline double subframe_reward(const std::vector<double>& weights) {
  return std::exp(-std::accumulate(weights.begin(), weights.end(), 0.0));
}

// ---------------------------------------------------------------------------
// Actions

/// A bandwidth split: LTE takes the lower `lte_prbs`, NR the rest.
struct Action {
  int index = 0;
  int lte_prbs = 0;
  int nr_prbs = 0;

  bool operator==(const Action&) const = default;
};

/// `n` evenly spaced splits of `c` PRBs, LTE share rounded half up.
inline std::vector<Action> action_space(int n, int c) {
  if (n < 2) throw ConfigError("action space needs at least 2 actions");
  if (c < 1) throw ConfigError("action space needs at least 1 PRB");
  std::vector<Action> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const int lte = (2 * c * i + (n - 1)) / (2 * (n - 1));
    out.push_back({i, lte, c - lte});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Link capacity

/// Everything capacity depends on in one subframe.
struct SubframeContext {
  int subframe = 0;
  std::vector<bool> is_mbsfn;  // per user; only ever true for LTE users
  std::vector<bool> interfered;
  bool lte_scheduled = false;
  bool nr_scheduled = false;
};

inline SubframeContext make_context(const ScenarioConfig& cfg, int p) {
  SubframeContext ctx;
  ctx.subframe = p;
  const auto j = static_cast<std::size_t>(cfg.num_users());
  ctx.is_mbsfn.resize(j);
  ctx.interfered.resize(j);
  for (std::size_t u = 0; u < j; ++u) {
    ctx.is_mbsfn[u] = cfg.users[u].rat == Rat::LTE && cfg.is_mbsfn(p);
    ctx.interfered[u] = cfg.is_interfered(static_cast<int>(u), p);
  }
  return ctx;
}

/// Rayleigh power gain |h|^2 ~ Exp(1), a pure function of (seed, subframe, user).
inline double fading_gain(std::uint64_t seed, int p, int user) {
  const auto bits = derive_seed(seed, {0xfad1, static_cast<std::uint64_t>(p),
                                       static_cast<std::uint64_t>(user)});
  return -std::log(unit_from_bits(bits));
}

/// Bits per PRB per subframe from the link budget, ignoring overrides.
inline double link_bits_per_prb(const RadioParams& radio, const UserConfig& user, bool nr_alone,
                                double gain) {
  const double gamma = snr(radio.tx_power_per_prb_w, gain, path_loss_db(user.distance_m),
                           dbm_to_watts(radio.noise_power_per_prb_dbm));
  const double rate =
      achievable_rate(1, gamma, radio.prb_bandwidth_hz, radio.spectral_efficiency_cap);
  return rate * kSubframeSeconds * data_symbols(user.rat, nr_alone) / kSymbolsPerSubframe;
}

/// Capacity of one PRB for `user` in the subframe described by `ctx`. NR is
/// "alone" when LTE transmits nothing in the subframe.
inline double bits_per_prb(const ScenarioConfig& cfg, int user, const SubframeContext& ctx,
                           std::uint64_t seed) {
  const auto u = static_cast<std::size_t>(user);
  const UserConfig& uc = cfg.users[u];
  if (ctx.is_mbsfn[u] || ctx.interfered[u]) return 0.0;
  const bool nr_alone = uc.rat == Rat::NR && !ctx.lte_scheduled;
  if (nr_alone && uc.bits_per_prb_alone_override) return *uc.bits_per_prb_alone_override;
  if (uc.bits_per_prb_override) return *uc.bits_per_prb_override;
  const double g = cfg.rayleigh_fading ? fading_gain(seed, ctx.subframe, user) : 1.0;
  return link_bits_per_prb(cfg.radio, uc, nr_alone, g);
}

/// Deliverable bits on `prbs` PRBs.
inline std::int64_t prb_capacity(int prbs, double bits_per_prb) {
  return static_cast<std::int64_t>(std::floor(prbs * bits_per_prb + 1e-9));
}

/// Smallest PRB count whose capacity covers `bits`; -1 if the user cannot be served.
inline int prbs_needed(std::int64_t bits, double bits_per_prb) {
  if (bits <= 0) return 0;
  if (!(bits_per_prb > 0)) return -1;
  auto k = static_cast<int>(std::ceil(static_cast<double>(bits) / bits_per_prb - 1e-9));
  while (prb_capacity(k, bits_per_prb) < bits) ++k;
  return k;
}

// ---------------------------------------------------------------------------
// Network state and scheduling

struct NetworkState {
  std::shared_ptr<const ScenarioConfig> scenario;
  std::vector<PacketQueue> queues;
  int subframe = 0;
  std::uint64_t rng_seed = 0;
  // Bookkeeping for conservation checks.
  std::vector<std::int64_t> arrived_bits;
  std::vector<std::int64_t> served_bits;

  const ScenarioConfig& cfg() const { return *scenario; }

  bool operator==(const NetworkState& o) const {
    return queues == o.queues && subframe == o.subframe && rng_seed == o.rng_seed &&
           arrived_bits == o.arrived_bits && served_bits == o.served_bits;
  }
};

inline NetworkState make_state(std::shared_ptr<const ScenarioConfig> cfg, std::uint64_t seed) {
  NetworkState s;
  const auto j = static_cast<std::size_t>(cfg->num_users());
  s.scenario = std::move(cfg);
  s.queues.resize(j);
  s.arrived_bits.assign(j, 0);
  s.served_bits.assign(j, 0);
  s.rng_seed = seed;
  return s;
}

inline bool arrives_at(const UserConfig& u, int p) {
  return p >= u.first_arrival && (p - u.first_arrival) % u.arrival_period == 0;
}

/// Enqueues this subframe's packets.
inline void apply_arrivals(NetworkState& state) {
  const auto& cfg = state.cfg();
  for (std::size_t u = 0; u < cfg.users.size(); ++u) {
    const auto& uc = cfg.users[u];
    if (arrives_at(uc, state.subframe) && uc.packet_bits > 0) {
      state.queues[u].push(state.subframe, uc.packet_bits);
      state.arrived_bits[u] += uc.packet_bits;
    }
  }
}

/// Delay weight of every user at the end of the current subframe.
inline std::vector<double> current_weights(const NetworkState& state) {
  const auto& cfg = state.cfg();
  std::vector<double> w(cfg.users.size(), 0.0);
  for (std::size_t u = 0; u < w.size(); ++u) {
    const auto& q = state.queues[u];
    if (!q.empty())
      w[u] = user_weight(waiting_time(state.subframe, q.oldest_arrival()), cfg.users[u], false);
  }
  return w;
}

struct ScheduleResult {
  std::vector<int> allocated_prbs;
  std::vector<std::int64_t> served_bits;
  std::vector<double> weights;  // after scheduling
  double reward = 1.0;
  bool lte_scheduled = false;
  bool nr_scheduled = false;
};

/// Users of `rat` in scheduling order: weight descending, ties by user id.
inline std::vector<int> scheduling_order(const NetworkState& state, Rat rat,
                                         const std::vector<double>& weights) {
  const auto& cfg = state.cfg();
  std::vector<int> order;
  for (int u = 0; u < cfg.num_users(); ++u)
    if (cfg.users[static_cast<std::size_t>(u)].rat == rat &&
        !state.queues[static_cast<std::size_t>(u)].empty())
      order.push_back(u);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return weights[static_cast<std::size_t>(a)] > weights[static_cast<std::size_t>(b)];
  });
  return order;
}

/// Runs both per-RAT schedulers on the split `action` (arrivals already applied).
/// LTE schedules first; NR capacity then depends on whether LTE transmitted.
inline ScheduleResult schedule_subframe(NetworkState& state, const Action& action) {
  const auto& cfg = state.cfg();
  const auto j = static_cast<std::size_t>(cfg.num_users());
  ScheduleResult res;
  res.allocated_prbs.assign(j, 0);
  res.served_bits.assign(j, 0);

  const auto pre_weights = current_weights(state);
  SubframeContext ctx = make_context(cfg, state.subframe);

  auto run_rat = [&](Rat rat, int budget) {
    bool any = false;
    for (int u : scheduling_order(state, rat, pre_weights)) {
      const auto ui = static_cast<std::size_t>(u);
      const double bpp = bits_per_prb(cfg, u, ctx, state.rng_seed);
      const int need = prbs_needed(state.queues[ui].total_bits(), bpp);
      if (need <= 0 || budget <= 0) continue;
      const int k = std::min(need, budget);
      const std::int64_t served = state.queues[ui].drain(prb_capacity(k, bpp));
      budget -= k;
      res.allocated_prbs[ui] = k;
      res.served_bits[ui] = served;
      state.served_bits[ui] += served;
      any = true;
    }
    return any;
  };

  res.lte_scheduled = run_rat(Rat::LTE, action.lte_prbs);
  ctx.lte_scheduled = res.lte_scheduled;
  res.nr_scheduled = run_rat(Rat::NR, action.nr_prbs);
  ctx.nr_scheduled = res.nr_scheduled;

  res.weights = current_weights(state);
  res.reward = subframe_reward(res.weights);
  return res;
}

// ---------------------------------------------------------------------------
// Observation

/// Controller input. Flattened order: nr_support[J], buffer[J], then three
/// J x T row-major blocks (mbsfn, bits_per_prb, arrivals). All entries in [0, 1].
struct Observation {
  int users = 0;
  int window = 0;
  std::vector<double> values;

  static int dim(int users, int window) { return 2 * users + 3 * users * window; }

  double nr_support(int j) const { return values[static_cast<std::size_t>(j)]; }
  double buffer(int j) const { return values[static_cast<std::size_t>(users + j)]; }
  double mbsfn(int j, int c) const { return block(0, j, c); }
  double bits_per_prb(int j, int c) const { return block(1, j, c); }
  double arrivals(int j, int c) const { return block(2, j, c); }

 private:
  double block(int b, int j, int c) const {
    return values[static_cast<std::size_t>(2 * users + b * users * window + j * window + c)];
  }
};

/// Expected (no fading) capacity used in look-ahead predictions.
inline double predicted_bits_per_prb(const ScenarioConfig& cfg, int user, int p) {
  const SubframeContext ctx = make_context(cfg, p);
  const auto u = static_cast<std::size_t>(user);
  if (ctx.is_mbsfn[u] || ctx.interfered[u]) return 0.0;
  const auto& uc = cfg.users[u];
  const bool has_lte = std::any_of(cfg.users.begin(), cfg.users.end(),
                                   [](const auto& x) { return x.rat == Rat::LTE; });
  // NR runs alone when LTE cannot transmit in the subframe.
  const bool nr_alone = uc.rat == Rat::NR && (!has_lte || cfg.is_mbsfn(p));
  if (nr_alone && uc.bits_per_prb_alone_override) return *uc.bits_per_prb_alone_override;
  if (uc.bits_per_prb_override) return *uc.bits_per_prb_override;
  return link_bits_per_prb(cfg.radio, uc, nr_alone, 1.0);
}

/// Largest nominal per-PRB capacity of any user in any context (normalizer).
inline double max_bits_per_prb(const ScenarioConfig& cfg) {
  double m = 0.0;
  for (const auto& uc : cfg.users) {
    for (bool alone : {false, true}) {
      double v;
      if (alone && uc.rat == Rat::NR && uc.bits_per_prb_alone_override)
        v = *uc.bits_per_prb_alone_override;
      else if (uc.bits_per_prb_override)
        v = *uc.bits_per_prb_override;
      else
        v = link_bits_per_prb(cfg.radio, uc, alone && uc.rat == Rat::NR, 1.0);
      m = std::max(m, v);
    }
  }
  return m;
}

/// Observation at the start of subframe p, before p's arrivals. Look-ahead
/// columns cover p .. p+T-1.
inline Observation build_observation(const NetworkState& state, int window) {
  const auto& cfg = state.cfg();
  const int j = cfg.num_users();
  Observation obs;
  obs.users = j;
  obs.window = window;
  obs.values.assign(static_cast<std::size_t>(Observation::dim(j, window)), 0.0);

  const double max_pkt = static_cast<double>(cfg.max_packet_bits());
  const double max_bpp = max_bits_per_prb(cfg);
  auto norm = [](double v, double by) { return by > 0 ? std::clamp(v / by, 0.0, 1.0) : 0.0; };
  auto at = [&](int b, int u, int c) -> double& {
    return obs.values[static_cast<std::size_t>(2 * j + b * j * window + u * window + c)];
  };

  for (int u = 0; u < j; ++u) {
    const auto& uc = cfg.users[static_cast<std::size_t>(u)];
    obs.values[static_cast<std::size_t>(u)] = uc.rat == Rat::NR ? 1.0 : 0.0;
    obs.values[static_cast<std::size_t>(j + u)] = norm(
        static_cast<double>(state.queues[static_cast<std::size_t>(u)].total_bits()), max_pkt);
    for (int c = 0; c < window; ++c) {
      const int p = state.subframe + c;
      at(0, u, c) = (uc.rat == Rat::LTE && cfg.is_mbsfn(p)) ? 1.0 : 0.0;
      at(1, u, c) = norm(predicted_bits_per_prb(cfg, u, p), max_bpp);
      at(2, u, c) = arrives_at(uc, p) ? norm(static_cast<double>(uc.packet_bits), max_pkt) : 0.0;
    }
  }
  return obs;
}

// ---------------------------------------------------------------------------
// Episode driver

struct StepResult {
  double reward = 1.0;
  ScheduleResult schedule;
};

/// One co-located LTE+NR cell for one episode. Copyable value; copies evolve
/// independently.
class Environment {
 public:
  explicit Environment(ScenarioConfig cfg, std::uint64_t seed = 0)
      : Environment(std::make_shared<const ScenarioConfig>(std::move(cfg)), seed) {}

  Environment(std::shared_ptr<const ScenarioConfig> cfg, std::uint64_t seed) {
    cfg->validate();
    actions_ = std::make_shared<const std::vector<Action>>(
        action_space(cfg->action_count, cfg->radio.total_prbs));
    state_ = make_state(std::move(cfg), seed);
  }

  const ScenarioConfig& scenario() const { return state_.cfg(); }
  const NetworkState& state() const { return state_; }
  int subframe() const { return state_.subframe; }
  int remaining() const { return scenario().episode_length - state_.subframe; }
  bool done() const { return remaining() <= 0; }
  const std::vector<Action>& actions() const { return *actions_; }
  int action_count() const { return static_cast<int>(actions_->size()); }

  Observation observation() const { return build_observation(state_, scenario().window); }
  Observation observation(int window) const { return build_observation(state_, window); }

  /// State as the schedulers will see it this subframe (arrivals applied).
  NetworkState pending_state() const {
    NetworkState s = state_;
    apply_arrivals(s);
    return s;
  }

  StepResult step(int action_index) {
    if (done())
      throw UsageError("env_step: episode already finished at subframe " +
                       std::to_string(state_.subframe));
    if (action_index < 0 || action_index >= action_count())
      throw UsageError("env_step: action index " + std::to_string(action_index) +
                       " outside 0.." + std::to_string(action_count() - 1));
    apply_arrivals(state_);
    StepResult r;
    r.schedule = schedule_subframe(state_, (*actions_)[static_cast<std::size_t>(action_index)]);
    r.reward = r.schedule.reward;
    ++state_.subframe;
    return r;
  }

 private:
  std::shared_ptr<const std::vector<Action>> actions_;
  NetworkState state_;
};

}  // namespace dss
