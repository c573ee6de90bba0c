#pragma once

#include <algorithm>
#include <climits>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dss/error.hpp"
#include "dss/radio.hpp"
#include "dss/rng.hpp"

namespace dss {

/// One UE: its RAT, periodic traffic source and delay-weight parameters.
struct UserConfig {
  int user_id = 0;
  Rat rat = Rat::NR;
  int arrival_period = 1;       // subframes between packets
  std::int64_t packet_bits = 0;
  int first_arrival = 0;        // subframe of the first packet
  int step_delay = 1;           // subframes before the step penalty applies
  double step_weight = 5.0;
  double weight_slope = 1e-5;   // per subframe waited
  double distance_m = 100.0;
  // Pinned capacities in bits per PRB per subframe. `bits_per_prb_override`
  // is used whenever set; `bits_per_prb_alone_override` replaces it for NR
  // users in subframes without any LTE transmission.
  std::optional<double> bits_per_prb_override;
  std::optional<double> bits_per_prb_alone_override;

  void validate() const {
    const std::string who = "user " + std::to_string(user_id) + ": ";
    if (arrival_period < 1) throw ConfigError(who + "arrival_period must be >= 1");
    if (packet_bits < 0) throw ConfigError(who + "packet_bits must be >= 0");
    if (first_arrival < 0) throw ConfigError(who + "first_arrival must be >= 0");
    if (step_delay < 1) throw ConfigError(who + "step_delay must be >= 1");
    if (step_weight < 0) throw ConfigError(who + "step_weight must be >= 0");
    if (!(weight_slope > 0)) throw ConfigError(who + "weight_slope must be > 0");
    if (!(distance_m >= 1.0)) throw ConfigError(who + "distance_m must be >= 1");
    if (bits_per_prb_override && *bits_per_prb_override < 0)
      throw ConfigError(who + "bits_per_prb_override must be >= 0");
    if (bits_per_prb_alone_override && *bits_per_prb_alone_override < 0)
      throw ConfigError(who + "bits_per_prb_alone_override must be >= 0");
  }
};

/// Periodic high-interference on one user: subframes p with
/// (p - phase) mod period == 0 carry nothing for that user.
struct InterferencePattern {
  int user = 0;
  int period = 1;
  int phase = 0;

  bool hits(int p) const { return ((p - phase) % period + period) % period == 0; }
};

struct ScenarioConfig {
  std::string name = "custom";
  RadioParams radio;
  std::vector<UserConfig> users;
  // MBSFN flag per subframe of a repeating pattern; empty means no MBSFN.
  std::vector<bool> mbsfn_pattern;
  std::vector<InterferencePattern> interference;
  int action_count = 3;
  int episode_length = 16;
  int window = 10;
  bool rayleigh_fading = false;

  int num_users() const { return static_cast<int>(users.size()); }

  bool is_mbsfn(int p) const {
    if (mbsfn_pattern.empty()) return false;
    return mbsfn_pattern[static_cast<std::size_t>(p) % mbsfn_pattern.size()];
  }

  bool is_interfered(int user_index, int p) const {
    return std::any_of(interference.begin(), interference.end(), [&](const auto& ip) {
      return ip.user == user_index && ip.hits(p);
    });
  }

  std::int64_t max_packet_bits() const {
    std::int64_t m = 0;
    for (const auto& u : users) m = std::max(m, u.packet_bits);
    return m;
  }

  void validate() const {
    radio.validate();
    if (users.empty()) throw ConfigError("scenario needs at least one user");
    for (std::size_t i = 0; i < users.size(); ++i) {
      users[i].validate();
      if (users[i].user_id != static_cast<int>(i))
        throw ConfigError("user ids must be 0..J-1 in order");
    }
    for (const auto& ip : interference) {
      if (ip.period < 1) throw ConfigError("interference period must be >= 1");
      if (ip.user < 0 || ip.user >= num_users())
        throw ConfigError("interference refers to unknown user " + std::to_string(ip.user));
    }
    if (action_count < 2) throw ConfigError("action_count must be >= 2");
    if (episode_length < 1) throw ConfigError("episode_length must be >= 1");
    if (window < 1) throw ConfigError("window must be >= 1");
  }
};

namespace detail {

inline UserConfig make_user(int id, Rat rat, int period, std::int64_t bits, int first,
                            int delay, double step_weight, double bits_per_prb) {
  UserConfig u;
  u.user_id = id;
  u.rat = rat;
  u.arrival_period = period;
  u.packet_bits = bits;
  u.first_arrival = first;
  u.step_delay = delay;
  u.step_weight = step_weight;
  u.weight_slope = 1e-5;
  u.distance_m = 100.0;
  u.bits_per_prb_override = bits_per_prb;
  return u;
}

}  // namespace detail

// Capacity constant used by the first three reproduction scenarios.
inline constexpr double kDefaultBitsPerPrb = 1000.0;

// Full-band transport block sizes of the time-multiplexing scenario.
inline constexpr double kNrAloneFullBandBits = 14112.0;
inline constexpr double kNrSharedFullBandBits = 12576.0;

/// The four reproduction scenarios. `action_count` 0 keeps the scenario default.
inline ScenarioConfig build_scenario(int id, int action_count = 0) {
  using detail::make_user;
  ScenarioConfig s;
  switch (id) {
    case 1:
      s.name = "scenario1-mbsfn";
      s.users = {make_user(0, Rat::NR, 4, 45000, 0, 3, 5.0, kDefaultBitsPerPrb),
                 make_user(1, Rat::LTE, 4, 15000, 0, 3, 5.0, kDefaultBitsPerPrb)};
      s.mbsfn_pattern = {false, false, true, true};
      s.action_count = 3;
      break;
    case 2:
      s.name = "scenario2-interference";
      s.users = {make_user(0, Rat::NR, 2, 16000, 0, 2, 2.0, kDefaultBitsPerPrb),
                 make_user(1, Rat::LTE, 2, 14000, 0, 2, 2.0, kDefaultBitsPerPrb)};
      s.interference = {InterferencePattern{1, 3, 0}};
      s.action_count = 2;
      break;
    case 3:
      // Single arrival per episode: period equals the episode length.
      s.name = "scenario3-mixed-services";
      s.users = {make_user(0, Rat::NR, 16, 90000, 1, 5, 5.0, kDefaultBitsPerPrb),
                 make_user(1, Rat::LTE, 16, 90000, 1, 10, 5.0, kDefaultBitsPerPrb)};
      s.action_count = 3;
      break;
    case 4: {
      s.name = "scenario4-time-multiplexing";
      const double prbs = s.radio.total_prbs;
      auto nr = make_user(0, Rat::NR, 2, 14000, 0, 2, 5.0, kNrSharedFullBandBits / prbs);
      nr.bits_per_prb_alone_override = kNrAloneFullBandBits / prbs;
      // LTE has 12 data symbols against NR's 13 when NR is alone.
      auto lte = make_user(1, Rat::LTE, 2, 10000, 0, 2, 5.0,
                           kNrAloneFullBandBits * kLteDataSymbols / kNrAloneDataSymbols / prbs);
      s.users = {nr, lte};
      s.action_count = 3;
      break;
    }
    default:
      throw ConfigError("unknown scenario id " + std::to_string(id) + " (expected 1..4)");
  }
  if (action_count != 0) s.action_count = action_count;
  s.validate();
  return s;
}

template <typename T>
struct Range {
  T lo;
  T hi;
};

/// Ranges for randomized training environments, relative to a base scenario.
struct RandomizationSpec {
  static constexpr int kWholePeriod = INT_MAX;

  Range<double> packet_scale{0.5, 1.5};
  // Added to first_arrival (mod arrival period); the upper end is capped at period-1.
  Range<int> phase_shift{0, kWholePeriod};
  // nullopt keeps the base distances.
  std::optional<Range<double>> distance_m = Range<double>{50.0, 500.0};

  static RandomizationSpec none() {
    RandomizationSpec r;
    r.packet_scale = {1.0, 1.0};
    r.phase_shift = {0, 0};
    r.distance_m = std::nullopt;
    return r;
  }
};

/// Draws one training environment around `base`. Deterministic in `rng`.
inline ScenarioConfig sample_environment(const ScenarioConfig& base, const RandomizationSpec& spec,
                                         Rng& rng) {
  if (spec.packet_scale.lo > spec.packet_scale.hi || spec.packet_scale.lo < 0)
    throw ConfigError("randomization: empty or negative packet_scale range");
  if (spec.phase_shift.lo > spec.phase_shift.hi || spec.phase_shift.lo < 0)
    throw ConfigError("randomization: empty or negative phase_shift range");
  if (spec.distance_m &&
      (spec.distance_m->lo > spec.distance_m->hi || spec.distance_m->lo < 1.0))
    throw ConfigError("randomization: empty distance range or below 1 m");

  ScenarioConfig s = base;
  for (auto& u : s.users) {
    const double scale =
        spec.packet_scale.lo + (spec.packet_scale.hi - spec.packet_scale.lo) * uniform01(rng);
    u.packet_bits = static_cast<std::int64_t>(std::llround(static_cast<double>(u.packet_bits) * scale));

    const int hi = std::min(spec.phase_shift.hi, u.arrival_period - 1);
    const int lo = std::min(spec.phase_shift.lo, hi);
    const int shift = static_cast<int>(uniform_int(rng, lo, hi));
    if (shift != 0) u.first_arrival = (u.first_arrival + shift) % u.arrival_period;

    if (spec.distance_m)
      u.distance_m =
          spec.distance_m->lo + (spec.distance_m->hi - spec.distance_m->lo) * uniform01(rng);
  }
  s.validate();
  return s;
}

}  // namespace dss
