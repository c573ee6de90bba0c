#pragma once

#include <atomic>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dss/error.hpp"
#include "dss/nn.hpp"
#include "dss/rng.hpp"

namespace dss {

/// Shapes of the representation / dynamics / prediction networks.
struct ModelConfig {
  int obs_dim = 0;
  int action_count = 3;
  int window = 10;
  int state_dim = 10;
  std::vector<int> hidden = {64};  // dense ReLU layers in front of every output

  bool operator==(const ModelConfig&) const = default;

  void validate() const {
    if (obs_dim < 1) throw ConfigError("model: obs_dim must be >= 1");
    if (action_count < 2) throw ConfigError("model: action_count must be >= 2");
    if (state_dim < 1) throw ConfigError("model: state_dim must be >= 1");
    for (int h : hidden)
      if (h < 1) throw ConfigError("model: hidden sizes must be >= 1");
  }
};

/// Invocation counters, used to prove which networks a code path touches.
struct CallCounters {
  std::atomic<std::uint64_t> representation{0};
  std::atomic<std::uint64_t> dynamics{0};
  std::atomic<std::uint64_t> prediction{0};
  std::atomic<std::uint64_t> searches{0};

  void reset() {
    representation = 0;
    dynamics = 0;
    prediction = 0;
    searches = 0;
  }
};

inline CallCounters& call_counters() {
  static CallCounters counters;
  return counters;
}

/// Parameters of h (observation -> state), g (state, action -> state, reward)
/// and f (state -> policy, value).
///
/// Layer order, used by checkpoints and parameter enumeration:
///   h: hidden..., state(tanh)
///   g: hidden..., state(tanh), reward(linear)
///   f: hidden..., policy(softmax), value(linear)
struct ModelWeights {
  ModelConfig config;
  Mlp representation;  // ends with the tanh state layer
  Mlp dynamics_trunk;
  DenseLayer dynamics_state;
  DenseLayer dynamics_reward;
  Mlp prediction_trunk;
  DenseLayer policy_head;
  DenseLayer value_head;

  static ModelWeights zeros(const ModelConfig& cfg) {
    cfg.validate();
    ModelWeights w;
    w.config = cfg;
    auto trunk = [&](int in) {
      Mlp m;
      for (int h : cfg.hidden) {
        m.layers.emplace_back(in, h, Activation::Relu);
        in = h;
      }
      return m;
    };
    const int last = cfg.hidden.empty() ? 0 : cfg.hidden.back();
    w.representation = trunk(cfg.obs_dim);
    w.representation.layers.emplace_back(cfg.hidden.empty() ? cfg.obs_dim : last, cfg.state_dim,
                                         Activation::Tanh);
    w.dynamics_trunk = trunk(cfg.state_dim + cfg.action_count);
    const int g_in = cfg.hidden.empty() ? cfg.state_dim + cfg.action_count : last;
    w.dynamics_state = DenseLayer(g_in, cfg.state_dim, Activation::Tanh);
    w.dynamics_reward = DenseLayer(g_in, 1, Activation::Linear);
    w.prediction_trunk = trunk(cfg.state_dim);
    const int f_in = cfg.hidden.empty() ? cfg.state_dim : last;
    w.policy_head = DenseLayer(f_in, cfg.action_count, Activation::Softmax);
    w.value_head = DenseLayer(f_in, 1, Activation::Linear);
    return w;
  }

  static ModelWeights random(const ModelConfig& cfg, Rng& rng) {
    ModelWeights w = zeros(cfg);
    for (DenseLayer* l : w.layers()) l->init_uniform(rng);
    return w;
  }

  std::vector<DenseLayer*> layers() {
    std::vector<DenseLayer*> out;
    for (auto& l : representation.layers) out.push_back(&l);
    for (auto& l : dynamics_trunk.layers) out.push_back(&l);
    out.push_back(&dynamics_state);
    out.push_back(&dynamics_reward);
    for (auto& l : prediction_trunk.layers) out.push_back(&l);
    out.push_back(&policy_head);
    out.push_back(&value_head);
    return out;
  }

  std::vector<const DenseLayer*> layers() const {
    std::vector<const DenseLayer*> out;
    for (DenseLayer* l : const_cast<ModelWeights*>(this)->layers()) out.push_back(l);
    return out;
  }

  /// Weight then bias of every layer, in layer order.
  std::vector<std::span<double>> parameter_blocks() {
    std::vector<std::span<double>> out;
    for (DenseLayer* l : layers()) {
      out.emplace_back(l->weight.data(), static_cast<std::size_t>(l->weight.size()));
      out.emplace_back(l->bias.data(), static_cast<std::size_t>(l->bias.size()));
    }
    return out;
  }

  std::vector<std::span<const double>> parameter_blocks() const {
    std::vector<std::span<const double>> out;
    for (const DenseLayer* l : layers()) {
      out.emplace_back(l->weight.data(), static_cast<std::size_t>(l->weight.size()));
      out.emplace_back(l->bias.data(), static_cast<std::size_t>(l->bias.size()));
    }
    return out;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& b : parameter_blocks()) n += b.size();
    return n;
  }

  ModelWeights zeros_like() const { return zeros(config); }

  bool all_finite() const {
    for (const DenseLayer* l : layers())
      if (!l->all_finite()) return false;
    return true;
  }
};

/// Dynamics input: state stacked over a one-hot action, column-batched.
inline Matrix dynamics_input(const Matrix& states, std::span<const int> actions, int action_count) {
  Matrix x = Matrix::Zero(states.rows() + action_count, states.cols());
  x.topRows(states.rows()) = states;
  for (Eigen::Index c = 0; c < states.cols(); ++c)
    x(states.rows() + actions[static_cast<std::size_t>(c)], c) = 1.0;
  return x;
}

/// Encodes an observation into the initial hidden state s0 in [-1, 1]^state_dim.
inline Vector represent(const ModelWeights& w, std::span<const double> observation) {
  if (static_cast<int>(observation.size()) != w.config.obs_dim)
    throw ConfigError("represent: observation has " + std::to_string(observation.size()) +
                      " entries, model expects " + std::to_string(w.config.obs_dim));
  ++call_counters().representation;
  const Eigen::Map<const Vector> x(observation.data(), static_cast<Eigen::Index>(observation.size()));
  return w.representation.forward(x);
}

struct DynamicsOutput {
  Vector state;
  double reward = 0.0;
};

inline DynamicsOutput dynamics(const ModelWeights& w, const Vector& state, int action) {
  if (action < 0 || action >= w.config.action_count)
    throw ConfigError("dynamics: invalid action index " + std::to_string(action));
  ++call_counters().dynamics;
  const int a[1] = {action};
  const Matrix h = w.dynamics_trunk.forward(dynamics_input(state, a, w.config.action_count));
  return {w.dynamics_state.forward(h).col(0), w.dynamics_reward.forward(h)(0, 0)};
}

struct PredictionOutput {
  Vector policy;
  double value = 0.0;
};

inline PredictionOutput predict(const ModelWeights& w, const Vector& state) {
  if (state.size() != w.config.state_dim)
    throw ConfigError("predict: state dimension " + std::to_string(state.size()) +
                      " != " + std::to_string(w.config.state_dim));
  ++call_counters().prediction;
  const Matrix h = w.prediction_trunk.forward(state);
  return {w.policy_head.forward(h).col(0), w.value_head.forward(h)(0, 0)};
}

}  // namespace dss
