#pragma once

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "dss/error.hpp"
#include "dss/model.hpp"
#include "dss/nn.hpp"

namespace dss {

/// One training sequence: the observation at t, the K actions taken from t
/// on, and targets for unroll steps 0..K (policy, value) and 1..K (reward).
/// reward_targets[k] is the reward observed after actions[k].
struct TrainingSample {
  std::vector<double> observation;
  std::vector<int> actions;
  std::vector<Vector> policy_targets;
  std::vector<double> value_targets;
  std::vector<double> reward_targets;
};

using Batch = std::vector<TrainingSample>;

struct LossBreakdown {
  double total = 0.0;
  double value = 0.0;
  double policy = 0.0;
  double reward = 0.0;
};

namespace detail {

inline int validate_batch(const ModelWeights& w, const Batch& batch) {
  if (batch.empty()) throw ConfigError("loss: empty batch");
  const auto k = batch.front().actions.size();
  for (const auto& s : batch) {
    if (static_cast<int>(s.observation.size()) != w.config.obs_dim)
      throw ConfigError("loss: observation dimension mismatch");
    if (s.actions.size() != k || s.policy_targets.size() != k + 1 ||
        s.value_targets.size() != k + 1 || s.reward_targets.size() != k)
      throw ConfigError("loss: target/sequence length mismatch");
    for (int a : s.actions)
      if (a < 0 || a >= w.config.action_count) throw ConfigError("loss: invalid action");
    for (const auto& p : s.policy_targets)
      if (p.size() != w.config.action_count) throw ConfigError("loss: policy target size mismatch");
  }
  return static_cast<int>(k);
}

inline Matrix log_softmax_columns(const Matrix& z) {
  Matrix out(z.rows(), z.cols());
  for (Eigen::Index c = 0; c < z.cols(); ++c) {
    const double m = z.col(c).maxCoeff();
    const double lse = m + std::log((z.col(c).array() - m).exp().sum());
    out.col(c) = z.col(c).array() - lse;
  }
  return out;
}

/// Forward activations of one unrolled batch, kept for backpropagation.
struct UnrollCache {
  std::vector<Matrix> repr_acts;
  std::vector<Matrix> states;                // s_0..s_K
  std::vector<std::vector<Matrix>> f_acts;   // per step, prediction trunk
  std::vector<Matrix> log_policy;            // per step
  std::vector<Matrix> values;                // per step, 1 x B
  std::vector<std::vector<Matrix>> g_acts;   // per step 0..K-1, dynamics trunk
  std::vector<Matrix> rewards;               // index k+1 holds r_{k+1}; [0] unused
};

inline UnrollCache unroll(const ModelWeights& w, const Batch& batch, int k_steps) {
  const auto b = static_cast<Eigen::Index>(batch.size());
  Matrix obs(w.config.obs_dim, b);
  for (Eigen::Index c = 0; c < b; ++c)
    obs.col(c) = Eigen::Map<const Vector>(batch[static_cast<std::size_t>(c)].observation.data(),
                                          w.config.obs_dim);
  UnrollCache u;
  u.repr_acts = w.representation.forward_all(obs);
  u.states.push_back(u.repr_acts.back());
  u.rewards.emplace_back();
  std::vector<int> acts(static_cast<std::size_t>(b));
  for (int k = 0; k <= k_steps; ++k) {
    u.f_acts.push_back(w.prediction_trunk.forward_all(u.states[static_cast<std::size_t>(k)]));
    const Matrix& h = u.f_acts.back().back();
    u.log_policy.push_back(log_softmax_columns(w.policy_head.preactivation(h)));
    u.values.push_back(w.value_head.forward(h));
    if (k == k_steps) break;
    for (Eigen::Index c = 0; c < b; ++c)
      acts[static_cast<std::size_t>(c)] =
          batch[static_cast<std::size_t>(c)].actions[static_cast<std::size_t>(k)];
    u.g_acts.push_back(w.dynamics_trunk.forward_all(
        dynamics_input(u.states[static_cast<std::size_t>(k)], acts, w.config.action_count)));
    const Matrix& g = u.g_acts.back().back();
    u.states.push_back(w.dynamics_state.forward(g));
    u.rewards.push_back(w.dynamics_reward.forward(g));
  }
  return u;
}

}  // namespace detail

/// Mean over the batch of
///   sum_{k=0..K} (v_k - z_k)^2 + CE(pi_k, p_k)  +  sum_{k=1..K} (r_k - u_k)^2
/// with step-k predictions from unrolling g from h(observation).
inline LossBreakdown compute_loss(const ModelWeights& w, const Batch& batch) {
  const int k_steps = detail::validate_batch(w, batch);
  const auto u = detail::unroll(w, batch, k_steps);
  LossBreakdown out;
  for (std::size_t c = 0; c < batch.size(); ++c) {
    const auto& s = batch[c];
    const auto col = static_cast<Eigen::Index>(c);
    for (int k = 0; k <= k_steps; ++k) {
      const auto ki = static_cast<std::size_t>(k);
      const double dv = u.values[ki](0, col) - s.value_targets[ki];
      out.value += dv * dv;
      out.policy -= s.policy_targets[ki].dot(u.log_policy[ki].col(col));
      if (k > 0) {
        const double dr = u.rewards[ki](0, col) - s.reward_targets[ki - 1];
        out.reward += dr * dr;
      }
    }
  }
  const double n = static_cast<double>(batch.size());
  out.value /= n;
  out.policy /= n;
  out.reward /= n;
  out.total = out.value + out.policy + out.reward;
  return out;
}

/// Loss plus its gradient, accumulated into `grad` (same shape as `w`).
/// Gradient flowing from dynamics step k+1 back into s_k (k >= 1) is
/// multiplied by `dynamics_gradient_scale`; 1.0 gives the exact gradient.
inline LossBreakdown loss_and_gradient(const ModelWeights& w, const Batch& batch,
                                       ModelWeights& grad, double dynamics_gradient_scale = 0.5) {
  const int k_steps = detail::validate_batch(w, batch);
  const auto u = detail::unroll(w, batch, k_steps);
  const auto b = static_cast<Eigen::Index>(batch.size());
  const double inv_b = 1.0 / static_cast<double>(b);
  const int n_act = w.config.action_count;

  LossBreakdown out;
  std::vector<Matrix> d_state(static_cast<std::size_t>(k_steps) + 1);
  for (int k = k_steps; k >= 0; --k) {
    const auto ki = static_cast<std::size_t>(k);
    Matrix d_value(1, b), d_logits(n_act, b);
    for (Eigen::Index c = 0; c < b; ++c) {
      const auto& s = batch[static_cast<std::size_t>(c)];
      const double dv = u.values[ki](0, c) - s.value_targets[ki];
      out.value += dv * dv;
      d_value(0, c) = 2.0 * dv * inv_b;
      const Vector& pi = s.policy_targets[ki];
      out.policy -= pi.dot(u.log_policy[ki].col(c));
      d_logits.col(c) =
          (u.log_policy[ki].col(c).array().exp() * pi.sum() - pi.array()).matrix() * inv_b;
      if (k > 0) {
        const double dr = u.rewards[ki](0, c) - s.reward_targets[ki - 1];
        out.reward += dr * dr;
      }
    }
    const Matrix& h = u.f_acts[ki].back();
    Matrix dh = w.policy_head.backward(h, d_logits, grad.policy_head);
    dh += w.value_head.backward(h, d_value, grad.value_head);
    Matrix ds = w.prediction_trunk.backward(u.f_acts[ki], dh, grad.prediction_trunk);

    if (k < k_steps) {
      // g at step k produced s_{k+1} and r_{k+1}.
      const Matrix& g = u.g_acts[ki].back();
      const Matrix dz_state =
          activation_backward(Activation::Tanh, u.states[ki + 1], d_state[ki + 1]);
      Matrix dg = w.dynamics_state.backward(g, dz_state, grad.dynamics_state);
      // r_{k+1} comes out of this g application.
      Matrix d_r(1, b);
      for (Eigen::Index c = 0; c < b; ++c) {
        const double dr =
            u.rewards[ki + 1](0, c) - batch[static_cast<std::size_t>(c)].reward_targets[ki];
        d_r(0, c) = 2.0 * dr * inv_b;
      }
      dg += w.dynamics_reward.backward(g, d_r, grad.dynamics_reward);
      const Matrix dx = w.dynamics_trunk.backward(u.g_acts[ki], dg, grad.dynamics_trunk);
      const double scale = k >= 1 ? dynamics_gradient_scale : 1.0;
      ds += scale * dx.topRows(w.config.state_dim);
    }
    d_state[ki] = std::move(ds);
  }
  w.representation.backward(u.repr_acts, d_state[0], grad.representation);

  out.value *= inv_b;
  out.policy *= inv_b;
  out.reward *= inv_b;
  out.total = out.value + out.policy + out.reward;
  return out;
}

inline double gradient_norm(const ModelWeights& grad) {
  double sq = 0.0;
  for (const auto& blk : grad.parameter_blocks())
    for (double g : blk) sq += g * g;
  return std::sqrt(sq);
}

struct TrainStepOptions {
  double dynamics_gradient_scale = 0.5;
  double clip_norm = 5.0;  // <= 0 disables clipping
};

/// One BPTT + Adam update on `batch`. Throws TrainingError on a non-finite
/// loss or gradient, leaving `w` untouched.
inline LossBreakdown bptt_step(ModelWeights& w, Adam& adam, const Batch& batch,
                               const TrainStepOptions& opts = {}) {
  ModelWeights grad = w.zeros_like();
  const LossBreakdown loss = loss_and_gradient(w, batch, grad, opts.dynamics_gradient_scale);
  const double norm = gradient_norm(grad);
  if (!std::isfinite(loss.total) || !std::isfinite(norm)) {
    std::ostringstream msg;
    msg << "non-finite training loss (value " << loss.value << ", policy " << loss.policy
        << ", reward " << loss.reward << ", grad norm " << norm << ")";
    throw TrainingError(msg.str());
  }
  if (opts.clip_norm > 0 && norm > opts.clip_norm) {
    const double s = opts.clip_norm / norm;
    for (auto blk : grad.parameter_blocks())
      for (double& g : blk) g *= s;
  }
  adam.step(w.parameter_blocks(), static_cast<const ModelWeights&>(grad).parameter_blocks());
  return loss;
}

// ---------------------------------------------------------------------------
// Gradient verification

/// Shifts biases of ReLU units whose pre-activation lies within `margin` of
/// zero for any sample/unroll step, so finite differences do not straddle a kink.
inline void nudge_relu_kinks(ModelWeights& w, const Batch& batch, double margin = 1e-3,
                             int max_passes = 50) {
  const int k_steps = detail::validate_batch(w, batch);
  for (int pass = 0; pass < max_passes; ++pass) {
    const auto u = detail::unroll(w, batch, k_steps);
    bool moved = false;
    auto check = [&](Mlp& mlp, const std::vector<Matrix>& acts) {
      for (std::size_t i = 0; i < mlp.layers.size(); ++i) {
        auto& l = mlp.layers[i];
        if (l.activation != Activation::Relu) continue;
        const Matrix z = l.preactivation(acts[i]);
        for (Eigen::Index r = 0; r < z.rows(); ++r)
          if ((z.row(r).array().abs() < margin).any()) {
            l.bias(r) += 10.0 * margin;
            moved = true;
          }
      }
    };
    check(w.representation, u.repr_acts);
    for (const auto& a : u.f_acts) check(w.prediction_trunk, a);
    for (const auto& a : u.g_acts) check(w.dynamics_trunk, a);
    if (!moved) return;
  }
}

struct GradientCheckReport {
  double max_relative_error = 0.0;
  std::vector<double> per_layer;  // max relative error per layer, layer order
  std::size_t checked = 0;
};

/// Compares the exact BPTT gradient with central differences (step `h`) on up
/// to `per_block` parameters of every weight/bias block.
inline GradientCheckReport gradient_check(const ModelWeights& weights, const Batch& batch,
                                          double h = 1e-5, int per_block = 16,
                                          std::uint64_t seed = 7) {
  ModelWeights w = weights;
  nudge_relu_kinks(w, batch);
  ModelWeights grad = w.zeros_like();
  loss_and_gradient(w, batch, grad, 1.0);

  Rng rng(seed);
  auto params = w.parameter_blocks();
  const auto grads = static_cast<const ModelWeights&>(grad).parameter_blocks();
  GradientCheckReport rep;
  rep.per_layer.assign(params.size() / 2, 0.0);
  for (std::size_t b = 0; b < params.size(); ++b) {
    const auto n = static_cast<std::int64_t>(params[b].size());
    const int count = static_cast<int>(std::min<std::int64_t>(per_block, n));
    for (int i = 0; i < count; ++i) {
      const auto idx = static_cast<std::size_t>(count == n ? i : uniform_int(rng, 0, n - 1));
      double& p = params[b][idx];
      const double orig = p;
      p = orig + h;
      const double up = compute_loss(w, batch).total;
      p = orig - h;
      const double down = compute_loss(w, batch).total;
      p = orig;
      const double numeric = (up - down) / (2.0 * h);
      const double analytic = grads[b][idx];
      const double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-6});
      const double rel = std::abs(numeric - analytic) / denom;
      rep.per_layer[b / 2] = std::max(rep.per_layer[b / 2], rel);
      rep.max_relative_error = std::max(rep.max_relative_error, rel);
      ++rep.checked;
    }
  }
  return rep;
}

}  // namespace dss
