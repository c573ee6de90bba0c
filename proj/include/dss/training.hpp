#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <deque>
#include <exception>
#include <functional>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "dss/environment.hpp"
#include "dss/error.hpp"
#include "dss/evaluation.hpp"
#include "dss/learner.hpp"
#include "dss/mcts.hpp"
#include "dss/model.hpp"
#include "dss/muzero_agent.hpp"
#include "dss/scenario.hpp"

namespace dss {

struct TrainHyperparams {
  int iterations = 15;
  int episodes = 100;
  int simulations = 64;
  int train_steps = 9000;
  int batch_size = 32;
  int unroll = 3;
  int td_steps = 16;
  double discount = 0.99;
  double learning_rate = 1e-4;
  int window = 10;
  int replay_capacity = 100;
  double temperature = 1.0;
  double clip_norm = 5.0;
  double dynamics_gradient_scale = 0.5;
  bool root_noise = true;
  int state_dim = 10;
  int hidden = 64;
  int workers = 1;
  bool randomize = false;  // sample training environments around the pinned scenario

  void validate() const {
    auto positive = [](int v, const char* name) {
      if (v < 1) throw ConfigError(std::string("train.") + name + " must be >= 1");
    };
    if (iterations < 0) throw ConfigError("train.iterations must be >= 0");
    positive(episodes, "episodes");
    positive(simulations, "simulations");
    if (train_steps < 0) throw ConfigError("train.train_steps must be >= 0");
    positive(batch_size, "batch_size");
    positive(unroll, "unroll");
    positive(td_steps, "td_steps");
    positive(window, "window");
    positive(replay_capacity, "replay_capacity");
    positive(state_dim, "state_dim");
    positive(hidden, "hidden");
    positive(workers, "workers");
    if (td_steps < unroll) throw ConfigError("train.td_steps must be >= train.unroll");
    if (!(discount > 0.0 && discount <= 1.0)) throw ConfigError("train.discount must be in (0, 1]");
    if (!(learning_rate > 0.0)) throw ConfigError("train.learning_rate must be > 0");
    if (temperature < 0.0) throw ConfigError("train.temperature must be >= 0");
  }

  SearchConfig search() const {
    SearchConfig s;
    s.simulations = simulations;
    s.discount = discount;
    s.root_noise = root_noise;
    return s;
  }
};

/// One recorded episode. Immutable once stored in the replay buffer.
struct Trajectory {
  std::string scenario;
  std::uint64_t seed = 0;
  std::vector<std::vector<double>> observations;
  std::vector<int> actions;
  std::vector<double> rewards;
  std::vector<Vector> policies;
  std::vector<double> root_values;

  int length() const { return static_cast<int>(actions.size()); }
  double score() const {
    double s = 0.0;
    for (double r : rewards) s += r;
    return s;
  }
};

/// z_t = sum_{k < min(td_steps, L - t)} discount^k * u_{t+k}; bootstrap 0.
inline double compute_value_target(const Trajectory& traj, int t, double discount, int td_steps) {
  if (t < 0 || t >= traj.length())
    throw ConfigError("compute_value_target: t=" + std::to_string(t) + " outside the trajectory");
  const int n = std::min(td_steps, traj.length() - t);
  double z = 0.0;
  double g = 1.0;
  for (int k = 0; k < n; ++k) {
    z += g * traj.rewards[static_cast<std::size_t>(t + k)];
    g *= discount;
  }
  return z;
}

/// Training sequence starting at `t`. Steps past the episode end are an
/// absorbing state: reward target 1, uniform policy target, value target from
/// the remaining real rewards (none, so 0); their actions are drawn uniformly.
inline TrainingSample make_training_sample(const Trajectory& traj, int t, int unroll,
                                           double discount, int td_steps, int action_count,
                                           Rng& rng) {
  TrainingSample s;
  s.observation = traj.observations[static_cast<std::size_t>(t)];
  const int len = traj.length();
  for (int k = 0; k <= unroll; ++k) {
    const int i = t + k;
    if (i < len) {
      s.policy_targets.push_back(traj.policies[static_cast<std::size_t>(i)]);
      s.value_targets.push_back(compute_value_target(traj, i, discount, td_steps));
    } else {
      s.policy_targets.push_back(Vector::Constant(action_count, 1.0 / action_count));
      s.value_targets.push_back(0.0);
    }
    if (k == unroll) break;
    if (i < len) {
      s.actions.push_back(traj.actions[static_cast<std::size_t>(i)]);
      s.reward_targets.push_back(traj.rewards[static_cast<std::size_t>(i)]);
    } else {
      s.actions.push_back(static_cast<int>(uniform_int(rng, 0, action_count - 1)));
      s.reward_targets.push_back(1.0);
    }
  }
  return s;
}

/// Most recent `capacity` episodes; uniform (episode, position) sampling.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(int capacity = 100) : capacity_(capacity) {
    if (capacity < 1) throw ConfigError("replay capacity must be >= 1");
  }

  void push(Trajectory traj) {
    if (traj.length() == 0) throw ConfigError("replay: empty trajectory");
    items_.push_back(std::make_shared<const Trajectory>(std::move(traj)));
    while (static_cast<int>(items_.size()) > capacity_) items_.pop_front();
  }

  int size() const { return static_cast<int>(items_.size()); }
  int capacity() const { return capacity_; }
  bool empty() const { return items_.empty(); }
  const Trajectory& at(int i) const { return *items_[static_cast<std::size_t>(i)]; }

  struct Draw {
    int episode;
    int position;
  };
  Draw draw(Rng& rng) const {
    if (items_.empty()) throw UsageError("replay: sampling from an empty buffer");
    const int e = static_cast<int>(uniform_int(rng, 0, size() - 1));
    const int t = static_cast<int>(uniform_int(rng, 0, at(e).length() - 1));
    return {e, t};
  }

 private:
  int capacity_;
  std::deque<std::shared_ptr<const Trajectory>> items_;
};

inline Batch sample_batch(const ReplayBuffer& buffer, int batch_size, int unroll, double discount,
                          int td_steps, int action_count, Rng& rng) {
  Batch b;
  b.reserve(static_cast<std::size_t>(batch_size));
  for (int i = 0; i < batch_size; ++i) {
    const auto d = buffer.draw(rng);
    b.push_back(make_training_sample(buffer.at(d.episode), d.position, unroll, discount, td_steps,
                                     action_count, rng));
  }
  return b;
}

/// Output of a planner at one subframe.
struct PlannerOutput {
  Vector policy;
  double root_value = 0.0;
};

/// Plans with MCTS over the learned model.
struct MctsPlanner {
  const ModelWeights* weights;
  SearchConfig config;

  PlannerOutput operator()(const std::vector<double>& observation, const Environment& env,
                           Rng& rng) const {
    const auto r = run_search(*weights, observation, config, rng, env.remaining());
    return {r.policy, r.root_value};
  }
};

/// Plays `env` to the end: observe, plan, sample an action at `temperature`, step.
template <typename Planner>
Trajectory generate_episode(Environment env, const Planner& planner, double temperature,
                            int window, Rng& rng) {
  Trajectory traj;
  traj.scenario = env.scenario().name;
  traj.seed = env.state().rng_seed;
  while (!env.done()) {
    auto obs = env.observation(window).values;
    const PlannerOutput plan = planner(obs, env, rng);
    const int a = sample_action(plan.policy, temperature, rng);
    const double u = env.step(a).reward;
    traj.observations.push_back(std::move(obs));
    traj.actions.push_back(a);
    traj.rewards.push_back(u);
    traj.policies.push_back(plan.policy);
    traj.root_values.push_back(plan.root_value);
  }
  return traj;
}

struct IterationReport {
  int iteration = 0;
  double eval_score = 0.0;
  double train_loss = 0.0;  // mean total loss over the iteration's steps; NaN with 0 steps
  LossBreakdown mean_loss;
  double mean_episode_return = 0.0;
  int buffer_size = 0;
  double wall_ms = 0.0;
  std::vector<int> eval_actions;
};

inline ModelConfig model_config_for(const ScenarioConfig& s, const TrainHyperparams& hp) {
  ModelConfig c;
  c.obs_dim = Observation::dim(s.num_users(), hp.window);
  c.action_count = s.action_count;
  c.window = hp.window;
  c.state_dim = hp.state_dim;
  c.hidden = {hp.hidden};
  return c;
}

/// Training loop: each iteration generates episodes with MCTS on sampled
/// environments, runs `train_steps` BPTT updates from the replay buffer and
/// evaluates the greedy agent on the pinned scenario.
///
/// Seeds: weights derive_seed(seed, {1}); episode e of iteration i uses
/// derive_seed(seed, {2, i, e}) for its environment draw, environment and
/// search; the training batches of iteration i use derive_seed(seed, {3, i}).
class Trainer {
 public:
  Trainer(ScenarioConfig pinned, TrainHyperparams hp, std::uint64_t seed,
          RandomizationSpec randomization = {})
      : pinned_(std::move(pinned)),
        hp_(hp),
        seed_(seed),
        randomization_(randomization),
        buffer_(hp.replay_capacity) {
    hp_.validate();
    pinned_.validate();
    Rng init(derive_seed(seed_, {1}));
    weights_ = ModelWeights::random(model_config_for(pinned_, hp_), init);
    AdamConfig ac;
    ac.learning_rate = hp_.learning_rate;
    adam_ = Adam(ac);
  }

  const ModelWeights& weights() const { return weights_; }
  void set_weights(ModelWeights w) {
    if (!(w.config == weights_.config)) throw ConfigError("trainer: weight shapes differ");
    weights_ = std::move(w);
  }
  const ReplayBuffer& buffer() const { return buffer_; }
  const TrainHyperparams& hyperparams() const { return hp_; }
  int iteration() const { return iteration_; }

  /// Environment for episode `e` of iteration `i`.
  ScenarioConfig episode_scenario(int i, int e) const {
    if (!hp_.randomize) return pinned_;
    const auto iu = static_cast<std::uint64_t>(i);
    const auto eu = static_cast<std::uint64_t>(e);
    Rng rng(derive_seed(seed_, {2, iu, eu, 0}));
    return sample_environment(pinned_, randomization_, rng);
  }

  Trajectory play_episode(int i, int e) const {
    const std::uint64_t s =
        derive_seed(seed_, {2, static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(e)});
    Rng rng(derive_seed(s, {1}));
    MctsPlanner planner{&weights_, hp_.search()};
    return generate_episode(Environment(episode_scenario(i, e), derive_seed(s, {2})), planner,
                            hp_.temperature, hp_.window, rng);
  }

  IterationReport train_iteration() {
    const auto t0 = std::chrono::steady_clock::now();
    IterationReport rep;
    rep.iteration = iteration_;

    std::vector<Trajectory> episodes(static_cast<std::size_t>(hp_.episodes));
    const int workers = std::min(hp_.workers, hp_.episodes);
    if (workers <= 1) {
      for (int e = 0; e < hp_.episodes; ++e)
        episodes[static_cast<std::size_t>(e)] = play_episode(iteration_, e);
    } else {
      std::vector<std::thread> pool;
      std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
      for (int k = 0; k < workers; ++k)
        pool.emplace_back([&, k] {
          try {
            for (int e = k; e < hp_.episodes; e += workers)
              episodes[static_cast<std::size_t>(e)] = play_episode(iteration_, e);
          } catch (...) {
            errors[static_cast<std::size_t>(k)] = std::current_exception();
          }
        });
      for (auto& t : pool) t.join();
      for (auto& err : errors)
        if (err) std::rethrow_exception(err);
    }
    double ret = 0.0;
    for (auto& ep : episodes) {
      ret += ep.score();
      buffer_.push(std::move(ep));
    }
    rep.mean_episode_return = ret / hp_.episodes;
    rep.buffer_size = buffer_.size();

    Rng batch_rng(derive_seed(seed_, {3, static_cast<std::uint64_t>(iteration_)}));
    TrainStepOptions opts;
    opts.clip_norm = hp_.clip_norm;
    opts.dynamics_gradient_scale = hp_.dynamics_gradient_scale;
    for (int step = 0; step < hp_.train_steps; ++step) {
      const Batch batch = sample_batch(buffer_, hp_.batch_size, hp_.unroll, hp_.discount,
                                       hp_.td_steps, pinned_.action_count, batch_rng);
      const LossBreakdown l = bptt_step(weights_, adam_, batch, opts);
      rep.mean_loss.total += l.total;
      rep.mean_loss.value += l.value;
      rep.mean_loss.policy += l.policy;
      rep.mean_loss.reward += l.reward;
    }
    if (hp_.train_steps > 0) {
      const double n = hp_.train_steps;
      rep.mean_loss.total /= n;
      rep.mean_loss.value /= n;
      rep.mean_loss.policy /= n;
      rep.mean_loss.reward /= n;
      rep.train_loss = rep.mean_loss.total;
    } else {
      rep.train_loss = std::nan("");
    }

    const auto ev = evaluate();
    rep.eval_score = ev.score;
    rep.eval_actions = ev.actions;
    rep.wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    ++iteration_;
    return rep;
  }

  /// Greedy rollout of the current weights on the pinned scenario.
  EpisodeResult evaluate() const {
    MuZeroAgent agent(std::make_shared<const ModelWeights>(weights_));
    return run_episode(agent, Environment(pinned_, 0));
  }

 private:
  ScenarioConfig pinned_;
  TrainHyperparams hp_;
  std::uint64_t seed_;
  RandomizationSpec randomization_;
  ReplayBuffer buffer_;
  ModelWeights weights_;
  Adam adam_;
  int iteration_ = 0;
};

}  // namespace dss
