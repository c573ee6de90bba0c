#pragma once

#include <memory>
#include <string>

#include "dss/agents.hpp"
#include "dss/model.hpp"

namespace dss {

/// Execution-phase controller: s0 = h(o), (p, v) = f(s0), act = argmax p.
/// Never calls the dynamics network and never searches.
inline int muzero_act(const ModelWeights& w, std::span<const double> observation) {
  const auto pred = predict(w, represent(w, observation));
  Eigen::Index best = 0;
  pred.policy.maxCoeff(&best);  // first maximum on ties
  return static_cast<int>(best);
}

class MuZeroAgent final : public Agent {
 public:
  explicit MuZeroAgent(std::shared_ptr<const ModelWeights> w, std::string name = "trained")
      : weights_(std::move(w)), name_(std::move(name)) {}

  std::string name() const override { return name_; }
  void reset() override {}
  int act(const Environment& env) override {
    const auto obs = env.observation(weights_->config.window);
    return muzero_act(*weights_, obs.values);
  }

 private:
  std::shared_ptr<const ModelWeights> weights_;
  std::string name_;
};

}  // namespace dss
