#pragma once

#include <algorithm>
#include <climits>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "dss/error.hpp"
#include "dss/model.hpp"
#include "dss/rng.hpp"

namespace dss {

struct SearchConfig {
  int simulations = 64;
  double discount = 0.99;
  double c1 = 1.25;
  double c2 = 19652.0;
  bool root_noise = true;
  double dirichlet_alpha = 0.3;
  double exploration_fraction = 0.25;

  void validate() const {
    if (simulations < 1) throw ConfigError("search: simulations must be >= 1");
    if (!(discount > 0.0 && discount <= 1.0)) throw ConfigError("search: discount must be in (0, 1]");
    if (c2 <= 0.0) throw ConfigError("search: c2 must be > 0");
    if (dirichlet_alpha <= 0.0) throw ConfigError("search: dirichlet_alpha must be > 0");
    if (exploration_fraction < 0.0 || exploration_fraction > 1.0)
      throw ConfigError("search: exploration_fraction must be in [0, 1]");
  }
};

/// Running bounds of all Q values seen in a tree.
struct MinMaxStats {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();

  void update(double v) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  /// Maps into [0, 1]; 0 while the bounds are empty or degenerate.
  double normalize(double v) const {
    if (!(hi > lo)) return 0.0;
    return std::clamp((v - lo) / (hi - lo), 0.0, 1.0);
  }
};

/// Tree node; per-action edge statistics live on the parent.
struct SearchNode {
  Vector state;
  Vector prior;
  std::vector<int> child;      // arena index, -1 until expanded
  std::vector<int> visits;     // N(a)
  std::vector<double> q;       // mean backed-up return through edge a (unnormalized)
  std::vector<double> reward;  // predicted reward of edge a
  int depth = 0;
  bool terminal = false;  // at the episode horizon; not expanded

  int total_visits() const {
    int n = 0;
    for (int v : visits) n += v;
    return n;
  }
};

inline SearchNode make_node(Vector state, Vector prior, int depth) {
  SearchNode n;
  const auto a = static_cast<std::size_t>(prior.size());
  n.state = std::move(state);
  n.prior = std::move(prior);
  n.child.assign(a, -1);
  n.visits.assign(a, 0);
  n.q.assign(a, 0.0);
  n.reward.assign(a, 0.0);
  n.depth = depth;
  return n;
}

/// pUCT score of edge `a`; unvisited edges have normalized Q = 0.
inline double puct_score(const SearchNode& node, int a, const SearchConfig& cfg,
                         const MinMaxStats& bounds) {
  const auto i = static_cast<std::size_t>(a);
  const double total = node.total_visits();
  const double n = node.visits[i];
  const double explore = node.prior(a) * std::sqrt(total) / (1.0 + n) *
                         (cfg.c1 + std::log((total + cfg.c2 + 1.0) / cfg.c2));
  const double q = node.visits[i] > 0 ? bounds.normalize(node.q[i]) : 0.0;
  return q + explore;
}

/// argmax of the pUCT score, ties to the lowest action index.
inline int puct_select(const SearchNode& node, const SearchConfig& cfg, const MinMaxStats& bounds) {
  int best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (int a = 0; a < static_cast<int>(node.visits.size()); ++a) {
    const double s = puct_score(node, a, cfg, bounds);
    if (s > best_score) {
      best_score = s;
      best = a;
    }
  }
  return best;
}

struct PathEdge {
  int node;
  int action;
};

/// Propagates `leaf_value` up `path` (root first): G <- r + discount * G per
/// edge, each edge's Q becoming the running mean of its G samples.
inline void backup(std::vector<SearchNode>& tree, const std::vector<PathEdge>& path,
                   double leaf_value, const SearchConfig& cfg, MinMaxStats& bounds) {
  double g = leaf_value;
  for (auto it = path.rbegin(); it != path.rend(); ++it) {
    SearchNode& n = tree[static_cast<std::size_t>(it->node)];
    const auto a = static_cast<std::size_t>(it->action);
    g = n.reward[a] + cfg.discount * g;
    n.visits[a] += 1;
    n.q[a] += (g - n.q[a]) / n.visits[a];
    bounds.update(n.q[a]);
  }
}

struct SearchResult {
  Vector policy;       // N(a) / sum N
  double root_value = 0.0;  // visit-weighted mean of root Q
  std::vector<int> root_visits;
  std::vector<double> root_q;
  Vector root_prior;   // after noise
  double predicted_value = 0.0;  // f's value at the root
  int nodes = 0;
  int max_depth = 0;
};

/// Mixes Dirichlet(alpha) noise into a prior.
inline Vector add_exploration_noise(const Vector& prior, double alpha, double fraction, Rng& rng) {
  Vector noise(prior.size());
  for (Eigen::Index i = 0; i < prior.size(); ++i) noise(i) = gamma_sample(rng, alpha);
  const double sum = noise.sum();
  if (sum > 0.0) noise /= sum;
  else noise.setConstant(1.0 / static_cast<double>(prior.size()));
  return (1.0 - fraction) * prior + fraction * noise;
}

/// MCTS over the learned model from h(observation). Only g and f are queried
/// below the root. `remaining` is the number of subframes left in the
/// episode; nodes that deep are terminal with value 0.
inline SearchResult run_search(const ModelWeights& w, std::span<const double> observation,
                               const SearchConfig& cfg, Rng& rng, int remaining = INT_MAX) {
  cfg.validate();
  ++call_counters().searches;
  std::vector<SearchNode> tree;
  MinMaxStats bounds;

  SearchResult out;
  {
    Vector s0 = represent(w, observation);
    auto pred = predict(w, s0);
    out.predicted_value = pred.value;
    Vector prior = cfg.root_noise
                       ? add_exploration_noise(pred.policy, cfg.dirichlet_alpha,
                                               cfg.exploration_fraction, rng)
                       : pred.policy;
    tree.push_back(make_node(std::move(s0), std::move(prior), 0));
    tree.front().terminal = remaining <= 0;
  }

  std::vector<PathEdge> path;
  for (int sim = 0; sim < cfg.simulations && !tree.front().terminal; ++sim) {
    path.clear();
    int cur = 0;
    double leaf_value = 0.0;
    for (;;) {
      const SearchNode& node = tree[static_cast<std::size_t>(cur)];
      const int a = puct_select(node, cfg, bounds);
      path.push_back({cur, a});
      const int next = node.child[static_cast<std::size_t>(a)];
      if (next >= 0) {
        if (tree[static_cast<std::size_t>(next)].terminal) {
          leaf_value = 0.0;
          break;
        }
        cur = next;
        continue;
      }
      // Expand the edge.
      auto dyn = dynamics(w, node.state, a);
      const int depth = node.depth + 1;
      tree[static_cast<std::size_t>(cur)].reward[static_cast<std::size_t>(a)] = dyn.reward;
      if (depth >= remaining) {
        SearchNode leaf = make_node(std::move(dyn.state), Vector::Zero(w.config.action_count), depth);
        leaf.terminal = true;
        tree.push_back(std::move(leaf));
        leaf_value = 0.0;
      } else {
        auto pred = predict(w, dyn.state);
        leaf_value = pred.value;
        tree.push_back(make_node(std::move(dyn.state), std::move(pred.policy), depth));
      }
      tree[static_cast<std::size_t>(cur)].child[static_cast<std::size_t>(a)] =
          static_cast<int>(tree.size()) - 1;
      out.max_depth = std::max(out.max_depth, depth);
      break;
    }
    backup(tree, path, leaf_value, cfg, bounds);
  }

  const SearchNode& root = tree.front();
  const int total = root.total_visits();
  out.policy = Vector::Zero(w.config.action_count);
  out.root_visits = root.visits;
  out.root_q = root.q;
  out.root_prior = root.prior;
  if (total > 0) {
    for (int a = 0; a < w.config.action_count; ++a) {
      const auto i = static_cast<std::size_t>(a);
      out.policy(a) = static_cast<double>(root.visits[i]) / total;
      out.root_value += out.policy(a) * root.q[i];
    }
  } else {
    out.policy.setConstant(1.0 / w.config.action_count);
  }
  out.nodes = static_cast<int>(tree.size());
  return out;
}

inline nlohmann::json search_stats_json(const SearchResult& r) {
  return {{"policy", std::vector<double>(r.policy.data(), r.policy.data() + r.policy.size())},
          {"root_value", r.root_value},
          {"predicted_value", r.predicted_value},
          {"root_visits", r.root_visits},
          {"root_q", r.root_q},
          {"root_prior",
           std::vector<double>(r.root_prior.data(), r.root_prior.data() + r.root_prior.size())},
          {"nodes", r.nodes},
          {"max_depth", r.max_depth}};
}

/// Draws an action with probability proportional to pi^(1/temperature);
/// temperature 0 is argmax (lowest index on ties).
inline int sample_action(const Vector& pi, double temperature, Rng& rng) {
  if (pi.size() == 0 || (pi.array() < 0.0).any() || !pi.allFinite() ||
      std::abs(pi.sum() - 1.0) > 1e-6)
    throw ConfigError("sample_action: policy is not a probability vector");
  if (temperature < 0.0) throw ConfigError("sample_action: temperature must be >= 0");
  if (temperature == 0.0) {
    Eigen::Index best = 0;
    pi.maxCoeff(&best);
    return static_cast<int>(best);
  }
  Vector weights = pi.array().pow(1.0 / temperature);
  const double total = weights.sum();
  if (!(total > 0.0)) {
    Eigen::Index best = 0;
    pi.maxCoeff(&best);
    return static_cast<int>(best);
  }
  const double u = uniform01(rng) * total;
  double acc = 0.0;
  int last_positive = 0;
  for (Eigen::Index i = 0; i < weights.size(); ++i) {
    if (weights(i) <= 0.0) continue;
    last_positive = static_cast<int>(i);
    acc += weights(i);
    if (u < acc) return static_cast<int>(i);
  }
  return last_positive;
}

}  // namespace dss
