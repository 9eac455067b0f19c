#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "hippo/core.hpp"

namespace hippo::envs {

// Small explicit Dec-POMDP used as a verification instrument. States carry a
// per-agent health label; per-state action sets encode the constriction
// contract (a dead agent's set is expected to be a singleton, though broken
// models can be constructed deliberately).
struct TabularDecPomdp {
  struct Outcome {
    int next_state;
    double probability;
  };

  int n_agents = 0;
  int num_states = 0;
  int num_obs = 0;      // per-agent observation alphabet size
  int num_actions = 0;  // per-agent action alphabet size
  int horizon = 0;

  std::vector<std::vector<int>> obs_of_state;           // [agent][state]
  std::vector<std::vector<std::vector<int>>> available; // [state][agent] -> action ids
  std::vector<std::vector<double>> health;              // [state][agent] in [0,1]
  // Indexed by [state][local joint-action index]; the local index runs over
  // the mixed-radix product of the per-agent available lists of that state.
  std::vector<std::vector<std::vector<Outcome>>> transitions;
  std::vector<std::vector<double>> rewards;             // [state][local joint index]
  std::vector<double> initial_dist;                     // over states
  std::vector<std::vector<int>> counterfactual;         // [state][agent] -> state with h_i = h_min

  int num_joint_actions(int state) const {
    int count = 1;
    for (const auto& acts : available[static_cast<std::size_t>(state)])
      count *= static_cast<int>(acts.size());
    return count;
  }

  // Decode a local joint index into per-agent action ids.
  std::vector<int> decode_joint(int state, int joint_index) const {
    const auto& avail = available[static_cast<std::size_t>(state)];
    std::vector<int> actions(static_cast<std::size_t>(n_agents));
    for (int i = n_agents - 1; i >= 0; --i) {
      const int k = static_cast<int>(avail[static_cast<std::size_t>(i)].size());
      actions[static_cast<std::size_t>(i)] =
          avail[static_cast<std::size_t>(i)][static_cast<std::size_t>(joint_index % k)];
      joint_index /= k;
    }
    return actions;
  }

  // Structural checks: stochastic rows, normalized initial distribution, and
  // no dead-to-live transition (the non-recoverable health property).
  void validate() const {
    double init_sum = 0.0;
    for (double p : initial_dist) init_sum += p;
    if (std::abs(init_sum - 1.0) > 1e-12)
      throw ConfigError("initial distribution does not sum to 1");
    for (int s = 0; s < num_states; ++s) {
      const int joint = num_joint_actions(s);
      for (int u = 0; u < joint; ++u) {
        double row = 0.0;
        for (const auto& out :
             transitions[static_cast<std::size_t>(s)][static_cast<std::size_t>(u)]) {
          row += out.probability;
          for (int i = 0; i < n_agents; ++i) {
            if (health[static_cast<std::size_t>(s)][static_cast<std::size_t>(i)] == 0.0 &&
                health[static_cast<std::size_t>(out.next_state)][static_cast<std::size_t>(i)] >
                    0.0 &&
                out.probability > 0.0)
              throw ConfigError("transition revives a dead agent (state " + std::to_string(s) +
                                " -> " + std::to_string(out.next_state) + ")");
          }
        }
        if (std::abs(row - 1.0) > 1e-12)
          throw ConfigError("transition row does not sum to 1 at state " + std::to_string(s));
      }
    }
  }
};

// Action distribution supplier for enumeration: probabilities over the
// available action list of (agent, observation).
using TabularPolicyFn =
    std::function<std::vector<double>(int agent, int obs, const std::vector<int>& avail)>;

struct Trajectory {
  std::vector<int> states;                // horizon + 1
  std::vector<std::vector<int>> actions;  // horizon x n_agents (action ids)
  std::vector<double> rewards;            // horizon
  double probability = 0.0;
  double ret = 0.0;  // undiscounted episode return
};

namespace detail {

inline double enumeration_bound(const TabularDecPomdp& model) {
  int init_support = 0;
  for (double p : model.initial_dist)
    if (p > 0.0) ++init_support;
  double per_step = 0.0;
  for (int s = 0; s < model.num_states; ++s) {
    double total = 0.0;
    const int joint = model.num_joint_actions(s);
    for (int u = 0; u < joint; ++u)
      total += static_cast<double>(
          model.transitions[static_cast<std::size_t>(s)][static_cast<std::size_t>(u)].size());
    per_step = std::max(per_step, total);
  }
  return static_cast<double>(init_support) * std::pow(per_step, model.horizon);
}

}  // namespace detail

// Exhaustive trajectory enumeration with exact probabilities under
// transition x policy products. Zero-probability branches are pruned, so the
// returned probabilities sum to 1.
inline std::vector<Trajectory> tabular_enumerate(const TabularDecPomdp& model,
                                                 const TabularPolicyFn& policy,
                                                 double budget = 1e7) {
  if (detail::enumeration_bound(model) > budget)
    throw ResourceError("trajectory enumeration budget exceeded");

  std::vector<Trajectory> out;
  Trajectory current;
  current.states.reserve(static_cast<std::size_t>(model.horizon) + 1);

  // Per-(state,agent) action distributions, computed lazily once.
  std::vector<std::vector<std::vector<double>>> probs(
      static_cast<std::size_t>(model.num_states));
  auto action_probs = [&](int s, int i) -> const std::vector<double>& {
    auto& for_state = probs[static_cast<std::size_t>(s)];
    if (for_state.empty()) {
      for_state.resize(static_cast<std::size_t>(model.n_agents));
      for (int a = 0; a < model.n_agents; ++a)
        for_state[static_cast<std::size_t>(a)] = policy(
            a, model.obs_of_state[static_cast<std::size_t>(a)][static_cast<std::size_t>(s)],
            model.available[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)]);
    }
    return for_state[static_cast<std::size_t>(i)];
  };

  std::function<void(int, int, double)> expand = [&](int state, int t, double prob) {
    current.states.push_back(state);
    if (t == model.horizon) {
      Trajectory done = current;
      done.probability = prob;
      done.ret = 0.0;
      for (double r : done.rewards) done.ret += r;
      out.push_back(std::move(done));
      current.states.pop_back();
      return;
    }
    const int joint = model.num_joint_actions(state);
    for (int u = 0; u < joint; ++u) {
      const auto actions = model.decode_joint(state, u);
      double pi = 1.0;
      for (int i = 0; i < model.n_agents; ++i) {
        const auto& avail =
            model.available[static_cast<std::size_t>(state)][static_cast<std::size_t>(i)];
        std::size_t local = 0;
        while (avail[local] != actions[static_cast<std::size_t>(i)]) ++local;
        pi *= action_probs(state, i)[local];
      }
      if (pi == 0.0) continue;
      current.actions.push_back(actions);
      current.rewards.push_back(
          model.rewards[static_cast<std::size_t>(state)][static_cast<std::size_t>(u)]);
      for (const auto& outcome :
           model.transitions[static_cast<std::size_t>(state)][static_cast<std::size_t>(u)]) {
        if (outcome.probability == 0.0) continue;
        expand(outcome.next_state, t + 1, prob * pi * outcome.probability);
      }
      current.actions.pop_back();
      current.rewards.pop_back();
    }
    current.states.pop_back();
  };

  for (int s = 0; s < model.num_states; ++s)
    if (model.initial_dist[static_cast<std::size_t>(s)] > 0.0)
      expand(s, 0, model.initial_dist[static_cast<std::size_t>(s)]);
  return out;
}

}  // namespace hippo::envs
