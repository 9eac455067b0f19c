#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "hippo/core.hpp"
#include "hippo/rng.hpp"
#include "hippo/tabular.hpp"

namespace hippo::oracle {

using envs::TabularDecPomdp;
using envs::TabularPolicyFn;
using envs::Trajectory;

// Tabular softmax policy with one logit table per (agent, observation,
// action). Distributions are restricted to the per-state available set, so a
// singleton set is deterministic and carries an identically-zero score.
struct SoftmaxTabularPolicy {
  int n_agents = 0;
  int num_obs = 0;
  int num_actions = 0;
  std::vector<double> logits;  // [agent][obs][action] flattened

  SoftmaxTabularPolicy() = default;
  SoftmaxTabularPolicy(int agents, int obs, int actions)
      : n_agents(agents),
        num_obs(obs),
        num_actions(actions),
        logits(static_cast<std::size_t>(agents) * obs * actions, 0.0) {}

  std::size_t index(int agent, int obs, int action) const {
    return (static_cast<std::size_t>(agent) * num_obs + obs) * num_actions + action;
  }
  std::size_t param_count() const { return logits.size(); }

  std::vector<double> action_probs(int agent, int obs, const std::vector<int>& avail) const {
    std::vector<double> p(avail.size());
    double max_logit = -1e300;
    for (std::size_t k = 0; k < avail.size(); ++k)
      max_logit = std::max(max_logit, logits[index(agent, obs, avail[k])]);
    double z = 0.0;
    for (std::size_t k = 0; k < avail.size(); ++k) {
      p[k] = std::exp(logits[index(agent, obs, avail[k])] - max_logit);
      z += p[k];
    }
    for (double& v : p) v /= z;
    return p;
  }

  TabularPolicyFn as_fn() const {
    return [this](int agent, int obs, const std::vector<int>& avail) {
      return action_probs(agent, obs, avail);
    };
  }

  // Accumulates scale * d log pi(chosen | agent, obs) / d logits into grad.
  void accumulate_score(int agent, int obs, const std::vector<int>& avail, int chosen,
                        double scale, std::vector<double>& grad) const {
    const auto p = action_probs(agent, obs, avail);
    for (std::size_t k = 0; k < avail.size(); ++k) {
      const double indicator = avail[k] == chosen ? 1.0 : 0.0;
      grad[index(agent, obs, avail[k])] += scale * (indicator - p[k]);
    }
  }
};

// Exact finite-horizon state values V[t][s] under the policy, by backward
// induction with undiscounted rewards.
inline std::vector<std::vector<double>> exact_value_table(const TabularDecPomdp& model,
                                                          const SoftmaxTabularPolicy& policy) {
  std::vector<std::vector<double>> v(
      static_cast<std::size_t>(model.horizon) + 1,
      std::vector<double>(static_cast<std::size_t>(model.num_states), 0.0));
  for (int t = model.horizon - 1; t >= 0; --t) {
    for (int s = 0; s < model.num_states; ++s) {
      double value = 0.0;
      const int joint = model.num_joint_actions(s);
      for (int u = 0; u < joint; ++u) {
        const auto actions = model.decode_joint(s, u);
        double pi = 1.0;
        for (int i = 0; i < model.n_agents; ++i) {
          const auto& avail =
              model.available[static_cast<std::size_t>(s)][static_cast<std::size_t>(i)];
          const auto probs = policy.action_probs(
              i, model.obs_of_state[static_cast<std::size_t>(i)][static_cast<std::size_t>(s)],
              avail);
          std::size_t local = 0;
          while (avail[local] != actions[static_cast<std::size_t>(i)]) ++local;
          pi *= probs[local];
        }
        if (pi == 0.0) continue;
        double q = model.rewards[static_cast<std::size_t>(s)][static_cast<std::size_t>(u)];
        for (const auto& outcome :
             model.transitions[static_cast<std::size_t>(s)][static_cast<std::size_t>(u)])
          q += outcome.probability *
               v[static_cast<std::size_t>(t) + 1][static_cast<std::size_t>(outcome.next_state)];
        value += pi * q;
      }
      v[static_cast<std::size_t>(t)][static_cast<std::size_t>(s)] = value;
    }
  }
  return v;
}

// J(theta): sum over all trajectories of probability x return.
inline double exact_objective(const TabularDecPomdp& model, const SoftmaxTabularPolicy& policy,
                              double budget = 1e7) {
  double j = 0.0;
  for (const auto& traj : envs::tabular_enumerate(model, policy.as_fn(), budget))
    j += traj.probability * traj.ret;
  return j;
}

// Ground-truth gradient via central finite differences of the exact objective.
inline std::vector<double> exact_gradient_fd(const TabularDecPomdp& model,
                                             const SoftmaxTabularPolicy& policy, double step,
                                             double budget = 1e7) {
  if (!(step > 0.0)) throw ArgumentError("finite-difference step must be positive");
  SoftmaxTabularPolicy probe = policy;
  std::vector<double> grad(policy.param_count(), 0.0);
  for (std::size_t k = 0; k < probe.logits.size(); ++k) {
    const double saved = probe.logits[k];
    probe.logits[k] = saved + step;
    const double plus = exact_objective(model, probe, budget);
    probe.logits[k] = saved - step;
    const double minus = exact_objective(model, probe, budget);
    probe.logits[k] = saved;
    grad[k] = (plus - minus) / (2.0 * step);
  }
  return grad;
}

enum class PsiVariant { kReturns, kMinHealth, kBaselineOnly };

// Exact expectation of the sampled policy-gradient estimator
//   E_pi[ sum_t sum_i Psi_{i,t} grad log pi(a_{i,t} | obs_{i,t}) ]
// by summing over all trajectories with their probabilities.
//   kReturns:      Psi = G_t (realized return from t)
//   kMinHealth:    Psi = h_{i,t} * G_t - V(counterfactual state, t)
//   kBaselineOnly: Psi = V(counterfactual state, t), isolating the baseline
//                  term whose expectation is provably zero.
inline std::vector<double> exact_estimator_expectation(const TabularDecPomdp& model,
                                                       const SoftmaxTabularPolicy& policy,
                                                       PsiVariant variant, double budget = 1e7) {
  const auto values = exact_value_table(model, policy);
  std::vector<double> grad(policy.param_count(), 0.0);

  for (const auto& traj : envs::tabular_enumerate(model, policy.as_fn(), budget)) {
    // Suffix returns G_t.
    std::vector<double> returns(traj.rewards.size() + 1, 0.0);
    for (int t = static_cast<int>(traj.rewards.size()) - 1; t >= 0; --t)
      returns[static_cast<std::size_t>(t)] =
          traj.rewards[static_cast<std::size_t>(t)] + returns[static_cast<std::size_t>(t) + 1];

    for (std::size_t t = 0; t < traj.actions.size(); ++t) {
      const int s = traj.states[t];
      for (int i = 0; i < model.n_agents; ++i) {
        const double h = model.health[static_cast<std::size_t>(s)][static_cast<std::size_t>(i)];
        double psi = 0.0;
        switch (variant) {
          case PsiVariant::kReturns:
            psi = returns[t];
            break;
          case PsiVariant::kMinHealth: {
            const int cf = model.counterfactual[static_cast<std::size_t>(s)]
                                               [static_cast<std::size_t>(i)];
            psi = h * returns[t] - values[t][static_cast<std::size_t>(cf)];
            break;
          }
          case PsiVariant::kBaselineOnly: {
            const int cf = model.counterfactual[static_cast<std::size_t>(s)]
                                               [static_cast<std::size_t>(i)];
            psi = values[t][static_cast<std::size_t>(cf)];
            break;
          }
        }
        policy.accumulate_score(
            i, model.obs_of_state[static_cast<std::size_t>(i)][static_cast<std::size_t>(s)],
            model.available[static_cast<std::size_t>(s)][static_cast<std::size_t>(i)],
            traj.actions[t][static_cast<std::size_t>(i)], traj.probability * psi, grad);
      }
    }
  }
  return grad;
}

// Pointwise check behind the binary-health equivalence: every dead-agent
// decision point must carry an identically-zero score, which holds exactly
// when the dead action set is a singleton.
struct Lemma2Report {
  bool passed = true;
  long dead_decision_points = 0;
  std::vector<std::string> failures;
};

inline Lemma2Report check_lemma2_pointwise(const TabularDecPomdp& model,
                                           const SoftmaxTabularPolicy& policy) {
  Lemma2Report report;
  for (int s = 0; s < model.num_states; ++s) {
    for (int i = 0; i < model.n_agents; ++i) {
      if (model.health[static_cast<std::size_t>(s)][static_cast<std::size_t>(i)] != 0.0) continue;
      ++report.dead_decision_points;
      const auto& avail =
          model.available[static_cast<std::size_t>(s)][static_cast<std::size_t>(i)];
      const int obs = model.obs_of_state[static_cast<std::size_t>(i)][static_cast<std::size_t>(s)];
      for (int a : avail) {
        std::vector<double> score(policy.param_count(), 0.0);
        policy.accumulate_score(i, obs, avail, a, 1.0, score);
        double norm = 0.0;
        for (double g : score) norm = std::max(norm, std::abs(g));
        if (norm != 0.0) {
          report.passed = false;
          report.failures.push_back("agent " + std::to_string(i) + " dead in state " +
                                    std::to_string(s) + " retains " +
                                    std::to_string(avail.size()) + " actions (score " +
                                    std::to_string(norm) + ")");
          break;
        }
      }
    }
  }
  return report;
}

struct RandomModelOptions {
  int n_agents = 2;
  int n_base_states = 3;
  int num_actions = 2;
  int horizon = 3;
  int successors = 2;        // outcomes per (state, joint action)
  double survive_prob = 0.8; // per live agent per transition
  bool broken_dead_actions = false;  // leave 2 actions available to dead agents
};

// Random binary-health model over (health mask, base) product states. Health
// can only decay along transitions, and dead agents keep a singleton action
// set unless `broken_dead_actions` is requested for fault-injection tests.
inline TabularDecPomdp make_random_model(RngStream& rng, const RandomModelOptions& opt = {}) {
  TabularDecPomdp model;
  model.n_agents = opt.n_agents;
  model.num_states = (1 << opt.n_agents) * opt.n_base_states;
  model.num_obs = opt.n_base_states + 1;  // 0 = dead, 1 + base otherwise
  model.num_actions = opt.num_actions;
  model.horizon = opt.horizon;

  auto state_id = [&](int mask, int base) { return mask * opt.n_base_states + base; };
  auto mask_of = [&](int s) { return s / opt.n_base_states; };
  auto base_of = [&](int s) { return s % opt.n_base_states; };

  model.obs_of_state.assign(static_cast<std::size_t>(opt.n_agents), {});
  for (int i = 0; i < opt.n_agents; ++i) {
    auto& per_agent = model.obs_of_state[static_cast<std::size_t>(i)];
    per_agent.resize(static_cast<std::size_t>(model.num_states));
    for (int s = 0; s < model.num_states; ++s)
      per_agent[static_cast<std::size_t>(s)] =
          (mask_of(s) >> i & 1) ? 1 + base_of(s) : 0;
  }

  model.health.resize(static_cast<std::size_t>(model.num_states));
  model.available.resize(static_cast<std::size_t>(model.num_states));
  model.counterfactual.resize(static_cast<std::size_t>(model.num_states));
  for (int s = 0; s < model.num_states; ++s) {
    auto& h = model.health[static_cast<std::size_t>(s)];
    auto& avail = model.available[static_cast<std::size_t>(s)];
    auto& cf = model.counterfactual[static_cast<std::size_t>(s)];
    h.resize(static_cast<std::size_t>(opt.n_agents));
    avail.resize(static_cast<std::size_t>(opt.n_agents));
    cf.resize(static_cast<std::size_t>(opt.n_agents));
    for (int i = 0; i < opt.n_agents; ++i) {
      const bool alive = mask_of(s) >> i & 1;
      h[static_cast<std::size_t>(i)] = alive ? 1.0 : 0.0;
      if (alive || opt.broken_dead_actions) {
        avail[static_cast<std::size_t>(i)].resize(static_cast<std::size_t>(opt.num_actions));
        for (int a = 0; a < opt.num_actions; ++a)
          avail[static_cast<std::size_t>(i)][static_cast<std::size_t>(a)] = a;
      } else {
        avail[static_cast<std::size_t>(i)] = {0};
      }
      cf[static_cast<std::size_t>(i)] = state_id(mask_of(s) & ~(1 << i), base_of(s));
    }
  }

  model.transitions.resize(static_cast<std::size_t>(model.num_states));
  model.rewards.resize(static_cast<std::size_t>(model.num_states));
  for (int s = 0; s < model.num_states; ++s) {
    const int joint = model.num_joint_actions(s);
    model.transitions[static_cast<std::size_t>(s)].resize(static_cast<std::size_t>(joint));
    model.rewards[static_cast<std::size_t>(s)].resize(static_cast<std::size_t>(joint));
    for (int u = 0; u < joint; ++u) {
      model.rewards[static_cast<std::size_t>(s)][static_cast<std::size_t>(u)] =
          rng.uniform(0.0, 2.0);
      auto& outcomes =
          model.transitions[static_cast<std::size_t>(s)][static_cast<std::size_t>(u)];
      outcomes.resize(static_cast<std::size_t>(opt.successors));
      double total = 0.0;
      for (auto& outcome : outcomes) {
        int next_mask = 0;
        for (int i = 0; i < opt.n_agents; ++i) {
          const bool alive = mask_of(s) >> i & 1;
          if (alive && rng.uniform() < opt.survive_prob) next_mask |= 1 << i;
        }
        outcome.next_state =
            state_id(next_mask, static_cast<int>(rng.uniform_index(
                                    static_cast<std::uint64_t>(opt.n_base_states))));
        outcome.probability = 0.1 + rng.uniform();
        total += outcome.probability;
      }
      for (auto& outcome : outcomes) outcome.probability /= total;
      // Exact row normalization for the 1e-12 structural check.
      double row = 0.0;
      for (std::size_t k = 0; k + 1 < outcomes.size(); ++k) row += outcomes[k].probability;
      outcomes.back().probability = 1.0 - row;
    }
  }

  model.initial_dist.assign(static_cast<std::size_t>(model.num_states), 0.0);
  const int full_mask = (1 << opt.n_agents) - 1;
  const int init_base =
      static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(opt.n_base_states)));
  model.initial_dist[static_cast<std::size_t>(state_id(full_mask, init_base))] = 1.0;

  model.validate();
  return model;
}

inline SoftmaxTabularPolicy make_random_policy(RngStream& rng, const TabularDecPomdp& model,
                                               double scale = 0.5) {
  SoftmaxTabularPolicy policy(model.n_agents, model.num_obs, model.num_actions);
  for (double& logit : policy.logits) logit = rng.uniform(-scale, scale);
  return policy;
}

// Trace of the per-trajectory covariance of the estimator: E ||g||^2 - ||E g||^2.
inline double estimator_trace_covariance(const TabularDecPomdp& model,
                                         const SoftmaxTabularPolicy& policy, PsiVariant variant,
                                         double budget = 1e7) {
  const auto values = exact_value_table(model, policy);
  const std::size_t dim = policy.param_count();
  std::vector<double> mean(dim, 0.0);
  double second_moment = 0.0;

  for (const auto& traj : envs::tabular_enumerate(model, policy.as_fn(), budget)) {
    std::vector<double> g(dim, 0.0);
    std::vector<double> returns(traj.rewards.size() + 1, 0.0);
    for (int t = static_cast<int>(traj.rewards.size()) - 1; t >= 0; --t)
      returns[static_cast<std::size_t>(t)] =
          traj.rewards[static_cast<std::size_t>(t)] + returns[static_cast<std::size_t>(t) + 1];
    for (std::size_t t = 0; t < traj.actions.size(); ++t) {
      const int s = traj.states[t];
      for (int i = 0; i < model.n_agents; ++i) {
        const double h = model.health[static_cast<std::size_t>(s)][static_cast<std::size_t>(i)];
        double psi = 0.0;
        if (variant == PsiVariant::kReturns) {
          psi = returns[t];
        } else if (variant == PsiVariant::kMinHealth) {
          const int cf =
              model.counterfactual[static_cast<std::size_t>(s)][static_cast<std::size_t>(i)];
          psi = h * returns[t] - values[t][static_cast<std::size_t>(cf)];
        } else {
          const int cf =
              model.counterfactual[static_cast<std::size_t>(s)][static_cast<std::size_t>(i)];
          psi = values[t][static_cast<std::size_t>(cf)];
        }
        policy.accumulate_score(
            i, model.obs_of_state[static_cast<std::size_t>(i)][static_cast<std::size_t>(s)],
            model.available[static_cast<std::size_t>(s)][static_cast<std::size_t>(i)],
            traj.actions[t][static_cast<std::size_t>(i)], psi, g);
      }
    }
    double norm2 = 0.0;
    for (std::size_t k = 0; k < dim; ++k) {
      norm2 += g[k] * g[k];
      mean[k] += traj.probability * g[k];
    }
    second_moment += traj.probability * norm2;
  }
  double mean_norm2 = 0.0;
  for (double m : mean) mean_norm2 += m * m;
  return second_moment - mean_norm2;
}

}  // namespace hippo::oracle
