#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hippo/core.hpp"
#include "hippo/nn.hpp"
#include "hippo/particle.hpp"
#include "hippo/rng.hpp"

namespace hippo::algo {

using nn::Mat;
using nn::Vec;

enum class Variant { kLocalCritic, kCentralCritic, kMinHealth };

inline Variant variant_from_name(const std::string& name) {
  if (name == "local-critic") return Variant::kLocalCritic;
  if (name == "central-critic") return Variant::kCentralCritic;
  if (name == "min-health") return Variant::kMinHealth;
  throw ConfigError("unknown variant: " + name);
}

inline std::string variant_name(Variant v) {
  switch (v) {
    case Variant::kLocalCritic: return "local-critic";
    case Variant::kCentralCritic: return "central-critic";
    case Variant::kMinHealth: return "min-health";
  }
  return "?";
}

struct TrainConfig {
  Variant variant = Variant::kMinHealth;
  double gamma = 0.99;
  double lambda = 0.95;
  double clip_eps = 0.2;
  double entropy_coef = 0.01;
  int epochs = 8;
  int minibatches = 8;
  int episodes_per_batch = 256;
  long total_episodes = 50000;
  double actor_lr = 1.0e-3;
  double critic_lr = 5.0e-3;
  bool normalize_advantages = false;
  double h_min = 0.0;

  void validate() const {
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("gamma must be in [0, 1]");
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("lambda must be in [0, 1]");
    if (!(clip_eps > 0.0)) throw ConfigError("clip_eps must be positive");
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (minibatches < 1) throw ConfigError("minibatches must be >= 1");
    if (episodes_per_batch < 1) throw ConfigError("episodes_per_batch must be >= 1");
    if (total_episodes < 1) throw ConfigError("total_episodes must be >= 1");
  }
};

// Flat per-batch rollout storage. Sample columns are indexed by
// ((episode * t_f + t) * n_agents + agent); per-step quantities by
// (episode * t_f + t).
struct RolloutBatch {
  int episodes = 0;
  int t_f = 0;
  int n_agents = 0;
  int obs_dim = 0;
  int act_dim = 0;

  std::vector<JointState> states;  // pre-step state s_t, per (e, t)
  Vec rewards;                     // per (e, t)
  Mat obs;                         // obs_dim x samples
  Mat sampled_actions;             // act_dim x samples
  Mat executed_actions;            // act_dim x samples
  Vec behavior_logprob;            // samples
  Vec health;                      // samples, h_{i,t}
  Vec episode_returns;             // per episode

  long step_count() const { return static_cast<long>(episodes) * t_f; }
  long sample_count() const { return step_count() * n_agents; }
  long live_sample_count() const {
    long live = 0;
    for (Eigen::Index k = 0; k < health.size(); ++k)
      if (health[k] > 0.0) ++live;
    return live;
  }
  long step_index(int e, int t) const { return static_cast<long>(e) * t_f + t; }
  long col(int e, int t, int i) const { return step_index(e, t) * n_agents + i; }
};

// Runs decentralized copies of the policy for `episodes` full-horizon
// episodes. Episode RNG streams are derived from (seed, iteration, episode),
// so the batch contents do not depend on scheduling.
inline RolloutBatch collect_rollouts(const envs::ParticleEnv& env,
                                     const nn::GaussianPolicy& policy, int episodes,
                                     std::uint64_t seed, long iteration) {
  if (policy.obs_dim() != env.obs_dim())
    throw ConfigError("policy input width does not match the environment observation");
  const int n = env.num_agents();
  const int t_f = env.horizon();
  const int adim = env.action_dim();

  RolloutBatch batch;
  batch.episodes = episodes;
  batch.t_f = t_f;
  batch.n_agents = n;
  batch.obs_dim = env.obs_dim();
  batch.act_dim = adim;
  batch.states.resize(static_cast<std::size_t>(batch.step_count()));
  batch.rewards = Vec::Zero(batch.step_count());
  batch.obs = Mat::Zero(env.obs_dim(), batch.sample_count());
  batch.sampled_actions = Mat::Zero(adim, batch.sample_count());
  batch.executed_actions = Mat::Zero(adim, batch.sample_count());
  batch.behavior_logprob = Vec::Zero(batch.sample_count());
  batch.health = Vec::Zero(batch.sample_count());
  batch.episode_returns = Vec::Zero(episodes);

  const Vec log_std = policy.log_std();
  Mat step_obs(env.obs_dim(), n);

  for (int e = 0; e < episodes; ++e) {
    RngStream rng(mix_seed(seed, 0x726f6c6cULL, static_cast<std::uint64_t>(iteration),
                           static_cast<std::uint64_t>(e)));
    auto [state, obs] = env.reset(rng);
    double episode_return = 0.0;

    for (int t = 0; t < t_f; ++t) {
      const long st = batch.step_index(e, t);
      batch.states[static_cast<std::size_t>(st)] = state;
      for (int i = 0; i < n; ++i) {
        const auto view = obs.agent(i);
        for (int d = 0; d < env.obs_dim(); ++d) step_obs(d, i) = view[static_cast<std::size_t>(d)];
      }
      const Mat mean = policy.forward_mean(step_obs);

      JointAction action(n, adim);
      for (int i = 0; i < n; ++i) {
        const long c = batch.col(e, t, i);
        double logp = 0.0;
        for (int d = 0; d < adim; ++d) {
          const double noise = rng.normal();
          const double a = mean(d, i) + std::exp(log_std[d]) * noise;
          action.agent(i)[d] = a;
          const double z = (a - mean(d, i)) / std::exp(log_std[d]);
          logp += -0.9189385332046727 - log_std[d] - 0.5 * z * z;
        }
        batch.behavior_logprob[c] = logp;
        batch.health[c] = state.health[i];
        batch.obs.col(c) = step_obs.col(i);
        for (int d = 0; d < adim; ++d) batch.sampled_actions(d, c) = action.agent(i)[d];
      }

      auto result = env.step(state, action, rng);
      for (int i = 0; i < n; ++i) {
        const long c = batch.col(e, t, i);
        for (int d = 0; d < adim; ++d) batch.executed_actions(d, c) = result.executed.agent(i)[d];
      }
      batch.rewards[st] = result.reward;
      episode_return += result.reward;
      state = std::move(result.state);
      obs = std::move(result.obs);
    }
    batch.episode_returns[e] = episode_return;
  }
  return batch;
}

// Backward GAE recursion: delta_t = r_t + gamma * V_{t+1} - V_t,
// A_t = delta_t + gamma * lambda * A_{t+1}. values[t_f] is the terminal
// bootstrap (0 for finished episodes).
inline std::vector<double> compute_gae(std::span<const double> rewards,
                                       std::span<const double> values, double gamma,
                                       double lambda) {
  if (values.size() != rewards.size() + 1)
    throw ArgumentError("compute_gae: need one more value than rewards");
  std::vector<double> advantages(rewards.size(), 0.0);
  double next_adv = 0.0;
  for (int t = static_cast<int>(rewards.size()) - 1; t >= 0; --t) {
    const auto k = static_cast<std::size_t>(t);
    const double delta = rewards[k] + gamma * values[k + 1] - values[k];
    next_adv = delta + gamma * lambda * next_adv;
    advantages[k] = next_adv;
  }
  return advantages;
}

// V_t^targ = A_t^GAE + V_old(s_t), elementwise.
inline std::vector<double> compute_value_targets(std::span<const double> advantages,
                                                 std::span<const double> old_values) {
  if (advantages.size() != old_values.size())
    throw ArgumentError("compute_value_targets: length mismatch");
  std::vector<double> targets(advantages.size());
  for (std::size_t k = 0; k < targets.size(); ++k) targets[k] = advantages[k] + old_values[k];
  return targets;
}

// Per-batch crediting results. Central-state quantities are per step; psi and
// local-critic quantities are per agent-step sample.
struct AdvantageRecord {
  Vec state_values;           // per step (central & min-health)
  Vec gae;                    // per step
  Vec value_targets;          // per step
  Vec counterfactual_values;  // per sample (min-health only)
  Vec psi;                    // per sample
  Mat critic_inputs;          // features consumed by the critic during updates
  Vec critic_targets;         // regression targets aligned with critic_inputs
};

// Computes advantages, value targets, and the per-agent credit signal for the
// selected variant:
//   min-health:     Psi_{i,t} = h_{i,t} (V_t^targ - V_old(s_t with h_i = h_min))
//   central-critic: Psi_{i,t} = A_t^GAE(s_t), identical across agents
//   local-critic:   Psi_{i,t} = per-agent GAE over observation values, zero
//                   for terminated agents (their frozen observations carry no
//                   usable value signal and are excluded from the regression)
inline AdvantageRecord compute_psi(Variant variant, const RolloutBatch& batch,
                                   const nn::ValueNet& critic, const envs::ParticleEnv& env,
                                   const TrainConfig& cfg) {
  const bool central = variant != Variant::kLocalCritic;
  if (central && critic.input_dim() != env.critic_dim())
    throw ConfigError("central critic input width does not match joint-state features");
  // The local critic sees the observation plus the normalized step index (the
  // one history statistic a feed-forward net cannot recover from a single
  // observation; finite-horizon values depend strongly on remaining time).
  if (!central && critic.input_dim() != batch.obs_dim + 1)
    throw ConfigError("local critic input width does not match observations plus time");

  AdvantageRecord record;
  const long steps = batch.step_count();
  const long samples = batch.sample_count();
  const int t_f = batch.t_f;
  const int n = batch.n_agents;

  if (central) {
    Mat features(env.critic_dim(), steps);
    for (long st = 0; st < steps; ++st)
      features.col(st) = env.critic_features(batch.states[static_cast<std::size_t>(st)]);
    record.state_values = critic.forward(features);

    record.gae = Vec::Zero(steps);
    record.value_targets = Vec::Zero(steps);
    std::vector<double> values(static_cast<std::size_t>(t_f) + 1);
    std::vector<double> rewards(static_cast<std::size_t>(t_f));
    for (int e = 0; e < batch.episodes; ++e) {
      const long base = batch.step_index(e, 0);
      for (int t = 0; t < t_f; ++t) {
        values[static_cast<std::size_t>(t)] = record.state_values[base + t];
        rewards[static_cast<std::size_t>(t)] = batch.rewards[base + t];
      }
      values[static_cast<std::size_t>(t_f)] = 0.0;  // finished episode bootstrap
      const auto adv = compute_gae(rewards, values, cfg.gamma, cfg.lambda);
      const auto targets = compute_value_targets(
          adv, std::span<const double>(values.data(), static_cast<std::size_t>(t_f)));
      for (int t = 0; t < t_f; ++t) {
        record.gae[base + t] = adv[static_cast<std::size_t>(t)];
        record.value_targets[base + t] = targets[static_cast<std::size_t>(t)];
      }
    }

    record.psi = Vec::Zero(samples);
    if (variant == Variant::kMinHealth) {
      Mat cf_features(env.critic_dim(), samples);
      for (long st = 0; st < steps; ++st) {
        const auto& s = batch.states[static_cast<std::size_t>(st)];
        for (int i = 0; i < n; ++i)
          cf_features.col(st * n + i) =
              env.critic_features(make_counterfactual_state(s, i, cfg.h_min));
      }
      record.counterfactual_values = critic.forward(cf_features);
      for (long st = 0; st < steps; ++st)
        for (int i = 0; i < n; ++i) {
          const long c = st * n + i;
          record.psi[c] =
              batch.health[c] * (record.value_targets[st] - record.counterfactual_values[c]);
        }
    } else {
      for (long st = 0; st < steps; ++st)
        for (int i = 0; i < n; ++i) record.psi[st * n + i] = record.gae[st];
    }

    record.critic_inputs = std::move(features);
    record.critic_targets = record.value_targets;
  } else {
    Mat inputs(batch.obs_dim + 1, samples);
    inputs.topRows(batch.obs_dim) = batch.obs;
    for (long c = 0; c < samples; ++c)
      inputs(batch.obs_dim, c) = static_cast<double>((c / n) % t_f) / t_f;
    const Vec local_values = critic.forward(inputs);

    record.psi = Vec::Zero(samples);
    std::vector<long> live;
    live.reserve(static_cast<std::size_t>(samples));
    std::vector<double> values(static_cast<std::size_t>(t_f) + 1);
    std::vector<double> rewards(static_cast<std::size_t>(t_f));
    std::vector<double> targets(static_cast<std::size_t>(samples), 0.0);
    for (int e = 0; e < batch.episodes; ++e) {
      for (int t = 0; t < t_f; ++t)
        rewards[static_cast<std::size_t>(t)] = batch.rewards[batch.step_index(e, t)];
      for (int i = 0; i < n; ++i) {
        for (int t = 0; t < t_f; ++t)
          values[static_cast<std::size_t>(t)] = local_values[batch.col(e, t, i)];
        values[static_cast<std::size_t>(t_f)] = 0.0;
        const auto adv = compute_gae(rewards, values, cfg.gamma, cfg.lambda);
        for (int t = 0; t < t_f; ++t) {
          const long c = batch.col(e, t, i);
          if (batch.health[c] == 0.0) continue;
          record.psi[c] = adv[static_cast<std::size_t>(t)];
          targets[static_cast<std::size_t>(c)] =
              adv[static_cast<std::size_t>(t)] + values[static_cast<std::size_t>(t)];
          live.push_back(c);
        }
      }
    }
    record.critic_inputs.resize(inputs.rows(), static_cast<Eigen::Index>(live.size()));
    record.critic_targets.resize(static_cast<Eigen::Index>(live.size()));
    for (std::size_t k = 0; k < live.size(); ++k) {
      record.critic_inputs.col(static_cast<Eigen::Index>(k)) = inputs.col(live[k]);
      record.critic_targets[static_cast<Eigen::Index>(k)] =
          targets[static_cast<std::size_t>(live[k])];
    }
  }

  if (cfg.normalize_advantages) {
    // Statistics over live samples; the min-health mask is re-applied so dead
    // samples keep an exactly-zero credit.
    double mean = 0.0, count = 0.0;
    for (Eigen::Index k = 0; k < record.psi.size(); ++k)
      if (batch.health[k] > 0.0) {
        mean += record.psi[k];
        count += 1.0;
      }
    mean /= std::max(count, 1.0);
    double var = 0.0;
    for (Eigen::Index k = 0; k < record.psi.size(); ++k)
      if (batch.health[k] > 0.0) var += (record.psi[k] - mean) * (record.psi[k] - mean);
    const double stddev = std::sqrt(var / std::max(count, 1.0));
    for (Eigen::Index k = 0; k < record.psi.size(); ++k) {
      record.psi[k] = (record.psi[k] - mean) / (stddev + 1e-8);
      if (variant == Variant::kMinHealth && batch.health[k] == 0.0) record.psi[k] = 0.0;
    }
  }
  return record;
}

struct PolicyLossResult {
  double loss = 0.0;
  Vec grad;  // [mlp | log_std]
  double mean_entropy = 0.0;
  double clip_fraction = 0.0;
};

// Clipped surrogate objective with a health-masked entropy bonus:
//   objective = mean_b [ c h_b S(pi) + min(rho_b Psi_b, clip(rho_b) Psi_b) ]
// Loss is the negated objective; the gradient is exact.
inline PolicyLossResult ppo_policy_loss(const nn::GaussianPolicy& policy,
                                        const RolloutBatch& batch, const Vec& psi,
                                        std::span<const long> sample_indices, double clip_eps,
                                        double entropy_coef) {
  if (psi.size() != batch.sample_count())
    throw ArgumentError("ppo_policy_loss: psi size mismatch");
  const auto b_count = static_cast<Eigen::Index>(sample_indices.size());
  if (b_count == 0) throw ArgumentError("ppo_policy_loss: empty minibatch");

  const int adim = policy.action_dim();
  const Vec log_std = policy.log_std();
  Vec inv_var(adim);
  for (int d = 0; d < adim; ++d) inv_var[d] = std::exp(-2.0 * log_std[d]);
  const double entropy = nn::gaussian_entropy(log_std);

  Mat x(policy.obs_dim(), b_count);
  Mat actions(adim, b_count);
  for (Eigen::Index b = 0; b < b_count; ++b) {
    x.col(b) = batch.obs.col(sample_indices[static_cast<std::size_t>(b)]);
    actions.col(b) = batch.sampled_actions.col(sample_indices[static_cast<std::size_t>(b)]);
  }

  nn::MlpCache cache;
  const Mat mean = policy.forward_mean(x, &cache);

  double objective = 0.0;
  double entropy_acc = 0.0;
  long clipped_count = 0;
  Mat d_mean = Mat::Zero(adim, b_count);
  Vec d_log_std = Vec::Zero(adim);
  const double inv_b = 1.0 / static_cast<double>(b_count);

  for (Eigen::Index b = 0; b < b_count; ++b) {
    const long c = sample_indices[static_cast<std::size_t>(b)];
    double logp = 0.0;
    for (int d = 0; d < adim; ++d) {
      const double diff = actions(d, b) - mean(d, b);
      logp += -0.9189385332046727 - log_std[d] - 0.5 * diff * diff * inv_var[d];
    }
    const double ratio = std::exp(logp - batch.behavior_logprob[c]);
    if (!std::isfinite(ratio))
      throw NumericError("ppo_policy_loss: non-finite probability ratio at sample " +
                         std::to_string(c));

    const double p = psi[c];
    const double clamped = std::clamp(ratio, 1.0 - clip_eps, 1.0 + clip_eps);
    const double unclipped = ratio * p;
    const double clipped = clamped * p;
    const double h = batch.health[c];

    objective += (std::min(unclipped, clipped) + entropy_coef * h * entropy) * inv_b;
    entropy_acc += entropy * inv_b;
    if (clipped < unclipped) ++clipped_count;

    // Gradient of the min: the unclipped branch when it attains the min,
    // otherwise zero whenever the ratio is actually clamped.
    double coef = 0.0;
    if (unclipped <= clipped || clamped == ratio) coef = p * ratio;
    for (int d = 0; d < adim; ++d) {
      const double diff = actions(d, b) - mean(d, b);
      // d logp / d mean = diff * inv_var; chain through the objective sign.
      d_mean(d, b) = -coef * diff * inv_var[d] * inv_b;
      d_log_std[d] +=
          -(coef * (diff * diff * inv_var[d] - 1.0) + entropy_coef * h) * inv_b;
    }
  }

  PolicyLossResult result;
  result.loss = -objective;
  result.mean_entropy = entropy_acc;
  result.clip_fraction = static_cast<double>(clipped_count) / static_cast<double>(b_count);
  result.grad = Vec::Zero(policy.param_count());
  Vec mlp_grad = Vec::Zero(nn::mlp_param_count(policy.spec));
  nn::mlp_backward(policy.spec, policy.params.head(nn::mlp_param_count(policy.spec)), cache,
                   d_mean, mlp_grad);
  result.grad.head(mlp_grad.size()) = mlp_grad;
  result.grad.tail(adim) = d_log_std;
  return result;
}

struct CriticLossResult {
  double loss = 0.0;
  Vec grad;
};

// Mean squared error against frozen targets; exact gradient.
inline CriticLossResult critic_loss(const nn::ValueNet& critic, const Mat& inputs,
                                    const Vec& targets) {
  if (inputs.cols() != targets.size())
    throw ArgumentError("critic_loss: inputs/targets mismatch");
  nn::MlpCache cache;
  const Vec values = critic.forward(inputs, &cache);
  const Vec err = values - targets;
  const double inv_b = 1.0 / static_cast<double>(targets.size());

  CriticLossResult result;
  result.loss = err.squaredNorm() * inv_b;
  result.grad = Vec::Zero(critic.param_count());
  Mat d_out = (2.0 * inv_b) * err.transpose();
  nn::mlp_backward(critic.spec, critic.params, cache, d_out, result.grad);
  return result;
}

struct IterationStats {
  long iteration = 0;
  long episodes_collected = 0;
  double mean_return = 0.0;
  double policy_loss = 0.0;
  double critic_loss = 0.0;
  double mean_entropy = 0.0;
  double clip_fraction = 0.0;
  Vec batch_returns;  // per-episode returns of the collected batch
};

// Bundles shared policy, critic, and optimizer state for one training run.
struct Trainer {
  envs::ParticleEnv env;
  TrainConfig cfg;
  std::uint64_t seed = 0;
  nn::GaussianPolicy policy;
  nn::AdamState policy_adam;
  nn::ValueNet critic;
  nn::AdamState critic_adam;
  long iteration = 0;
  long episodes_done = 0;

  static Trainer make(const envs::ParticleEnv& env, const TrainConfig& cfg,
                      std::uint64_t seed) {
    cfg.validate();
    RngStream policy_rng(mix_seed(seed, 0x696e6974ULL, 1));
    RngStream critic_rng(mix_seed(seed, 0x696e6974ULL, 2));
    nn::GaussianPolicy policy =
        nn::GaussianPolicy::make(env.obs_dim(), env.action_dim(), policy_rng, {64, 64},
                                 nn::Activation::kTanh, 0.5);
    nn::ValueNet critic =
        cfg.variant == Variant::kLocalCritic
            ? nn::ValueNet::make(env.obs_dim() + 1, critic_rng, {64, 64},
                                 nn::Activation::kTanh)
            : nn::ValueNet::make(env.critic_dim(), critic_rng,
                                 std::vector<int>(8, 64), nn::Activation::kElu);
    Trainer t{env, cfg, seed, std::move(policy), nn::AdamState(), std::move(critic),
              nn::AdamState(), 0, 0};
    t.policy_adam = nn::AdamState(t.policy.param_count());
    t.critic_adam = nn::AdamState(t.critic.param_count());
    return t;
  }
};

namespace detail {

inline std::vector<long> shuffled_indices(long count, RngStream& rng) {
  std::vector<long> indices(static_cast<std::size_t>(count));
  for (long k = 0; k < count; ++k) indices[static_cast<std::size_t>(k)] = k;
  for (long k = count - 1; k > 0; --k) {
    const auto j = static_cast<long>(rng.uniform_index(static_cast<std::uint64_t>(k + 1)));
    std::swap(indices[static_cast<std::size_t>(k)], indices[static_cast<std::size_t>(j)]);
  }
  return indices;
}

}  // namespace detail

// One full pass of the training loop: collect a batch with the current
// policy, compute value targets and credit, then run K epochs of shuffled
// minibatch updates for the policy and the critic.
inline IterationStats train_iteration(Trainer& trainer) {
  const TrainConfig& cfg = trainer.cfg;
  const RolloutBatch batch = collect_rollouts(trainer.env, trainer.policy,
                                              cfg.episodes_per_batch, trainer.seed,
                                              trainer.iteration);
  const AdvantageRecord record =
      compute_psi(cfg.variant, batch, trainer.critic, trainer.env, cfg);

  IterationStats stats;
  stats.iteration = trainer.iteration;
  stats.mean_return = batch.episode_returns.mean();
  stats.batch_returns = batch.episode_returns;

  double policy_loss_acc = 0.0, entropy_acc = 0.0, clip_acc = 0.0;
  long policy_updates = 0;
  const long samples = batch.sample_count();
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    RngStream shuffle_rng(mix_seed(trainer.seed, 0x73687566ULL,
                                   static_cast<std::uint64_t>(trainer.iteration),
                                   static_cast<std::uint64_t>(epoch)));
    const auto perm = detail::shuffled_indices(samples, shuffle_rng);
    for (int mb = 0; mb < cfg.minibatches; ++mb) {
      const long lo = samples * mb / cfg.minibatches;
      const long hi = samples * (mb + 1) / cfg.minibatches;
      if (hi == lo) continue;
      const std::span<const long> slice(perm.data() + lo, static_cast<std::size_t>(hi - lo));
      auto result = ppo_policy_loss(trainer.policy, batch, record.psi, slice, cfg.clip_eps,
                                    cfg.entropy_coef);
      nn::adam_step(trainer.policy.params, result.grad, trainer.policy_adam, cfg.actor_lr);
      trainer.policy.clamp_log_std();
      policy_loss_acc += result.loss;
      entropy_acc += result.mean_entropy;
      clip_acc += result.clip_fraction;
      ++policy_updates;
    }
  }

  double critic_loss_acc = 0.0;
  long critic_updates = 0;
  const long critic_samples = record.critic_targets.size();
  Mat mb_inputs;
  Vec mb_targets;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    RngStream shuffle_rng(mix_seed(trainer.seed, 0x76616c75ULL,
                                   static_cast<std::uint64_t>(trainer.iteration),
                                   static_cast<std::uint64_t>(epoch)));
    const auto perm = detail::shuffled_indices(critic_samples, shuffle_rng);
    for (int mb = 0; mb < cfg.minibatches; ++mb) {
      const long lo = critic_samples * mb / cfg.minibatches;
      const long hi = critic_samples * (mb + 1) / cfg.minibatches;
      if (hi == lo) continue;
      mb_inputs.resize(record.critic_inputs.rows(), hi - lo);
      mb_targets.resize(hi - lo);
      for (long k = lo; k < hi; ++k) {
        mb_inputs.col(k - lo) = record.critic_inputs.col(perm[static_cast<std::size_t>(k)]);
        mb_targets[k - lo] = record.critic_targets[perm[static_cast<std::size_t>(k)]];
      }
      auto result = critic_loss(trainer.critic, mb_inputs, mb_targets);
      nn::adam_step(trainer.critic.params, result.grad, trainer.critic_adam, cfg.critic_lr);
      critic_loss_acc += result.loss;
      ++critic_updates;
    }
  }

  stats.policy_loss = policy_loss_acc / std::max<long>(policy_updates, 1);
  stats.critic_loss = critic_loss_acc / std::max<long>(critic_updates, 1);
  stats.mean_entropy = entropy_acc / std::max<long>(policy_updates, 1);
  stats.clip_fraction = clip_acc / std::max<long>(policy_updates, 1);

  ++trainer.iteration;
  trainer.episodes_done += cfg.episodes_per_batch;
  stats.episodes_collected = trainer.episodes_done;
  return stats;
}

}  // namespace hippo::algo
