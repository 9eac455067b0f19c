#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "hippo/algo.hpp"
#include "hippo/checkpoint.hpp"
#include "hippo/config.hpp"
#include "hippo/core.hpp"
#include "hippo/particle.hpp"

namespace hippo::harness {

// One learning-curve point: batch-end episode index, per-trial batch-mean
// returns, and their aggregate band.
struct LearningCurve {
  struct Point {
    long episode = 0;
    std::vector<double> trial_means;
    double mean = 0.0;
    double min = 0.0;
    double max = 0.0;
  };
  std::vector<Point> points;
};

namespace detail {

inline std::string sig9(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace detail

// Pointwise mean/min/max across equal-length trial curves. The mean is summed
// in sorted order so trial permutations produce bit-identical aggregates.
inline LearningCurve aggregate_curves(
    const std::vector<std::vector<std::pair<long, double>>>& trials) {
  if (trials.empty()) throw ArgumentError("aggregate_curves: no trials");
  const std::size_t length = trials.front().size();
  for (const auto& trial : trials)
    if (trial.size() != length) throw ArgumentError("aggregate_curves: trial length mismatch");

  LearningCurve curve;
  curve.points.resize(length);
  for (std::size_t k = 0; k < length; ++k) {
    auto& point = curve.points[k];
    point.episode = trials.front()[k].first;
    for (const auto& trial : trials) {
      if (trial[k].first != point.episode)
        throw ArgumentError("aggregate_curves: episode index mismatch across trials");
      point.trial_means.push_back(trial[k].second);
    }
    std::vector<double> sorted = point.trial_means;
    std::sort(sorted.begin(), sorted.end());
    double sum = 0.0;
    for (double v : sorted) sum += v;
    point.mean = sum / static_cast<double>(sorted.size());
    point.min = sorted.front();
    point.max = sorted.back();
  }
  return curve;
}

inline void write_trial_csv(const std::filesystem::path& path, int trial,
                            const std::vector<std::pair<long, double>>& points) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ConfigError("cannot open CSV for writing: " + path.string());
  out << "episode,trial,mean_return\n";
  for (const auto& [episode, mean_return] : points)
    out << episode << ',' << trial << ',' << detail::sig9(mean_return) << '\n';
  if (!out) throw ConfigError("CSV write failed: " + path.string());
}

inline void write_aggregate_csv(const std::filesystem::path& path, const LearningCurve& curve) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ConfigError("cannot open CSV for writing: " + path.string());
  out << "episode,agg_mean,agg_min,agg_max\n";
  for (const auto& point : curve.points)
    out << point.episode << ',' << detail::sig9(point.mean) << ',' << detail::sig9(point.min)
        << ',' << detail::sig9(point.max) << '\n';
  if (!out) throw ConfigError("CSV write failed: " + path.string());
}

inline std::vector<std::pair<long, double>> read_trial_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open CSV: " + path.string());
  std::vector<std::pair<long, double>> points;
  std::string line;
  if (!std::getline(in, line) || line != "episode,trial,mean_return")
    throw ConfigError("unexpected CSV header in " + path.string());
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto c1 = line.find(',');
    const auto c2 = line.find(',', c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos)
      throw ConfigError("malformed CSV row in " + path.string());
    points.emplace_back(std::stol(line.substr(0, c1)), std::stod(line.substr(c2 + 1)));
  }
  return points;
}

struct EvalResult {
  double mean = 0.0;
  std::vector<double> returns;
};

// Greedy-mean policy rollouts (no sampling noise); deterministic given seed.
inline EvalResult evaluate_policy(const nn::GaussianPolicy& policy,
                                  const envs::ParticleEnv& env, int episodes,
                                  std::uint64_t seed) {
  if (policy.obs_dim() != env.obs_dim() || policy.action_dim() != env.action_dim())
    throw ConfigError("policy does not match environment dimensions");
  EvalResult result;
  const int n = env.num_agents();
  nn::Mat step_obs(env.obs_dim(), n);
  for (int e = 0; e < episodes; ++e) {
    RngStream rng(mix_seed(seed, 0x6576616cULL, static_cast<std::uint64_t>(e)));
    auto [state, obs] = env.reset(rng);
    double total = 0.0;
    for (int t = 0; t < env.horizon(); ++t) {
      for (int i = 0; i < n; ++i) {
        const auto view = obs.agent(i);
        for (int d = 0; d < env.obs_dim(); ++d)
          step_obs(d, i) = view[static_cast<std::size_t>(d)];
      }
      const nn::Mat mean = policy.forward_mean(step_obs);
      JointAction action(n, env.action_dim());
      for (int i = 0; i < n; ++i)
        for (int d = 0; d < env.action_dim(); ++d) action.agent(i)[d] = mean(d, i);
      auto step = env.step(state, action, rng);
      total += step.reward;
      state = std::move(step.state);
      obs = std::move(step.obs);
    }
    result.returns.push_back(total);
  }
  if (!result.returns.empty()) {
    double sum = 0.0;
    for (double r : result.returns) sum += r;
    result.mean = sum / static_cast<double>(result.returns.size());
  }
  return result;
}

// Uniform-random-policy baseline over the declared action box.
inline EvalResult random_policy_baseline(const envs::ParticleEnv& env, int episodes,
                                         std::uint64_t seed) {
  EvalResult result;
  const int n = env.num_agents();
  for (int e = 0; e < episodes; ++e) {
    RngStream rng(mix_seed(seed, 0x72616e64ULL, static_cast<std::uint64_t>(e)));
    auto [state, obs] = env.reset(rng);
    double total = 0.0;
    for (int t = 0; t < env.horizon(); ++t) {
      JointAction action(n, env.action_dim());
      for (int i = 0; i < n; ++i)
        for (int d = 0; d < env.action_dim(); ++d) action.agent(i)[d] = rng.uniform(-1.0, 1.0);
      auto step = env.step(state, action, rng);
      total += step.reward;
      state = std::move(step.state);
    }
    result.returns.push_back(total);
  }
  if (!result.returns.empty()) {
    double sum = 0.0;
    for (double r : result.returns) sum += r;
    result.mean = sum / static_cast<double>(result.returns.size());
  }
  return result;
}

struct ExperimentResult {
  LearningCurve curve;
  std::vector<std::vector<double>> episode_returns;  // per trial, per episode
  std::vector<std::filesystem::path> trial_csvs;
  std::filesystem::path aggregate_csv;
};

// Runs `trials` independent training runs with seeds master_seed + trial
// index, logs batch-mean returns to per-trial CSVs, writes checkpoints, and
// aggregates the curves. A numeric failure saves a crash checkpoint next to
// the partial logs before propagating.
inline ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  const long iterations = (config.train.total_episodes + config.train.episodes_per_batch - 1) /
                          config.train.episodes_per_batch;
  std::filesystem::create_directories(config.out_dir);

  ExperimentResult result;
  std::vector<std::vector<std::pair<long, double>>> trial_points;

  for (int trial = 0; trial < config.trials; ++trial) {
    const std::uint64_t seed = config.master_seed + static_cast<std::uint64_t>(trial);
    const std::filesystem::path trial_dir =
        std::filesystem::path(config.out_dir) / ("trial_" + std::to_string(trial));
    std::filesystem::create_directories(trial_dir);

    envs::ParticleEnv env = make_env(config);
    algo::Trainer trainer = algo::Trainer::make(env, config.train, seed);
    const auto agents = static_cast<std::uint32_t>(env.num_agents());

    std::vector<std::pair<long, double>> points;
    std::vector<double> returns;
    returns.reserve(static_cast<std::size_t>(iterations) *
                    config.train.episodes_per_batch);

    for (long it = 0; it < iterations; ++it) {
      algo::IterationStats stats;
      try {
        stats = algo::train_iteration(trainer);
      } catch (const NumericError&) {
        nn::save_checkpoint(trial_dir / "policy_crash.ckpt",
                            nn::policy_checkpoint(trainer.policy, agents));
        nn::save_checkpoint(trial_dir / "critic_crash.ckpt",
                            nn::critic_checkpoint(trainer.critic, agents));
        write_trial_csv(trial_dir / "returns.csv", trial, points);
        throw;
      }
      for (Eigen::Index k = 0; k < stats.batch_returns.size(); ++k)
        returns.push_back(stats.batch_returns[k]);
      if ((it + 1) % config.eval_interval == 0)
        points.emplace_back(stats.episodes_collected, stats.mean_return);
      if ((it + 1) % config.checkpoint_interval == 0) {
        const std::string tag = std::to_string(stats.episodes_collected);
        nn::save_checkpoint(trial_dir / ("policy_" + tag + ".ckpt"),
                            nn::policy_checkpoint(trainer.policy, agents));
        nn::save_checkpoint(trial_dir / ("critic_" + tag + ".ckpt"),
                            nn::critic_checkpoint(trainer.critic, agents));
      }
    }

    nn::save_checkpoint(trial_dir / "policy_final.ckpt",
                        nn::policy_checkpoint(trainer.policy, agents));
    nn::save_checkpoint(trial_dir / "critic_final.ckpt",
                        nn::critic_checkpoint(trainer.critic, agents));
    const std::filesystem::path csv = trial_dir / "returns.csv";
    write_trial_csv(csv, trial, points);
    result.trial_csvs.push_back(csv);
    result.episode_returns.push_back(std::move(returns));
    trial_points.push_back(std::move(points));
  }

  result.curve = aggregate_curves(trial_points);
  result.aggregate_csv = std::filesystem::path(config.out_dir) / "aggregate.csv";
  write_aggregate_csv(result.aggregate_csv, result.curve);
  return result;
}

}  // namespace hippo::harness
