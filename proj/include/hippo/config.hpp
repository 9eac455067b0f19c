#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "hippo/algo.hpp"
#include "hippo/core.hpp"
#include "hippo/particle.hpp"

namespace hippo::harness {

// Full experiment description: environment choice, training hyperparameters,
// seeding, and output layout.
struct ExperimentConfig {
  std::string env_name = "hazardous-nav";
  algo::TrainConfig train;
  envs::ParticleWorldConfig world;
  std::uint64_t master_seed = 0;
  int trials = 4;
  std::string out_dir = "runs";
  int checkpoint_interval = 10;  // iterations between checkpoints
  int eval_interval = 1;         // iterations between learning-curve points

  void validate() const {
    if (trials < 1) throw ConfigError("trials must be >= 1");
    if (checkpoint_interval < 1) throw ConfigError("checkpoint_interval must be >= 1");
    if (eval_interval < 1) throw ConfigError("eval_interval must be >= 1");
    if (env_name != "hazardous-nav" && env_name != "hazardous-comm" &&
        env_name != "coop-nav" && env_name != "tabular-toy")
      throw ConfigError("unknown env: " + env_name);
    world.validate();
    train.validate();
  }
};

inline envs::ParticleEnv make_env(const ExperimentConfig& config) {
  if (config.env_name == "tabular-toy")
    throw ConfigError("tabular-toy is a verification model; use the verify command");
  return {envs::scenario_from_name(config.env_name), config.world};
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

inline double parse_real(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("invalid numeric value for " + key + ": '" + value + "'");
  }
}

inline long parse_int(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const long v = std::stol(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("invalid integer value for " + key + ": '" + value + "'");
  }
}

inline bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError("invalid boolean value for " + key + ": '" + value + "'");
}

}  // namespace detail

// Applies one key = value setting; every ExperimentConfig field is reachable.
inline void apply_setting(ExperimentConfig& config, const std::string& key,
                          const std::string& value) {
  if (key == "env") config.env_name = value;
  else if (key == "agents") config.world.n_agents = static_cast<int>(detail::parse_int(key, value));
  else if (key == "variant") config.train.variant = algo::variant_from_name(value);
  else if (key == "seed") config.master_seed = static_cast<std::uint64_t>(detail::parse_int(key, value));
  else if (key == "trials") config.trials = static_cast<int>(detail::parse_int(key, value));
  else if (key == "episodes") config.train.total_episodes = detail::parse_int(key, value);
  else if (key == "out") config.out_dir = value;
  else if (key == "gamma") config.train.gamma = detail::parse_real(key, value);
  else if (key == "lambda") config.train.lambda = detail::parse_real(key, value);
  else if (key == "clip_eps") config.train.clip_eps = detail::parse_real(key, value);
  else if (key == "entropy_coef") config.train.entropy_coef = detail::parse_real(key, value);
  else if (key == "epochs") config.train.epochs = static_cast<int>(detail::parse_int(key, value));
  else if (key == "minibatches") config.train.minibatches = static_cast<int>(detail::parse_int(key, value));
  else if (key == "episodes_per_batch") config.train.episodes_per_batch = static_cast<int>(detail::parse_int(key, value));
  else if (key == "actor_lr") config.train.actor_lr = detail::parse_real(key, value);
  else if (key == "critic_lr") config.train.critic_lr = detail::parse_real(key, value);
  else if (key == "normalize_advantages") config.train.normalize_advantages = detail::parse_bool(key, value);
  else if (key == "h_min") config.train.h_min = detail::parse_real(key, value);
  else if (key == "world_halfwidth") config.world.world_halfwidth = detail::parse_real(key, value);
  else if (key == "dt") config.world.dt = detail::parse_real(key, value);
  else if (key == "damping") config.world.damping = detail::parse_real(key, value);
  else if (key == "max_force") config.world.max_force = detail::parse_real(key, value);
  else if (key == "landmark_count") config.world.landmark_count = static_cast<int>(detail::parse_int(key, value));
  else if (key == "hazard_radius") config.world.hazard_radius = detail::parse_real(key, value);
  else if (key == "p_fail") config.world.p_fail = detail::parse_real(key, value);
  else if (key == "comm_radius") config.world.comm_radius = detail::parse_real(key, value);
  else if (key == "episode_length") config.world.episode_length = static_cast<int>(detail::parse_int(key, value));
  else if (key == "checkpoint_interval") config.checkpoint_interval = static_cast<int>(detail::parse_int(key, value));
  else if (key == "eval_interval") config.eval_interval = static_cast<int>(detail::parse_int(key, value));
  else throw ConfigError("unknown config key: " + key);
}

// Flat UTF-8 `key = value` file with '#' comments.
inline std::vector<std::pair<std::string, std::string>> parse_config_file(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::vector<std::pair<std::string, std::string>> settings;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string trimmed = detail::trim(line);
    if (trimmed.empty()) continue;
    const auto eq = trimmed.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(line_no) + ": expected key = value");
    settings.emplace_back(detail::trim(trimmed.substr(0, eq)),
                          detail::trim(trimmed.substr(eq + 1)));
  }
  return settings;
}

inline ExperimentConfig load_config_file(const std::string& path) {
  ExperimentConfig config;
  for (const auto& [key, value] : parse_config_file(path)) apply_setting(config, key, value);
  return config;
}

}  // namespace hippo::harness
