#pragma once

#include <cstdint>
#include <cstring>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "hippo/rng.hpp"

namespace hippo {

// Error taxonomy shared across modules.
struct ArgumentError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct StateError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ResourceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Per-agent degradation scalars in [0, 1]; 1 = nominal, 0 = terminated.
struct HealthVector {
  std::vector<double> values;

  HealthVector() = default;
  explicit HealthVector(std::size_t n, double fill = 1.0) : values(n, fill) {}

  std::size_t size() const { return values.size(); }
  double operator[](std::size_t i) const { return values[i]; }
  double& operator[](std::size_t i) { return values[i]; }

  bool in_unit_interval() const {
    for (double h : values)
      if (!(h >= 0.0 && h <= 1.0)) return false;
    return true;
  }

  bool operator==(const HealthVector& other) const = default;
};

// Full system state s = (h, p): health plus the scenario-defined non-health
// block (poses, velocities, landmarks, hazard bookkeeping), plus the step
// index. The layout of `nonhealth` is owned by the environment.
struct JointState {
  HealthVector health;
  std::vector<double> nonhealth;
  int time = 0;

  bool operator==(const JointState& other) const = default;
};

inline std::vector<std::uint8_t> serialize_state(const JointState& s) {
  std::vector<std::uint8_t> out;
  auto put_u64 = [&out](std::uint64_t v) {
    for (int k = 0; k < 8; ++k) out.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
  };
  auto put_f64 = [&put_u64](double d) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, 8);
    put_u64(bits);
  };
  put_u64(s.health.size());
  for (double h : s.health.values) put_f64(h);
  put_u64(s.nonhealth.size());
  for (double p : s.nonhealth) put_f64(p);
  put_u64(static_cast<std::uint64_t>(static_cast<std::int64_t>(s.time)));
  return out;
}

inline JointState deserialize_state(std::span<const std::uint8_t> bytes) {
  std::size_t pos = 0;
  auto get_u64 = [&bytes, &pos]() {
    if (pos + 8 > bytes.size()) throw ArgumentError("state bytes truncated");
    std::uint64_t v = 0;
    for (int k = 0; k < 8; ++k) v |= static_cast<std::uint64_t>(bytes[pos + k]) << (8 * k);
    pos += 8;
    return v;
  };
  auto get_f64 = [&get_u64]() {
    const std::uint64_t bits = get_u64();
    double d;
    std::memcpy(&d, &bits, 8);
    return d;
  };
  JointState s;
  s.health.values.resize(get_u64());
  for (double& h : s.health.values) h = get_f64();
  s.nonhealth.resize(get_u64());
  for (double& p : s.nonhealth) p = get_f64();
  s.time = static_cast<int>(static_cast<std::int64_t>(get_u64()));
  return s;
}

// n per-agent continuous control vectors stored flat.
struct JointAction {
  int n_agents = 0;
  int dim = 0;
  std::vector<double> data;

  JointAction() = default;
  JointAction(int n, int d) : n_agents(n), dim(d), data(static_cast<std::size_t>(n) * d, 0.0) {}

  std::span<double> agent(int i) {
    return {data.data() + static_cast<std::size_t>(i) * dim, static_cast<std::size_t>(dim)};
  }
  std::span<const double> agent(int i) const {
    return {data.data() + static_cast<std::size_t>(i) * dim, static_cast<std::size_t>(dim)};
  }
};

// n per-agent local views stored flat.
struct JointObservation {
  int n_agents = 0;
  int dim = 0;
  std::vector<double> data;

  JointObservation() = default;
  JointObservation(int n, int d)
      : n_agents(n), dim(d), data(static_cast<std::size_t>(n) * d, 0.0) {}

  std::span<double> agent(int i) {
    return {data.data() + static_cast<std::size_t>(i) * dim, static_cast<std::size_t>(dim)};
  }
  std::span<const double> agent(int i) const {
    return {data.data() + static_cast<std::size_t>(i) * dim, static_cast<std::size_t>(dim)};
  }
};

// One agent's (observation, action) sequence; the trailing entry may not yet
// have an action while selection is pending.
struct ObservationActionHistory {
  struct Entry {
    std::vector<double> observation;
    std::optional<std::vector<double>> action;
  };
  std::vector<Entry> entries;

  void push_observation(std::vector<double> obs) {
    if (!entries.empty() && !entries.back().action.has_value())
      throw StateError("previous step still awaiting an action");
    entries.push_back({std::move(obs), std::nullopt});
  }
  void push_action(std::vector<double> action) {
    if (entries.empty() || entries.back().action.has_value())
      throw StateError("no pending observation to attach an action to");
    entries.back().action = std::move(action);
  }
  std::size_t steps() const { return entries.size(); }
};

// Binary-health action constriction: a terminated agent can only execute the
// zero vector; otherwise the proposal passes through.
inline std::vector<double> constrict_action(std::span<const double> proposed, double health) {
  if (health > 0.0) return {proposed.begin(), proposed.end()};
  return std::vector<double>(proposed.size(), 0.0);
}

// State identical to `s` except agent i's health is replaced with h_min.
inline JointState make_counterfactual_state(const JointState& s, int agent, double h_min) {
  if (agent < 0 || static_cast<std::size_t>(agent) >= s.health.size())
    throw ArgumentError("agent index out of range");
  JointState out = s;
  out.health[static_cast<std::size_t>(agent)] = h_min;
  return out;
}

// Health-semantics validation report: one entry per property, with the first
// counterexample found if any.
struct HealthPropertyReport {
  struct Item {
    bool passed = true;
    long checks = 0;
    std::string counterexample;
  };
  Item non_recoverable;        // dead stays dead
  Item reachable_constriction; // dead kinematics reproducible at full health
  Item action_constriction;    // constrict_action contracts the action set
  Item observable_constriction;// dead observations follow the constriction rule

  bool all_passed() const {
    return non_recoverable.passed && reachable_constriction.passed &&
           action_constriction.passed && observable_constriction.passed;
  }
};

namespace detail {

inline std::string describe_agent_step(int episode, int t, int agent) {
  std::ostringstream os;
  os << "episode " << episode << ", step " << t << ", agent " << agent;
  return os.str();
}

}  // namespace detail

// Monte-Carlo sweep of the four health properties over `num_samples` sampled
// transitions. The environment contract:
//   num_agents(), action_dim(), obs_dim(), horizon()
//   reset(rng) -> {state, obs};  step(state, action, rng) -> {state, obs, reward, done}
//   kill_agent(state, i) -> state with agent i terminated per the env's own rule
//   agent_substate(state, i) -> the kinematic components owned by agent i
//   obs_health_index(), obs_velocity_indices() -> feature layout for property 4
// Episodes periodically force an agent to zero health so the degraded paths
// are exercised even when the scenario itself never kills anyone.
template <typename Env>
HealthPropertyReport validate_health_properties(const Env& env, long num_samples,
                                                std::uint64_t seed) {
  HealthPropertyReport report;
  RngStream rng(mix_seed(seed, 0x68656c74ULL));

  auto fail = [](HealthPropertyReport::Item& item, const std::string& why) {
    if (item.passed) {
      item.passed = false;
      item.counterexample = why;
    }
  };

  const int n = env.num_agents();
  const int adim = env.action_dim();
  long sampled = 0;
  int episode = 0;

  while (sampled < num_samples) {
    auto [state, obs] = env.reset(rng);
    // Per-agent frozen observation snapshots for property 4.
    std::vector<std::vector<double>> last_dead_obs(n);
    std::vector<bool> was_dead(n, false);
    for (int i = 0; i < n; ++i) was_dead[i] = state.health[i] == 0.0;

    for (int t = 0; t < env.horizon() && sampled < num_samples; ++t, ++sampled) {
      // Periodically force a kill so degraded transitions exist in the sample.
      if (t == env.horizon() / 3 && episode % 2 == 0 && state.health[episode % n] > 0.0) {
        state = env.kill_agent(state, episode % n);
      }

      JointAction action(n, adim);
      for (int i = 0; i < n; ++i)
        for (int d = 0; d < adim; ++d) action.agent(i)[d] = rng.uniform(-1.0, 1.0);

      // Property 3: constriction of the action set.
      for (int i = 0; i < n; ++i) {
        const double h = state.health[i];
        const auto executed = constrict_action(action.agent(i), h);
        ++report.action_constriction.checks;
        if (h == 0.0) {
          for (double v : executed)
            if (v != 0.0)
              fail(report.action_constriction,
                   "dead agent executed a nonzero action at " +
                       detail::describe_agent_step(episode, t, i));
        } else {
          for (int d = 0; d < adim; ++d)
            if (executed[static_cast<std::size_t>(d)] != action.agent(i)[d])
              fail(report.action_constriction,
                   "live action altered by constriction at " +
                       detail::describe_agent_step(episode, t, i));
        }
        const auto twice = constrict_action(executed, h);
        if (twice != executed)
          fail(report.action_constriction, "constriction is not a projection at " +
                                               detail::describe_agent_step(episode, t, i));
      }

      RngStream step_rng(mix_seed(seed, 0x73746570ULL, static_cast<std::uint64_t>(episode),
                                  static_cast<std::uint64_t>(t)));
      auto result = env.step(state, action, step_rng);

      for (int i = 0; i < n; ++i) {
        const bool dead_before = state.health[i] == 0.0;
        const bool dead_after = result.state.health[i] == 0.0;

        // Property 1: zero health never recovers.
        ++report.non_recoverable.checks;
        if (dead_before && !dead_after)
          fail(report.non_recoverable,
               "health revived from 0 at " + detail::describe_agent_step(episode, t, i));

        // Property 2: a dead agent's next kinematic substate must be
        // reproducible from the full-health twin via the zero action.
        if (dead_before) {
          ++report.reachable_constriction.checks;
          JointState twin = make_counterfactual_state(state, i, 1.0);
          JointAction twin_action = action;
          for (int d = 0; d < adim; ++d) twin_action.agent(i)[d] = 0.0;
          RngStream twin_rng(mix_seed(seed, 0x7477696eULL, static_cast<std::uint64_t>(episode),
                                      static_cast<std::uint64_t>(t)));
          auto twin_result = env.step(twin, twin_action, twin_rng);
          if (env.agent_substate(result.state, i) != env.agent_substate(twin_result.state, i))
            fail(report.reachable_constriction,
                 "dead kinematics unreachable at full health at " +
                     detail::describe_agent_step(episode, t, i));
        }

        // Property 4: dead observations follow the constriction rule --
        // health feature 0, velocity features 0, frozen once dead.
        if (dead_after) {
          ++report.observable_constriction.checks;
          const auto dead_obs = result.obs.agent(i);
          if (dead_obs[static_cast<std::size_t>(env.obs_health_index())] != 0.0)
            fail(report.observable_constriction,
                 "dead observation reports nonzero health at " +
                     detail::describe_agent_step(episode, t, i));
          for (int vi : env.obs_velocity_indices())
            if (dead_obs[static_cast<std::size_t>(vi)] != 0.0)
              fail(report.observable_constriction,
                   "dead observation reports nonzero velocity at " +
                       detail::describe_agent_step(episode, t, i));
          if (was_dead[i]) {
            if (last_dead_obs[i] !=
                std::vector<double>(dead_obs.begin(), dead_obs.end()))
              fail(report.observable_constriction,
                   "dead observation changed after death at " +
                       detail::describe_agent_step(episode, t, i));
          }
          last_dead_obs[i].assign(dead_obs.begin(), dead_obs.end());
          was_dead[i] = true;
        } else {
          was_dead[i] = false;
        }
      }

      state = std::move(result.state);
      obs = std::move(result.obs);
      if (result.done) break;
    }
    ++episode;
  }
  return report;
}

}  // namespace hippo
