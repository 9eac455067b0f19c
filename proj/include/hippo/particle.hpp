#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <string>
#include <vector>

#include "hippo/core.hpp"
#include "hippo/nn.hpp"
#include "hippo/rng.hpp"

namespace hippo::envs {

enum class Scenario { kHazardNav, kHazardComm, kCoopNav };

inline Scenario scenario_from_name(const std::string& name) {
  if (name == "hazardous-nav") return Scenario::kHazardNav;
  if (name == "hazardous-comm") return Scenario::kHazardComm;
  if (name == "coop-nav") return Scenario::kCoopNav;
  throw ConfigError("unknown scenario: " + name);
}

inline std::string scenario_name(Scenario s) {
  switch (s) {
    case Scenario::kHazardNav: return "hazardous-nav";
    case Scenario::kHazardComm: return "hazardous-comm";
    case Scenario::kCoopNav: return "coop-nav";
  }
  return "?";
}

struct ParticleWorldConfig {
  int n_agents = 4;
  double world_halfwidth = 1.0;
  double dt = 0.1;
  double damping = 0.25;
  double max_force = 5.0;
  int landmark_count = 0;      // 0 -> one landmark per agent
  double hazard_radius = 0.25;
  double p_fail = 0.3;         // per-step termination probability inside the radius
  double comm_radius = 0.0;    // 0 -> 2 * terminal separation / (n_agents + 1)
  int episode_length = 50;     // t_f

  void validate() const {
    if (n_agents < 1) throw ConfigError("n_agents must be >= 1");
    if (!(world_halfwidth > 0.0)) throw ConfigError("world_halfwidth must be positive");
    if (!(dt > 0.0)) throw ConfigError("dt must be positive");
    if (!(damping >= 0.0 && damping < 1.0)) throw ConfigError("damping must be in [0, 1)");
    if (!(max_force > 0.0)) throw ConfigError("max_force must be positive");
    if (landmark_count < 0) throw ConfigError("landmark_count must be nonnegative");
    if (hazard_radius < 0.0) throw ConfigError("hazard_radius must be nonnegative");
    if (!(p_fail >= 0.0 && p_fail <= 1.0)) throw ConfigError("p_fail must be in [0, 1]");
    if (comm_radius < 0.0) throw ConfigError("comm_radius must be nonnegative");
    if (episode_length < 1) throw ConfigError("episode_length must be >= 1");
  }
};

// 2-D double-integrator particle world with first-class health semantics.
//
// Non-health state layout (owned here, opaque to everyone else):
//   [per agent: px, py, vx, vy] [per landmark: x, y]
//   [hazard_x, hazard_y, hazard_landmark_index, revealed]
//   [per agent: frozen observation block]
// A terminated agent keeps its place of death, its velocity is zeroed, and
// its observation is frozen at the death-instant reading (velocity features
// zeroed, own-health feature 0).
class ParticleEnv {
 public:
  struct ResetResult {
    JointState state;
    JointObservation obs;
  };
  struct StepResult {
    JointState state;
    JointObservation obs;
    JointAction executed;
    double reward = 0.0;
    bool done = false;
  };

  ParticleEnv(Scenario scenario, ParticleWorldConfig config)
      : scenario_(scenario), cfg_(config) {
    cfg_.validate();
    n_ = cfg_.n_agents;
    landmarks_ = scenario == Scenario::kHazardComm
                     ? 0
                     : (cfg_.landmark_count > 0 ? cfg_.landmark_count : n_);
    comm_radius_ = cfg_.comm_radius > 0.0
                       ? cfg_.comm_radius
                       : 4.0 * cfg_.world_halfwidth / (n_ + 1);
    obs_dim_ = 5 + (scenario == Scenario::kHazardComm ? 4 : 2 * landmarks_) + 3 + 2 * (n_ - 1);
    off_landmarks_ = 4 * n_;
    off_hazard_ = off_landmarks_ + 2 * landmarks_;
    off_frozen_ = off_hazard_ + 4;
    nonhealth_size_ = off_frozen_ + n_ * obs_dim_;
  }

  Scenario scenario() const { return scenario_; }
  const ParticleWorldConfig& config() const { return cfg_; }
  int num_agents() const { return n_; }
  int action_dim() const { return 2; }
  int obs_dim() const { return obs_dim_; }
  int horizon() const { return cfg_.episode_length; }
  int num_landmarks() const { return landmarks_; }
  double comm_radius() const { return comm_radius_; }
  std::array<double, 2> terminal(int k) const {
    return {k == 0 ? -cfg_.world_halfwidth : cfg_.world_halfwidth, 0.0};
  }

  // --- state accessors -------------------------------------------------

  std::array<double, 2> agent_position(const JointState& s, int i) const {
    return {s.nonhealth[static_cast<std::size_t>(4 * i)],
            s.nonhealth[static_cast<std::size_t>(4 * i + 1)]};
  }
  std::array<double, 2> agent_velocity(const JointState& s, int i) const {
    return {s.nonhealth[static_cast<std::size_t>(4 * i + 2)],
            s.nonhealth[static_cast<std::size_t>(4 * i + 3)]};
  }
  void set_agent_position(JointState& s, int i, double x, double y) const {
    s.nonhealth[static_cast<std::size_t>(4 * i)] = x;
    s.nonhealth[static_cast<std::size_t>(4 * i + 1)] = y;
  }
  void set_agent_velocity(JointState& s, int i, double x, double y) const {
    s.nonhealth[static_cast<std::size_t>(4 * i + 2)] = x;
    s.nonhealth[static_cast<std::size_t>(4 * i + 3)] = y;
  }
  std::array<double, 2> landmark_position(const JointState& s, int l) const {
    return {s.nonhealth[static_cast<std::size_t>(off_landmarks_ + 2 * l)],
            s.nonhealth[static_cast<std::size_t>(off_landmarks_ + 2 * l + 1)]};
  }
  void set_landmark_position(JointState& s, int l, double x, double y) const {
    s.nonhealth[static_cast<std::size_t>(off_landmarks_ + 2 * l)] = x;
    s.nonhealth[static_cast<std::size_t>(off_landmarks_ + 2 * l + 1)] = y;
    if (hazard_landmark_index(s) == l) {
      s.nonhealth[static_cast<std::size_t>(off_hazard_)] = x;
      s.nonhealth[static_cast<std::size_t>(off_hazard_ + 1)] = y;
    }
  }
  std::array<double, 2> hazard_position(const JointState& s) const {
    return {s.nonhealth[static_cast<std::size_t>(off_hazard_)],
            s.nonhealth[static_cast<std::size_t>(off_hazard_ + 1)]};
  }
  void set_hazard_position(JointState& s, double x, double y) const {
    s.nonhealth[static_cast<std::size_t>(off_hazard_)] = x;
    s.nonhealth[static_cast<std::size_t>(off_hazard_ + 1)] = y;
  }
  int hazard_landmark_index(const JointState& s) const {
    return static_cast<int>(s.nonhealth[static_cast<std::size_t>(off_hazard_ + 2)]);
  }
  bool hazard_revealed(const JointState& s) const {
    return s.nonhealth[static_cast<std::size_t>(off_hazard_ + 3)] != 0.0;
  }
  bool hazard_active() const { return scenario_ != Scenario::kCoopNav; }

  std::vector<double> agent_substate(const JointState& s, int i) const {
    return {s.nonhealth[static_cast<std::size_t>(4 * i)],
            s.nonhealth[static_cast<std::size_t>(4 * i + 1)],
            s.nonhealth[static_cast<std::size_t>(4 * i + 2)],
            s.nonhealth[static_cast<std::size_t>(4 * i + 3)]};
  }

  int obs_health_index() const { return 4; }
  std::vector<int> obs_velocity_indices() const { return {0, 1}; }

  // --- lifecycle --------------------------------------------------------

  ResetResult reset(RngStream& rng) const {
    JointState s;
    s.health = HealthVector(static_cast<std::size_t>(n_), 1.0);
    s.nonhealth.assign(static_cast<std::size_t>(nonhealth_size_), 0.0);
    s.time = 0;
    const double hw = cfg_.world_halfwidth;
    for (int i = 0; i < n_; ++i) {
      set_agent_position(s, i, rng.uniform(-hw, hw), rng.uniform(-hw, hw));
    }
    s.nonhealth[static_cast<std::size_t>(off_hazard_ + 2)] = -1.0;
    if (scenario_ == Scenario::kHazardComm) {
      const double margin = std::max(cfg_.hazard_radius, 0.05 * hw);
      set_hazard_position(s, rng.uniform(-hw + margin, hw - margin),
                          rng.uniform(-hw / 4.0, hw / 4.0));
    } else {
      for (int l = 0; l < landmarks_; ++l)
        set_landmark_position(s, l, rng.uniform(-hw, hw), rng.uniform(-hw, hw));
      if (scenario_ == Scenario::kHazardNav) {
        const int hazard = static_cast<int>(rng.uniform_index(
            static_cast<std::uint64_t>(landmarks_)));
        s.nonhealth[static_cast<std::size_t>(off_hazard_ + 2)] =
            static_cast<double>(hazard);
        const auto pos = landmark_position(s, hazard);
        set_hazard_position(s, pos[0], pos[1]);
      }
    }
    return {s, observe(s)};
  }

  StepResult step(const JointState& state, const JointAction& sampled, RngStream& rng) const {
    if (state.time >= cfg_.episode_length)
      throw StateError("step called on a finished episode");
    if (sampled.n_agents != n_ || sampled.dim != 2)
      throw ArgumentError("joint action shape mismatch");

    StepResult result;
    result.state = state;
    JointState& next = result.state;

    // Clamp to per-axis bounds, then constrict by health.
    result.executed = JointAction(n_, 2);
    for (int i = 0; i < n_; ++i) {
      std::vector<double> clamped(2);
      for (int d = 0; d < 2; ++d)
        clamped[static_cast<std::size_t>(d)] = std::clamp(sampled.agent(i)[d], -1.0, 1.0);
      const auto executed = constrict_action(clamped, state.health[i]);
      for (int d = 0; d < 2; ++d) result.executed.agent(i)[d] = executed[static_cast<std::size_t>(d)];
    }

    // Damped double-integrator update for live agents; the dead stay put.
    for (int i = 0; i < n_; ++i) {
      if (state.health[i] == 0.0) continue;
      auto vel = agent_velocity(next, i);
      auto pos = agent_position(next, i);
      for (int d = 0; d < 2; ++d)
        vel[static_cast<std::size_t>(d)] =
            (1.0 - cfg_.damping) * vel[static_cast<std::size_t>(d)] +
            result.executed.agent(i)[d] * cfg_.max_force * cfg_.dt;
      set_agent_velocity(next, i, vel[0], vel[1]);
      set_agent_position(next, i, pos[0] + vel[0] * cfg_.dt, pos[1] + vel[1] * cfg_.dt);
    }

    if (hazard_active()) {
      bool entered = false;
      for (int i = 0; i < n_; ++i)
        if (next.health[i] > 0.0 && in_hazard_radius(next, i)) entered = true;
      if (entered) next.nonhealth[static_cast<std::size_t>(off_hazard_ + 3)] = 1.0;

      const HealthVector after = hazard_termination(next, rng);
      for (int i = 0; i < n_; ++i) {
        if (next.health[i] > 0.0 && after[static_cast<std::size_t>(i)] == 0.0) {
          next.health[static_cast<std::size_t>(i)] = 0.0;
          set_agent_velocity(next, i, 0.0, 0.0);
        }
      }
      // Death-instant observation snapshots for the newly terminated.
      for (int i = 0; i < n_; ++i) {
        if (state.health[i] > 0.0 && next.health[i] == 0.0) freeze_observation(next, i);
      }
    }

    next.time = state.time + 1;
    result.done = next.time == cfg_.episode_length;
    result.obs = observe(next);
    result.reward = scenario_reward(next);
    return result;
  }

  // Samples terminations of live agents inside the hazard radius, each with
  // probability p_fail, independently. Returns the resulting health vector.
  HealthVector hazard_termination(const JointState& state, RngStream& rng) const {
    HealthVector health = state.health;
    if (!hazard_active()) return health;
    for (int i = 0; i < n_; ++i) {
      if (health[static_cast<std::size_t>(i)] == 0.0) continue;
      if (!in_hazard_radius(state, i)) continue;
      if (rng.uniform() < cfg_.p_fail) health[static_cast<std::size_t>(i)] = 0.0;
    }
    return health;
  }

  // Environment-consistent forced termination: health to zero, velocity
  // zeroed, observation frozen at the kill instant.
  JointState kill_agent(const JointState& state, int i) const {
    if (i < 0 || i >= n_) throw ArgumentError("agent index out of range");
    if (state.health[i] == 0.0) return state;
    JointState next = state;
    next.health[static_cast<std::size_t>(i)] = 0.0;
    set_agent_velocity(next, i, 0.0, 0.0);
    freeze_observation(next, i);
    return next;
  }

  JointObservation observe(const JointState& s) const {
    JointObservation obs(n_, obs_dim_);
    for (int i = 0; i < n_; ++i) {
      auto out = obs.agent(i);
      if (s.health[i] == 0.0) {
        const std::size_t off = static_cast<std::size_t>(off_frozen_ + i * obs_dim_);
        for (int k = 0; k < obs_dim_; ++k) out[static_cast<std::size_t>(k)] = s.nonhealth[off + k];
      } else {
        live_observation(s, i, out);
      }
    }
    return obs;
  }

  // --- rewards ----------------------------------------------------------

  // Negative sum over landmarks of the distance to the nearest live agent.
  // A landmark no live agent can cover contributes a fixed worst-case span.
  double navigation_reward(const JointState& s) const {
    double total = 0.0;
    for (int l = 0; l < landmarks_; ++l) {
      const auto lm = landmark_position(s, l);
      double nearest = 4.0 * cfg_.world_halfwidth;
      for (int i = 0; i < n_; ++i) {
        if (s.health[i] == 0.0) continue;
        nearest = std::min(nearest, distance(agent_position(s, i), lm));
      }
      total -= nearest;
    }
    return total;
  }

  // 1 when the two terminals are joined through live agents within the
  // communication radius, 0 otherwise.
  double communication_reward(const JointState& s) const {
    std::vector<std::array<double, 2>> nodes;
    nodes.push_back(terminal(0));
    nodes.push_back(terminal(1));
    for (int i = 0; i < n_; ++i)
      if (s.health[i] > 0.0) nodes.push_back(agent_position(s, i));

    std::vector<bool> visited(nodes.size(), false);
    std::deque<std::size_t> frontier{0};
    visited[0] = true;
    while (!frontier.empty()) {
      const std::size_t v = frontier.front();
      frontier.pop_front();
      for (std::size_t w = 0; w < nodes.size(); ++w) {
        if (visited[w] || distance(nodes[v], nodes[w]) > comm_radius_) continue;
        visited[w] = true;
        frontier.push_back(w);
      }
    }
    return visited[1] ? 1.0 : 0.0;
  }

  double scenario_reward(const JointState& s) const {
    return scenario_ == Scenario::kHazardComm ? communication_reward(s) : navigation_reward(s);
  }

  // --- centralized critic features ---------------------------------------

  // Health first, so a counterfactual query is a pure input substitution.
  int critic_dim() const {
    return scenario_ == Scenario::kHazardComm ? 5 * n_ + 4 : 7 * n_ + 4 - 2 * (n_ - landmarks_);
  }

  nn::Vec critic_features(const JointState& s) const {
    nn::Vec f(critic_dim());
    Eigen::Index k = 0;
    for (int i = 0; i < n_; ++i) f[k++] = s.health[i];
    for (int i = 0; i < n_; ++i) {
      const auto pos = agent_position(s, i);
      const auto vel = agent_velocity(s, i);
      f[k++] = pos[0];
      f[k++] = pos[1];
      f[k++] = vel[0];
      f[k++] = vel[1];
    }
    for (int l = 0; l < landmarks_; ++l) {
      const auto lm = landmark_position(s, l);
      f[k++] = lm[0];
      f[k++] = lm[1];
    }
    const auto hazard = hazard_position(s);
    f[k++] = hazard[0];
    f[k++] = hazard[1];
    f[k++] = hazard_revealed(s) ? 1.0 : 0.0;
    f[k++] = static_cast<double>(s.time) / cfg_.episode_length;
    return f;
  }

 private:
  static double distance(const std::array<double, 2>& a, const std::array<double, 2>& b) {
    return std::hypot(a[0] - b[0], a[1] - b[1]);
  }

  bool in_hazard_radius(const JointState& s, int i) const {
    return distance(agent_position(s, i), hazard_position(s)) <= cfg_.hazard_radius;
  }

  void live_observation(const JointState& s, int i, std::span<double> out) const {
    const auto pos = agent_position(s, i);
    const auto vel = agent_velocity(s, i);
    std::size_t k = 0;
    out[k++] = vel[0];
    out[k++] = vel[1];
    out[k++] = pos[0];
    out[k++] = pos[1];
    out[k++] = s.health[i];
    if (scenario_ == Scenario::kHazardComm) {
      for (int t = 0; t < 2; ++t) {
        const auto term = terminal(t);
        out[k++] = term[0] - pos[0];
        out[k++] = term[1] - pos[1];
      }
    } else {
      for (int l = 0; l < landmarks_; ++l) {
        const auto lm = landmark_position(s, l);
        out[k++] = lm[0] - pos[0];
        out[k++] = lm[1] - pos[1];
      }
    }
    if (hazard_revealed(s)) {
      const auto hazard = hazard_position(s);
      out[k++] = hazard[0] - pos[0];
      out[k++] = hazard[1] - pos[1];
      out[k++] = 1.0;
    } else {
      out[k++] = 0.0;
      out[k++] = 0.0;
      out[k++] = 0.0;
    }
    for (int j = 0; j < n_; ++j) {
      if (j == i) continue;
      const auto other = agent_position(s, j);
      out[k++] = other[0] - pos[0];
      out[k++] = other[1] - pos[1];
    }
  }

  void freeze_observation(JointState& s, int i) const {
    std::vector<double> snapshot(static_cast<std::size_t>(obs_dim_), 0.0);
    live_observation(s, i, snapshot);
    // Death zeroes velocity and health before this point, so the velocity and
    // own-health features are already zero; copy the reading verbatim.
    const std::size_t off = static_cast<std::size_t>(off_frozen_ + i * obs_dim_);
    for (int k = 0; k < obs_dim_; ++k) s.nonhealth[off + k] = snapshot[static_cast<std::size_t>(k)];
  }

  Scenario scenario_;
  ParticleWorldConfig cfg_;
  int n_ = 0;
  int landmarks_ = 0;
  double comm_radius_ = 0.0;
  int obs_dim_ = 0;
  int off_landmarks_ = 0;
  int off_hazard_ = 0;
  int off_frozen_ = 0;
  int nonhealth_size_ = 0;
};

}  // namespace hippo::envs
