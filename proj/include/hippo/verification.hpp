#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "hippo/oracle.hpp"
#include "hippo/rng.hpp"

namespace hippo::oracle {

inline double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a[k] - b[k]));
  return m;
}

// Suite results over a family of random enumerable models. Every quantity is
// an exact expectation; the only tolerance sources are float roundoff and the
// finite-difference step.
struct VerifySummary {
  int models = 0;
  double budget = 1e7;
  double lemma1_max_bias = 0.0;        // max-norm of the baseline-only gradient term
  double lemma2_max_gap = 0.0;         // min-health vs raw-returns estimator gap
  bool dead_scores_zero = true;        // every dead decision point has zero score
  long dead_decision_points = 0;
  double estimator_max_relerr = 0.0;   // returns-variant estimator vs FD gradient
  double normalization_max_err = 0.0;  // | sum of trajectory probabilities - 1 |
  bool fault_detected = true;          // broken dead-action model is flagged
  int variance_reduced = 0;            // models where min-health trace-cov <= returns
};

// Exercises the estimator identities on `num_models` random binary-health
// models (2 agents, 3 base states, 2 actions, horizon 3 by default).
inline VerifySummary run_verification(int num_models, std::uint64_t seed, double budget = 1e7) {
  VerifySummary summary;
  summary.models = num_models;
  summary.budget = budget;

  for (int m = 0; m < num_models; ++m) {
    RngStream rng(mix_seed(seed, 0x76657269ULL, static_cast<std::uint64_t>(m)));
    const TabularDecPomdp model = make_random_model(rng);
    const SoftmaxTabularPolicy policy = make_random_policy(rng, model);

    double prob_sum = 0.0;
    for (const auto& traj : envs::tabular_enumerate(model, policy.as_fn(), budget))
      prob_sum += traj.probability;
    summary.normalization_max_err =
        std::max(summary.normalization_max_err, std::abs(prob_sum - 1.0));

    const auto baseline_only =
        exact_estimator_expectation(model, policy, PsiVariant::kBaselineOnly, budget);
    summary.lemma1_max_bias = std::max(summary.lemma1_max_bias, max_abs(baseline_only));

    const auto returns =
        exact_estimator_expectation(model, policy, PsiVariant::kReturns, budget);
    const auto min_health =
        exact_estimator_expectation(model, policy, PsiVariant::kMinHealth, budget);
    summary.lemma2_max_gap =
        std::max(summary.lemma2_max_gap, max_abs_diff(returns, min_health));

    const auto pointwise = check_lemma2_pointwise(model, policy);
    summary.dead_decision_points += pointwise.dead_decision_points;
    if (!pointwise.passed) summary.dead_scores_zero = false;

    const auto fd = exact_gradient_fd(model, policy, 1e-5, budget);
    const double scale = std::max(max_abs(fd), 1e-12);
    summary.estimator_max_relerr =
        std::max(summary.estimator_max_relerr, max_abs_diff(returns, fd) / scale);

    const double var_returns =
        estimator_trace_covariance(model, policy, PsiVariant::kReturns, budget);
    const double var_min_health =
        estimator_trace_covariance(model, policy, PsiVariant::kMinHealth, budget);
    if (var_min_health <= var_returns) ++summary.variance_reduced;
  }

  // Fault injection: a model whose dead agents keep two actions must be
  // caught by the pointwise check.
  {
    RngStream rng(mix_seed(seed, 0x6661756cULL));
    RandomModelOptions opt;
    opt.broken_dead_actions = true;
    const TabularDecPomdp broken = make_random_model(rng, opt);
    const SoftmaxTabularPolicy policy = make_random_policy(rng, broken);
    summary.fault_detected = !check_lemma2_pointwise(broken, policy).passed;
  }
  return summary;
}

}  // namespace hippo::oracle
