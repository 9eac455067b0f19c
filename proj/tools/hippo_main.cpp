// Command-line front end: training runs, oracle verification, environment
// health-property checks, checkpoint evaluation, and curve aggregation.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "hippo/checkpoint.hpp"
#include "hippo/config.hpp"
#include "hippo/core.hpp"
#include "hippo/harness.hpp"
#include "hippo/particle.hpp"
#include "hippo/verification.hpp"

namespace {

using nlohmann::json;

struct TrainArgs {
  std::string config_path;
  std::string env;
  std::string variant;
  int agents = -1;
  long episodes = -1;
  long long seed = -1;
  int trials = -1;
  std::string out;
};

int run_train(const TrainArgs& args) {
  hippo::harness::ExperimentConfig config;
  if (!args.config_path.empty()) config = hippo::harness::load_config_file(args.config_path);
  if (!args.env.empty()) hippo::harness::apply_setting(config, "env", args.env);
  if (!args.variant.empty()) hippo::harness::apply_setting(config, "variant", args.variant);
  if (args.agents > 0) config.world.n_agents = args.agents;
  if (args.episodes > 0) config.train.total_episodes = args.episodes;
  if (args.seed >= 0) config.master_seed = static_cast<std::uint64_t>(args.seed);
  if (args.trials > 0) config.trials = args.trials;
  if (!args.out.empty()) config.out_dir = args.out;

  const auto result = hippo::harness::run_experiment(config);
  std::cout << "env=" << config.env_name << " variant="
            << hippo::algo::variant_name(config.train.variant) << " agents="
            << config.world.n_agents << " trials=" << config.trials << "\n";
  if (!result.curve.points.empty()) {
    const auto& last = result.curve.points.back();
    std::printf("final batch: episode=%ld mean=%.6g min=%.6g max=%.6g\n", last.episode,
                last.mean, last.min, last.max);
  }
  for (const auto& path : result.trial_csvs) std::cout << "trial csv: " << path.string() << "\n";
  std::cout << "aggregate csv: " << result.aggregate_csv.string() << "\n";
  return 0;
}

int run_verify(int models, long long seed, double budget, const std::string& report_path) {
  const auto summary =
      hippo::oracle::run_verification(models, static_cast<std::uint64_t>(seed), budget);

  struct Row {
    std::string name;
    bool passed;
    std::string detail;
  };
  char buf[160];
  std::vector<Row> rows;
  std::snprintf(buf, sizeof buf, "max |g_b| = %.3g over %d models", summary.lemma1_max_bias,
                summary.models);
  rows.push_back({"baseline-zero-bias", summary.lemma1_max_bias < 1e-10, buf});
  std::snprintf(buf, sizeof buf, "max estimator gap = %.3g", summary.lemma2_max_gap);
  rows.push_back({"binary-health-equivalence", summary.lemma2_max_gap < 1e-10, buf});
  std::snprintf(buf, sizeof buf, "%ld dead decision points, all zero-score",
                summary.dead_decision_points);
  rows.push_back({"dead-score-zero", summary.dead_scores_zero, buf});
  std::snprintf(buf, sizeof buf, "max relative error = %.3g", summary.estimator_max_relerr);
  rows.push_back({"estimator-gradient-identity", summary.estimator_max_relerr < 1e-6, buf});
  std::snprintf(buf, sizeof buf, "max |sum p - 1| = %.3g", summary.normalization_max_err);
  rows.push_back({"enumeration-normalization", summary.normalization_max_err < 1e-9, buf});
  rows.push_back({"fault-injection-detected", summary.fault_detected,
                  "broken dead-action model flagged"});

  bool all_passed = true;
  for (const auto& row : rows) {
    all_passed = all_passed && row.passed;
    std::printf("[%s] %-28s %s\n", row.passed ? "PASS" : "FAIL", row.name.c_str(),
                row.detail.c_str());
  }
  std::printf("[INFO] %-28s min-health variance <= raw returns in %d/%d models\n",
              "baseline-variance-reduction", summary.variance_reduced, summary.models);

  json report;
  report["models"] = summary.models;
  report["budget"] = summary.budget;
  report["lemma1_max_bias"] = summary.lemma1_max_bias;
  report["lemma2_max_gap"] = summary.lemma2_max_gap;
  report["dead_scores_zero"] = summary.dead_scores_zero;
  report["dead_decision_points"] = summary.dead_decision_points;
  report["estimator_max_relerr"] = summary.estimator_max_relerr;
  report["normalization_max_err"] = summary.normalization_max_err;
  report["fault_detected"] = summary.fault_detected;
  report["variance_reduced"] = summary.variance_reduced;
  report["passed"] = all_passed;
  std::ofstream out(report_path, std::ios::trunc);
  if (!out) throw hippo::ConfigError("cannot write report: " + report_path);
  out << report.dump(2) << "\n";
  std::cout << "report: " << report_path << "\n";
  return all_passed ? 0 : 1;
}

int run_check_env(const std::string& env_name, int agents, long samples, long long seed) {
  hippo::envs::ParticleWorldConfig world;
  world.n_agents = agents;
  const hippo::envs::ParticleEnv env(hippo::envs::scenario_from_name(env_name), world);
  const auto report =
      hippo::validate_health_properties(env, samples, static_cast<std::uint64_t>(seed));

  const auto print = [](const char* name, const hippo::HealthPropertyReport::Item& item) {
    std::printf("[%s] %-32s checks=%ld%s%s\n", item.passed ? "PASS" : "FAIL", name, item.checks,
                item.passed ? "" : " counterexample: ",
                item.passed ? "" : item.counterexample.c_str());
  };
  print("non-recoverable-health", report.non_recoverable);
  print("reachable-set-constriction", report.reachable_constriction);
  print("action-set-constriction", report.action_constriction);
  print("observable-set-constriction", report.observable_constriction);
  return report.all_passed() ? 0 : 1;
}

int run_eval(const std::string& checkpoint_path, const std::string& env_name, int agents,
             int episodes, long long seed) {
  const auto ckpt = hippo::nn::load_checkpoint(checkpoint_path);
  const auto policy = hippo::nn::policy_from_checkpoint(ckpt);

  hippo::envs::ParticleWorldConfig world;
  world.n_agents = agents > 0 ? agents : static_cast<int>(ckpt.agent_count);
  const hippo::envs::ParticleEnv env(hippo::envs::scenario_from_name(env_name), world);
  const auto result = hippo::harness::evaluate_policy(policy, env, episodes,
                                                      static_cast<std::uint64_t>(seed));
  if (result.returns.empty()) {
    std::cout << "episodes=0: empty return distribution\n";
    return 0;
  }
  double lo = result.returns.front(), hi = result.returns.front(), var = 0.0;
  for (double r : result.returns) {
    lo = std::min(lo, r);
    hi = std::max(hi, r);
  }
  for (double r : result.returns) var += (r - result.mean) * (r - result.mean);
  var /= static_cast<double>(result.returns.size());
  std::printf("episodes=%zu mean=%.6g std=%.6g min=%.6g max=%.6g\n", result.returns.size(),
              result.mean, std::sqrt(var), lo, hi);
  return 0;
}

int run_aggregate(const std::string& runs_dir) {
  namespace fs = std::filesystem;
  std::vector<fs::path> csvs;
  for (const auto& entry : fs::directory_iterator(runs_dir)) {
    if (!entry.is_directory()) continue;
    const auto name = entry.path().filename().string();
    if (name.rfind("trial_", 0) == 0 && fs::exists(entry.path() / "returns.csv"))
      csvs.push_back(entry.path() / "returns.csv");
  }
  std::sort(csvs.begin(), csvs.end());
  if (csvs.empty()) throw hippo::ConfigError("no trial_*/returns.csv under " + runs_dir);

  std::vector<std::vector<std::pair<long, double>>> trials;
  for (const auto& path : csvs) trials.push_back(hippo::harness::read_trial_csv(path));
  const auto curve = hippo::harness::aggregate_curves(trials);
  const fs::path out = fs::path(runs_dir) / "aggregate.csv";
  hippo::harness::write_aggregate_csv(out, curve);
  std::cout << "aggregated " << trials.size() << " trials -> " << out.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Health-informed multi-agent PPO engine"};
  app.require_subcommand(1);

  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "Run a training experiment");
  train->add_option("--config", train_args.config_path, "key = value config file");
  train->add_option("--env", train_args.env, "hazardous-nav | hazardous-comm | coop-nav");
  train->add_option("--agents", train_args.agents, "number of agents");
  train->add_option("--variant", train_args.variant,
                    "local-critic | central-critic | min-health");
  train->add_option("--seed", train_args.seed, "master seed");
  train->add_option("--episodes", train_args.episodes, "total training episodes");
  train->add_option("--trials", train_args.trials, "independent trials");
  train->add_option("--out", train_args.out, "output directory");

  int verify_models = 20;
  long long verify_seed = 0;
  double verify_budget = 1e7;
  std::string verify_report = "verify_report.json";
  auto* verify = app.add_subcommand("verify", "Run the exact verification suite");
  verify->add_option("--models", verify_models, "number of random models");
  verify->add_option("--seed", verify_seed, "model generator seed");
  verify->add_option("--budget", verify_budget, "trajectory enumeration budget");
  verify->add_option("--report", verify_report, "machine-readable report path");

  std::string check_env_name = "hazardous-nav";
  int check_agents = 4;
  long check_samples = 10000;
  long long check_seed = 0;
  auto* check = app.add_subcommand("check-env", "Validate the health properties");
  check->add_option("--env", check_env_name, "environment name")->required();
  check->add_option("--agents", check_agents, "number of agents");
  check->add_option("--samples", check_samples, "sampled transitions");
  check->add_option("--seed", check_seed, "sampling seed");

  std::string eval_checkpoint;
  std::string eval_env = "hazardous-nav";
  int eval_agents = 0;
  int eval_episodes = 100;
  long long eval_seed = 0;
  auto* eval = app.add_subcommand("eval", "Evaluate a policy checkpoint");
  eval->add_option("--checkpoint", eval_checkpoint, "policy checkpoint path")->required();
  eval->add_option("--env", eval_env, "environment name");
  eval->add_option("--agents", eval_agents, "agents (default: from checkpoint)");
  eval->add_option("--episodes", eval_episodes, "evaluation episodes");
  eval->add_option("--seed", eval_seed, "evaluation seed");

  std::string runs_dir;
  auto* aggregate = app.add_subcommand("aggregate", "Aggregate per-trial CSV curves");
  aggregate->add_option("--runs", runs_dir, "directory containing trial_* subdirectories")
      ->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) return run_train(train_args);
    if (verify->parsed())
      return run_verify(verify_models, verify_seed, verify_budget, verify_report);
    if (check->parsed())
      return run_check_env(check_env_name, check_agents, check_samples, check_seed);
    if (eval->parsed())
      return run_eval(eval_checkpoint, eval_env, eval_agents, eval_episodes, eval_seed);
    if (aggregate->parsed()) return run_aggregate(runs_dir);
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 2;
  }
  return 0;
}
