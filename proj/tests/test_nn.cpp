#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "hippo/checkpoint.hpp"
#include "hippo/nn.hpp"

namespace {

using hippo::nn::Activation;
using hippo::nn::Mat;
using hippo::nn::MlpCache;
using hippo::nn::MlpSpec;
using hippo::nn::Vec;
using hippo::RngStream;

MlpSpec spec_321() { return MlpSpec({3, 2, 1}, Activation::kTanh); }

Vec random_params(const MlpSpec& spec, std::uint64_t seed, double scale = 0.8) {
  RngStream rng(seed);
  Vec params(hippo::nn::mlp_param_count(spec));
  for (Eigen::Index k = 0; k < params.size(); ++k) params[k] = rng.uniform(-scale, scale);
  return params;
}

TEST(MlpForward, ZeroParametersGiveZeroOutput) {
  const MlpSpec spec = spec_321();
  const Vec params = Vec::Zero(hippo::nn::mlp_param_count(spec));
  Mat x(3, 2);
  x << 1.0, -2.0, 0.5, 0.25, -1.0, 3.0;
  const Mat y = hippo::nn::mlp_forward(spec, params, x);
  EXPECT_EQ(y.rows(), 1);
  EXPECT_EQ(y.cols(), 2);
  EXPECT_DOUBLE_EQ(y(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(y(0, 1), 0.0);
}

TEST(MlpForward, EluClosedFormAtMinusOne) {
  // 1-1-1 net with identity weights: output = elu(x).
  const MlpSpec spec({1, 1, 1}, Activation::kElu);
  Vec params = Vec::Zero(hippo::nn::mlp_param_count(spec));
  params[0] = 1.0;  // W1
  params[2] = 1.0;  // W2
  Mat x(1, 1);
  x(0, 0) = -1.0;
  const Mat y = hippo::nn::mlp_forward(spec, params, x);
  EXPECT_NEAR(y(0, 0), std::expm1(-1.0), 1e-15);  // e^-1 - 1 ~ -0.63212
}

// Independent matrix-arithmetic oracle: explicit loops, no shared code with
// the implementation's Eigen path.
double naive_321_forward(const Vec& p, const Vec& x) {
  double h[2];
  for (int r = 0; r < 2; ++r) {
    double z = p[3 * r + 0] * x[0] + p[3 * r + 1] * x[1] + p[3 * r + 2] * x[2] + p[6 + r];
    h[r] = std::tanh(z);
  }
  return p[8] * h[0] + p[9] * h[1] + p[10];
}

TEST(MlpForward, MatchesIndependentHandComputation) {
  const MlpSpec spec = spec_321();
  const Vec params = random_params(spec, 17);
  RngStream rng(18);
  for (int trial = 0; trial < 20; ++trial) {
    Vec x(3);
    for (int d = 0; d < 3; ++d) x[d] = rng.uniform(-2.0, 2.0);
    const Mat y = hippo::nn::mlp_forward(spec, params, x);
    EXPECT_NEAR(y(0, 0), naive_321_forward(params, x), 1e-12);
  }
}

TEST(MlpForward, RepeatedCallsBitIdentical) {
  const MlpSpec spec = spec_321();
  const Vec params = random_params(spec, 4);
  Mat x(3, 5);
  RngStream rng(5);
  for (Eigen::Index k = 0; k < x.size(); ++k) x.data()[k] = rng.uniform(-1.0, 1.0);
  const Mat y1 = hippo::nn::mlp_forward(spec, params, x);
  const Mat y2 = hippo::nn::mlp_forward(spec, params, x);
  for (Eigen::Index k = 0; k < y1.size(); ++k) EXPECT_EQ(y1.data()[k], y2.data()[k]);
}

TEST(MlpForward, ShapeMismatchThrows) {
  const MlpSpec spec = spec_321();
  const Vec params = Vec::Zero(hippo::nn::mlp_param_count(spec));
  EXPECT_THROW(hippo::nn::mlp_forward(spec, params, Mat::Zero(2, 1)), hippo::ArgumentError);
  EXPECT_THROW(hippo::nn::mlp_forward(spec, Vec::Zero(3), Mat::Zero(3, 1)),
               hippo::ArgumentError);
}

TEST(MlpSpec, ValidationRules) {
  EXPECT_THROW(MlpSpec({3, 1}, Activation::kTanh).validate(), hippo::ArgumentError);
  EXPECT_THROW(MlpSpec({3, 0, 1}, Activation::kTanh).validate(), hippo::ArgumentError);
  EXPECT_NO_THROW(MlpSpec({3, 2, 1}, Activation::kElu).validate());
}

TEST(MlpBackward, WeightGradientIsInputForIdentityChain) {
  // Positive pass-through ELU makes the hidden unit the identity, so
  // d(out)/dW2 equals the input exactly.
  const MlpSpec spec({1, 1, 1}, Activation::kElu);
  Vec params = Vec::Zero(hippo::nn::mlp_param_count(spec));
  params[0] = 1.0;  // W1
  params[2] = 1.0;  // W2
  Mat x(1, 1);
  x(0, 0) = 0.7;
  MlpCache cache;
  (void)hippo::nn::mlp_forward(spec, params, x, &cache);
  Vec grad = Vec::Zero(params.size());
  Mat d_out(1, 1);
  d_out(0, 0) = 1.0;
  hippo::nn::mlp_backward(spec, params, cache, d_out, grad);
  EXPECT_DOUBLE_EQ(grad[2], 0.7);  // dW2 = hidden activation = x
  EXPECT_DOUBLE_EQ(grad[0], 0.7);  // dW1 = W2 * elu'(z) * x = x
  EXPECT_DOUBLE_EQ(grad[3], 1.0);  // db2
}

TEST(MlpBackward, ZeroOutputGradientGivesZeroParameterGradients) {
  const MlpSpec spec = spec_321();
  const Vec params = random_params(spec, 6);
  Mat x = Mat::Random(3, 4);
  MlpCache cache;
  (void)hippo::nn::mlp_forward(spec, params, x, &cache);
  Vec grad = Vec::Zero(params.size());
  hippo::nn::mlp_backward(spec, params, cache, Mat::Zero(1, 4), grad);
  EXPECT_EQ(grad.lpNorm<Eigen::Infinity>(), 0.0);
}

TEST(MlpBackward, CacheMismatchThrows) {
  const MlpSpec spec = spec_321();
  const Vec params = random_params(spec, 7);
  MlpCache cache;
  (void)hippo::nn::mlp_forward(spec, params, Mat::Zero(3, 4), &cache);
  Vec grad = Vec::Zero(params.size());
  EXPECT_THROW(hippo::nn::mlp_backward(spec, params, cache, Mat::Zero(1, 3), grad),
               hippo::StateError);
}

double central_fd(const std::function<double(const Vec&)>& f, Vec params, Eigen::Index k,
                  double step) {
  const double saved = params[k];
  params[k] = saved + step;
  const double plus = f(params);
  params[k] = saved - step;
  const double minus = f(params);
  return (plus - minus) / (2.0 * step);
}

TEST(MlpBackward, MatchesFiniteDifferences) {
  for (auto act : {Activation::kTanh, Activation::kElu}) {
    const MlpSpec spec({4, 6, 5, 2}, act);
    const Vec params0 = random_params(spec, 21);
    Mat x = Mat::Random(4, 3);
    Mat w = Mat::Random(2, 3);  // random linear readout of the outputs

    auto scalar = [&](const Vec& p) {
      return (w.array() * hippo::nn::mlp_forward(spec, p, x).array()).sum();
    };
    MlpCache cache;
    (void)hippo::nn::mlp_forward(spec, params0, x, &cache);
    Vec grad = Vec::Zero(params0.size());
    hippo::nn::mlp_backward(spec, params0, cache, w, grad);

    RngStream pick(31);
    for (int probe = 0; probe < 25; ++probe) {
      const auto k = static_cast<Eigen::Index>(
          pick.uniform_index(static_cast<std::uint64_t>(params0.size())));
      const double fd = central_fd(scalar, params0, k, 1e-5);
      const double denom = std::max({std::abs(fd), std::abs(grad[k]), 1e-8});
      EXPECT_LT(std::abs(fd - grad[k]) / denom, 1e-4) << "param " << k;
    }
  }
}

TEST(MlpBackward, InputGradientMatchesFiniteDifferences) {
  const MlpSpec spec({3, 5, 2}, Activation::kTanh);
  const Vec params = random_params(spec, 23);
  Vec x0 = Vec::Zero(3);
  x0 << 0.3, -0.6, 1.1;
  auto scalar = [&](const Vec& x) { return hippo::nn::mlp_forward(spec, params, x).sum(); };

  MlpCache cache;
  (void)hippo::nn::mlp_forward(spec, params, x0, &cache);
  Vec grad = Vec::Zero(params.size());
  Mat d_in;
  hippo::nn::mlp_backward(spec, params, cache, Mat::Ones(2, 1), grad, &d_in);
  for (int d = 0; d < 3; ++d) {
    Vec x = x0;
    x[d] += 1e-6;
    const double plus = scalar(x);
    x[d] = x0[d] - 1e-6;
    const double minus = scalar(x);
    const double fd = (plus - minus) / 2e-6;
    EXPECT_NEAR(d_in(d, 0), fd, 1e-6);
  }
}

TEST(GaussianLogProb, FrozenStandardNormalValues) {
  Vec zero(1), one(1);
  zero << 0.0;
  one << 1.0;
  // -0.5 ln(2 pi)
  EXPECT_NEAR(hippo::nn::gaussian_logprob(zero, zero, zero), -0.9189385332046727, 1e-12);
  EXPECT_NEAR(hippo::nn::gaussian_logprob(zero, zero, one), -1.4189385332046727, 1e-12);
}

TEST(GaussianLogProb, DensityIntegratesToOne) {
  // Simpson quadrature of exp(logprob) over [-8 sigma, 8 sigma].
  const double mu = 0.35, log_std = -0.4;
  const double sigma = std::exp(log_std);
  Vec m(1), ls(1), a(1);
  m << mu;
  ls << log_std;
  const int intervals = 4000;  // even
  const double lo = mu - 8.0 * sigma, hi = mu + 8.0 * sigma;
  const double h = (hi - lo) / intervals;
  double sum = 0.0;
  for (int k = 0; k <= intervals; ++k) {
    a << lo + h * k;
    const double f = std::exp(hippo::nn::gaussian_logprob(m, ls, a));
    sum += f * (k == 0 || k == intervals ? 1.0 : (k % 2 ? 4.0 : 2.0));
  }
  EXPECT_NEAR(sum * h / 3.0, 1.0, 1e-6);
}

TEST(GaussianLogProb, GradientsMatchFiniteDifferences) {
  RngStream rng(77);
  for (int trial = 0; trial < 30; ++trial) {
    Vec mean(2), ls(2), a(2);
    for (int d = 0; d < 2; ++d) {
      mean[d] = rng.uniform(-1.0, 1.0);
      ls[d] = rng.uniform(-1.0, 0.5);
      a[d] = rng.uniform(-2.0, 2.0);
    }
    Vec d_mean, d_ls;
    hippo::nn::gaussian_logprob_grad(mean, ls, a, d_mean, d_ls);
    for (int d = 0; d < 2; ++d) {
      Vec m2 = mean;
      m2[d] += 1e-6;
      double plus = hippo::nn::gaussian_logprob(m2, ls, a);
      m2[d] = mean[d] - 1e-6;
      double minus = hippo::nn::gaussian_logprob(m2, ls, a);
      EXPECT_NEAR(d_mean[d], (plus - minus) / 2e-6, 1e-5);

      Vec l2 = ls;
      l2[d] += 1e-6;
      plus = hippo::nn::gaussian_logprob(mean, l2, a);
      l2[d] = ls[d] - 1e-6;
      minus = hippo::nn::gaussian_logprob(mean, l2, a);
      EXPECT_NEAR(d_ls[d], (plus - minus) / 2e-6, 1e-5);
    }
  }
}

TEST(GaussianEntropy, ClosedFormAndAdditivity) {
  Vec one(1);
  one << 0.0;  // sigma = 1
  EXPECT_NEAR(hippo::nn::gaussian_entropy(one), 1.4189385332046727, 1e-12);
  Vec two(2);
  two << 0.0, 0.0;
  EXPECT_NEAR(hippo::nn::gaussian_entropy(two), 2.8378770664093453, 1e-12);
}

TEST(GaussianEntropy, StrictlyIncreasingInEachComponent) {
  Vec ls(3);
  ls << -0.5, 0.2, 1.0;
  const double base = hippo::nn::gaussian_entropy(ls);
  for (int d = 0; d < 3; ++d) {
    Vec bumped = ls;
    bumped[d] += 0.01;
    EXPECT_GT(hippo::nn::gaussian_entropy(bumped), base);
  }
}

TEST(Adam, FirstStepDeltaIsLearningRateTimesSign) {
  Vec params(1), grad(1);
  params << 1.0;
  grad << 0.01;
  hippo::nn::AdamState state(1);
  hippo::nn::adam_step(params, grad, state, 1e-3);
  EXPECT_NEAR(params[0] - 1.0, -1e-3, 1e-6);
  EXPECT_EQ(state.step, 1);
}

TEST(Adam, ZeroGradientsLeaveParametersUnchanged) {
  Vec params(3);
  params << 1.0, -2.0, 0.5;
  const Vec before = params;
  hippo::nn::AdamState state(3);
  for (int k = 0; k < 50; ++k) hippo::nn::adam_step(params, Vec::Zero(3), state, 1e-2);
  for (int d = 0; d < 3; ++d) EXPECT_EQ(params[d], before[d]);
}

TEST(Adam, DeterministicAcrossRuns) {
  auto run = [] {
    Vec params(4);
    params << 0.1, 0.2, 0.3, 0.4;
    hippo::nn::AdamState state(4);
    RngStream rng(55);
    for (int k = 0; k < 100; ++k) {
      Vec grad(4);
      for (int d = 0; d < 4; ++d) grad[d] = rng.uniform(-1.0, 1.0);
      hippo::nn::adam_step(params, grad, state, 1e-3);
    }
    return params;
  };
  const Vec a = run(), b = run();
  for (int d = 0; d < 4; ++d) EXPECT_EQ(a[d], b[d]);
}

TEST(Adam, NonFiniteGradientThrowsNumericError) {
  Vec params(1), grad(1);
  params << 0.0;
  grad << std::numeric_limits<double>::quiet_NaN();
  hippo::nn::AdamState state(1);
  EXPECT_THROW(hippo::nn::adam_step(params, grad, state, 1e-3), hippo::NumericError);
}

TEST(Adam, ShapeMismatchThrows) {
  Vec params(2), grad(3);
  params.setZero();
  grad.setZero();
  hippo::nn::AdamState state(2);
  EXPECT_THROW(hippo::nn::adam_step(params, grad, state, 1e-3), hippo::ArgumentError);
}

TEST(GaussianPolicy, LogStdClampRespectsBounds) {
  RngStream rng(1);
  auto policy = hippo::nn::GaussianPolicy::make(4, 2, rng);
  policy.log_std()[0] = -9.0;
  policy.log_std()[1] = 5.0;
  policy.clamp_log_std();
  EXPECT_DOUBLE_EQ(policy.log_std()[0], -5.0);
  EXPECT_DOUBLE_EQ(policy.log_std()[1], 2.0);
}

TEST(ValueNet, FreshCriticPredictsExactlyZero) {
  RngStream rng(2);
  auto net = hippo::nn::ValueNet::make(6, rng, {16, 16}, Activation::kElu);
  const Mat x = Mat::Random(6, 9);
  const Vec v = net.forward(x);
  EXPECT_EQ(v.lpNorm<Eigen::Infinity>(), 0.0);
}

TEST(Checkpoint, PolicyRoundTripIsBitExact) {
  RngStream rng(3);
  auto policy = hippo::nn::GaussianPolicy::make(5, 2, rng);
  const auto path = std::filesystem::temp_directory_path() / "hippo_policy_test.ckpt";
  hippo::nn::save_checkpoint(path, hippo::nn::policy_checkpoint(policy, 4));
  const auto ckpt = hippo::nn::load_checkpoint(path);
  EXPECT_EQ(ckpt.agent_count, 4u);
  EXPECT_EQ(ckpt.kind, hippo::nn::CheckpointKind::kGaussianPolicy);
  const auto restored = hippo::nn::policy_from_checkpoint(ckpt);
  EXPECT_EQ(restored.spec, policy.spec);
  ASSERT_EQ(restored.params.size(), policy.params.size());
  for (Eigen::Index k = 0; k < policy.params.size(); ++k)
    EXPECT_EQ(restored.params[k], policy.params[k]);
  std::filesystem::remove(path);
}

TEST(Checkpoint, CriticRoundTripAndKindChecks) {
  RngStream rng(4);
  auto net = hippo::nn::ValueNet::make(8, rng, {8, 8}, Activation::kElu);
  net.params.setRandom();
  const auto path = std::filesystem::temp_directory_path() / "hippo_critic_test.ckpt";
  hippo::nn::save_checkpoint(path, hippo::nn::critic_checkpoint(net, 2));
  const auto ckpt = hippo::nn::load_checkpoint(path);
  const auto restored = hippo::nn::critic_from_checkpoint(ckpt);
  for (Eigen::Index k = 0; k < net.params.size(); ++k)
    EXPECT_EQ(restored.params[k], net.params[k]);
  EXPECT_THROW(hippo::nn::policy_from_checkpoint(ckpt), hippo::ConfigError);
  std::filesystem::remove(path);
}

TEST(Checkpoint, MissingFileThrowsConfigError) {
  EXPECT_THROW(hippo::nn::load_checkpoint("/nonexistent/path.ckpt"), hippo::ConfigError);
}

}  // namespace
