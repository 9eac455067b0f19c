#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "hippo/core.hpp"
#include "hippo/rng.hpp"

namespace hippo::nn {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using RowMajorMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class Activation : int { kTanh = 0, kElu = 1 };

inline std::string activation_name(Activation a) {
  return a == Activation::kTanh ? "tanh" : "elu";
}

// Fixed feed-forward architecture: affine layers with tanh/elu hidden
// activations and a linear output.
struct MlpSpec {
  std::vector<int> widths;                     // input, hidden..., output
  std::vector<Activation> hidden_activations;  // one per hidden layer

  MlpSpec() = default;
  MlpSpec(std::vector<int> w, Activation hidden_act) : widths(std::move(w)) {
    hidden_activations.assign(widths.size() >= 2 ? widths.size() - 2 : 0, hidden_act);
  }

  int num_layers() const { return static_cast<int>(widths.size()) - 1; }
  int input_dim() const { return widths.front(); }
  int output_dim() const { return widths.back(); }

  void validate() const {
    if (widths.size() < 3) throw ArgumentError("mlp needs at least one hidden layer");
    for (int w : widths)
      if (w < 1) throw ArgumentError("mlp layer widths must be >= 1");
    if (hidden_activations.size() != widths.size() - 2)
      throw ArgumentError("one hidden activation required per hidden layer");
  }

  bool operator==(const MlpSpec&) const = default;
};

inline Eigen::Index mlp_param_count(const MlpSpec& spec) {
  Eigen::Index count = 0;
  for (int l = 0; l < spec.num_layers(); ++l)
    count += static_cast<Eigen::Index>(spec.widths[l + 1]) * spec.widths[l] + spec.widths[l + 1];
  return count;
}

namespace detail {

inline Eigen::Index weight_offset(const MlpSpec& spec, int layer) {
  Eigen::Index off = 0;
  for (int l = 0; l < layer; ++l)
    off += static_cast<Eigen::Index>(spec.widths[l + 1]) * spec.widths[l] + spec.widths[l + 1];
  return off;
}

template <typename Scalar>
using WeightMap = Eigen::Map<
    std::conditional_t<std::is_const_v<Scalar>, const RowMajorMat, RowMajorMat>>;

inline Eigen::Map<const RowMajorMat> weight_view(const MlpSpec& spec, const double* params,
                                                 int layer) {
  return {params + weight_offset(spec, layer), spec.widths[layer + 1], spec.widths[layer]};
}
inline Eigen::Map<RowMajorMat> weight_view(const MlpSpec& spec, double* params, int layer) {
  return {params + weight_offset(spec, layer), spec.widths[layer + 1], spec.widths[layer]};
}
inline Eigen::Map<const Vec> bias_view(const MlpSpec& spec, const double* params, int layer) {
  return {params + weight_offset(spec, layer) +
              static_cast<Eigen::Index>(spec.widths[layer + 1]) * spec.widths[layer],
          spec.widths[layer + 1]};
}
inline Eigen::Map<Vec> bias_view(const MlpSpec& spec, double* params, int layer) {
  return {params + weight_offset(spec, layer) +
              static_cast<Eigen::Index>(spec.widths[layer + 1]) * spec.widths[layer],
          spec.widths[layer + 1]};
}

inline void apply_activation(Activation act, Mat& z) {
  if (act == Activation::kTanh) {
    z = z.array().tanh();
  } else {
    z = z.array().unaryExpr([](double x) { return x > 0.0 ? x : std::expm1(x); });
  }
}

// Derivative expressed through the activation output.
inline Mat activation_derivative(Activation act, const Mat& post) {
  if (act == Activation::kTanh) return 1.0 - post.array().square();
  return post.array().unaryExpr([](double a) { return a > 0.0 ? 1.0 : a + 1.0; });
}

}  // namespace detail

// Post-activation values kept from a forward pass; consumed by mlp_backward.
struct MlpCache {
  Mat input;
  std::vector<Mat> hidden;  // post-activation per hidden layer
  Eigen::Index batch = 0;
};

// Batched forward pass; columns are samples.
inline Mat mlp_forward(const MlpSpec& spec, const Vec& params, const Mat& input,
                       MlpCache* cache = nullptr) {
  if (input.rows() != spec.input_dim())
    throw ArgumentError("mlp_forward: input width " + std::to_string(input.rows()) +
                        " does not match spec " + std::to_string(spec.input_dim()));
  if (params.size() != mlp_param_count(spec))
    throw ArgumentError("mlp_forward: parameter vector size mismatch");
  if (cache) {
    cache->input = input;
    cache->hidden.clear();
    cache->batch = input.cols();
  }
  Mat a = input;
  const int layers = spec.num_layers();
  for (int l = 0; l < layers; ++l) {
    Mat z = detail::weight_view(spec, params.data(), l) * a;
    z.colwise() += detail::bias_view(spec, params.data(), l);
    if (l < layers - 1) {
      detail::apply_activation(spec.hidden_activations[static_cast<std::size_t>(l)], z);
      if (cache) cache->hidden.push_back(z);
    }
    a = std::move(z);
  }
  return a;
}

// Exact reverse-mode gradients of the forward map. `grad` must be sized to
// mlp_param_count and is accumulated into (callers zero it as needed).
inline void mlp_backward(const MlpSpec& spec, const Vec& params, const MlpCache& cache,
                         const Mat& output_grad, Vec& grad, Mat* input_grad = nullptr) {
  const int layers = spec.num_layers();
  if (grad.size() != mlp_param_count(spec))
    throw ArgumentError("mlp_backward: gradient vector size mismatch");
  if (cache.batch != output_grad.cols() ||
      static_cast<int>(cache.hidden.size()) != layers - 1)
    throw StateError("mlp_backward: cache does not match this forward pass");
  if (output_grad.rows() != spec.output_dim())
    throw ArgumentError("mlp_backward: output gradient width mismatch");

  Mat delta = output_grad;
  for (int l = layers - 1; l >= 0; --l) {
    const Mat& below = l == 0 ? cache.input : cache.hidden[static_cast<std::size_t>(l - 1)];
    detail::weight_view(spec, grad.data(), l).noalias() += delta * below.transpose();
    detail::bias_view(spec, grad.data(), l) += delta.rowwise().sum();
    if (l > 0 || input_grad) {
      Mat back = detail::weight_view(spec, params.data(), l).transpose() * delta;
      if (l > 0) {
        back.array() *= detail::activation_derivative(
                            spec.hidden_activations[static_cast<std::size_t>(l - 1)],
                            cache.hidden[static_cast<std::size_t>(l - 1)])
                            .array();
        delta = std::move(back);
      } else {
        *input_grad = std::move(back);
      }
    }
  }
}

// Diagonal-Gaussian log density summed over dimensions.
inline double gaussian_logprob(const Vec& mean, const Vec& log_std, const Vec& action) {
  if (mean.size() != log_std.size() || mean.size() != action.size())
    throw ArgumentError("gaussian_logprob: dimension mismatch");
  constexpr double kHalfLog2Pi = 0.9189385332046727;  // 0.5 * ln(2*pi)
  double lp = 0.0;
  for (Eigen::Index d = 0; d < mean.size(); ++d) {
    const double z = (action[d] - mean[d]) / std::exp(log_std[d]);
    lp += -kHalfLog2Pi - log_std[d] - 0.5 * z * z;
  }
  return lp;
}

// Analytic gradients of the log density with respect to mean and log_std.
inline void gaussian_logprob_grad(const Vec& mean, const Vec& log_std, const Vec& action,
                                  Vec& d_mean, Vec& d_log_std) {
  d_mean.resize(mean.size());
  d_log_std.resize(mean.size());
  for (Eigen::Index d = 0; d < mean.size(); ++d) {
    const double inv_var = std::exp(-2.0 * log_std[d]);
    const double diff = action[d] - mean[d];
    d_mean[d] = diff * inv_var;
    d_log_std[d] = diff * diff * inv_var - 1.0;
  }
}

// Entropy of the diagonal Gaussian: sum_d (1/2 + 1/2 ln 2 pi + log_std_d).
inline double gaussian_entropy(const Vec& log_std) {
  constexpr double kHalfPlusHalfLog2Pi = 1.4189385332046727;
  return log_std.size() * kHalfPlusHalfLog2Pi + log_std.sum();
}

// Adam with bias correction (beta1 = 0.9, beta2 = 0.999, eps = 1e-8).
struct AdamState {
  Vec m;
  Vec v;
  long step = 0;
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;

  explicit AdamState(Eigen::Index size = 0) : m(Vec::Zero(size)), v(Vec::Zero(size)) {}
};

inline void adam_step(Vec& params, const Vec& grad, AdamState& state, double learning_rate) {
  if (params.size() != grad.size() || params.size() != state.m.size())
    throw ArgumentError("adam_step: shape mismatch");
  if (!grad.allFinite())
    throw NumericError("adam_step: non-finite gradient; aborting training update");
  ++state.step;
  state.m = AdamState::kBeta1 * state.m + (1.0 - AdamState::kBeta1) * grad;
  state.v = AdamState::kBeta2 * state.v.array() +
            (1.0 - AdamState::kBeta2) * grad.array().square();
  const double bias1 = 1.0 - std::pow(AdamState::kBeta1, static_cast<double>(state.step));
  const double bias2 = 1.0 - std::pow(AdamState::kBeta2, static_cast<double>(state.step));
  params.array() -=
      learning_rate * (state.m.array() / bias1) /
      ((state.v.array() / bias2).sqrt() + AdamState::kEps);
}

// Scaled-uniform fan-in initialization; weights in +-1/sqrt(fan_in), zero
// biases. `zero_last_layer` starts the output head at exactly zero, used by
// value networks so fresh critics predict 0 everywhere.
inline Vec init_mlp_params(const MlpSpec& spec, RngStream& rng, bool zero_last_layer) {
  Vec params = Vec::Zero(mlp_param_count(spec));
  for (int l = 0; l < spec.num_layers(); ++l) {
    if (zero_last_layer && l == spec.num_layers() - 1) break;
    const double bound = 1.0 / std::sqrt(static_cast<double>(spec.widths[l]));
    auto w = detail::weight_view(spec, params.data(), l);
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = rng.uniform(-bound, bound);
  }
  return params;
}

// Shared-parameter stochastic policy: an MLP action mean plus a
// state-independent log standard deviation per action dimension. Parameters
// are stored flat as [mlp | log_std] so optimizer state and checkpoints see
// one contiguous vector.
struct GaussianPolicy {
  MlpSpec spec;
  Vec params;

  static constexpr double kLogStdMin = -5.0;
  static constexpr double kLogStdMax = 2.0;

  static GaussianPolicy make(int obs_dim, int act_dim, RngStream& rng,
                             const std::vector<int>& hidden = {64, 64},
                             Activation act = Activation::kTanh,
                             double initial_std = 0.5) {
    GaussianPolicy p;
    std::vector<int> widths{obs_dim};
    widths.insert(widths.end(), hidden.begin(), hidden.end());
    widths.push_back(act_dim);
    p.spec = MlpSpec(std::move(widths), act);
    p.spec.validate();
    p.params = Vec::Zero(mlp_param_count(p.spec) + act_dim);
    p.params.head(mlp_param_count(p.spec)) = init_mlp_params(p.spec, rng, false);
    p.params.tail(act_dim).setConstant(std::log(initial_std));
    return p;
  }

  int action_dim() const { return spec.output_dim(); }
  int obs_dim() const { return spec.input_dim(); }
  Eigen::Index param_count() const { return params.size(); }

  Vec mlp_params() const { return params.head(mlp_param_count(spec)); }
  Eigen::Map<const Vec> log_std() const {
    return {params.data() + mlp_param_count(spec), action_dim()};
  }
  Eigen::Map<Vec> log_std() {
    return {params.data() + mlp_param_count(spec), action_dim()};
  }

  Mat forward_mean(const Mat& obs, MlpCache* cache = nullptr) const {
    return mlp_forward(spec, params.head(mlp_param_count(spec)), obs, cache);
  }

  void clamp_log_std() {
    auto ls = log_std();
    for (Eigen::Index d = 0; d < ls.size(); ++d)
      ls[d] = std::clamp(ls[d], kLogStdMin, kLogStdMax);
  }
};

// Scalar-output value network.
struct ValueNet {
  MlpSpec spec;
  Vec params;

  static ValueNet make(int input_dim, RngStream& rng, const std::vector<int>& hidden,
                       Activation act) {
    ValueNet net;
    std::vector<int> widths{input_dim};
    widths.insert(widths.end(), hidden.begin(), hidden.end());
    widths.push_back(1);
    net.spec = MlpSpec(std::move(widths), act);
    net.spec.validate();
    net.params = init_mlp_params(net.spec, rng, /*zero_last_layer=*/true);
    return net;
  }

  int input_dim() const { return spec.input_dim(); }
  Eigen::Index param_count() const { return params.size(); }

  Vec forward(const Mat& input, MlpCache* cache = nullptr) const {
    return mlp_forward(spec, params, input, cache).row(0).transpose();
  }
};

}  // namespace hippo::nn
