#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "hippo/core.hpp"
#include "hippo/nn.hpp"

namespace hippo::nn {

// Binary checkpoint layout, all little-endian:
//   magic "HPCK", u32 version, u32 kind, u32 agent_count,
//   u32 width_count, u32 widths[], u32 activation tags (one per hidden layer),
//   u64 parameter count, then the flat f64 parameter block in declaration
//   order (per layer W row-major then b, then log_std for policy files).
enum class CheckpointKind : std::uint32_t { kValueNet = 0, kGaussianPolicy = 1 };

struct Checkpoint {
  CheckpointKind kind = CheckpointKind::kValueNet;
  std::uint32_t agent_count = 0;
  MlpSpec spec;
  Vec params;
};

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) out.push_back(static_cast<char>(v >> (8 * k) & 0xff));
}
inline void put_u64(std::string& out, std::uint64_t v) {
  for (int k = 0; k < 8; ++k) out.push_back(static_cast<char>(v >> (8 * k) & 0xff));
}
inline std::uint32_t get_u32(const std::string& in, std::size_t& pos) {
  if (pos + 4 > in.size()) throw ConfigError("checkpoint truncated");
  std::uint32_t v = 0;
  for (int k = 0; k < 4; ++k)
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[pos + k])) << (8 * k);
  pos += 4;
  return v;
}
inline std::uint64_t get_u64(const std::string& in, std::size_t& pos) {
  if (pos + 8 > in.size()) throw ConfigError("checkpoint truncated");
  std::uint64_t v = 0;
  for (int k = 0; k < 8; ++k)
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + k])) << (8 * k);
  pos += 8;
  return v;
}

}  // namespace detail

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::string blob;
  blob.reserve(64 + static_cast<std::size_t>(ckpt.params.size()) * 8);
  blob += "HPCK";
  detail::put_u32(blob, 1);  // format version
  detail::put_u32(blob, static_cast<std::uint32_t>(ckpt.kind));
  detail::put_u32(blob, ckpt.agent_count);
  detail::put_u32(blob, static_cast<std::uint32_t>(ckpt.spec.widths.size()));
  for (int w : ckpt.spec.widths) detail::put_u32(blob, static_cast<std::uint32_t>(w));
  for (Activation a : ckpt.spec.hidden_activations)
    detail::put_u32(blob, static_cast<std::uint32_t>(a));
  detail::put_u64(blob, static_cast<std::uint64_t>(ckpt.params.size()));
  for (Eigen::Index k = 0; k < ckpt.params.size(); ++k) {
    std::uint64_t bits;
    std::memcpy(&bits, &ckpt.params[k], 8);
    detail::put_u64(blob, bits);
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot open checkpoint for writing: " + path.string());
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!out) throw ConfigError("checkpoint write failed: " + path.string());
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open checkpoint: " + path.string());
  std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  std::size_t pos = 0;
  if (blob.size() < 4 || blob.compare(0, 4, "HPCK") != 0)
    throw ConfigError("not a checkpoint file: " + path.string());
  pos = 4;
  const std::uint32_t version = detail::get_u32(blob, pos);
  if (version != 1)
    throw ConfigError("unsupported checkpoint version " + std::to_string(version));

  Checkpoint ckpt;
  ckpt.kind = static_cast<CheckpointKind>(detail::get_u32(blob, pos));
  ckpt.agent_count = detail::get_u32(blob, pos);
  const std::uint32_t width_count = detail::get_u32(blob, pos);
  ckpt.spec.widths.resize(width_count);
  for (auto& w : ckpt.spec.widths) w = static_cast<int>(detail::get_u32(blob, pos));
  ckpt.spec.hidden_activations.resize(width_count >= 2 ? width_count - 2 : 0);
  for (auto& a : ckpt.spec.hidden_activations)
    a = static_cast<Activation>(detail::get_u32(blob, pos));
  const std::uint64_t count = detail::get_u64(blob, pos);
  ckpt.params = Vec::Zero(static_cast<Eigen::Index>(count));
  for (std::uint64_t k = 0; k < count; ++k) {
    const std::uint64_t bits = detail::get_u64(blob, pos);
    std::memcpy(&ckpt.params[static_cast<Eigen::Index>(k)], &bits, 8);
  }
  return ckpt;
}

inline Checkpoint policy_checkpoint(const GaussianPolicy& policy, std::uint32_t agent_count) {
  return {CheckpointKind::kGaussianPolicy, agent_count, policy.spec, policy.params};
}

inline Checkpoint critic_checkpoint(const ValueNet& net, std::uint32_t agent_count) {
  return {CheckpointKind::kValueNet, agent_count, net.spec, net.params};
}

inline GaussianPolicy policy_from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.kind != CheckpointKind::kGaussianPolicy)
    throw ConfigError("checkpoint does not hold a policy");
  GaussianPolicy p;
  p.spec = ckpt.spec;
  p.spec.validate();
  if (ckpt.params.size() != mlp_param_count(p.spec) + p.spec.output_dim())
    throw ConfigError("policy checkpoint parameter count mismatch");
  p.params = ckpt.params;
  return p;
}

inline ValueNet critic_from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.kind != CheckpointKind::kValueNet)
    throw ConfigError("checkpoint does not hold a value network");
  ValueNet net;
  net.spec = ckpt.spec;
  net.spec.validate();
  if (ckpt.params.size() != mlp_param_count(net.spec))
    throw ConfigError("value checkpoint parameter count mismatch");
  net.params = ckpt.params;
  return net;
}

}  // namespace hippo::nn
