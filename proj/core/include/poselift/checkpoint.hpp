#pragma once

#include <filesystem>
#include <string>

#include "poselift/nn.hpp"
#include "poselift/preprocess.hpp"

namespace poselift {

/// Everything inference needs: skeleton, architecture, parameters, running
/// statistics and the standardization statistics fitted on the train split.
///
/// File layout:
///   line 1   "POSELIFT-CKPT 1"
///   line 2   one-line JSON header: skeleton, network config, config_hash and
///            the ordered tensor table [{"name", "rows", "cols"}, ...]
///   payload  the tensors of the table, back to back, each stored row-major
///            as IEEE-754 binary64 little-endian values
///
/// Tensor order: input_mean, input_std, output_mean, output_std, then for the
/// input stage and each block stage: weight, bias and, with batch norm,
/// gamma, beta, running_mean, running_var; finally output weight and bias.
struct Checkpoint {
  SkeletonSpec skeleton;
  LiftingNetwork network;
  NormStats input_stats;
  NormStats output_stats;
  std::string config_hash;
};

inline constexpr const char* kCheckpointMagic = "POSELIFT-CKPT 1";

std::string serialize_checkpoint(const Checkpoint& ckpt);
/// Throws IoError on a malformed or truncated buffer.
Checkpoint deserialize_checkpoint(const std::string& bytes);

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace poselift
