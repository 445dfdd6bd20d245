#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "gradibd/diff_core.hpp"
#include "gradibd/model.hpp"
#include "gradibd/run_config.hpp"
#include "gradibd/train_eval.hpp"

namespace gradibd {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// One trained fold model with everything needed to resume or score.
struct Checkpoint {
  RunConfig config;
  std::size_t n_codes = 0;
  int fold = 0;
  int best_epoch = 0;
  ModelParams params;
  ad::AdamState optimizer;
};

/// Little-endian binary layout: magic, version, config text, then named
/// tensors (rows, cols, row-major doubles) and the Adam state.
std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(const std::string& bytes);

/// One checkpoint per cross-validation fold, in fold order.
std::vector<Checkpoint> fold_checkpoints(const CvResult& cv, const RunConfig& config, std::size_t n_codes);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace gradibd
