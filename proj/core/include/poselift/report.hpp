#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "poselift/eval.hpp"
#include "poselift/train.hpp"

namespace poselift {

/// 64-bit FNV-1a of `text`, as 16 lowercase hex digits. Used to tag output
/// files with the configuration that produced them.
std::string config_hash(std::string_view text);

/// "<stem>_<hash>_seed<seed>.<ext>"
std::string report_filename(std::string_view stem, std::string_view hash, std::uint64_t seed,
                            std::string_view ext);

/// Header comment, then "epoch,train_loss,val_mpjpe,train_mpjpe,lr,diverged".
/// The pre-training scores appear as epoch 0.
std::string training_log_csv(const TrainingLog& log, std::string_view hash);

std::string ablation_csv(const AblationReport& report, std::string_view hash);
std::string ablation_text(const AblationReport& report);

std::string sweep_csv(const SweepReport& report, std::string_view hash);
std::string sweep_text(const SweepReport& report);

}  // namespace poselift
