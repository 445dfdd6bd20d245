#pragma once

#include <filesystem>
#include <span>
#include <string>

#include "gradibd/train_eval.hpp"

namespace gradibd {

/// Shortest text that parses back to the same double.
std::string format_exact(double value);

/// CSV with header patient_id,label,score. Scores are written exactly, so a
/// report recomputed from these files matches the original bit for bit.
void write_scores_csv(const std::filesystem::path& path, const FoldScores& scores);
FoldScores read_scores_csv(const std::filesystem::path& path);

/// CSV with header epoch,train_loss,val_loss,val_auroc,lr.
void write_trace_csv(const std::filesystem::path& path, std::span<const EpochTrace> trace);

/// Writes text atomically enough for our purposes: truncate, write, check.
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace gradibd
