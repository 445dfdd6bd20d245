#pragma once

#include <cstdint>
#include <string>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "gradibd/cohort.hpp"
#include "gradibd/model.hpp"

namespace gradibd {

struct TrainConfig {
  int folds = 10;
  double lr = 1e-3;
  double lr_decay_factor = 10.0;
  int patience_lr = 3;
  int patience_stop = 10;
  int max_epochs = 100;
  int batch_size = 8;
  /// Validation loss must drop by at least this much to count as progress.
  double min_improvement = 1e-5;
  std::uint64_t seed = 0;

  void validate() const;

  /// Human-readable schedule and stopping rule, recorded in every report.
  std::string stopping_rule() const;
};

enum class VocabScope { Train, All };

/// Everything that determines a run. Serialized as flat `key = value` lines;
/// `seed` maps to train.seed and drives splits, initialization and shuffling.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  int tau = 7;
  int window_days = kLookbackDays;
  int lead_days = 30;
  double test_fraction = 0.1;
  /// Codes that enter the vocabulary: the training split only, or all records.
  VocabScope vocab_scope = VocabScope::Train;

  void validate() const;

  /// Sets one key from its textual value; ConfigError on unknown keys or
  /// malformed values.
  void set(std::string_view key, std::string_view value);

  /// Canonical text form: every key, fixed order, round-trip exact.
  std::string to_text() const;
  static RunConfig parse(std::string_view text);
  /// Every settable key, in to_text() order.
  static std::vector<std::string> keys();
  static RunConfig load(const std::filesystem::path& path);
};

}  // namespace gradibd
