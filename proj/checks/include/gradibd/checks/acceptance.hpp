#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "gradibd/cohort.hpp"
#include "gradibd/run_config.hpp"

namespace gradibd::checks {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

struct SuiteOptions {
  int jobs = 1;
  /// Extra tables and per-seed numbers go here when set.
  std::ostream* log = nullptr;
};

/// Frozen cohort and run settings used by the behavioural criteria.
SynthConfig strong_signal_cohort();
RunConfig learnability_config();
RunConfig sweep_config(std::uint64_t seed);
inline constexpr int kSweepSeeds = 5;

CriterionResult check_gradients(const SuiteOptions& opts);
CriterionResult check_normalization(const SuiteOptions& opts);
CriterionResult check_uniform_mean(const SuiteOptions& opts);
CriterionResult check_graph_counts(const SuiteOptions& opts);
CriterionResult check_metric_oracles(const SuiteOptions& opts);
CriterionResult check_learnability(const SuiteOptions& opts);
CriterionResult check_ablation_direction(const SuiteOptions& opts);
CriterionResult check_sensitivity_shape(const SuiteOptions& opts);
CriterionResult check_complexity(const SuiteOptions& opts);
CriterionResult check_determinism(const SuiteOptions& opts);

/// Criteria 1-10 in order, or only those listed in `ids`.
std::vector<CriterionResult> run_criteria(const SuiteOptions& opts, const std::vector<int>& ids = {});

/// "PASS [3] name (1.2s): detail"
std::string format_result(const CriterionResult& r);

}  // namespace gradibd::checks
