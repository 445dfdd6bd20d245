#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "gradibd/icd_codec.hpp"

namespace gradibd {

/// Observation window length: three years of history before the anchor.
inline constexpr int kLookbackDays = 1095;
inline constexpr int kDaysPerMonth = 30;

struct Visit {
  int day_offset = 0;
  std::vector<std::string> codes;

  friend bool operator==(const Visit&, const Visit&) = default;
};

/// One patient trajectory. `lead_days` records the prediction interval
/// already applied (0 for raw records); bucketing uses anchor_day - lead_days
/// as the end of the usable history.
struct CohortRecord {
  std::string patient_id;
  int label = 0;
  int anchor_day = 0;
  std::vector<Visit> visits;
  int lead_days = 0;

  /// True when truncation left no visits. Such records are kept and scored
  /// from an empty graph.
  bool empty() const noexcept { return visits.empty(); }
  std::size_t code_occurrences() const noexcept;

  friend bool operator==(const CohortRecord&, const CohortRecord&) = default;
};

/// Checks every CohortRecord invariant, throwing InvariantViolation naming
/// the offending field.
void validate(const CohortRecord& record);

std::vector<CohortRecord> load_cohort(const std::filesystem::path& path);
void save_cohort(const std::filesystem::path& path, const std::vector<CohortRecord>& records);

/// JSONL line codec (one record per line, fixed key order).
std::string to_jsonl_line(const CohortRecord& record);
CohortRecord parse_jsonl_line(const std::string& line, std::size_t line_number);

/// Drops visits later than anchor_day - lead_days.
CohortRecord apply_prediction_interval(const CohortRecord& record, int lead_days);

std::vector<std::string> all_codes(const std::vector<CohortRecord>& records);

struct SynthConfig {
  std::size_t n_patients = 2000;
  double case_fraction = 0.2;
  int background_vocab_size = 400;
  double zipf_exponent = 1.1;
  /// Ids in the synthetic code namespace (see synthetic_code_name).
  std::vector<CodeId> motif_codes = {12, 27, 41};
  /// Motif events per 30 days for cases, present across the whole history.
  double motif_base = 0.15;
  /// Additional motif events per 30 days gained for every 30 days closer to
  /// the anchor inside the ramp window.
  double motif_ramp = 0.6;
  int ramp_days = 180;
  double visit_rate = 0.6;
  double codes_per_visit = 2.0;
  std::uint64_t seed = 7;

  void validate() const;
};

/// Configuration with no case/control difference at all.
SynthConfig null_signal(SynthConfig config);

/// Raw code string for a synthetic code id, e.g. 1041 -> "K41.x".
std::string synthetic_code_name(CodeId id, std::uint64_t salt);

std::vector<CohortRecord> generate_synthetic(const SynthConfig& config);

struct Split {
  std::vector<CohortRecord> train;
  std::vector<CohortRecord> test;
};

/// Per-class holdout of floor(n_class * test_fraction) records.
Split stratified_split(const std::vector<CohortRecord>& records, double test_fraction,
                       std::uint64_t seed);

}  // namespace gradibd
