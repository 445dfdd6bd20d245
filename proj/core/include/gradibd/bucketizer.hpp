#pragma once

#include <cstdint>
#include <map>
#include <utility>
#include <vector>

#include "gradibd/cohort.hpp"
#include "gradibd/icd_codec.hpp"

namespace gradibd {

inline constexpr int kDefaultTau = 7;

struct BucketEntry {
  CodeId code_id = 0;
  std::int32_t bucket = 0;
  std::int32_t frequency = 0;
};

/// Sparse code x bucket frequency matrix. Entries are keyed (bucket, code)
/// so iteration is chronological, then by code id.
class BucketMatrix {
 public:
  using Key = std::pair<std::int32_t, CodeId>;

  BucketMatrix() = default;
  BucketMatrix(std::size_t n_codes, std::int32_t n_buckets, int tau);

  /// Builds from an unordered entry list; duplicate cells accumulate.
  static BucketMatrix from_entries(std::size_t n_codes, std::int32_t n_buckets, int tau,
                                   const std::vector<BucketEntry>& entries);

  void add(CodeId code, std::int32_t bucket, std::int32_t count = 1);

  std::size_t n_codes() const noexcept { return n_codes_; }
  std::int32_t n_buckets() const noexcept { return n_buckets_; }
  int tau() const noexcept { return tau_; }

  std::int32_t at(CodeId code, std::int32_t bucket) const;
  const std::map<Key, std::int32_t>& entries() const noexcept { return entries_; }

  /// Sorted indices of buckets holding at least one code.
  std::vector<std::int32_t> nonempty_buckets() const;
  std::int64_t total_mass() const;

 private:
  std::size_t n_codes_ = 0;
  std::int32_t n_buckets_ = 0;
  int tau_ = kDefaultTau;
  std::map<Key, std::int32_t> entries_;
};

/// Number of (code, bucket) cells with positive frequency.
std::size_t nnz(const BucketMatrix& matrix);

/// T = ceil(window_days / tau) buckets covering the window_days days that end
/// at anchor_day - lead_days (clipped at day 0).
BucketMatrix bucketize(const CohortRecord& record, const CodeVocab& vocab, int tau,
                       int window_days = kLookbackDays);

/// First day covered by bucket 0 for this record.
int window_start(const CohortRecord& record, int window_days);

}  // namespace gradibd
