#include "gradibd/bucketizer.hpp"

#include <algorithm>

#include "gradibd/error.hpp"

namespace gradibd {

BucketMatrix::BucketMatrix(std::size_t n_codes, std::int32_t n_buckets, int tau)
    : n_codes_(n_codes), n_buckets_(n_buckets), tau_(tau) {
  if (tau < 1) fail(ErrorCode::ConfigError, "tau must be at least 1");
  if (n_buckets < 0) fail(ErrorCode::ConfigError, "bucket count must be non-negative");
}

BucketMatrix BucketMatrix::from_entries(std::size_t n_codes, std::int32_t n_buckets, int tau,
                                        const std::vector<BucketEntry>& entries) {
  BucketMatrix m(n_codes, n_buckets, tau);
  for (const auto& e : entries) m.add(e.code_id, e.bucket, e.frequency);
  return m;
}

void BucketMatrix::add(CodeId code, std::int32_t bucket, std::int32_t count) {
  if (code < 0 || static_cast<std::size_t>(code) >= n_codes_) {
    fail(ErrorCode::InvariantViolation, "code id " + std::to_string(code) + " outside vocabulary");
  }
  if (bucket < 0 || bucket >= n_buckets_) {
    fail(ErrorCode::InvariantViolation, "bucket " + std::to_string(bucket) + " outside window");
  }
  if (count <= 0) return;
  entries_[{bucket, code}] += count;
}

std::int32_t BucketMatrix::at(CodeId code, std::int32_t bucket) const {
  const auto it = entries_.find({bucket, code});
  return it == entries_.end() ? 0 : it->second;
}

std::vector<std::int32_t> BucketMatrix::nonempty_buckets() const {
  std::vector<std::int32_t> out;
  for (const auto& [key, _] : entries_) {
    if (out.empty() || out.back() != key.first) out.push_back(key.first);
  }
  return out;
}

std::int64_t BucketMatrix::total_mass() const {
  std::int64_t total = 0;
  for (const auto& [_, f] : entries_) total += f;
  return total;
}

std::size_t nnz(const BucketMatrix& matrix) { return matrix.entries().size(); }

int window_start(const CohortRecord& record, int window_days) {
  const int cutoff = record.anchor_day - record.lead_days;
  return std::max(0, cutoff - window_days + 1);
}

BucketMatrix bucketize(const CohortRecord& record, const CodeVocab& vocab, int tau, int window_days) {
  if (tau < 1) fail(ErrorCode::ConfigError, "tau must be at least 1");
  if (window_days < tau) fail(ErrorCode::ConfigError, "window_days must be at least tau");

  const auto n_buckets = static_cast<std::int32_t>((window_days + tau - 1) / tau);
  BucketMatrix m(vocab.size(), n_buckets, tau);
  const int start = window_start(record, window_days);
  const int cutoff = record.anchor_day - record.lead_days;
  for (const auto& visit : record.visits) {
    if (visit.day_offset < start || visit.day_offset > cutoff) continue;
    const auto bucket = static_cast<std::int32_t>((visit.day_offset - start) / tau);
    for (const auto& code : visit.codes) m.add(vocab.encode(code), bucket);
  }
  return m;
}

}  // namespace gradibd
