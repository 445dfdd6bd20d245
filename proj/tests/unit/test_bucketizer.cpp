#include <map>

#include <gtest/gtest.h>

#include "gradibd/bucketizer.hpp"
#include "gradibd/random.hpp"
#include "test_util.hpp"

namespace gradibd {
namespace {

using testing::error_code_of;

// Vocabulary where chapter "C05" has id 5.
CodeVocab six_codes() {
  return CodeVocab({"C00", "C01", "C02", "C03", "C04", "C05"});
}

CohortRecord visits_at(std::vector<int> days, const std::string& code, int anchor = 400) {
  CohortRecord r{"p", 0, anchor, {}, 0};
  for (int d : days) r.visits.push_back({d, {code}});
  return r;
}

TEST(Bucketize, WeeklyCounts) {
  const auto vocab = six_codes();
  const auto m = bucketize(visits_at({0, 3, 10}, "C05.1"), vocab, 7);
  ASSERT_EQ(vocab.encode("C05"), 5);
  EXPECT_EQ(m.at(5, 0), 2);
  EXPECT_EQ(m.at(5, 1), 1);
  EXPECT_EQ(m.nonempty_buckets().size(), 2u);
  EXPECT_EQ(nnz(m), 2u);
  EXPECT_EQ(m.n_buckets(), 157);
  EXPECT_EQ(m.n_codes(), vocab.size());
}

TEST(Bucketize, DailyBucketsFollowVisits) {
  const auto vocab = six_codes();
  const auto m = bucketize(visits_at({0, 3, 3, 10}, "C02"), vocab, 1);
  EXPECT_EQ(m.nonempty_buckets(), (std::vector<std::int32_t>{0, 3, 10}));
  EXPECT_EQ(m.at(2, 3), 2);
  EXPECT_EQ(m.n_buckets(), kLookbackDays);
}

TEST(Bucketize, WindowEndsAtCutoff) {
  const auto vocab = six_codes();
  auto r = visits_at({100, 1200, 1499}, "C01", 1500);
  // window [406, 1500]
  EXPECT_EQ(window_start(r, kLookbackDays), 406);
  auto m = bucketize(r, vocab, 7);
  EXPECT_EQ(m.total_mass(), 2);
  EXPECT_EQ(m.nonempty_buckets().back(), (1499 - 406) / 7);
  r.lead_days = 30;
  m = bucketize(r, vocab, 7);
  EXPECT_EQ(m.total_mass(), 1);
}

TEST(Bucketize, UnknownCodesGoToUnk) {
  const auto vocab = six_codes();
  const auto m = bucketize(visits_at({4}, "Z99.9"), vocab, 7);
  EXPECT_EQ(m.at(vocab.unk_id(), 0), 1);
}

TEST(Bucketize, EmptyRecord) {
  const auto m = bucketize(visits_at({}, "C00"), six_codes(), 7);
  EXPECT_EQ(nnz(m), 0u);
  EXPECT_TRUE(m.nonempty_buckets().empty());
  EXPECT_EQ(nnz(BucketMatrix()), 0u);
}

TEST(Bucketize, RejectsBadTau) {
  EXPECT_EQ(error_code_of([] { bucketize(visits_at({1}, "C00"), six_codes(), 0); }), ErrorCode::ConfigError);
}

CohortRecord random_record(Rng& rng) {
  std::uniform_int_distribution<int> day(1, 1094);
  std::uniform_int_distribution<int> code(0, 7);
  std::uniform_int_distribution<int> count(0, 40);
  std::vector<int> days(static_cast<std::size_t>(count(rng)));
  for (auto& d : days) d = day(rng);
  std::sort(days.begin(), days.end());
  CohortRecord r{"r", 0, 1095, {}, 0};
  for (int d : days) r.visits.push_back({d, {"C0" + std::to_string(code(rng)), "C0" + std::to_string(code(rng))}});
  return r;
}

TEST(Bucketize, MassEqualsCodeOccurrences) {
  auto rng = make_rng(5, {1});
  const auto vocab = six_codes();
  for (int i = 0; i < 200; ++i) {
    const auto r = random_record(rng);
    for (int tau : {1, 3, 7, 30}) {
      EXPECT_EQ(bucketize(r, vocab, tau).total_mass(), static_cast<std::int64_t>(r.code_occurrences()));
    }
  }
}

TEST(Bucketize, CoarserBucketsAreSumsOfDailyBuckets) {
  auto rng = make_rng(6, {1});
  const auto vocab = six_codes();
  for (int i = 0; i < 100; ++i) {
    const auto r = random_record(rng);
    const auto daily = bucketize(r, vocab, 1);
    const auto weekly = bucketize(r, vocab, 7);
    std::map<BucketMatrix::Key, std::int32_t> folded;
    for (const auto& [key, f] : daily.entries()) folded[{key.first / 7, key.second}] += f;
    EXPECT_EQ(folded, weekly.entries());
  }
}

TEST(BucketMatrix, FromEntriesAccumulates) {
  const auto m = BucketMatrix::from_entries(3, 4, 7, {{1, 2, 1}, {1, 2, 2}, {0, 0, 1}});
  EXPECT_EQ(m.at(1, 2), 3);
  EXPECT_EQ(m.at(2, 2), 0);
  EXPECT_EQ(nnz(m), 2u);
  EXPECT_EQ(error_code_of([] { BucketMatrix::from_entries(3, 4, 7, {{3, 0, 1}}); }),
            ErrorCode::InvariantViolation);
  EXPECT_EQ(error_code_of([] { BucketMatrix::from_entries(3, 4, 7, {{0, 4, 1}}); }),
            ErrorCode::InvariantViolation);
}

}  // namespace
}  // namespace gradibd
