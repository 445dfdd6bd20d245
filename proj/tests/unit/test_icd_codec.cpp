#include <algorithm>
#include <filesystem>

#include <gtest/gtest.h>

#include "gradibd/icd_codec.hpp"
#include "test_util.hpp"

namespace gradibd {
namespace {

using testing::error_code_of;

TEST(TruncateCode, KeepsFirstThreeCharactersUppercased) {
  EXPECT_EQ(truncate_code("K50.90"), "K50");
  EXPECT_EQ(truncate_code("R10"), "R10");
  EXPECT_EQ(truncate_code("k51.312"), "K51");
  EXPECT_EQ(truncate_code("  e11.9 "), "E11");
}

TEST(TruncateCode, RejectsMalformedInput) {
  EXPECT_EQ(error_code_of([] { truncate_code(""); }), ErrorCode::EmptyCode);
  EXPECT_EQ(error_code_of([] { truncate_code("   "); }), ErrorCode::EmptyCode);
  EXPECT_EQ(error_code_of([] { truncate_code("K5"); }), ErrorCode::ShortCode);
}

TEST(BuildVocab, DeduplicatesAndSorts) {
  const std::vector<std::string> corpus = {"K51.0", "K50.9", "K50.1"};
  const auto vocab = build_vocab(corpus);
  EXPECT_EQ(vocab.codes(), (std::vector<std::string>{"K50", "K51"}));
  EXPECT_EQ(vocab.size(), 3u);
  EXPECT_EQ(vocab.unk_id(), 2);
}

TEST(BuildVocab, EmptyCorpusHoldsOnlyUnk) {
  const auto vocab = build_vocab(std::vector<std::string>{});
  EXPECT_EQ(vocab.size(), 1u);
  EXPECT_EQ(vocab.unk_id(), 0);
}

TEST(BuildVocab, SizeIsDistinctChaptersPlusOne) {
  std::vector<std::string> corpus;
  for (int i = 0; i < 1982; ++i) {
    const char a = static_cast<char>('A' + i / 100);
    corpus.push_back(std::string(1, a) + std::to_string(10 + i % 100 / 10) + std::to_string(i % 10) + ".1");
  }
  std::vector<std::string> chapters;
  for (const auto& c : corpus) chapters.push_back(truncate_code(c));
  std::sort(chapters.begin(), chapters.end());
  chapters.erase(std::unique(chapters.begin(), chapters.end()), chapters.end());
  EXPECT_EQ(build_vocab(corpus).size(), chapters.size() + 1);
}

TEST(CodeVocab, EncodeAndDecode) {
  const auto vocab = build_vocab(std::vector<std::string>{"K50", "K51"});
  EXPECT_EQ(vocab.encode("K50.1"), 0);
  EXPECT_EQ(vocab.encode("K51"), 1);
  EXPECT_EQ(vocab.encode("Z99.9"), 2);
  EXPECT_EQ(vocab.decode(1), "K51");
  EXPECT_EQ(vocab.decode(vocab.unk_id()), "<UNK>");
  EXPECT_TRUE(vocab.contains("K50"));
  EXPECT_FALSE(vocab.contains("Z99"));
}

TEST(CodeVocab, IdsAreDense) {
  const auto vocab = build_vocab(std::vector<std::string>{"B20", "A00.1", "C34", "A00.9"});
  for (std::size_t i = 0; i < vocab.codes().size(); ++i) {
    EXPECT_EQ(vocab.encode(vocab.codes()[i]), static_cast<CodeId>(i));
    EXPECT_EQ(vocab.codes()[i].size(), 3u);
  }
}

TEST(CodeVocab, RejectsCodesThatAreNotChapters) {
  EXPECT_EQ(error_code_of([] { CodeVocab(std::vector<std::string>{"K50.1"}); }), ErrorCode::FormatError);
}

TEST(CodeVocab, SaveLoadRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "gradibd_vocab_test.txt";
  const auto vocab = build_vocab(std::vector<std::string>{"K50", "A01", "Z99.1"});
  vocab.save(path);
  EXPECT_EQ(CodeVocab::load(path), vocab);
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace gradibd
