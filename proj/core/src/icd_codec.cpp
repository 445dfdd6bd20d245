#include "gradibd/icd_codec.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

#include "gradibd/error.hpp"

namespace gradibd {

namespace {

constexpr std::size_t kChapterLength = 3;

std::string_view trim(std::string_view s) {
  auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

const std::string kUnkToken = "<UNK>";

}  // namespace

std::string truncate_code(std::string_view raw) {
  const auto trimmed = trim(raw);
  if (trimmed.empty()) {
    fail(ErrorCode::EmptyCode, "empty diagnosis code");
  }
  if (trimmed.size() < kChapterLength) {
    fail(ErrorCode::ShortCode,
         "diagnosis code '" + std::string(trimmed) + "' has fewer than 3 characters");
  }
  std::string out(trimmed.substr(0, kChapterLength));
  for (auto& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

CodeVocab::CodeVocab(std::vector<std::string> truncated_codes) : codes_(std::move(truncated_codes)) {
  std::sort(codes_.begin(), codes_.end());
  codes_.erase(std::unique(codes_.begin(), codes_.end()), codes_.end());
  for (std::size_t i = 0; i < codes_.size(); ++i) {
    if (codes_[i].size() != kChapterLength) {
      fail(ErrorCode::FormatError, "vocabulary entry '" + codes_[i] + "' is not a 3-character chapter");
    }
    index_.emplace(codes_[i], static_cast<CodeId>(i));
  }
}

CodeId CodeVocab::encode(std::string_view raw) const {
  const auto chapter = truncate_code(raw);
  const auto it = index_.find(chapter);
  return it == index_.end() ? unk_id() : it->second;
}

const std::string& CodeVocab::decode(CodeId id) const {
  if (id == unk_id()) return kUnkToken;
  return codes_.at(static_cast<std::size_t>(id));
}

bool CodeVocab::contains(std::string_view truncated) const {
  return index_.find(truncated) != index_.end();
}

void CodeVocab::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IoError, "cannot write vocabulary " + path.string());
  for (const auto& code : codes_) out << code << '\n';
}

CodeVocab CodeVocab::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoError, "cannot read vocabulary " + path.string());
  std::vector<std::string> codes;
  std::string line;
  while (std::getline(in, line)) {
    const auto t = trim(line);
    if (!t.empty()) codes.emplace_back(t);
  }
  return CodeVocab(std::move(codes));
}

CodeVocab build_vocab(std::span<const std::string> corpus) {
  std::vector<std::string> chapters;
  chapters.reserve(corpus.size());
  for (const auto& raw : corpus) chapters.push_back(truncate_code(raw));
  return CodeVocab(std::move(chapters));
}

}  // namespace gradibd
