#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace gradibd {

using CodeId = std::int32_t;

/// Reduces a raw ICD code to its chapter: the uppercased first three
/// characters. Throws EmptyCode / ShortCode for malformed input.
std::string truncate_code(std::string_view raw);

/// Fixed vocabulary of chapter-level codes. Ids are dense, ordered
/// lexicographically, and the unknown-code token always takes the last id.
class CodeVocab {
 public:
  CodeVocab() = default;

  /// Builds from already-truncated, unique codes. Order is normalized.
  explicit CodeVocab(std::vector<std::string> truncated_codes);

  const std::vector<std::string>& codes() const noexcept { return codes_; }
  CodeId unk_id() const noexcept { return static_cast<CodeId>(codes_.size()); }
  std::size_t size() const noexcept { return codes_.size() + 1; }

  /// Id of the chapter of `raw`, or unk_id() if unseen.
  CodeId encode(std::string_view raw) const;

  /// Inverse of encode for known ids; "<UNK>" for unk_id().
  const std::string& decode(CodeId id) const;

  bool contains(std::string_view truncated) const;

  void save(const std::filesystem::path& path) const;
  static CodeVocab load(const std::filesystem::path& path);

  friend bool operator==(const CodeVocab& a, const CodeVocab& b) {
    return a.codes_ == b.codes_;
  }

 private:
  std::vector<std::string> codes_;
  std::map<std::string, CodeId, std::less<>> index_;
};

CodeVocab build_vocab(std::span<const std::string> corpus);

}  // namespace gradibd
