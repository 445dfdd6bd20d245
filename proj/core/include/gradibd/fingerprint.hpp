#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "gradibd/cohort.hpp"

namespace gradibd {

/// Lowercase hex SHA-256 digest.
std::string sha256_hex(std::string_view bytes);
std::string file_sha256_hex(const std::filesystem::path& path);

/// Digest of the canonical JSONL serialization of a cohort.
std::string cohort_fingerprint(const std::vector<CohortRecord>& records);

}  // namespace gradibd
