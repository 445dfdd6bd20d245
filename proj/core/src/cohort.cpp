#include "gradibd/cohort.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "gradibd/error.hpp"
#include "gradibd/random.hpp"

namespace gradibd {

using ordered_json = nlohmann::ordered_json;

std::size_t CohortRecord::code_occurrences() const noexcept {
  std::size_t n = 0;
  for (const auto& v : visits) n += v.codes.size();
  return n;
}

void validate(const CohortRecord& r) {
  auto violation = [&](const std::string& field, const std::string& what) {
    fail(ErrorCode::InvariantViolation, "record '" + r.patient_id + "': " + field + " " + what);
  };
  if (r.label != 0 && r.label != 1) violation("label", "must be 0 or 1");
  if (r.anchor_day < 0) violation("anchor_day", "must be non-negative");
  if (r.anchor_day > kLookbackDays) violation("anchor_day", "exceeds the 1095-day lookback cap");
  if (r.lead_days < 0) violation("lead_days", "must be non-negative");
  for (std::size_t i = 0; i < r.visits.size(); ++i) {
    const auto& v = r.visits[i];
    if (v.day_offset < 0) violation("visits.day_offset", "must be non-negative");
    if (v.day_offset >= r.anchor_day) violation("visits.day_offset", "must be before anchor_day");
    if (v.codes.empty()) violation("visits.codes", "must be non-empty");
    if (i > 0 && v.day_offset < r.visits[i - 1].day_offset) {
      violation("visits", "must be sorted by day_offset");
    }
  }
}

std::string to_jsonl_line(const CohortRecord& r) {
  ordered_json j;
  j["patient_id"] = r.patient_id;
  j["label"] = r.label;
  j["anchor_day"] = r.anchor_day;
  auto visits = ordered_json::array();
  for (const auto& v : r.visits) {
    ordered_json jv;
    jv["day_offset"] = v.day_offset;
    jv["codes"] = v.codes;
    visits.push_back(std::move(jv));
  }
  j["visits"] = std::move(visits);
  return j.dump();
}

namespace {

[[noreturn]] void parse_error(std::size_t line_number, const std::string& what) {
  fail(ErrorCode::ParseError, "line " + std::to_string(line_number) + ": " + what);
}

void require_exact_keys(const nlohmann::json& obj, const std::set<std::string>& keys,
                        std::size_t line_number, const char* where) {
  if (!obj.is_object()) parse_error(line_number, std::string(where) + " must be an object");
  for (const auto& key : keys) {
    if (!obj.contains(key)) parse_error(line_number, std::string(where) + " missing key '" + key + "'");
  }
  for (const auto& [key, _] : obj.items()) {
    if (!keys.contains(key)) parse_error(line_number, std::string(where) + " has unexpected key '" + key + "'");
  }
}

int as_int(const nlohmann::json& v, std::size_t line_number, const char* field) {
  if (!v.is_number_integer()) parse_error(line_number, std::string(field) + " must be an integer");
  return v.get<int>();
}

}  // namespace

CohortRecord parse_jsonl_line(const std::string& line, std::size_t line_number) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    parse_error(line_number, e.what());
  }
  require_exact_keys(j, {"patient_id", "label", "anchor_day", "visits"}, line_number, "record");
  CohortRecord r;
  if (!j["patient_id"].is_string()) parse_error(line_number, "patient_id must be a string");
  r.patient_id = j["patient_id"].get<std::string>();
  r.label = as_int(j["label"], line_number, "label");
  r.anchor_day = as_int(j["anchor_day"], line_number, "anchor_day");
  if (!j["visits"].is_array()) parse_error(line_number, "visits must be an array");
  for (const auto& jv : j["visits"]) {
    require_exact_keys(jv, {"day_offset", "codes"}, line_number, "visit");
    Visit v;
    v.day_offset = as_int(jv["day_offset"], line_number, "day_offset");
    if (!jv["codes"].is_array()) parse_error(line_number, "codes must be an array");
    for (const auto& c : jv["codes"]) {
      if (!c.is_string()) parse_error(line_number, "codes must be strings");
      v.codes.push_back(c.get<std::string>());
    }
    r.visits.push_back(std::move(v));
  }
  std::stable_sort(r.visits.begin(), r.visits.end(),
                   [](const Visit& a, const Visit& b) { return a.day_offset < b.day_offset; });
  return r;
}

std::vector<CohortRecord> load_cohort(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoError, "cannot open cohort file " + path.string());
  std::vector<CohortRecord> records;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto record = parse_jsonl_line(line, line_number);
    try {
      validate(record);
    } catch (const Error& e) {
      fail(e.code(), "line " + std::to_string(line_number) + ": " + e.what());
    }
    records.push_back(std::move(record));
  }
  return records;
}

void save_cohort(const std::filesystem::path& path, const std::vector<CohortRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IoError, "cannot write cohort file " + path.string());
  for (const auto& r : records) out << to_jsonl_line(r) << '\n';
}

CohortRecord apply_prediction_interval(const CohortRecord& record, int lead_days) {
  if (lead_days < 0) fail(ErrorCode::ConfigError, "lead_days must be non-negative");
  CohortRecord out = record;
  const int cutoff = record.anchor_day - lead_days;
  std::erase_if(out.visits, [cutoff](const Visit& v) { return v.day_offset > cutoff; });
  out.lead_days = std::max(record.lead_days, lead_days);
  return out;
}

std::vector<std::string> all_codes(const std::vector<CohortRecord>& records) {
  std::vector<std::string> codes;
  for (const auto& r : records) {
    for (const auto& v : r.visits) codes.insert(codes.end(), v.codes.begin(), v.codes.end());
  }
  return codes;
}

// ---------------------------------------------------------------------------
// Synthetic cohorts

namespace {

constexpr int kSyntheticCodeSpace = 26 * 100;
constexpr int kSlotDays = 7;

}  // namespace

void SynthConfig::validate() const {
  auto bad = [](const std::string& what) { fail(ErrorCode::ConfigError, what); };
  if (n_patients == 0) bad("n_patients must be positive");
  if (!(case_fraction > 0.0 && case_fraction < 1.0)) bad("case_fraction must lie in (0, 1)");
  if (background_vocab_size <= 0 || background_vocab_size > kSyntheticCodeSpace) {
    bad("background_vocab_size must lie in [1, 2600]");
  }
  if (!(zipf_exponent > 0.0)) bad("zipf_exponent must be positive");
  if (motif_base < 0.0 || motif_ramp < 0.0) bad("motif intensities must be non-negative");
  if ((motif_base > 0.0 || motif_ramp > 0.0) && motif_codes.empty()) bad("motif_codes must be non-empty");
  for (auto c : motif_codes) {
    if (c < 0 || c >= kSyntheticCodeSpace) bad("motif code id out of range");
  }
  if (ramp_days <= 0) bad("ramp_days must be positive");
  if (!(visit_rate > 0.0)) bad("visit_rate must be positive");
  if (!(codes_per_visit >= 1.0)) bad("codes_per_visit must be at least 1");
}

SynthConfig null_signal(SynthConfig config) {
  config.motif_base = 0.0;
  config.motif_ramp = 0.0;
  return config;
}

std::string synthetic_code_name(CodeId id, std::uint64_t salt) {
  const char letter = static_cast<char>('A' + (id / 100) % 26);
  const int number = id % 100;
  std::string name;
  name += letter;
  name += static_cast<char>('0' + number / 10);
  name += static_cast<char>('0' + number % 10);
  name += '.';
  name += static_cast<char>('0' + salt % 10);
  return name;
}

namespace {

CohortRecord simulate_patient(const SynthConfig& cfg, const std::vector<double>& zipf_cdf,
                              std::size_t index, int label) {
  auto rng = make_rng(cfg.seed, {0x636f686f7274ULL, index});
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto background_code = [&]() {
    const double u = unit(rng);
    const auto it = std::upper_bound(zipf_cdf.begin(), zipf_cdf.end(), u);
    const auto id = static_cast<CodeId>(std::min<std::ptrdiff_t>(it - zipf_cdf.begin(),
                                                                 static_cast<std::ptrdiff_t>(zipf_cdf.size()) - 1));
    return synthetic_code_name(id, rng());
  };

  CohortRecord r;
  char id_buf[32];
  std::snprintf(id_buf, sizeof id_buf, "p%06zu", index);
  r.patient_id = id_buf;
  r.label = label;
  r.anchor_day = std::uniform_int_distribution<int>(365, kLookbackDays)(rng);

  std::poisson_distribution<int> n_visits_dist(cfg.visit_rate * r.anchor_day / kDaysPerMonth);
  std::poisson_distribution<int> extra_codes(cfg.codes_per_visit - 1.0);
  std::uniform_int_distribution<int> day_dist(0, r.anchor_day - 1);
  const int n_visits = n_visits_dist(rng);
  for (int i = 0; i < n_visits; ++i) {
    Visit v;
    v.day_offset = day_dist(rng);
    const int n_codes = 1 + (cfg.codes_per_visit > 1.0 ? extra_codes(rng) : 0);
    for (int k = 0; k < n_codes; ++k) v.codes.push_back(background_code());
    r.visits.push_back(std::move(v));
  }

  if (label == 1 && (cfg.motif_base > 0.0 || cfg.motif_ramp > 0.0)) {
    std::uniform_int_distribution<std::size_t> motif_pick(0, cfg.motif_codes.size() - 1);
    for (int slot_start = 0; slot_start < r.anchor_day; slot_start += kSlotDays) {
      const int slot_end = std::min(slot_start + kSlotDays, r.anchor_day);
      const double mid = 0.5 * (slot_start + slot_end);
      const double days_before = r.anchor_day - mid;
      const double ramp_months = std::max(0.0, cfg.ramp_days - days_before) / kDaysPerMonth;
      const double per_month = cfg.motif_base + cfg.motif_ramp * ramp_months;
      const double expected = per_month * (slot_end - slot_start) / kDaysPerMonth;
      const int n_events = std::poisson_distribution<int>(expected)(rng);
      if (n_events == 0) continue;
      Visit v;
      v.day_offset = std::uniform_int_distribution<int>(slot_start, slot_end - 1)(rng);
      for (int k = 0; k < n_events; ++k) {
        v.codes.push_back(synthetic_code_name(cfg.motif_codes[motif_pick(rng)], rng()));
      }
      r.visits.push_back(std::move(v));
    }
  }

  std::stable_sort(r.visits.begin(), r.visits.end(),
                   [](const Visit& a, const Visit& b) { return a.day_offset < b.day_offset; });
  return r;
}

}  // namespace

std::vector<CohortRecord> generate_synthetic(const SynthConfig& cfg) {
  cfg.validate();

  std::vector<double> zipf_cdf(static_cast<std::size_t>(cfg.background_vocab_size));
  double total = 0.0;
  for (std::size_t i = 0; i < zipf_cdf.size(); ++i) {
    total += 1.0 / std::pow(static_cast<double>(i + 1), cfg.zipf_exponent);
    zipf_cdf[i] = total;
  }
  for (auto& c : zipf_cdf) c /= total;

  const auto n_cases = static_cast<std::size_t>(
      std::llround(static_cast<double>(cfg.n_patients) * cfg.case_fraction));
  std::vector<int> labels(cfg.n_patients, 0);
  std::fill_n(labels.begin(), std::min(n_cases, labels.size()), 1);
  auto label_rng = make_rng(cfg.seed, {0x6c6162656cULL});
  shuffle_in_place(labels, label_rng);

  std::vector<CohortRecord> records(cfg.n_patients);
  for (std::size_t i = 0; i < cfg.n_patients; ++i) {
    records[i] = simulate_patient(cfg, zipf_cdf, i, labels[i]);
  }
  return records;
}

Split stratified_split(const std::vector<CohortRecord>& records, double test_fraction,
                       std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    fail(ErrorCode::ConfigError, "test_fraction must lie in (0, 1)");
  }
  std::vector<std::size_t> strata[2];
  for (std::size_t i = 0; i < records.size(); ++i) strata[records[i].label == 1 ? 1 : 0].push_back(i);

  std::vector<bool> in_test(records.size(), false);
  auto rng = make_rng(seed, {0x73706c6974ULL});
  for (auto& stratum : strata) {
    const auto n_test = static_cast<std::size_t>(std::floor(static_cast<double>(stratum.size()) * test_fraction));
    if (n_test == 0 || n_test == stratum.size()) {
      fail(ErrorCode::TooFewRecords, "stratified split would leave a class stratum empty");
    }
    shuffle_in_place(stratum, rng);
    for (std::size_t k = 0; k < n_test; ++k) in_test[stratum[k]] = true;
  }

  Split split;
  for (std::size_t i = 0; i < records.size(); ++i) {
    (in_test[i] ? split.test : split.train).push_back(records[i]);
  }
  return split;
}

}  // namespace gradibd
