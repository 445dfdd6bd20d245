#include "gradibd/run_config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "gradibd/error.hpp"

namespace gradibd {

void TrainConfig::validate() const {
  if (folds < 2) fail(ErrorCode::ConfigError, "folds must be at least 2");
  if (!(lr > 0.0)) fail(ErrorCode::ConfigError, "lr must be positive");
  if (!(lr_decay_factor >= 1.0)) fail(ErrorCode::ConfigError, "lr_decay_factor must be at least 1");
  if (patience_lr < 1) fail(ErrorCode::ConfigError, "patience_lr must be at least 1");
  if (patience_stop < patience_lr) fail(ErrorCode::ConfigError, "patience_stop must be at least patience_lr");
  if (max_epochs < 1) fail(ErrorCode::ConfigError, "max_epochs must be at least 1");
  if (batch_size < 1) fail(ErrorCode::ConfigError, "batch_size must be at least 1");
}

void RunConfig::validate() const {
  model.validate();
  train.validate();
  if (tau < 1) fail(ErrorCode::ConfigError, "tau must be at least 1");
  if (window_days < tau) fail(ErrorCode::ConfigError, "window_days must be at least tau");
  if (lead_days < 0) fail(ErrorCode::ConfigError, "lead_days must be non-negative");
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) fail(ErrorCode::ConfigError, "test_fraction must lie in (0, 1)");
}

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value) {
  fail(ErrorCode::ConfigError, "invalid value '" + std::string(value) + "' for key '" + std::string(key) + "'");
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
  T out{};
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) bad_value(key, value);
  return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "1" || value == "true" || value == "on") return true;
  if (value == "0" || value == "false" || value == "off") return false;
  bad_value(key, value);
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string TrainConfig::stopping_rule() const {
  return "lr divided by " + format_double(lr_decay_factor) + " after " + std::to_string(patience_lr) +
         " epochs without a validation-loss drop of at least " + format_double(min_improvement) + "; stop after " +
         std::to_string(patience_stop) + " such epochs or " + std::to_string(max_epochs) +
         " epochs; best-validation-loss parameters kept";
}

void RunConfig::set(std::string_view key, std::string_view value) {
  value = trim(value);
  if (key == "d_node") model.d_node = parse_number<int>(key, value);
  else if (key == "d_graph") model.d_graph = parse_number<int>(key, value);
  else if (key == "depth") model.depth = parse_number<int>(key, value);
  else if (key == "lambda") model.lambda = parse_number<double>(key, value);
  else if (key == "d_hidden") model.d_hidden = parse_number<int>(key, value);
  else if (key == "cs") model.ablation.code_similarity = parse_bool(key, value);
  else if (key == "cf") model.ablation.frequency = parse_bool(key, value);
  else if (key == "td") model.ablation.time_decay = parse_bool(key, value);
  else if (key == "sim_floor") model.sim_floor = parse_number<double>(key, value);
  else if (key == "tau") tau = parse_number<int>(key, value);
  else if (key == "window_days") window_days = parse_number<int>(key, value);
  else if (key == "lead_days") lead_days = parse_number<int>(key, value);
  else if (key == "test_fraction") test_fraction = parse_number<double>(key, value);
  else if (key == "vocab_scope") {
    if (value == "train") vocab_scope = VocabScope::Train;
    else if (value == "all") vocab_scope = VocabScope::All;
    else fail(ErrorCode::ConfigError, "vocab_scope must be 'train' or 'all'");
  } else if (key == "seed") train.seed = parse_number<std::uint64_t>(key, value);
  else if (key == "lr") train.lr = parse_number<double>(key, value);
  else if (key == "lr_decay_factor") train.lr_decay_factor = parse_number<double>(key, value);
  else if (key == "batch_size") train.batch_size = parse_number<int>(key, value);
  else if (key == "folds") train.folds = parse_number<int>(key, value);
  else if (key == "max_epochs") train.max_epochs = parse_number<int>(key, value);
  else if (key == "patience_lr") train.patience_lr = parse_number<int>(key, value);
  else if (key == "patience_stop") train.patience_stop = parse_number<int>(key, value);
  else if (key == "min_improvement") train.min_improvement = parse_number<double>(key, value);
  else fail(ErrorCode::ConfigError, "unknown config key '" + std::string(key) + "'");
}

std::string RunConfig::to_text() const {
  std::ostringstream out;
  out << "d_node = " << model.d_node << '\n'
      << "d_graph = " << model.d_graph << '\n'
      << "depth = " << model.depth << '\n'
      << "lambda = " << format_double(model.lambda) << '\n'
      << "d_hidden = " << model.d_hidden << '\n'
      << "cs = " << (model.ablation.code_similarity ? 1 : 0) << '\n'
      << "cf = " << (model.ablation.frequency ? 1 : 0) << '\n'
      << "td = " << (model.ablation.time_decay ? 1 : 0) << '\n'
      << "sim_floor = " << format_double(model.sim_floor) << '\n'
      << "tau = " << tau << '\n'
      << "window_days = " << window_days << '\n'
      << "lead_days = " << lead_days << '\n'
      << "test_fraction = " << format_double(test_fraction) << '\n'
      << "vocab_scope = " << (vocab_scope == VocabScope::Train ? "train" : "all") << '\n'
      << "seed = " << train.seed << '\n'
      << "lr = " << format_double(train.lr) << '\n'
      << "lr_decay_factor = " << format_double(train.lr_decay_factor) << '\n'
      << "batch_size = " << train.batch_size << '\n'
      << "folds = " << train.folds << '\n'
      << "max_epochs = " << train.max_epochs << '\n'
      << "patience_lr = " << train.patience_lr << '\n'
      << "patience_stop = " << train.patience_stop << '\n'
      << "min_improvement = " << format_double(train.min_improvement) << '\n';
  return out.str();
}

RunConfig RunConfig::parse(std::string_view text) {
  RunConfig cfg;
  std::size_t line_number = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    auto line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_number;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      fail(ErrorCode::ConfigError, "config line " + std::to_string(line_number) + ": expected key = value");
    }
    cfg.set(trim(line.substr(0, eq)), line.substr(eq + 1));
  }
  cfg.validate();
  return cfg;
}

std::vector<std::string> RunConfig::keys() {
  std::vector<std::string> out;
  std::istringstream in(RunConfig{}.to_text());
  std::string line;
  while (std::getline(in, line)) out.push_back(line.substr(0, line.find(' ')));
  return out;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoError, "cannot read config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

}  // namespace gradibd
