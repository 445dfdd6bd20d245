#include "gradibd/artifacts.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "gradibd/error.hpp"

namespace gradibd {

std::string format_exact(double value) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc()) fail(ErrorCode::FormatError, "cannot format number");
  return std::string(buf, end);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
  out << text;
  if (!out) fail(ErrorCode::IoError, "write failed for " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_scores_csv(const std::filesystem::path& path, const FoldScores& scores) {
  if (scores.patient_ids.size() != scores.scores.size() || scores.labels.size() != scores.scores.size()) {
    fail(ErrorCode::ShapeMismatch, "score columns differ in length");
  }
  std::string text = "patient_id,label,score\n";
  for (std::size_t i = 0; i < scores.scores.size(); ++i) {
    text += scores.patient_ids[i] + ',' + std::to_string(scores.labels[i]) + ',' + format_exact(scores.scores[i]) + '\n';
  }
  write_text(path, text);
}

FoldScores read_scores_csv(const std::filesystem::path& path) {
  std::istringstream in(read_text(path));
  std::string line;
  if (!std::getline(in, line) || line != "patient_id,label,score") {
    fail(ErrorCode::FormatError, path.string() + ": expected header patient_id,label,score");
  }
  FoldScores out;
  std::size_t line_number = 1;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    const auto a = line.find(',');
    const auto b = a == std::string::npos ? std::string::npos : line.find(',', a + 1);
    if (b == std::string::npos) {
      fail(ErrorCode::FormatError, path.string() + ":" + std::to_string(line_number) + ": expected 3 columns");
    }
    const std::string label = line.substr(a + 1, b - a - 1);
    if (label != "0" && label != "1") {
      fail(ErrorCode::FormatError, path.string() + ":" + std::to_string(line_number) + ": label must be 0 or 1");
    }
    double score = 0.0;
    const char* first = line.data() + b + 1;
    const char* last = line.data() + line.size();
    const auto [ptr, ec] = std::from_chars(first, last, score);
    if (ec != std::errc() || ptr != last) {
      fail(ErrorCode::FormatError, path.string() + ":" + std::to_string(line_number) + ": bad score");
    }
    out.patient_ids.push_back(line.substr(0, a));
    out.labels.push_back(label == "1" ? 1 : 0);
    out.scores.push_back(score);
  }
  return out;
}

void write_trace_csv(const std::filesystem::path& path, std::span<const EpochTrace> trace) {
  std::string text = "epoch,train_loss,val_loss,val_auroc,lr\n";
  for (const auto& t : trace) {
    text += std::to_string(t.epoch) + ',' + format_exact(t.train_loss) + ',' + format_exact(t.val_loss) + ',' +
            format_exact(t.val_auroc) + ',' + format_exact(t.lr) + '\n';
  }
  write_text(path, text);
}

}  // namespace gradibd
