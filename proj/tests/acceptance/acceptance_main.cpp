// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.
// Usage: gradibd_acceptance [--jobs N] [--report FILE] [criterion ids...]
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <streambuf>
#include <string>
#include <vector>

#include "gradibd/checks/acceptance.hpp"
#include "gradibd/parallel.hpp"

namespace {

class TeeBuf : public std::streambuf {
 public:
  TeeBuf(std::streambuf* a, std::streambuf* b) : a_(a), b_(b) {}

 protected:
  int overflow(int c) override {
    if (c == traits_type::eof()) return traits_type::not_eof(c);
    const auto ch = traits_type::to_char_type(c);
    if (a_->sputc(ch) == traits_type::eof()) return traits_type::eof();
    if (b_ && b_->sputc(ch) == traits_type::eof()) return traits_type::eof();
    return c;
  }
  int sync() override {
    const int ra = a_->pubsync();
    const int rb = b_ ? b_->pubsync() : 0;
    return ra == 0 && rb == 0 ? 0 : -1;
  }

 private:
  std::streambuf* a_;
  std::streambuf* b_;
};

}  // namespace

int main(int argc, char** argv) {
  gradibd::checks::SuiteOptions opts;
  opts.jobs = gradibd::default_jobs();
  std::vector<int> ids;
  std::string report;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--jobs" && i + 1 < argc) {
      opts.jobs = std::atoi(argv[++i]);
    } else if (arg == "--report" && i + 1 < argc) {
      report = argv[++i];
    } else {
      ids.push_back(std::atoi(arg.c_str()));
    }
  }

  std::ofstream file;
  if (!report.empty()) file.open(report);
  TeeBuf tee(std::cout.rdbuf(), file.is_open() ? file.rdbuf() : nullptr);
  std::ostream out(&tee);
  opts.log = &out;

  const auto results = gradibd::checks::run_criteria(opts, ids);
  std::size_t failed = 0;
  out << "\nsummary\n";
  for (const auto& r : results) {
    out << gradibd::checks::format_result(r) << '\n';
    if (!r.passed) ++failed;
  }
  out << (results.size() - failed) << "/" << results.size() << " criteria passed" << std::endl;
  return failed == 0 ? EXIT_SUCCESS : EXIT_FAILURE;
}
