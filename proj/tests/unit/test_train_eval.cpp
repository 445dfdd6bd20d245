#include <filesystem>
#include <set>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "gradibd/artifacts.hpp"
#include "gradibd/checkpoint.hpp"
#include "gradibd/train_eval.hpp"
#include "test_util.hpp"

namespace gradibd {
namespace {

using testing::error_code_of;

RunConfig tiny_config() {
  RunConfig c;
  c.model.d_node = 4;
  c.model.d_graph = 6;
  c.model.depth = 1;
  c.model.d_hidden = 4;
  c.train.folds = 2;
  c.train.max_epochs = 3;
  c.train.batch_size = 8;
  c.train.lr = 5e-3;
  c.train.seed = 3;
  c.test_fraction = 0.2;
  return c;
}

const std::vector<CohortRecord>& tiny_cohort() {
  static const auto records = generate_synthetic({.n_patients = 120, .case_fraction = 0.25, .seed = 5});
  return records;
}

// One shared end-to-end run; training dominates the suite's runtime.
const ExperimentResult& tiny_run() {
  static const auto result = run_experiment(tiny_cohort(), tiny_config());
  return result;
}

std::vector<int> alternating_labels(std::size_t n, std::size_t cases) {
  std::vector<int> labels(n, 0);
  for (std::size_t i = 0; i < cases; ++i) labels[i * n / cases] = 1;
  return labels;
}

TEST(StratifiedKFold, BalancedFolds) {
  const auto labels = alternating_labels(20, 10);
  const auto folds = stratified_kfold(labels, 2, 1);
  ASSERT_EQ(folds.size(), 2u);
  for (const auto& f : folds) {
    int cases = 0;
    for (auto i : f.val) cases += labels[i];
    EXPECT_EQ(cases, 5);
    EXPECT_EQ(f.val.size(), 10u);
  }
}

TEST(StratifiedKFold, LeaveOneOut) {
  const auto labels = alternating_labels(9, 3);
  const auto folds = stratified_kfold(labels, 9, 2);
  for (const auto& f : folds) {
    EXPECT_EQ(f.val.size(), 1u);
    EXPECT_EQ(f.train.size(), 8u);
  }
  EXPECT_EQ(error_code_of([&] { stratified_kfold(labels, 10, 2); }), ErrorCode::TooFewRecords);
  EXPECT_EQ(error_code_of([&] { stratified_kfold(labels, 1, 2); }), ErrorCode::ConfigError);
}

TEST(StratifiedKFold, PartitionProperty) {
  for (std::size_t n : {23u, 57u, 100u}) {
    const auto labels = alternating_labels(n, n / 4);
    for (int k : {2, 3, 5}) {
      const auto folds = stratified_kfold(labels, k, n);
      std::multiset<std::size_t> seen;
      std::vector<int> cases;
      for (const auto& f : folds) {
        seen.insert(f.val.begin(), f.val.end());
        EXPECT_EQ(f.train.size() + f.val.size(), n);
        std::set<std::size_t> train(f.train.begin(), f.train.end());
        for (auto i : f.val) EXPECT_FALSE(train.contains(i));
        int c = 0;
        for (auto i : f.val) c += labels[i];
        cases.push_back(c);
      }
      EXPECT_EQ(seen.size(), n);
      EXPECT_EQ(std::set<std::size_t>(seen.begin(), seen.end()).size(), n);
      EXPECT_LE(*std::max_element(cases.begin(), cases.end()) - *std::min_element(cases.begin(), cases.end()), 1);
    }
  }
}

TEST(StratifiedKFold, Deterministic) {
  const auto labels = alternating_labels(40, 12);
  const auto a = stratified_kfold(labels, 4, 9);
  const auto b = stratified_kfold(labels, 4, 9);
  for (std::size_t f = 0; f < a.size(); ++f) EXPECT_EQ(a[f].val, b[f].val);
}

Dataset tiny_dataset() {
  const auto vocab = build_vocab(all_codes(tiny_cohort()));
  return encode_records(tiny_cohort(), vocab, 7, kLookbackDays);
}

TEST(TrainFold, LearningRateDropsByExactFactor) {
  const auto data = tiny_dataset();
  auto c = tiny_config();
  c.train.max_epochs = 8;
  c.train.patience_lr = 1;
  c.train.patience_stop = 4;
  // No epoch after the first counts as progress.
  c.train.min_improvement = 1e9;
  const std::span<const Sample> all(data);
  const auto n_codes = build_vocab(all_codes(tiny_cohort())).size();
  const auto result = train_fold(all.subspan(0, 90), all.subspan(90), c.model, c.train, n_codes, 0);
  const auto& trace = result.trace;
  ASSERT_EQ(trace.size(), 5u);
  EXPECT_EQ(trace.front().lr, c.train.lr);
  int drops = 0;
  for (std::size_t e = 1; e < trace.size(); ++e) {
    EXPECT_EQ(trace[e].epoch, trace[e - 1].epoch + 1);
    if (trace[e].lr != trace[e - 1].lr) {
      EXPECT_EQ(trace[e].lr, trace[e - 1].lr / c.train.lr_decay_factor);
      ++drops;
    }
  }
  EXPECT_EQ(drops, 3);
  EXPECT_EQ(result.best_epoch, trace.front().epoch);
}

TEST(TrainFold, DeterministicAcrossJobs) {
  const auto data = tiny_dataset();
  const auto c = tiny_config();
  const std::span<const Sample> all(data);
  const auto n_codes = build_vocab(all_codes(tiny_cohort())).size();
  const auto a = train_fold(all.subspan(0, 90), all.subspan(90), c.model, c.train, n_codes, 1, 1);
  const auto b = train_fold(all.subspan(0, 90), all.subspan(90), c.model, c.train, n_codes, 1, 3);
  EXPECT_EQ(a.params, b.params);
  EXPECT_EQ(a.val_scores, b.val_scores);
  const auto other_stream = train_fold(all.subspan(0, 90), all.subspan(90), c.model, c.train, n_codes, 2, 1);
  EXPECT_FALSE(a.params == other_stream.params);
}

TEST(RunExperiment, ShapesOfResults) {
  const auto& run = tiny_run();
  const auto c = tiny_config();
  EXPECT_EQ(run.cv.folds.size(), 2u);
  EXPECT_EQ(run.test.size(), run.split.test.size());
  EXPECT_EQ(run.test_eval.scores.size(), 2u);
  EXPECT_EQ(run.test_eval.report.n_test, run.test.size());
  EXPECT_EQ(run.test_eval.report.folds.size(), 2u);
  EXPECT_EQ(run.test_eval.report.config_fingerprint.size(), 64u);
  EXPECT_GE(run.test_eval.report.auroc.ci_lo, 0.0);
  EXPECT_LE(run.test_eval.report.auroc.ci_hi, 1.0);
  for (const auto& fold : run.cv.folds) EXPECT_LE(fold.trace.size(), static_cast<std::size_t>(c.train.max_epochs));
  const auto keys = run.test_eval.report.to_json();
  EXPECT_TRUE(keys.contains("auroc"));
  EXPECT_TRUE(keys.contains("cohort_fingerprint"));
}

TEST(RunExperiment, ReportRecomputesFromScoreFiles) {
  const auto& run = tiny_run();
  const auto dir = std::filesystem::temp_directory_path() / "gradibd_scores_test";
  std::filesystem::create_directories(dir);
  std::vector<FoldScores> reread;
  for (std::size_t f = 0; f < run.test_eval.scores.size(); ++f) {
    const auto path = dir / ("fold_" + std::to_string(f) + ".csv");
    write_scores_csv(path, run.test_eval.scores[f]);
    reread.push_back(read_scores_csv(path));
    EXPECT_EQ(reread.back().scores, run.test_eval.scores[f].scores);
  }
  std::filesystem::remove_all(dir);
  auto report = report_from_scores(reread);
  attach_config(report, tiny_config());
  report.cohort_fingerprint = run.test_eval.report.cohort_fingerprint;
  EXPECT_EQ(report.to_json().dump(), run.test_eval.report.to_json().dump());
}

TEST(SensitivitySweep, SingleLeadMatchesStandaloneRun) {
  const std::vector<int> leads = {30};
  const auto rows = sensitivity_sweep(tiny_cohort(), leads, tiny_config());
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].lead_days, 30);
  EXPECT_EQ(rows[0].report.to_json().dump(), tiny_run().test_eval.report.to_json().dump());
}

TEST(EvaluateEnsemble, IdenticalModelsGiveZeroWidth) {
  const auto& run = tiny_run();
  const std::vector<ModelParams> same = {run.cv.folds[0].params, run.cv.folds[0].params};
  const auto c = tiny_config();
  const auto result = evaluate_ensemble(same, run.test, c.model);
  EXPECT_EQ(result.report.auroc.ci_lo, result.report.auroc.ci_hi);
  EXPECT_EQ(result.scores[0].scores, result.scores[1].scores);
  const std::vector<ModelParams> one = {run.cv.folds[0].params};
  EXPECT_EQ(error_code_of([&] { evaluate_ensemble(one, run.test, c.model); }), ErrorCode::ConfigError);
}

TEST(ReportFromScores, MeanOfTwoFolds) {
  FoldScores a{{"a", "b", "c", "d"}, {0, 0, 1, 1}, {0.1, 0.4, 0.35, 0.8}};  // AUROC 0.75
  FoldScores b{{"a", "b", "c", "d"}, {0, 1, 0, 1}, {0.1, 0.4, 0.35, 0.8}};  // AUROC 1.0
  const std::vector<FoldScores> folds = {a, b};
  const auto report = report_from_scores(folds);
  EXPECT_DOUBLE_EQ(report.auroc.mean, 0.875);
  EXPECT_EQ(report.auroc.ci_lo, 0.0);
  EXPECT_EQ(report.auroc.ci_hi, 1.0);
  EXPECT_EQ(report.n_test, 4u);
}

TEST(Checkpoint, RoundTripIsExact) {
  const auto& run = tiny_run();
  const auto ckpts = fold_checkpoints(run.cv, tiny_config(), run.vocab.size());
  ASSERT_EQ(ckpts.size(), 2u);
  for (const auto& ckpt : ckpts) {
    const auto bytes = serialize_checkpoint(ckpt);
    const auto back = deserialize_checkpoint(bytes);
    EXPECT_EQ(back.params, ckpt.params);
    EXPECT_EQ(back.config.to_text(), ckpt.config.to_text());
    EXPECT_EQ(back.fold, ckpt.fold);
    EXPECT_EQ(back.optimizer.step, ckpt.optimizer.step);
    EXPECT_EQ(serialize_checkpoint(back), bytes);
  }
}

TEST(Checkpoint, RejectsCorruptBytes) {
  const auto& run = tiny_run();
  const auto bytes = serialize_checkpoint(fold_checkpoints(run.cv, tiny_config(), run.vocab.size())[0]);
  EXPECT_EQ(error_code_of([&] { deserialize_checkpoint("NOTACKPT" + bytes.substr(8)); }), ErrorCode::FormatError);
  EXPECT_EQ(error_code_of([&] { deserialize_checkpoint(bytes + "x"); }), ErrorCode::FormatError);
  EXPECT_EQ(error_code_of([&] { deserialize_checkpoint(bytes.substr(0, bytes.size() / 2)); }), ErrorCode::FormatError);
}

TEST(RunConfig, TextRoundTrip) {
  auto c = tiny_config();
  c.model.lambda = 0.1 + 0.2;
  c.model.ablation.frequency = false;
  const auto text = c.to_text();
  EXPECT_EQ(RunConfig::parse(text).to_text(), text);
  EXPECT_EQ(RunConfig::keys().size(), static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')));
}

TEST(RunConfig, VocabScope) {
  auto c = tiny_config();
  EXPECT_EQ(c.vocab_scope, VocabScope::Train);
  c.set("vocab_scope", "all");
  EXPECT_EQ(c.vocab_scope, VocabScope::All);
  EXPECT_EQ(RunConfig::parse(c.to_text()).vocab_scope, VocabScope::All);
  EXPECT_EQ(error_code_of([&] { c.set("vocab_scope", "test"); }), ErrorCode::ConfigError);
}

TEST(RunExperiment, VocabularyComesFromTrainingSplit) {
  const auto& run = tiny_run();
  EXPECT_EQ(run.vocab, build_vocab(all_codes(run.split.train)));
  EXPECT_EQ(run.test_eval.report.training_rule, tiny_config().train.stopping_rule());
}

TEST(RunConfig, RejectsBadInput) {
  RunConfig c;
  EXPECT_EQ(error_code_of([&] { c.set("no_such_key", "1"); }), ErrorCode::ConfigError);
  EXPECT_EQ(error_code_of([&] { c.set("folds", "two"); }), ErrorCode::ConfigError);
  EXPECT_EQ(error_code_of([] { RunConfig::parse("folds = 1\n"); }), ErrorCode::ConfigError);
}

TEST(Artifacts, FormatExactRoundTrips) {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, 0.9999999999999999}) {
    EXPECT_EQ(std::stod(format_exact(v)), v);
  }
}

}  // namespace
}  // namespace gradibd
