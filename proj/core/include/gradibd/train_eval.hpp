#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "gradibd/cohort.hpp"
#include "gradibd/icd_codec.hpp"
#include "gradibd/icd_graph.hpp"
#include "gradibd/metrics.hpp"
#include "gradibd/model.hpp"
#include "gradibd/run_config.hpp"

namespace gradibd {

struct Sample {
  std::string patient_id;
  int label = 0;
  IcdGraph graph;
};

using Dataset = std::vector<Sample>;

/// Bucketizes and builds a graph for every record.
Dataset encode_records(const std::vector<CohortRecord>& records, const CodeVocab& vocab, int tau,
                       int window_days, int jobs = 1);

std::vector<int> labels_of(std::span<const Sample> samples);

// ---------------------------------------------------------------------------
// Cross-validation

struct FoldPartition {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
};

/// Class-stratified k-fold assignment. Each index lands in exactly one
/// validation fold and per-fold class counts differ by at most one.
/// Throws TooFewRecords when there are fewer than k records.
std::vector<FoldPartition> stratified_kfold(std::span<const int> labels, int k, std::uint64_t seed);

struct EpochTrace {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_auroc = 0.0;
  double lr = 0.0;
};

struct FoldResult {
  ModelParams params;        // best validation loss
  ad::AdamState optimizer;   // state when `params` were captured
  std::vector<EpochTrace> trace;
  int best_epoch = 0;
  double best_val_loss = 0.0;
  std::vector<double> val_scores;  // best params on the validation split
};

/// Mini-batch Adam on BCE with plateau learning-rate decay, early stopping
/// and best-validation checkpointing. `stream` decorrelates folds.
FoldResult train_fold(std::span<const Sample> train, std::span<const Sample> val, const ModelConfig& model_config,
                      const TrainConfig& train_config, std::size_t n_codes, std::uint64_t stream, int jobs = 1);

struct FoldMetrics {
  double auroc = 0.0;
  double ap = 0.0;
  double f1 = 0.0;
  double threshold = 0.5;
};

FoldMetrics compute_metrics(std::span<const double> scores, std::span<const int> labels, double threshold = 0.5);

struct CvResult {
  std::vector<FoldPartition> partitions;
  std::vector<FoldResult> folds;
  std::vector<FoldMetrics> val_metrics;
};

CvResult cross_validate(const Dataset& train, const ModelConfig& model_config, const TrainConfig& train_config,
                        std::size_t n_codes, int jobs = 1);

// ---------------------------------------------------------------------------
// Evaluation

struct FoldScores {
  std::vector<std::string> patient_ids;
  std::vector<int> labels;
  std::vector<double> scores;
};

struct EvalReport {
  std::vector<FoldMetrics> folds;
  MetricSummary auroc;
  MetricSummary ap;
  MetricSummary f1;
  std::string ci_method = "student-t, 95%, k-1 degrees of freedom over fold models";
  std::string training_rule;
  std::string config_fingerprint;
  std::string cohort_fingerprint;
  std::size_t n_test = 0;

  nlohmann::json to_json() const;
};

/// Stamps the config fingerprint and stopping rule.
void attach_config(EvalReport& report, const RunConfig& config);

/// Summarizes per-fold score lists; the only path from scores to a report.
EvalReport report_from_scores(std::span<const FoldScores> fold_scores, double threshold = 0.5);

struct EnsembleResult {
  EvalReport report;
  std::vector<FoldScores> scores;
};

std::vector<double> score_dataset(const Dataset& data, const ModelParams& params, const ModelConfig& config,
                                  int jobs = 1);

/// Scores the test set with every fold model independently.
EnsembleResult evaluate_ensemble(std::span<const ModelParams> fold_params, const Dataset& test,
                                 const ModelConfig& model_config, int jobs = 1);

/// Summary from the validation predictions of each CV fold.
EvalReport cv_report(const CvResult& cv, const Dataset& train);

// ---------------------------------------------------------------------------
// End-to-end runs

struct ExperimentResult {
  CodeVocab vocab;
  Split split;
  Dataset train;
  Dataset test;
  CvResult cv;
  EnsembleResult test_eval;
};

/// Lead-time truncation, stratified holdout, train-split vocabulary,
/// k-fold training and fold-ensemble test evaluation.
ExperimentResult run_experiment(const std::vector<CohortRecord>& records, const RunConfig& config, int jobs = 1);

struct AblationRow {
  Ablation ablation;
  EvalReport cv;
};

/// Cross-validation metrics for each message-passing variant.
std::vector<AblationRow> ablation_study(const std::vector<CohortRecord>& records, const RunConfig& config,
                                        std::span<const Ablation> grid, int jobs = 1);

struct SweepRow {
  int lead_days = 0;
  EvalReport report;
};

std::vector<SweepRow> sensitivity_sweep(const std::vector<CohortRecord>& records, std::span<const int> leads,
                                        const RunConfig& config, int jobs = 1);

}  // namespace gradibd
