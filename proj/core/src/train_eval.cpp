#include "gradibd/train_eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <nlohmann/json.hpp>

#include "gradibd/bucketizer.hpp"
#include "gradibd/error.hpp"
#include "gradibd/fingerprint.hpp"
#include "gradibd/parallel.hpp"
#include "gradibd/random.hpp"

namespace gradibd {

using ad::Matrix;

Dataset encode_records(const std::vector<CohortRecord>& records, const CodeVocab& vocab, int tau, int window_days,
                       int jobs) {
  Dataset out(records.size());
  parallel_for(records.size(), jobs, [&](std::size_t i) {
    const auto& r = records[i];
    out[i] = Sample{r.patient_id, r.label, build_graph(bucketize(r, vocab, tau, window_days))};
  });
  return out;
}

std::vector<int> labels_of(std::span<const Sample> samples) {
  std::vector<int> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.label);
  return out;
}

std::vector<FoldPartition> stratified_kfold(std::span<const int> labels, int k, std::uint64_t seed) {
  if (k < 2) fail(ErrorCode::ConfigError, "k-fold needs k >= 2");
  std::vector<std::size_t> by_class[2];
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i] == 1 ? 1 : 0].push_back(i);
  const auto uk = static_cast<std::size_t>(k);
  if (labels.size() < uk) {
    fail(ErrorCode::TooFewRecords, "k-fold needs at least k=" + std::to_string(k) + " records");
  }

  auto rng = make_rng(seed, {0x6b666f6c64ULL});
  std::vector<std::size_t> fold_of(labels.size());
  // The second class continues the round robin where the first stopped, so
  // total fold sizes also differ by at most one.
  std::size_t offset = 0;
  for (auto& members : by_class) {
    shuffle_in_place(members, rng);
    for (std::size_t p = 0; p < members.size(); ++p) fold_of[members[p]] = (offset + p) % uk;
    offset = (offset + members.size()) % uk;
  }

  std::vector<FoldPartition> folds(uk);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    for (std::size_t f = 0; f < uk; ++f) (f == fold_of[i] ? folds[f].val : folds[f].train).push_back(i);
  }
  return folds;
}

namespace {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t tag) {
  auto rng = make_rng(seed, {stream, tag});
  return rng();
}

double bce_from_logit(double logit, int label) {
  const double y = label == 1 ? 1.0 : 0.0;
  return std::max(logit, 0.0) - logit * y + std::log1p(std::exp(-std::abs(logit)));
}

struct SplitEval {
  double mean_loss = 0.0;
  std::vector<double> scores;
};

SplitEval evaluate_split(std::span<const Sample> samples, const ModelParams& params, const ModelConfig& config,
                         int jobs) {
  std::vector<double> logits(samples.size());
  parallel_for(samples.size(), jobs, [&](std::size_t i) {
    ad::Tape tape;
    logits[i] = forward(tape, samples[i].graph, params, config).scalar();
  });
  SplitEval out;
  out.scores.reserve(samples.size());
  double total = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    total += bce_from_logit(logits[i], samples[i].label);
    out.scores.push_back(ad::sigmoid(logits[i]));
  }
  out.mean_loss = samples.empty() ? 0.0 : total / static_cast<double>(samples.size());
  return out;
}

double safe_auroc(std::span<const double> scores, std::span<const int> labels) {
  const auto pos = std::count(labels.begin(), labels.end(), 1);
  if (pos == 0 || pos == static_cast<std::ptrdiff_t>(labels.size())) return std::numeric_limits<double>::quiet_NaN();
  return auroc(scores, labels);
}

}  // namespace

FoldResult train_fold(std::span<const Sample> train, std::span<const Sample> val, const ModelConfig& model_config,
                      const TrainConfig& tc, std::size_t n_codes, std::uint64_t stream, int jobs) {
  model_config.validate();
  tc.validate();
  if (train.empty() || val.empty()) fail(ErrorCode::TooFewRecords, "training and validation splits must be non-empty");

  FoldResult result;
  ModelParams params = ModelParams::init(model_config, n_codes, derive_seed(tc.seed, stream, 0x696e6974ULL));
  auto refs = params.refs();
  ad::AdamState state;
  state.lr = tc.lr;

  const std::vector<int> val_labels = labels_of(val);
  double best = std::numeric_limits<double>::infinity();
  int since_best = 0;
  int since_lr_drop = 0;
  const auto batch = static_cast<std::size_t>(tc.batch_size);

  std::vector<std::size_t> order(train.size());
  std::vector<LossGradient> members(batch);
  for (int epoch = 1; epoch <= tc.max_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    auto rng = make_rng(tc.seed, {stream, static_cast<std::uint64_t>(epoch), 0x65706f6368ULL});
    shuffle_in_place(order, rng);

    const double epoch_lr = state.lr;
    double train_loss = 0.0;
    for (std::size_t start = 0, b = 0; start < order.size(); start += batch, ++b) {
      const std::size_t m = std::min(batch, order.size() - start);
      parallel_for(m, jobs, [&](std::size_t i) {
        const auto& s = train[order[start + i]];
        members[i] = loss_and_gradient(s.graph, s.label, params, model_config);
      });
      double batch_loss = 0.0;
      std::vector<Matrix> grads = std::move(members[0].grads);
      batch_loss += members[0].loss;
      for (std::size_t i = 1; i < m; ++i) {
        batch_loss += members[i].loss;
        for (std::size_t p = 0; p < grads.size(); ++p) grads[p] += members[i].grads[p];
      }
      if (!std::isfinite(batch_loss)) {
        fail(ErrorCode::NonFiniteLoss, "non-finite loss in epoch " + std::to_string(epoch) + ", batch " +
                                           std::to_string(b));
      }
      const double inv = 1.0 / static_cast<double>(m);
      for (auto& g : grads) g *= inv;
      ad::adam_step(refs, grads, state);
      train_loss += batch_loss;
    }

    auto val_eval = evaluate_split(val, params, model_config, jobs);
    result.trace.push_back({epoch, train_loss / static_cast<double>(train.size()), val_eval.mean_loss,
                            safe_auroc(val_eval.scores, val_labels), epoch_lr});

    if (val_eval.mean_loss < best - tc.min_improvement) {
      best = val_eval.mean_loss;
      result.params = params;
      result.optimizer = state;
      result.best_epoch = epoch;
      result.best_val_loss = best;
      result.val_scores = std::move(val_eval.scores);
      since_best = 0;
      since_lr_drop = 0;
    } else {
      ++since_best;
      ++since_lr_drop;
      if (since_best >= tc.patience_stop) break;
      if (since_lr_drop >= tc.patience_lr) {
        state.lr /= tc.lr_decay_factor;
        since_lr_drop = 0;
      }
    }
  }
  if (result.best_epoch == 0) {
    // Validation loss never improved on +inf: only possible with non-finite losses.
    fail(ErrorCode::NonFiniteLoss, "validation loss was never finite");
  }
  return result;
}

FoldMetrics compute_metrics(std::span<const double> scores, std::span<const int> labels, double threshold) {
  return {auroc(scores, labels), average_precision(scores, labels), f1_at_threshold(scores, labels, threshold),
          threshold};
}

CvResult cross_validate(const Dataset& train, const ModelConfig& model_config, const TrainConfig& tc,
                        std::size_t n_codes, int jobs) {
  const auto labels = labels_of(train);
  CvResult cv;
  cv.partitions = stratified_kfold(labels, tc.folds, tc.seed);
  const std::size_t k = cv.partitions.size();
  cv.folds.resize(k);

  const int outer = std::min<int>(std::max(1, jobs), static_cast<int>(k));
  const int inner = std::max(1, jobs / outer);
  parallel_for(k, outer, [&](std::size_t f) {
    Dataset fold_train, fold_val;
    for (auto i : cv.partitions[f].train) fold_train.push_back(train[i]);
    for (auto i : cv.partitions[f].val) fold_val.push_back(train[i]);
    cv.folds[f] = train_fold(fold_train, fold_val, model_config, tc, n_codes, f, inner);
  });

  for (std::size_t f = 0; f < k; ++f) {
    std::vector<int> val_labels;
    for (auto i : cv.partitions[f].val) val_labels.push_back(labels[i]);
    cv.val_metrics.push_back(compute_metrics(cv.folds[f].val_scores, val_labels));
  }
  return cv;
}

// ---------------------------------------------------------------------------
// Evaluation

nlohmann::json EvalReport::to_json() const {
  auto summary = [](const MetricSummary& m) {
    return nlohmann::ordered_json{{"mean", m.mean}, {"ci_lo", m.ci_lo}, {"ci_hi", m.ci_hi}};
  };
  nlohmann::ordered_json j;
  auto per_fold = nlohmann::ordered_json::array();
  for (std::size_t f = 0; f < folds.size(); ++f) {
    per_fold.push_back({{"fold", f},
                        {"auroc", folds[f].auroc},
                        {"ap", folds[f].ap},
                        {"f1", folds[f].f1},
                        {"threshold", folds[f].threshold}});
  }
  j["folds"] = std::move(per_fold);
  j["auroc"] = summary(auroc);
  j["ap"] = summary(ap);
  j["f1"] = summary(f1);
  j["ci_method"] = ci_method;
  j["n_test"] = n_test;
  j["training_rule"] = training_rule;
  j["config_fingerprint"] = config_fingerprint;
  j["cohort_fingerprint"] = cohort_fingerprint;
  return nlohmann::json::parse(j.dump());
}

namespace {

MetricSummary clamp_unit(MetricSummary m) {
  m.ci_lo = std::clamp(m.ci_lo, 0.0, 1.0);
  m.ci_hi = std::clamp(m.ci_hi, 0.0, 1.0);
  return m;
}

}  // namespace

void attach_config(EvalReport& report, const RunConfig& config) {
  report.training_rule = config.train.stopping_rule();
  report.config_fingerprint = sha256_hex(config.to_text());
}

EvalReport report_from_scores(std::span<const FoldScores> fold_scores, double threshold) {
  if (fold_scores.empty()) fail(ErrorCode::EmptyInput, "report needs at least one fold");
  EvalReport report;
  std::vector<double> au, ap, f1;
  for (const auto& fs : fold_scores) {
    if (fs.scores.empty()) fail(ErrorCode::EmptyTestSet, "no scored test records");
    report.folds.push_back(compute_metrics(fs.scores, fs.labels, threshold));
    au.push_back(report.folds.back().auroc);
    ap.push_back(report.folds.back().ap);
    f1.push_back(report.folds.back().f1);
  }
  report.auroc = clamp_unit(t_interval(au));
  report.ap = clamp_unit(t_interval(ap));
  report.f1 = clamp_unit(t_interval(f1));
  report.n_test = fold_scores.front().scores.size();
  return report;
}

std::vector<double> score_dataset(const Dataset& data, const ModelParams& params, const ModelConfig& config,
                                  int jobs) {
  return evaluate_split(data, params, config, jobs).scores;
}

EnsembleResult evaluate_ensemble(std::span<const ModelParams> fold_params, const Dataset& test,
                                 const ModelConfig& model_config, int jobs) {
  if (test.empty()) fail(ErrorCode::EmptyTestSet, "test set is empty");
  if (fold_params.size() < 2) fail(ErrorCode::ConfigError, "ensemble evaluation needs at least two fold models");
  EnsembleResult out;
  const auto labels = labels_of(test);
  std::vector<std::string> ids;
  for (const auto& s : test) ids.push_back(s.patient_id);
  for (const auto& params : fold_params) {
    out.scores.push_back({ids, labels, score_dataset(test, params, model_config, jobs)});
  }
  out.report = report_from_scores(out.scores);
  return out;
}

EvalReport cv_report(const CvResult& cv, const Dataset& train) {
  std::vector<FoldScores> per_fold;
  for (std::size_t f = 0; f < cv.folds.size(); ++f) {
    FoldScores fs;
    for (auto i : cv.partitions[f].val) {
      fs.patient_ids.push_back(train[i].patient_id);
      fs.labels.push_back(train[i].label);
    }
    fs.scores = cv.folds[f].val_scores;
    per_fold.push_back(std::move(fs));
  }
  auto report = report_from_scores(per_fold);
  report.ci_method = "student-t, 95%, k-1 degrees of freedom over cross-validation folds";
  report.n_test = train.size();
  return report;
}

// ---------------------------------------------------------------------------
// End-to-end runs

namespace {

struct Prepared {
  CodeVocab vocab;
  Split split;
  Dataset train;
  Dataset test;
};

Prepared prepare(const std::vector<CohortRecord>& records, const RunConfig& config, int jobs) {
  config.validate();
  std::vector<CohortRecord> truncated;
  truncated.reserve(records.size());
  for (const auto& r : records) truncated.push_back(apply_prediction_interval(r, config.lead_days));
  Prepared p;
  p.split = stratified_split(truncated, config.test_fraction, config.train.seed);
  p.vocab = build_vocab(all_codes(config.vocab_scope == VocabScope::All ? truncated : p.split.train));
  p.train = encode_records(p.split.train, p.vocab, config.tau, config.window_days, jobs);
  p.test = encode_records(p.split.test, p.vocab, config.tau, config.window_days, jobs);
  return p;
}

}  // namespace

ExperimentResult run_experiment(const std::vector<CohortRecord>& records, const RunConfig& config, int jobs) {
  auto prepared = prepare(records, config, jobs);
  ExperimentResult out;
  out.vocab = std::move(prepared.vocab);
  out.split = std::move(prepared.split);
  out.train = std::move(prepared.train);
  out.test = std::move(prepared.test);
  out.cv = cross_validate(out.train, config.model, config.train, out.vocab.size(), jobs);
  std::vector<ModelParams> fold_params;
  for (const auto& f : out.cv.folds) fold_params.push_back(f.params);
  out.test_eval = evaluate_ensemble(fold_params, out.test, config.model, jobs);
  attach_config(out.test_eval.report, config);
  out.test_eval.report.cohort_fingerprint = cohort_fingerprint(out.split.test);
  return out;
}

std::vector<AblationRow> ablation_study(const std::vector<CohortRecord>& records, const RunConfig& config,
                                        std::span<const Ablation> grid, int jobs) {
  const auto prepared = prepare(records, config, jobs);
  const auto cohort_fp = cohort_fingerprint(prepared.split.train);
  std::vector<AblationRow> rows;
  for (const auto& ablation : grid) {
    RunConfig variant = config;
    variant.model.ablation = ablation;
    const auto cv = cross_validate(prepared.train, variant.model, variant.train, prepared.vocab.size(), jobs);
    AblationRow row{ablation, cv_report(cv, prepared.train)};
    attach_config(row.cv, variant);
    row.cv.cohort_fingerprint = cohort_fp;
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<SweepRow> sensitivity_sweep(const std::vector<CohortRecord>& records, std::span<const int> leads,
                                        const RunConfig& config, int jobs) {
  if (leads.empty()) fail(ErrorCode::ConfigError, "sweep needs at least one lead time");
  std::vector<SweepRow> rows;
  for (int lead : leads) {
    RunConfig variant = config;
    variant.lead_days = lead;
    rows.push_back({lead, run_experiment(records, variant, jobs).test_eval.report});
  }
  return rows;
}

}  // namespace gradibd
