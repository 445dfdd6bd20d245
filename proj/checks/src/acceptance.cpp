#include "gradibd/checks/acceptance.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ostream>

#include <nlohmann/json.hpp>

#include "gradibd/checkpoint.hpp"
#include "gradibd/checks/oracles.hpp"
#include "gradibd/metrics.hpp"
#include "gradibd/model.hpp"
#include "gradibd/train_eval.hpp"

namespace gradibd::checks {

namespace {

std::string fmt(const char* format, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, format, a, b, c, d);
  return buf;
}

void log_line(const SuiteOptions& opts, const std::string& line) {
  if (opts.log) *opts.log << line << '\n' << std::flush;
}

int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

double uniform_real(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

ModelConfig random_small_config(Rng& rng) {
  ModelConfig c;
  c.d_node = uniform_int(rng, 2, 5);
  c.d_graph = uniform_int(rng, 2, 6);
  c.depth = uniform_int(rng, 1, 3);
  c.d_hidden = uniform_int(rng, 2, 5);
  c.lambda = uniform_real(rng, 0.0, 1.0);
  return c;
}

/// Init plus a non-trivial layer-norm affine so its gradients are exercised.
ModelParams random_params(const ModelConfig& config, std::size_t n_codes, Rng& rng) {
  auto params = ModelParams::init(config, n_codes, rng());
  for (Eigen::Index k = 0; k < params.norm_gamma.cols(); ++k) {
    params.norm_gamma(0, k) = uniform_real(rng, 0.5, 1.5);
    params.norm_beta(0, k) = uniform_real(rng, -0.3, 0.3);
  }
  return params;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

}  // namespace

SynthConfig strong_signal_cohort() { return SynthConfig{}; }

RunConfig learnability_config() {
  RunConfig c;
  c.train.folds = 3;
  c.train.max_epochs = 6;
  c.train.patience_lr = 2;
  c.train.patience_stop = 3;
  c.train.seed = 7;
  return c;
}

RunConfig sweep_config(std::uint64_t seed) {
  RunConfig c;
  c.model.d_node = 16;
  c.model.d_graph = 32;
  c.model.d_hidden = 16;
  c.train.folds = 3;
  c.train.max_epochs = 5;
  c.train.patience_lr = 2;
  c.train.patience_stop = 3;
  c.train.seed = seed;
  return c;
}

CriterionResult check_gradients(const SuiteOptions&) {
  CriterionResult r{1, "gradient correctness vs central differences", false, {}, 0.0};
  auto rng = make_rng(101, {1});
  constexpr std::size_t kCodes = 8;
  double worst = 0.0;
  std::string worst_tensor;
  std::size_t checked = 0;
  for (int g = 0; g < 50; ++g) {
    const auto n_buckets = uniform_int(rng, 1, 10);
    const auto matrix = random_bucket_matrix(rng, kCodes, n_buckets, 10, 4);
    const auto graph = build_graph(matrix);
    const auto config = random_small_config(rng);
    const auto params = random_params(config, kCodes, rng);
    const auto res = finite_difference_check(graph, uniform_int(rng, 0, 1), params, config);
    checked += res.n_checked;
    if (res.max_rel_error > worst) {
      worst = res.max_rel_error;
      worst_tensor = res.worst_tensor;
    }
  }
  r.passed = worst < 1e-4;
  r.detail = fmt("max relative error %.3g over %.0f parameter entries", worst, static_cast<double>(checked)) +
             (worst_tensor.empty() ? "" : " (worst: " + worst_tensor + ")");
  return r;
}

CriterionResult check_normalization(const SuiteOptions&) {
  CriterionResult r{2, "incoming weights sum to one", false, {}, 0.0};
  auto rng = make_rng(102, {2});
  constexpr std::size_t kCodes = 20;
  const auto grid = ablation_grid();
  double worst = 0.0;
  std::size_t rows = 0;
  bool shapes_ok = true;
  for (int g = 0; g < 1000; ++g) {
    const auto graph = build_graph(random_bucket_matrix(rng, kCodes, 20, 30, 8));
    ModelConfig base;
    base.d_node = uniform_int(rng, 2, 8);
    const auto params = ModelParams::init(base, kCodes, rng());
    for (const auto& ablation : grid) {
      ModelConfig config = base;
      config.ablation = ablation;
      const auto weights = incoming_weights(graph, params, config);
      if (weights.size() + 1 != std::max<std::size_t>(graph.spans().size(), 1)) shapes_ok = false;
      for (std::size_t i = 0; i < weights.size(); ++i) {
        const auto& w = weights[i];
        if (static_cast<std::size_t>(w.rows()) != graph.spans()[i + 1].size() ||
            static_cast<std::size_t>(w.cols()) != graph.spans()[i].size()) {
          shapes_ok = false;
        }
        for (Eigen::Index t = 0; t < w.rows(); ++t) {
          worst = std::max(worst, std::abs(w.row(t).sum() - 1.0));
          if ((w.row(t).array() < 0.0).any()) shapes_ok = false;
          ++rows;
        }
      }
    }
  }
  r.passed = shapes_ok && worst <= 1e-12;
  r.detail = fmt("max |sum - 1| = %.3g over %.0f target nodes, 6 ablations", worst, static_cast<double>(rows)) +
             (shapes_ok ? "" : "; shape or sign violation");
  return r;
}

CriterionResult check_uniform_mean(const SuiteOptions&) {
  CriterionResult r{3, "uniform weights equal mean aggregation", false, {}, 0.0};
  auto rng = make_rng(103, {3});
  constexpr std::size_t kCodes = 12;
  double worst = 0.0;
  for (int g = 0; g < 100; ++g) {
    const auto graph = build_graph(random_bucket_matrix(rng, kCodes, 16, 20, 6));
    auto config = random_small_config(rng);
    config.ablation = {false, false, g % 2 == 0};
    const auto params = random_params(config, kCodes, rng);
    ad::Tape tape;
    const double logit = forward(tape, graph, params, config).scalar();
    worst = std::max(worst, std::abs(logit - mean_aggregator_logit(graph, params, config)));
  }
  r.passed = worst <= 1e-12;
  r.detail = fmt("max |logit - mean-aggregator logit| = %.3g on 100 graphs", worst);
  return r;
}

CriterionResult check_graph_counts(const SuiteOptions&) {
  CriterionResult r{4, "graph construction vs dense recount", false, {}, 0.0};
  auto rng = make_rng(104, {4});
  std::size_t mismatches = 0;
  std::size_t total_edges = 0;
  for (int g = 0; g < 1000; ++g) {
    const auto n_codes = static_cast<std::size_t>(uniform_int(rng, 1, 30));
    const auto n_buckets = uniform_int(rng, 1, 40);
    const auto max_nonempty = static_cast<std::size_t>(uniform_int(rng, 1, n_buckets));
    const auto matrix = random_bucket_matrix(rng, n_codes, n_buckets, static_cast<std::size_t>(uniform_int(rng, 0, 60)),
                                             max_nonempty);
    const auto graph = build_graph(matrix);
    const auto dense = dense_graph_counts(matrix);
    const bool ok = graph.n_nodes() == dense.n_nodes && nnz(matrix) == dense.n_nodes &&
                    graph.n_edges() == dense.n_edges && graph.edges().size() == dense.n_edges &&
                    graph_stats(graph).n_edges == dense.n_edges;
    if (!ok) ++mismatches;
    total_edges += dense.n_edges;
  }
  r.passed = mismatches == 0;
  r.detail = fmt("%.0f mismatches in 1000 matrices (%.0f edges total)", static_cast<double>(mismatches),
                 static_cast<double>(total_edges));
  return r;
}

CriterionResult check_metric_oracles(const SuiteOptions&) {
  CriterionResult r{5, "AUROC and AP vs brute force", false, {}, 0.0};
  auto rng = make_rng(105, {5});
  double worst_auroc = 0.0, worst_ap = 0.0;
  for (int v = 0; v < 200; ++v) {
    const auto n = static_cast<std::size_t>(uniform_int(rng, 2, 1000));
    const double prevalence = uniform_real(rng, 0.05, 0.95);
    const bool tied = v % 2 == 1;
    std::vector<double> scores(n);
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
      labels[i] = uniform_real(rng, 0.0, 1.0) < prevalence ? 1 : 0;
      scores[i] = uniform_real(rng, 0.0, 1.0);
      if (tied) scores[i] = std::round(scores[i] * 10.0) / 10.0;
    }
    labels[0] = 1;
    labels[1] = 0;
    worst_auroc = std::max(worst_auroc, std::abs(auroc(scores, labels) - pairwise_auroc(scores, labels)));
    worst_ap = std::max(worst_ap, std::abs(average_precision(scores, labels) - rank_walk_ap(scores, labels)));
  }
  r.passed = worst_auroc <= 1e-12 && worst_ap <= 1e-12;
  r.detail = fmt("max |AUROC diff| = %.3g, max |AP diff| = %.3g on 200 vectors", worst_auroc, worst_ap);
  return r;
}

CriterionResult check_learnability(const SuiteOptions& opts) {
  CriterionResult r{6, "learnability and chance level", false, {}, 0.0};
  const auto strong = generate_synthetic(strong_signal_cohort());
  const auto strong_run = run_experiment(strong, learnability_config(), opts.jobs);
  const auto& s = strong_run.test_eval.report.auroc;
  log_line(opts, fmt("  strong cohort: test AUROC %.4f [%.4f, %.4f], AP %.4f", s.mean, s.ci_lo, s.ci_hi,
                     strong_run.test_eval.report.ap.mean));

  // Half the null cohort is held out: chance-level AUROC on 200 test patients
  // has a standard error near 0.05, which is as wide as the target band.
  auto null_config = learnability_config();
  null_config.test_fraction = 0.5;
  const auto null_run = run_experiment(generate_synthetic(null_signal(strong_signal_cohort())), null_config, opts.jobs);
  const auto& z = null_run.test_eval.report.auroc;
  log_line(opts, fmt("  null cohort: test AUROC %.4f [%.4f, %.4f] on %.0f patients", z.mean, z.ci_lo, z.ci_hi,
                     static_cast<double>(null_run.test.size())));

  r.passed = s.mean >= 0.85 && z.mean >= 0.45 && z.mean <= 0.55;
  r.detail = fmt("strong AUROC %.4f (>= 0.85), null AUROC %.4f (in [0.45, 0.55])", s.mean, z.mean);
  return r;
}

CriterionResult check_ablation_direction(const SuiteOptions& opts) {
  CriterionResult r{7, "ablation direction", false, {}, 0.0};
  const auto records = generate_synthetic(strong_signal_cohort());
  const auto grid = ablation_grid();
  std::vector<std::vector<double>> au(grid.size()), ap(grid.size()), f1(grid.size());
  for (int seed = 0; seed < kSweepSeeds; ++seed) {
    const auto rows = ablation_study(records, sweep_config(static_cast<std::uint64_t>(seed)), grid, opts.jobs);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      au[i].push_back(rows[i].cv.auroc.mean);
      ap[i].push_back(rows[i].cv.ap.mean);
      f1[i].push_back(rows[i].cv.f1.mean);
    }
  }
  log_line(opts, "  variant    AUROC   AP      F1   (mean of 5 seeds)");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "  %-9s  %.4f  %.4f  %.4f", grid[i].label().c_str(), mean_of(au[i]),
                  mean_of(ap[i]), mean_of(f1[i]));
    log_line(opts, buf);
  }
  const double full = mean_of(au.front());
  const double uniform = mean_of(au.back());
  r.passed = full >= uniform - 0.01;
  r.detail = fmt("CS+CF+TD %.4f vs Uniform %.4f (needs >= Uniform - 0.01)", full, uniform);
  return r;
}

CriterionResult check_sensitivity_shape(const SuiteOptions& opts) {
  CriterionResult r{8, "sensitivity to lead time", false, {}, 0.0};
  const auto records = generate_synthetic(strong_signal_cohort());
  const std::vector<int> leads = {30, 60, 90, 120, 150, 180};
  std::vector<std::vector<double>> au(leads.size());
  for (int seed = 0; seed < kSweepSeeds; ++seed) {
    const auto rows = sensitivity_sweep(records, leads, sweep_config(static_cast<std::uint64_t>(seed)), opts.jobs);
    for (std::size_t i = 0; i < rows.size(); ++i) au[i].push_back(rows[i].report.auroc.mean);
  }
  double worst_rise = -1.0;
  std::string curve;
  for (std::size_t i = 0; i < leads.size(); ++i) {
    const double m = mean_of(au[i]);
    log_line(opts, fmt("  lead %3.0f days: mean test AUROC %.4f", leads[i], m));
    curve += (i ? " " : "") + fmt("%.3f", m);
    if (i > 0) worst_rise = std::max(worst_rise, m - mean_of(au[i - 1]));
  }
  r.passed = worst_rise <= 0.03;
  r.detail = "AUROC by lead " + curve + fmt("; largest rise %.4f (<= 0.03)", worst_rise);
  return r;
}

CriterionResult check_complexity(const SuiteOptions& opts) {
  CriterionResult r{9, "parameter and FLOP accounting", false, {}, 0.0};
  auto rng = make_rng(109, {9});
  bool ok = true;
  {
    ModelConfig tiny;
    tiny.d_node = 2;
    tiny.d_graph = 2;
    tiny.depth = 1;
    tiny.d_hidden = 2;
    ok = ok && count_params(tiny, 2) == 23;
  }
  for (int i = 0; i < 20; ++i) {
    ModelConfig c;
    c.d_node = uniform_int(rng, 1, 96);
    c.d_graph = uniform_int(rng, 1, 300);
    c.depth = uniform_int(rng, 1, 5);
    c.d_hidden = uniform_int(rng, 2, 160);
    const auto n = static_cast<std::size_t>(uniform_int(rng, 1, 3000));
    const std::uint64_t dn = static_cast<std::uint64_t>(c.d_node), dg = static_cast<std::uint64_t>(c.d_graph),
                        dh = static_cast<std::uint64_t>(c.d_hidden), s = static_cast<std::uint64_t>(c.depth);
    const std::uint64_t closed = n * dn + (dn * dg + dg) + (s - 1) * (dg * dg + dg) + (dg * dh + dh + 2 * dh + dh + 1);
    ok = ok && count_params(c, n) == closed && allocated_param_count(c, n) == closed;

    GraphStats stats;
    stats.n_nodes = static_cast<std::size_t>(uniform_int(rng, 2, 200));
    stats.n_buckets = static_cast<std::size_t>(uniform_int(rng, 2, 50));
    stats.n_edges = static_cast<std::size_t>(uniform_int(rng, 1, 5000));
    stats.n_message_targets = stats.n_nodes / 2;
    stats.max_in_degree = stats.n_nodes / 2;
    auto doubled = stats;
    doubled.n_edges *= 2;
    ok = ok && count_flops(c, doubled).aggregation == 2 * count_flops(c, stats).aggregation;
    ok = ok && count_flops(c, stats).aggregation > 0;
  }
  {
    ModelConfig c;
    const auto empty = count_flops(c, GraphStats{});
    ok = ok && empty.total() == empty.head && empty.head > 0;
  }

  ModelConfig reference;
  const auto params = count_params(reference, 1983);
  const auto records = generate_synthetic(strong_signal_cohort());
  std::vector<CohortRecord> truncated;
  for (const auto& rec : records) truncated.push_back(apply_prediction_interval(rec, 30));
  const auto vocab = build_vocab(all_codes(truncated));
  const auto data = encode_records(truncated, vocab, kDefaultTau, kLookbackDays, opts.jobs);
  double flops = 0.0;
  for (const auto& s : data) flops += static_cast<double>(count_flops(reference, graph_stats(s.graph)).total());
  flops /= static_cast<double>(data.size());
  log_line(opts, fmt("  default widths, N=1983: %.6fM parameters (reported 0.172M, informational)", params / 1e6));
  log_line(opts, fmt("  synthetic cohort mean: %.3fM FLOP per patient (reported 23.495M, informational)", flops / 1e6));
  log_line(opts, std::string("  convention: ") + kFlopConvention);

  r.passed = ok;
  r.detail = fmt("closed form matched on 20 configs, aggregation linear in edges; %.3fM params, %.3fM FLOP",
                 params / 1e6, flops / 1e6);
  return r;
}

CriterionResult check_determinism(const SuiteOptions& opts) {
  CriterionResult r{10, "determinism across runs and job counts", false, {}, 0.0};
  SynthConfig cohort = strong_signal_cohort();
  cohort.n_patients = 300;
  const auto records = generate_synthetic(cohort);
  auto config = sweep_config(3);
  config.train.max_epochs = 3;

  auto artifacts = [&](int jobs) {
    const auto res = run_experiment(records, config, jobs);
    std::string bytes;
    for (const auto& ckpt : fold_checkpoints(res.cv, config, res.vocab.size())) bytes += serialize_checkpoint(ckpt);
    return std::make_pair(bytes, res.test_eval.report.to_json().dump());
  };
  const auto first = artifacts(1);
  const auto second = artifacts(1);
  const int many = std::max(3, opts.jobs);
  const auto parallel = artifacts(many);

  bool round_trip = true;
  {
    const auto res = run_experiment(records, config, 1);
    for (const auto& ckpt : fold_checkpoints(res.cv, config, res.vocab.size())) {
      const auto back = deserialize_checkpoint(serialize_checkpoint(ckpt));
      round_trip = round_trip && back.params == ckpt.params && back.config.to_text() == config.to_text();
    }
  }
  const bool repeat = first == second;
  const bool jobs_free = first == parallel;
  r.passed = repeat && jobs_free && round_trip;
  r.detail = std::string("repeat run ") + (repeat ? "identical" : "DIFFERS") + ", --jobs " + std::to_string(many) +
             (jobs_free ? " identical" : " DIFFERS") + ", checkpoint round trip " + (round_trip ? "exact" : "BROKEN") +
             fmt(" (%.0f checkpoint bytes)", static_cast<double>(first.first.size()));
  return r;
}

std::vector<CriterionResult> run_criteria(const SuiteOptions& opts, const std::vector<int>& ids) {
  using Runner = CriterionResult (*)(const SuiteOptions&);
  static constexpr Runner kRunners[] = {check_gradients,    check_normalization,      check_uniform_mean,
                                        check_graph_counts, check_metric_oracles,     check_learnability,
                                        check_ablation_direction, check_sensitivity_shape, check_complexity,
                                        check_determinism};
  std::vector<CriterionResult> out;
  for (int id = 1; id <= 10; ++id) {
    if (!ids.empty() && std::find(ids.begin(), ids.end(), id) == ids.end()) continue;
    const auto start = std::chrono::steady_clock::now();
    CriterionResult res;
    try {
      res = kRunners[id - 1](opts);
    } catch (const std::exception& e) {
      res = {id, "criterion " + std::to_string(id), false, std::string("threw: ") + e.what(), 0.0};
    }
    res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    log_line(opts, format_result(res));
    out.push_back(std::move(res));
  }
  return out;
}

std::string format_result(const CriterionResult& r) {
  char head[128];
  std::snprintf(head, sizeof head, "%s [%d] ", r.passed ? "PASS" : "FAIL", r.id);
  return head + r.name + fmt(" (%.1fs): ", r.seconds) + r.detail;
}

}  // namespace gradibd::checks
