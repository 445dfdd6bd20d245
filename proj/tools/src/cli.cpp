#include "gradibd/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <optional>
#include <ostream>
#include <sstream>

#if __has_include(<CLI/CLI.hpp>)
#include <CLI/CLI.hpp>
#else
#include <CLI11.hpp>
#endif
#include <nlohmann/json.hpp>

#include "gradibd/artifacts.hpp"
#include "gradibd/checkpoint.hpp"
#include "gradibd/checks/acceptance.hpp"
#include "gradibd/error.hpp"
#include "gradibd/fingerprint.hpp"
#include "gradibd/icd_graph.hpp"
#include "gradibd/parallel.hpp"
#include "gradibd/train_eval.hpp"

#ifndef GRADIBD_VERSION
#define GRADIBD_VERSION "0.0.0"
#endif

namespace gradibd::cli {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

// Published figures printed beside our own counts; never compared.
constexpr double kReportedParamsM = 0.172;
constexpr double kReportedFlopsM = 23.495;

const std::vector<std::string> kCommands = {"gen-cohort", "encode", "train", "eval",
                                            "ablate",     "sweep",  "flops", "selftest"};

class Log {
 public:
  explicit Log(std::ostream& err) : err_(err) {}
  void info(const std::string& msg) const { err_ << "INFO  " << msg << '\n' << std::flush; }
  void warn(const std::string& msg) const { err_ << "WARN  " << msg << '\n' << std::flush; }

 private:
  std::ostream& err_;
};

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string fold_name(std::size_t fold, const char* ext) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "fold_%02zu%s", fold, ext);
  return buf;
}

/// Provenance record written next to every output.
struct Manifest {
  std::vector<std::string> command_line;
  std::string started_at = utc_now();
  std::optional<RunConfig> config;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, std::string>> inputs;
  std::vector<std::string> outputs;
  ojson parameters;

  void add_input(const fs::path& path) { inputs.emplace_back(path.string(), file_sha256_hex(path)); }

  void write(const fs::path& path) const {
    ojson j;
    j["manifest_version"] = kManifestVersion;
    j["tool"] = "gradibd";
    j["tool_version"] = GRADIBD_VERSION;
    j["command_line"] = command_line;
    if (config) {
      ojson cfg;
      std::istringstream lines(config->to_text());
      std::string line;
      while (std::getline(lines, line)) {
        const auto eq = line.find(" = ");
        cfg[line.substr(0, eq)] = line.substr(eq + 3);
      }
      j["config"] = cfg;
      j["config_fingerprint"] = sha256_hex(config->to_text());
    }
    if (!parameters.is_null()) j["parameters"] = parameters;
    j["seed"] = seed;
    auto in = ojson::array();
    for (const auto& [p, h] : inputs) in.push_back({{"path", p}, {"sha256", h}});
    j["inputs"] = in;
    j["outputs"] = outputs;
    j["started_at"] = started_at;
    j["finished_at"] = utc_now();
    write_text(path, j.dump(2) + "\n");
  }
};

/// Sidecar manifest path for commands whose --out is a single file.
fs::path sidecar(const fs::path& file) { return fs::path(file.string() + ".manifest.json"); }

void ensure_parent(const fs::path& file) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
}

/// --config plus one override flag per config key; flags win.
struct ConfigFlags {
  std::string path;
  std::vector<std::pair<std::string, std::string>> overrides;

  void attach(CLI::App* app) {
    app->add_option("--config", path, "flat key = value config file")->check(CLI::ExistingFile);
    for (const auto& key : RunConfig::keys()) {
      std::string flag = "--" + key;
      std::replace(flag.begin(), flag.end(), '_', '-');
      app->add_option_function<std::string>(
             flag, [this, key](const std::string& v) { overrides.emplace_back(key, v); }, "override config key " + key)
          ->group("Config overrides");
    }
  }

  RunConfig resolve(Manifest& manifest) const {
    RunConfig cfg;
    if (!path.empty()) {
      cfg = RunConfig::load(path);
      manifest.add_input(path);
    }
    for (const auto& [k, v] : overrides) cfg.set(k, v);
    cfg.validate();
    manifest.config = cfg;
    manifest.seed = cfg.train.seed;
    return cfg;
  }
};

std::vector<CohortRecord> load_inputs(const fs::path& cohort, Manifest& manifest, const Log& log) {
  manifest.add_input(cohort);
  auto records = load_cohort(cohort);
  log.info("loaded " + std::to_string(records.size()) + " records from " + cohort.string());
  return records;
}

std::string metric_line(const char* name, const MetricSummary& m) {
  return std::string(name) + " " + fixed(m.mean) + " [" + fixed(m.ci_lo) + ", " + fixed(m.ci_hi) + "]";
}

std::vector<int> parse_int_list(const std::string& text, const char* what) {
  std::vector<int> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoi(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      fail(ErrorCode::ConfigError, std::string("bad ") + what + " entry '" + item + "'");
    }
  }
  if (out.empty()) fail(ErrorCode::ConfigError, std::string(what) + " list is empty");
  return out;
}

void write_fold_scores(const fs::path& dir, std::span<const FoldScores> folds) {
  fs::create_directories(dir);
  for (std::size_t f = 0; f < folds.size(); ++f) write_scores_csv(dir / fold_name(f, ".csv"), folds[f]);
}

// ---------------------------------------------------------------------------
// Subcommands

/// Bucket count and empty-record tally for records already truncated to the lead.
ojson encoding_metadata(const RunConfig& cfg, const std::vector<CohortRecord>& truncated) {
  std::size_t empty = 0;
  for (const auto& r : truncated) empty += r.empty() ? 1 : 0;
  return {{"n_buckets", (cfg.window_days + cfg.tau - 1) / cfg.tau},
          {"empty_record_policy", "kept; scored from an empty graph"},
          {"empty_records", empty}};
}

std::vector<CohortRecord> truncate_all(const std::vector<CohortRecord>& records, int lead_days) {
  std::vector<CohortRecord> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(apply_prediction_interval(r, lead_days));
  return out;
}

struct GenCohortArgs {
  std::string out;
  std::size_t n = SynthConfig{}.n_patients;
  double case_frac = SynthConfig{}.case_fraction;
  std::uint64_t seed = SynthConfig{}.seed;
  std::optional<double> motif_ramp;
  std::optional<double> motif_base;
  bool null_signal = false;
};

int run_gen_cohort(const GenCohortArgs& a, Manifest& manifest, std::ostream& out, const Log& log) {
  SynthConfig cfg;
  cfg.n_patients = a.n;
  cfg.case_fraction = a.case_frac;
  cfg.seed = a.seed;
  if (a.motif_ramp) cfg.motif_ramp = *a.motif_ramp;
  if (a.motif_base) cfg.motif_base = *a.motif_base;
  if (a.null_signal) cfg = null_signal(cfg);
  cfg.validate();
  const auto records = generate_synthetic(cfg);
  const fs::path path = a.out;
  ensure_parent(path);
  save_cohort(path, records);
  manifest.seed = cfg.seed;
  manifest.parameters = {{"n_patients", cfg.n_patients},     {"case_fraction", cfg.case_fraction},
                         {"motif_base", cfg.motif_base},     {"motif_ramp", cfg.motif_ramp},
                         {"ramp_days", cfg.ramp_days},       {"visit_rate", cfg.visit_rate},
                         {"codes_per_visit", cfg.codes_per_visit}, {"seed", cfg.seed}};
  manifest.outputs = {path.filename().string()};
  manifest.write(sidecar(path));
  const auto cases = std::count_if(records.begin(), records.end(), [](const auto& r) { return r.label == 1; });
  log.info("wrote " + std::to_string(records.size()) + " records (" + std::to_string(cases) + " cases) to " +
           path.string());
  out << path.string() << '\n';
  return kExitOk;
}

struct EncodeArgs {
  std::string cohort;
  std::string out;
  std::string vocab;
  std::string dump_matrix;
  ConfigFlags config;
  int jobs = default_jobs();
};

bool safe_file_stem(const std::string& s) {
  return !s.empty() && s != "." && s != ".." && s.find('/') == std::string::npos && s.find('\\') == std::string::npos;
}

int run_encode(const EncodeArgs& a, Manifest& manifest, std::ostream& out, const Log& log) {
  const auto cfg = a.config.resolve(manifest);
  const auto records = truncate_all(load_inputs(a.cohort, manifest, log), cfg.lead_days);
  manifest.parameters = encoding_metadata(cfg, records);

  CodeVocab vocab;
  if (!a.vocab.empty()) {
    vocab = CodeVocab::load(a.vocab);
    manifest.add_input(a.vocab);
  } else {
    vocab = build_vocab(all_codes(records));
  }

  const fs::path dir = a.out;
  fs::create_directories(dir);
  vocab.save(dir / "vocab.txt");

  const auto data = encode_records(records, vocab, cfg.tau, cfg.window_days, a.jobs);
  std::string lines;
  double nodes = 0.0, edges = 0.0;
  std::size_t empty = 0;
  for (const auto& s : data) {
    ojson line;
    line["patient_id"] = s.patient_id;
    line["label"] = s.label;
    line["graph"] = ojson::parse(graph_to_json(s.graph));
    lines += line.dump() + '\n';
    nodes += static_cast<double>(s.graph.n_nodes());
    edges += static_cast<double>(s.graph.n_edges());
    if (s.graph.empty()) ++empty;
  }
  write_text(dir / "graphs.jsonl", lines);
  manifest.outputs = {"vocab.txt", "graphs.jsonl"};

  if (!a.dump_matrix.empty()) {
    fs::path dump = a.dump_matrix;
    if (dump.is_absolute()) fail(ErrorCode::ConfigError, "--dump-matrix must be relative to --out");
    dump = dir / dump;
    fs::create_directories(dump);
    for (const auto& r : records) {
      if (!safe_file_stem(r.patient_id)) {
        fail(ErrorCode::InvariantViolation, "patient_id '" + r.patient_id + "' is not usable as a file name");
      }
      std::string csv = "code_id,bucket_index,frequency\n";
      const auto matrix = bucketize(r, vocab, cfg.tau, cfg.window_days);
      for (const auto& [key, freq] : matrix.entries()) {
        csv += std::to_string(key.second) + ',' + std::to_string(key.first) + ',' + std::to_string(freq) + '\n';
      }
      write_text(dump / (r.patient_id + ".csv"), csv);
    }
    manifest.outputs.push_back(a.dump_matrix + "/");
  }
  manifest.write(dir / "manifest.json");

  const double n = std::max<double>(1.0, static_cast<double>(data.size()));
  out << "records " << data.size() << "\nvocab_size " << vocab.size() << "\nempty_graphs " << empty
      << "\nmean_nodes " << fixed(nodes / n, 2) << "\nmean_edges " << fixed(edges / n, 2) << '\n';
  return kExitOk;
}

struct TrainArgs {
  std::string cohort;
  std::string out;
  ConfigFlags config;
  int jobs = default_jobs();
};

int run_train(const TrainArgs& a, Manifest& manifest, std::ostream& out, const Log& log) {
  const auto cfg = a.config.resolve(manifest);
  const auto records = load_inputs(a.cohort, manifest, log);
  log.info("config " + sha256_hex(cfg.to_text()).substr(0, 12) + ": " + cfg.model.ablation.label() + ", " +
           std::to_string(cfg.train.folds) + " folds, up to " + std::to_string(cfg.train.max_epochs) +
           " epochs, patience " + std::to_string(cfg.train.patience_lr) + "/" + std::to_string(cfg.train.patience_stop) +
           ", lead " + std::to_string(cfg.lead_days) + " days, jobs " + std::to_string(a.jobs));

  const auto res = run_experiment(records, cfg, a.jobs);
  manifest.parameters = encoding_metadata(cfg, truncate_all(records, cfg.lead_days));
  log.info("split: " + std::to_string(res.train.size()) + " train, " + std::to_string(res.test.size()) +
           " test; vocabulary " + std::to_string(res.vocab.size()) + " ids");

  const fs::path dir = a.out;
  fs::create_directories(dir / "traces");
  write_text(dir / "config.txt", cfg.to_text());
  res.vocab.save(dir / "vocab.txt");
  save_cohort(dir / "test.jsonl", res.split.test);
  manifest.outputs = {"config.txt", "vocab.txt", "test.jsonl"};

  const auto ckpts = fold_checkpoints(res.cv, cfg, res.vocab.size());
  for (std::size_t f = 0; f < ckpts.size(); ++f) {
    save_checkpoint(ckpts[f], dir / fold_name(f, ".ckpt"));
    write_trace_csv(dir / "traces" / fold_name(f, ".csv"), res.cv.folds[f].trace);
    manifest.outputs.push_back(fold_name(f, ".ckpt"));
    const auto& fold = res.cv.folds[f];
    log.info("fold " + std::to_string(f) + ": best epoch " + std::to_string(fold.best_epoch) + " of " +
             std::to_string(fold.trace.size()) + ", val loss " + fixed(fold.best_val_loss) + ", val AUROC " +
             fixed(res.cv.val_metrics[f].auroc));
  }

  auto cv = cv_report(res.cv, res.train);
  attach_config(cv, cfg);
  cv.cohort_fingerprint = cohort_fingerprint(res.split.train);
  std::vector<FoldScores> val_scores;
  for (std::size_t f = 0; f < res.cv.folds.size(); ++f) {
    FoldScores fs_;
    for (auto i : res.cv.partitions[f].val) {
      fs_.patient_ids.push_back(res.train[i].patient_id);
      fs_.labels.push_back(res.train[i].label);
    }
    fs_.scores = res.cv.folds[f].val_scores;
    val_scores.push_back(std::move(fs_));
  }
  write_fold_scores(dir / "val_scores", val_scores);
  write_fold_scores(dir / "test_scores", res.test_eval.scores);
  write_text(dir / "cv_report.json", cv.to_json().dump(2) + "\n");
  write_text(dir / "report.json", res.test_eval.report.to_json().dump(2) + "\n");
  manifest.outputs.insert(manifest.outputs.end(),
                          {"traces/", "val_scores/", "test_scores/", "cv_report.json", "report.json"});
  manifest.write(dir / "manifest.json");

  const auto& rep = res.test_eval.report;
  out << metric_line("test_auroc", rep.auroc) << '\n'
      << metric_line("test_ap", rep.ap) << '\n'
      << metric_line("test_f1", rep.f1) << '\n'
      << metric_line("cv_auroc", cv.auroc) << '\n';
  return kExitOk;
}

struct EvalArgs {
  std::string checkpoints;
  std::string test;
  std::string out;
  std::string vocab;
  int jobs = default_jobs();
};

int run_eval(const EvalArgs& a, Manifest& manifest, std::ostream& out, const Log& log) {
  const fs::path dir = a.checkpoints;
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".ckpt") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.size() < 2) fail(ErrorCode::ConfigError, "need at least two .ckpt files in " + dir.string());

  std::vector<ModelParams> params;
  std::optional<Checkpoint> first;
  for (const auto& f : files) {
    manifest.add_input(f);
    auto ckpt = load_checkpoint(f);
    if (first && (ckpt.config.to_text() != first->config.to_text() || ckpt.n_codes != first->n_codes)) {
      fail(ErrorCode::FormatError, f.string() + " was trained with a different config");
    }
    params.push_back(std::move(ckpt.params));
    if (!first) first = std::move(ckpt);
  }
  const RunConfig cfg = first->config;
  manifest.config = cfg;
  manifest.seed = cfg.train.seed;

  const fs::path vocab_path = a.vocab.empty() ? dir / "vocab.txt" : fs::path(a.vocab);
  manifest.add_input(vocab_path);
  const auto vocab = CodeVocab::load(vocab_path);
  if (vocab.size() != first->n_codes) {
    fail(ErrorCode::FormatError, "vocabulary has " + std::to_string(vocab.size()) + " ids but checkpoints expect " +
                                     std::to_string(first->n_codes));
  }

  const auto test = truncate_all(load_inputs(a.test, manifest, log), cfg.lead_days);
  manifest.parameters = encoding_metadata(cfg, test);
  const auto data = encode_records(test, vocab, cfg.tau, cfg.window_days, a.jobs);
  auto result = evaluate_ensemble(params, data, cfg.model, a.jobs);
  attach_config(result.report, cfg);
  result.report.cohort_fingerprint = cohort_fingerprint(test);

  const fs::path report_path = a.out;
  ensure_parent(report_path);
  const fs::path scores_dir = report_path.parent_path() / (report_path.stem().string() + "_scores");
  write_fold_scores(scores_dir, result.scores);
  write_text(report_path, result.report.to_json().dump(2) + "\n");
  manifest.outputs = {report_path.filename().string(), scores_dir.filename().string() + "/"};
  manifest.write(sidecar(report_path));

  log.info("scored " + std::to_string(data.size()) + " records with " + std::to_string(params.size()) + " fold models");
  out << metric_line("auroc", result.report.auroc) << '\n'
      << metric_line("ap", result.report.ap) << '\n'
      << metric_line("f1", result.report.f1) << '\n';
  return kExitOk;
}

struct AblateArgs {
  std::string cohort;
  std::string out;
  std::string grid = "cs,cf,td";
  ConfigFlags config;
  int jobs = default_jobs();
};

std::vector<Ablation> grid_from_axes(const std::string& text) {
  bool cs = false, cf = false, td = false;
  std::stringstream in(text);
  std::string axis;
  while (std::getline(in, axis, ',')) {
    if (axis == "cs") cs = true;
    else if (axis == "cf") cf = true;
    else if (axis == "td") td = true;
    else fail(ErrorCode::ConfigError, "unknown ablation axis '" + axis + "' (expected cs, cf, td)");
  }
  // Keep the rows of the standard table whose disabled signals are all listed.
  std::vector<Ablation> out;
  for (const auto& a : ablation_grid()) {
    if ((!a.code_similarity && !cs) || (!a.frequency && !cf) || (!a.time_decay && !td)) continue;
    out.push_back(a);
  }
  return out;
}

int run_ablate(const AblateArgs& a, Manifest& manifest, std::ostream& out, const Log& log) {
  const auto cfg = a.config.resolve(manifest);
  const auto grid = grid_from_axes(a.grid);
  const auto records = load_inputs(a.cohort, manifest, log);
  log.info("ablation over " + std::to_string(grid.size()) + " variants, " + std::to_string(cfg.train.folds) +
           "-fold cross-validation each");
  const auto rows = ablation_study(records, cfg, grid, a.jobs);
  manifest.parameters = encoding_metadata(cfg, truncate_all(records, cfg.lead_days));

  std::string csv = "variant,cs,cf,td,auroc_mean,auroc_ci_lo,auroc_ci_hi,ap_mean,ap_ci_lo,ap_ci_hi,f1_mean,f1_ci_lo,f1_ci_hi\n";
  for (const auto& row : rows) {
    const auto& r = row.cv;
    csv += row.ablation.label() + ',' + std::to_string(row.ablation.code_similarity) + ',' +
           std::to_string(row.ablation.frequency) + ',' + std::to_string(row.ablation.time_decay);
    for (const auto* m : {&r.auroc, &r.ap, &r.f1}) {
      csv += ',' + format_exact(m->mean) + ',' + format_exact(m->ci_lo) + ',' + format_exact(m->ci_hi);
    }
    csv += '\n';
    out << row.ablation.label() << "  auroc " << fixed(r.auroc.mean) << "  ap " << fixed(r.ap.mean) << "  f1 "
        << fixed(r.f1.mean) << '\n';
  }
  const fs::path path = a.out;
  ensure_parent(path);
  write_text(path, csv);
  manifest.outputs = {path.filename().string()};
  manifest.write(sidecar(path));
  return kExitOk;
}

struct SweepArgs {
  std::string cohort;
  std::string out;
  std::string leads;
  ConfigFlags config;
  int jobs = default_jobs();
};

int run_sweep(const SweepArgs& a, Manifest& manifest, std::ostream& out, const Log& log) {
  const auto cfg = a.config.resolve(manifest);
  const auto leads = parse_int_list(a.leads, "lead");
  const auto records = load_inputs(a.cohort, manifest, log);
  log.info("sweep over " + std::to_string(leads.size()) + " lead times");
  const auto rows = sensitivity_sweep(records, leads, cfg, a.jobs);
  manifest.parameters = ojson::array();
  for (int lead : leads) {
    auto entry = encoding_metadata(cfg, truncate_all(records, lead));
    entry["lead_days"] = lead;
    manifest.parameters.push_back(std::move(entry));
  }

  std::string csv = "lead_days,metric,mean,ci_lo,ci_hi\n";
  for (const auto& row : rows) {
    const std::pair<const char*, const MetricSummary*> metrics[] = {
        {"auroc", &row.report.auroc}, {"ap", &row.report.ap}, {"f1", &row.report.f1}};
    for (const auto& [name, m] : metrics) {
      csv += std::to_string(row.lead_days) + ',' + name + ',' + format_exact(m->mean) + ',' + format_exact(m->ci_lo) +
             ',' + format_exact(m->ci_hi) + '\n';
    }
    out << "lead " << row.lead_days << "  " << metric_line("auroc", row.report.auroc) << '\n';
  }
  const fs::path path = a.out;
  ensure_parent(path);
  write_text(path, csv);
  manifest.outputs = {path.filename().string()};
  manifest.write(sidecar(path));
  return kExitOk;
}

struct FlopsArgs {
  std::string cohort;
  ConfigFlags config;
  int jobs = default_jobs();
};

int run_flops(const FlopsArgs& a, Manifest& manifest, std::ostream& out, const Log& log) {
  const auto cfg = a.config.resolve(manifest);
  std::vector<CohortRecord> records;
  for (const auto& r : load_inputs(a.cohort, manifest, log)) records.push_back(apply_prediction_interval(r, cfg.lead_days));
  const auto vocab = build_vocab(all_codes(records));
  const auto data = encode_records(records, vocab, cfg.tau, cfg.window_days, a.jobs);

  FlopCount sum;
  for (const auto& s : data) {
    const auto f = count_flops(cfg.model, graph_stats(s.graph));
    sum.similarity += f.similarity;
    sum.edge_weights += f.edge_weights;
    sum.aggregation += f.aggregation;
    sum.decay += f.decay;
    sum.update += f.update;
    sum.pooling += f.pooling;
    sum.head += f.head;
  }
  const double n = std::max<double>(1.0, static_cast<double>(data.size()));
  const auto params = count_params(cfg.model, vocab.size());
  out << "n_codes " << vocab.size() << '\n'
      << "params " << params << " (" << fixed(static_cast<double>(params) / 1e6, 3) << "M; reported "
      << fixed(kReportedParamsM, 3) << "M, not comparable)\n"
      << "flops_per_patient " << fixed(static_cast<double>(sum.total()) / n / 1e6, 3) << "M (reported "
      << fixed(kReportedFlopsM, 3) << "M, not comparable)\n";
  const std::pair<const char*, std::uint64_t> parts[] = {
      {"similarity", sum.similarity}, {"edge_weights", sum.edge_weights}, {"aggregation", sum.aggregation},
      {"decay", sum.decay},           {"update", sum.update},             {"pooling", sum.pooling},
      {"head", sum.head}};
  for (const auto& [name, v] : parts) out << "  " << name << ' ' << fixed(static_cast<double>(v) / n, 1) << '\n';
  out << "convention: " << kFlopConvention << '\n';
  return kExitOk;
}

struct SelftestArgs {
  bool full = false;
  std::string criteria;
  int jobs = default_jobs();
};

int run_selftest(const SelftestArgs& a, std::ostream& out, std::ostream& err) {
  std::vector<int> ids = {1, 2, 3, 4, 5, 9, 10};
  if (a.full) ids.clear();
  if (!a.criteria.empty()) ids = parse_int_list(a.criteria, "criterion");
  for (int id : ids) {
    if (id < 1 || id > 10) fail(ErrorCode::ConfigError, "criteria are numbered 1 to 10");
  }
  checks::SuiteOptions opts;
  opts.jobs = a.jobs;
  opts.log = &out;
  const auto results = checks::run_criteria(opts, ids);
  const auto failed = std::count_if(results.begin(), results.end(), [](const auto& r) { return !r.passed; });
  out << (results.size() - static_cast<std::size_t>(failed)) << "/" << results.size() << " criteria passed\n";
  if (failed == 0) return kExitOk;
  err << "ERROR " << to_string(ErrorCode::InvariantViolation) << ": " << failed << " selftest criteria failed\n";
  return kExitRuntime;
}

std::string join(const std::vector<std::string>& v, const char* sep) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? sep : "") + v[i];
  return s;
}

}  // namespace

std::string version_string() {
  return std::string("gradibd ") + GRADIBD_VERSION + "\ncheckpoint format " + std::to_string(kCheckpointVersion) +
         "\ngraph format " + std::to_string(kGraphFormatVersion) + "\nmanifest format " +
         std::to_string(kManifestVersion);
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  const Log log(err);
  CLI::App app{"Graph-based early prediction from diagnosis code histories", "gradibd"};
  app.set_version_flag("--version", version_string());
  app.require_subcommand(1);

  Manifest manifest;
  manifest.command_line.push_back("gradibd");
  manifest.command_line.insert(manifest.command_line.end(), args.begin(), args.end());

  auto add_jobs = [](CLI::App* sub, int& jobs) {
    sub->add_option("--jobs", jobs, "worker threads; results do not depend on it")->check(CLI::PositiveNumber);
  };

  GenCohortArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-cohort", "write a synthetic cohort as JSONL");
  gen_cmd->add_option("--out", gen.out, "output JSONL file")->required();
  gen_cmd->add_option("--n", gen.n, "number of patients")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--case-frac", gen.case_frac, "fraction of cases")->check(CLI::Range(0.0, 1.0));
  gen_cmd->add_option("--seed", gen.seed, "generator seed");
  gen_cmd->add_option("--motif-ramp", gen.motif_ramp, "extra motif rate gained per month toward the anchor");
  gen_cmd->add_option("--motif-base", gen.motif_base, "motif events per month across the whole history");
  gen_cmd->add_flag("--null-signal", gen.null_signal, "no difference between cases and controls");

  EncodeArgs enc;
  auto* enc_cmd = app.add_subcommand("encode", "bucketize a cohort and build patient graphs");
  enc_cmd->add_option("--cohort", enc.cohort, "cohort JSONL")->required()->check(CLI::ExistingFile);
  enc_cmd->add_option("--out", enc.out, "output directory")->required();
  enc_cmd->add_option("--vocab", enc.vocab, "existing vocabulary file")->check(CLI::ExistingFile);
  enc_cmd->add_option("--dump-matrix", enc.dump_matrix, "write per-patient bucket CSVs to this subdirectory of --out");
  enc.config.attach(enc_cmd);
  add_jobs(enc_cmd, enc.jobs);

  TrainArgs tr;
  auto* tr_cmd = app.add_subcommand("train", "cross-validated training and fold-ensemble test evaluation");
  tr_cmd->add_option("--cohort", tr.cohort, "cohort JSONL")->required()->check(CLI::ExistingFile);
  tr_cmd->add_option("--out", tr.out, "output directory")->required();
  tr.config.attach(tr_cmd);
  add_jobs(tr_cmd, tr.jobs);

  EvalArgs ev;
  auto* ev_cmd = app.add_subcommand("eval", "score a cohort with every fold checkpoint");
  ev_cmd->add_option("--checkpoints", ev.checkpoints, "directory of .ckpt files")->required()->check(CLI::ExistingDirectory);
  ev_cmd->add_option("--test", ev.test, "cohort JSONL to score")->required()->check(CLI::ExistingFile);
  ev_cmd->add_option("--out", ev.out, "report JSON path")->required();
  ev_cmd->add_option("--vocab", ev.vocab, "vocabulary (default: vocab.txt beside the checkpoints)")
      ->check(CLI::ExistingFile);
  add_jobs(ev_cmd, ev.jobs);

  AblateArgs ab;
  auto* ab_cmd = app.add_subcommand("ablate", "cross-validate each message-passing variant");
  ab_cmd->add_option("--cohort", ab.cohort, "cohort JSONL")->required()->check(CLI::ExistingFile);
  ab_cmd->add_option("--out", ab.out, "output CSV")->required();
  ab_cmd->add_option("--grid", ab.grid, "signals to switch off, from cs,cf,td")->capture_default_str();
  ab.config.attach(ab_cmd);
  add_jobs(ab_cmd, ab.jobs);

  SweepArgs sw;
  auto* sw_cmd = app.add_subcommand("sweep", "full runs across prediction intervals");
  sw_cmd->add_option("--cohort", sw.cohort, "cohort JSONL")->required()->check(CLI::ExistingFile);
  sw_cmd->add_option("--out", sw.out, "output CSV")->required();
  sw_cmd->add_option("--leads", sw.leads, "comma-separated lead times in days")->required();
  sw.config.attach(sw_cmd);
  add_jobs(sw_cmd, sw.jobs);

  FlopsArgs fl;
  auto* fl_cmd = app.add_subcommand("flops", "parameter count and per-patient FLOP estimate");
  fl_cmd->add_option("--cohort", fl.cohort, "cohort JSONL")->required()->check(CLI::ExistingFile);
  fl.config.attach(fl_cmd);
  add_jobs(fl_cmd, fl.jobs);

  SelftestArgs st;
  auto* st_cmd = app.add_subcommand("selftest", "run the built-in acceptance checks");
  st_cmd->add_flag("--full", st.full, "include the training-based criteria 6-8");
  st_cmd->add_option("--criteria", st.criteria, "comma-separated criterion numbers");
  add_jobs(st_cmd, st.jobs);

  const bool wants_help_or_version =
      std::any_of(args.begin(), args.end(), [](const auto& s) { return s == "--help" || s == "-h" || s == "--version"; });
  if (!wants_help_or_version) {
    if (args.empty() || std::find(kCommands.begin(), kCommands.end(), args.front()) == kCommands.end()) {
      err << "ERROR " << to_string(ErrorCode::UnknownCommand) << ": expected one of " << join(kCommands, ", ")
          << (args.empty() ? std::string() : ", got '" + args.front() + "'") << '\n'
          << app.help();
      return kExitValidation;
    }
  }

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << version_string() << '\n';
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    const auto code = dynamic_cast<const CLI::RequiredError*>(&e) ? ErrorCode::MissingFlag : ErrorCode::ConfigError;
    err << "ERROR " << to_string(code) << ": " << e.what() << '\n';
    const auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return kExitValidation;
  }

  try {
    if (*gen_cmd) return run_gen_cohort(gen, manifest, out, log);
    if (*enc_cmd) return run_encode(enc, manifest, out, log);
    if (*tr_cmd) return run_train(tr, manifest, out, log);
    if (*ev_cmd) return run_eval(ev, manifest, out, log);
    if (*ab_cmd) return run_ablate(ab, manifest, out, log);
    if (*sw_cmd) return run_sweep(sw, manifest, out, log);
    if (*fl_cmd) return run_flops(fl, manifest, out, log);
    if (*st_cmd) return run_selftest(st, out, err);
  } catch (const Error& e) {
    err << "ERROR " << to_string(e.code()) << ": " << e.what() << '\n';
    return is_validation_error(e.code()) ? kExitValidation : kExitRuntime;
  } catch (const fs::filesystem_error& e) {
    err << "ERROR " << to_string(ErrorCode::IoError) << ": " << e.what() << '\n';
    return kExitRuntime;
  } catch (const std::exception& e) {
    err << "ERROR Internal: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitValidation;
}

}  // namespace gradibd::cli
