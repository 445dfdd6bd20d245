#include "gradibd/checks/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "gradibd/diff_core.hpp"
#include "gradibd/error.hpp"

namespace gradibd::checks {

double pairwise_auroc(std::span<const double> scores, std::span<const int> labels) {
  double wins = 0.0;
  double pairs = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] == 1) continue;
      pairs += 1.0;
      if (scores[i] > scores[j]) wins += 1.0;
      else if (scores[i] == scores[j]) wins += 0.5;
    }
  }
  return wins / pairs;
}

double rank_walk_ap(std::span<const double> scores, std::span<const int> labels) {
  double total = 0.0;
  double n_pos = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    n_pos += 1.0;
    double rank = 1.0;
    double hits = 1.0;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (j == i) continue;
      const bool ahead = scores[j] > scores[i] || (scores[j] == scores[i] && j < i);
      if (!ahead) continue;
      rank += 1.0;
      if (labels[j] == 1) hits += 1.0;
    }
    total += hits / rank;
  }
  return total / n_pos;
}

MetricSummary t_interval_formula(std::span<const double> values, double t_critical) {
  const double n = static_cast<double>(values.size());
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / n;
  double sq = 0.0;
  for (double v : values) sq += (v - mean) * (v - mean);
  const double se = std::sqrt(sq / (n - 1.0)) / std::sqrt(n);
  return {mean, mean - t_critical * se, mean + t_critical * se};
}

DenseCounts dense_graph_counts(const BucketMatrix& matrix) {
  const std::size_t codes = matrix.n_codes();
  const auto buckets = static_cast<std::size_t>(matrix.n_buckets());
  std::vector<int> dense(codes * buckets, 0);
  for (const auto& [key, freq] : matrix.entries()) {
    dense[static_cast<std::size_t>(key.second) * buckets + static_cast<std::size_t>(key.first)] += freq;
  }
  DenseCounts out;
  std::vector<std::size_t> column_counts;
  for (std::size_t b = 0; b < buckets; ++b) {
    std::size_t in_bucket = 0;
    for (std::size_t c = 0; c < codes; ++c) {
      if (dense[c * buckets + b] > 0) ++in_bucket;
    }
    out.n_nodes += in_bucket;
    if (in_bucket > 0) column_counts.push_back(in_bucket);
  }
  for (std::size_t i = 0; i + 1 < column_counts.size(); ++i) out.n_edges += column_counts[i] * column_counts[i + 1];
  return out;
}

namespace {

using Row = std::vector<double>;

Row dense_layer(const Row& x, const ad::Matrix& w, const ad::Matrix& b) {
  Row out(static_cast<std::size_t>(w.rows()));
  for (Eigen::Index o = 0; o < w.rows(); ++o) {
    double acc = b(0, o);
    for (Eigen::Index i = 0; i < w.cols(); ++i) acc += w(o, i) * x[static_cast<std::size_t>(i)];
    out[static_cast<std::size_t>(o)] = acc;
  }
  return out;
}

void relu_in_place(Row& x) {
  for (double& v : x) v = v > 0.0 ? v : 0.0;
}

}  // namespace

double mean_aggregator_logit(const IcdGraph& graph, const ModelParams& params, const ModelConfig& config) {
  const auto& nodes = graph.nodes();
  const auto& spans = graph.spans();
  Row pooled(static_cast<std::size_t>(config.d_graph), 0.0);

  if (!nodes.empty()) {
    std::vector<Row> h;
    for (const auto& n : nodes) {
      Row row(static_cast<std::size_t>(config.d_node));
      for (int k = 0; k < config.d_node; ++k) row[static_cast<std::size_t>(k)] = params.embedding(n.code_id, k);
      h.push_back(std::move(row));
    }
    for (int s = 0; s < config.depth; ++s) {
      std::vector<Row> next(nodes.size());
      for (std::size_t i = 0; i < spans.size(); ++i) {
        Row message(h[spans[i].begin].size(), 0.0);
        if (i > 0) {
          const auto& prev = spans[i - 1];
          for (std::size_t u = prev.begin; u < prev.end; ++u) {
            for (std::size_t k = 0; k < message.size(); ++k) message[k] += h[u][k];
          }
          const double decay =
              config.ablation.time_decay ? std::exp(-config.lambda * (spans[i].bucket - prev.bucket)) : 1.0;
          for (double& v : message) v = v / static_cast<double>(prev.size()) * decay;
        }
        for (std::size_t v = spans[i].begin; v < spans[i].end; ++v) {
          Row x = h[v];
          for (std::size_t k = 0; k < x.size(); ++k) x[k] += message[k];
          next[v] = dense_layer(x, params.update_weight[static_cast<std::size_t>(s)],
                                params.update_bias[static_cast<std::size_t>(s)]);
          relu_in_place(next[v]);
        }
      }
      h = std::move(next);
    }
    for (const auto& row : h) {
      for (std::size_t k = 0; k < pooled.size(); ++k) pooled[k] += row[k];
    }
    for (double& v : pooled) v /= static_cast<double>(nodes.size());
  }

  Row hidden = dense_layer(pooled, params.head_weight1, params.head_bias1);
  double mean = 0.0;
  for (double v : hidden) mean += v;
  mean /= static_cast<double>(hidden.size());
  double var = 0.0;
  for (double v : hidden) var += (v - mean) * (v - mean);
  var /= static_cast<double>(hidden.size());
  const double inv_std = 1.0 / std::sqrt(var + ad::kLayerNormEps);
  for (std::size_t k = 0; k < hidden.size(); ++k) {
    const auto ki = static_cast<Eigen::Index>(k);
    hidden[k] = (hidden[k] - mean) * inv_std * params.norm_gamma(0, ki) + params.norm_beta(0, ki);
  }
  relu_in_place(hidden);
  return dense_layer(hidden, params.head_weight2, params.head_bias2)[0];
}

std::uint64_t allocated_param_count(const ModelConfig& config, std::size_t n_codes) {
  const auto params = ModelParams::init(config, n_codes, 0);
  std::uint64_t total = 0;
  for (const auto* t : params.tensors()) total += static_cast<std::uint64_t>(t->size());
  return total;
}

GradientCheck finite_difference_check(const IcdGraph& graph, int label, const ModelParams& params,
                                      const ModelConfig& config, double step, double floor) {
  const auto analytic = loss_and_gradient(graph, label, params, config);
  ModelParams probe = params;
  auto refs = probe.refs();
  auto loss_at = [&] {
    ad::Tape tape;
    return ad::bce_with_logit(forward(tape, graph, probe, config), label).scalar();
  };

  GradientCheck out;
  for (std::size_t p = 0; p < refs.size(); ++p) {
    ad::Matrix& m = *refs[p].value;
    for (Eigen::Index idx = 0; idx < m.size(); ++idx) {
      double& x = m.data()[idx];
      const double saved = x;
      x = saved + step;
      const double up = loss_at();
      x = saved - step;
      const double down = loss_at();
      x = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double a = analytic.grads[p].data()[idx];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
      if (rel > out.max_rel_error) {
        out.max_rel_error = rel;
        out.worst_tensor = refs[p].name;
      }
      ++out.n_checked;
    }
  }
  return out;
}

BucketMatrix random_bucket_matrix(Rng& rng, std::size_t n_codes, std::int32_t n_buckets, std::size_t max_nodes,
                                  std::size_t max_nonempty, int max_frequency) {
  std::uniform_int_distribution<std::int32_t> pick_bucket(0, n_buckets - 1);
  std::uniform_int_distribution<CodeId> pick_code(0, static_cast<CodeId>(n_codes) - 1);
  std::uniform_int_distribution<int> pick_freq(1, max_frequency);
  std::uniform_int_distribution<std::size_t> pick_count(0, max_nodes);
  std::uniform_int_distribution<std::size_t> pick_nonempty(1, max_nonempty);

  std::set<std::int32_t> buckets;
  const std::size_t wanted = std::min<std::size_t>(pick_nonempty(rng), static_cast<std::size_t>(n_buckets));
  while (buckets.size() < wanted) buckets.insert(pick_bucket(rng));
  const std::vector<std::int32_t> pool(buckets.begin(), buckets.end());
  std::uniform_int_distribution<std::size_t> pick_pool(0, pool.size() - 1);

  BucketMatrix matrix(n_codes, n_buckets, kDefaultTau);
  const std::size_t cells = pick_count(rng);
  std::set<std::pair<std::int32_t, CodeId>> used;
  for (std::size_t attempt = 0; used.size() < cells && attempt < 20 * cells; ++attempt) {
    const auto key = std::make_pair(pool[pick_pool(rng)], pick_code(rng));
    if (!used.insert(key).second) continue;
    matrix.add(key.second, key.first, pick_freq(rng));
  }
  return matrix;
}

}  // namespace gradibd::checks
