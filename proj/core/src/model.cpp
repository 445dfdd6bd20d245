#include "gradibd/model.hpp"

#include <cmath>
#include <random>

#include "gradibd/error.hpp"
#include "gradibd/random.hpp"

namespace gradibd {

using ad::Matrix;
using ad::Tape;
using ad::Var;

std::string Ablation::label() const {
  std::string out;
  auto append = [&out](bool on, const char* name) {
    if (!on) return;
    if (!out.empty()) out += '+';
    out += name;
  };
  append(code_similarity, "CS");
  append(frequency, "CF");
  append(time_decay, "TD");
  return out.empty() ? "Uniform" : out;
}

std::vector<Ablation> ablation_grid() {
  return {
      {true, true, true}, {true, true, false}, {true, false, true},
      {false, true, true}, {false, false, true}, {false, false, false},
  };
}

void ModelConfig::validate() const {
  if (d_node < 1 || d_graph < 1 || d_hidden < 1) fail(ErrorCode::ConfigError, "model widths must be at least 1");
  if (d_hidden < 2) fail(ErrorCode::ConfigError, "d_hidden must be at least 2 for layer normalization");
  if (depth < 1) fail(ErrorCode::ConfigError, "depth must be at least 1");
  if (!(lambda >= 0.0)) fail(ErrorCode::ConfigError, "lambda must be non-negative");
  if (!(sim_floor > 0.0)) fail(ErrorCode::ConfigError, "sim_floor must be positive");
}

// ---------------------------------------------------------------------------
// Parameters

namespace {

Matrix uniform_matrix(Eigen::Index rows, Eigen::Index cols, double bound, Rng& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = dist(rng);
  }
  return m;
}

}  // namespace

ModelParams ModelParams::init(const ModelConfig& config, std::size_t n_codes, std::uint64_t seed) {
  config.validate();
  auto rng = make_rng(seed, {0x706172616d73ULL});
  ModelParams p;
  const auto n = static_cast<Eigen::Index>(n_codes);
  p.embedding.resize(n, config.d_node);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < config.d_node; ++j) p.embedding(i, j) = normal(rng);
  }
  for (int s = 0; s < config.depth; ++s) {
    const int d_in = s == 0 ? config.d_node : config.d_graph;
    const double bound = 1.0 / std::sqrt(static_cast<double>(d_in));
    p.update_weight.push_back(uniform_matrix(config.d_graph, d_in, bound, rng));
    p.update_bias.push_back(uniform_matrix(1, config.d_graph, bound, rng));
  }
  const double b1 = 1.0 / std::sqrt(static_cast<double>(config.d_graph));
  p.head_weight1 = uniform_matrix(config.d_hidden, config.d_graph, b1, rng);
  p.head_bias1 = uniform_matrix(1, config.d_hidden, b1, rng);
  p.norm_gamma = Matrix::Ones(1, config.d_hidden);
  p.norm_beta = Matrix::Zero(1, config.d_hidden);
  const double b2 = 1.0 / std::sqrt(static_cast<double>(config.d_hidden));
  p.head_weight2 = uniform_matrix(1, config.d_hidden, b2, rng);
  p.head_bias2 = uniform_matrix(1, 1, b2, rng);
  return p;
}

std::vector<ad::ParamRef> ModelParams::refs() {
  std::vector<ad::ParamRef> out;
  out.push_back({"embedding", &embedding});
  for (std::size_t s = 0; s < update_weight.size(); ++s) {
    out.push_back({"update." + std::to_string(s) + ".weight", &update_weight[s]});
    out.push_back({"update." + std::to_string(s) + ".bias", &update_bias[s]});
  }
  out.push_back({"head.fc1.weight", &head_weight1});
  out.push_back({"head.fc1.bias", &head_bias1});
  out.push_back({"head.norm.gamma", &norm_gamma});
  out.push_back({"head.norm.beta", &norm_beta});
  out.push_back({"head.fc2.weight", &head_weight2});
  out.push_back({"head.fc2.bias", &head_bias2});
  return out;
}

std::vector<const Matrix*> ModelParams::tensors() const {
  std::vector<const Matrix*> out;
  for (const auto& r : const_cast<ModelParams*>(this)->refs()) out.push_back(r.value);
  return out;
}

std::vector<std::string> ModelParams::names() const {
  std::vector<std::string> out;
  for (auto& r : const_cast<ModelParams*>(this)->refs()) out.push_back(std::move(r.name));
  return out;
}

std::size_t ModelParams::size() const {
  std::size_t n = 0;
  for (const auto* t : tensors()) n += static_cast<std::size_t>(t->size());
  return n;
}

bool operator==(const ModelParams& a, const ModelParams& b) {
  const auto ta = a.tensors();
  const auto tb = b.tensors();
  if (ta.size() != tb.size()) return false;
  for (std::size_t i = 0; i < ta.size(); ++i) {
    if (ta[i]->rows() != tb[i]->rows() || ta[i]->cols() != tb[i]->cols()) return false;
    if (*ta[i] != *tb[i]) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Edge weights

Var edge_weight(double freq, Var src_embed, Var dst_embed, const ModelConfig& config) {
  const double f = config.ablation.frequency ? freq : 1.0;
  Tape& tape = *src_embed.tape();
  if (!config.ablation.code_similarity) {
    return tape.constant(Matrix::Constant(1, 1, f + config.sim_floor));
  }
  Var sim = ad::relu(ad::cosine_sim(src_embed, dst_embed));
  return ad::add_scalar(ad::scale(sim, f), config.sim_floor);
}

std::vector<double> normalize_incoming(const std::vector<double>& raw_weights) {
  if (raw_weights.empty()) fail(ErrorCode::EmptyIncoming, "node has no incoming edges");
  double total = 0.0;
  for (double w : raw_weights) total += w;
  std::vector<double> out;
  out.reserve(raw_weights.size());
  for (double w : raw_weights) out.push_back(w / total);
  return out;
}

namespace {

/// Normalized weights from span i to span i+1, as a (targets x sources) Var.
Var bucket_pair_weights(Tape& tape, Var h0, const IcdGraph& graph, std::size_t i, const ModelConfig& config) {
  const auto& src = graph.spans()[i];
  const auto& dst = graph.spans()[i + 1];
  const auto n_src = static_cast<Eigen::Index>(src.size());
  const auto n_dst = static_cast<Eigen::Index>(dst.size());

  ad::Vector freq(n_src);
  for (Eigen::Index k = 0; k < n_src; ++k) {
    freq(k) = config.ablation.frequency ? graph.nodes()[src.begin + static_cast<std::size_t>(k)].frequency : 1.0;
  }

  Var raw;
  if (config.ablation.code_similarity) {
    Var src_h = ad::slice_rows(h0, static_cast<Eigen::Index>(src.begin), n_src);
    Var dst_h = ad::slice_rows(h0, static_cast<Eigen::Index>(dst.begin), n_dst);
    Var sim = ad::relu(ad::cosine_matrix(dst_h, src_h));
    raw = ad::add_scalar(ad::scale_cols(sim, freq), config.sim_floor);
  } else {
    Matrix w = freq.transpose().replicate(n_dst, 1);
    raw = tape.constant(w.array() + config.sim_floor);
  }
  return ad::normalize_rows(raw);
}

struct BoundParams {
  Var embedding;
  std::vector<Var> update_weight;
  std::vector<Var> update_bias;
  Var head_weight1, head_bias1, norm_gamma, norm_beta, head_weight2, head_bias2;
};

BoundParams bind(Tape& tape, const ModelParams& p) {
  BoundParams b;
  b.embedding = tape.parameter(p.embedding);
  for (std::size_t s = 0; s < p.update_weight.size(); ++s) {
    b.update_weight.push_back(tape.parameter(p.update_weight[s]));
    b.update_bias.push_back(tape.parameter(p.update_bias[s]));
  }
  b.head_weight1 = tape.parameter(p.head_weight1);
  b.head_bias1 = tape.parameter(p.head_bias1);
  b.norm_gamma = tape.parameter(p.norm_gamma);
  b.norm_beta = tape.parameter(p.norm_beta);
  b.head_weight2 = tape.parameter(p.head_weight2);
  b.head_bias2 = tape.parameter(p.head_bias2);
  return b;
}

std::vector<Var> bound_list(const BoundParams& b) {
  std::vector<Var> out{b.embedding};
  for (std::size_t s = 0; s < b.update_weight.size(); ++s) {
    out.push_back(b.update_weight[s]);
    out.push_back(b.update_bias[s]);
  }
  out.insert(out.end(), {b.head_weight1, b.head_bias1, b.norm_gamma, b.norm_beta, b.head_weight2, b.head_bias2});
  return out;
}

Var initial_features(const IcdGraph& graph, Var embedding) {
  std::vector<std::int32_t> codes;
  codes.reserve(graph.n_nodes());
  for (const auto& n : graph.nodes()) codes.push_back(n.code_id);
  return ad::gather_rows(embedding, codes);
}

Var forward_bound(Tape& tape, const IcdGraph& graph, const BoundParams& bp, const ModelConfig& config) {
  if (bp.update_weight.size() != static_cast<std::size_t>(config.depth)) {
    fail(ErrorCode::ShapeMismatch, "parameter depth does not match the model config");
  }
  Var pooled;
  if (graph.empty()) {
    pooled = tape.constant(Matrix::Zero(1, config.d_graph));
  } else {
    const auto& spans = graph.spans();
    Var h0 = initial_features(graph, bp.embedding);

    // Edge weights come from the initial embeddings and stay fixed across rounds.
    std::vector<Var> weights;
    std::vector<double> decay;
    for (std::size_t i = 0; i + 1 < spans.size(); ++i) {
      weights.push_back(bucket_pair_weights(tape, h0, graph, i, config));
      decay.push_back(config.ablation.time_decay ? std::exp(-config.lambda * graph.gap(i)) : 1.0);
    }

    Var h = h0;
    for (int s = 0; s < config.depth; ++s) {
      std::vector<Var> parts;
      parts.reserve(spans.size());
      parts.push_back(ad::slice_rows(h, 0, static_cast<Eigen::Index>(spans[0].size())));
      for (std::size_t i = 1; i < spans.size(); ++i) {
        Var prev = ad::slice_rows(h, static_cast<Eigen::Index>(spans[i - 1].begin),
                                  static_cast<Eigen::Index>(spans[i - 1].size()));
        Var self = ad::slice_rows(h, static_cast<Eigen::Index>(spans[i].begin),
                                  static_cast<Eigen::Index>(spans[i].size()));
        Var message = ad::scale(ad::matmul(weights[i - 1], prev), decay[i - 1]);
        parts.push_back(ad::add(self, message));
      }
      Var x = parts.size() == 1 ? parts.front() : ad::vstack(parts);
      h = ad::relu(ad::linear(x, bp.update_weight[static_cast<std::size_t>(s)],
                              bp.update_bias[static_cast<std::size_t>(s)]));
    }
    pooled = ad::mean_pool(h);
  }

  Var hidden = ad::linear(pooled, bp.head_weight1, bp.head_bias1);
  hidden = ad::relu(ad::layer_norm(hidden, bp.norm_gamma, bp.norm_beta));
  return ad::linear(hidden, bp.head_weight2, bp.head_bias2);
}

}  // namespace

Var forward(Tape& tape, const IcdGraph& graph, const ModelParams& params, const ModelConfig& config) {
  return forward_bound(tape, graph, bind(tape, params), config);
}

double predict(const IcdGraph& graph, const ModelParams& params, const ModelConfig& config) {
  Tape tape;
  return ad::sigmoid(forward(tape, graph, params, config).scalar());
}

LossGradient loss_and_gradient(const IcdGraph& graph, int label, const ModelParams& params,
                               const ModelConfig& config) {
  Tape tape;
  const auto bound = bind(tape, params);
  Var logit = forward_bound(tape, graph, bound, config);
  Var loss = ad::bce_with_logit(logit, label);
  ad::backward(loss);

  LossGradient out;
  out.loss = loss.scalar();
  out.logit = logit.scalar();
  for (const auto& v : bound_list(bound)) out.grads.push_back(v.grad());
  return out;
}

std::vector<Matrix> incoming_weights(const IcdGraph& graph, const ModelParams& params, const ModelConfig& config) {
  std::vector<Matrix> out;
  if (graph.spans().size() < 2) return out;
  Tape tape;
  Var embedding = tape.parameter(params.embedding);
  Var h0 = initial_features(graph, embedding);
  for (std::size_t i = 0; i + 1 < graph.spans().size(); ++i) {
    out.push_back(bucket_pair_weights(tape, h0, graph, i, config).value());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Complexity

std::uint64_t count_params(const ModelConfig& c, std::size_t n_codes) {
  const std::uint64_t n = n_codes;
  const std::uint64_t dn = static_cast<std::uint64_t>(c.d_node);
  const std::uint64_t dg = static_cast<std::uint64_t>(c.d_graph);
  const std::uint64_t dh = static_cast<std::uint64_t>(c.d_hidden);
  const std::uint64_t extra_layers = static_cast<std::uint64_t>(c.depth - 1);
  return n * dn + (dn * dg + dg) + extra_layers * (dg * dg + dg) + (dg * dh + dh + 2 * dh + dh + 1);
}

const char* const kFlopConvention =
    "multiply and add each count as 1 FLOP; a d_out x d_in linear layer costs 2*d_in*d_out + d_out per row; "
    "ReLU, exp, division and square root cost 1 per element; embedding lookup is free; the weighted message "
    "sum costs 2*d per edge per round (d = d_node in round 1, d_graph afterwards)";

FlopCount count_flops(const ModelConfig& c, const GraphStats& stats) {
  const std::uint64_t v = stats.n_nodes;
  const std::uint64_t e = stats.n_edges;
  const std::uint64_t k = stats.n_buckets;
  const std::uint64_t targets = stats.n_message_targets;
  const std::uint64_t pairs = k > 0 ? k - 1 : 0;
  const auto dn = static_cast<std::uint64_t>(c.d_node);
  const auto dg = static_cast<std::uint64_t>(c.d_graph);
  const auto dh = static_cast<std::uint64_t>(c.d_hidden);

  FlopCount f;
  if (c.ablation.code_similarity) {
    // Per node: squared norm (2*d_node) and sqrt. Per edge: dot product,
    // norm product, epsilon, division and rectification.
    f.similarity = v * (2 * dn + 1) + e * (2 * dn + 4);
  }
  // Frequency scaling (CF), the floor term, the row sum and the division.
  f.edge_weights = e * ((c.ablation.frequency && c.ablation.code_similarity ? 1 : 0) + 1 + 2);

  for (int s = 0; s < c.depth; ++s) {
    const std::uint64_t width = s == 0 ? dn : dg;
    f.aggregation += 2 * e * width;
    // Decay factor per bucket pair, scaling per message, residual add.
    f.decay += (c.ablation.time_decay ? pairs + targets * width : 0) + targets * width;
    f.update += v * (2 * width * dg + dg + dg);
  }
  if (v > 0) f.pooling = v * dg + dg;
  // fc1, layer norm (mean, centering, variance, rsqrt, scaling, affine), ReLU, fc2.
  f.head = (2 * dg * dh + dh) + (8 * dh + 2) + dh + (2 * dh + 1);
  return f;
}

}  // namespace gradibd
