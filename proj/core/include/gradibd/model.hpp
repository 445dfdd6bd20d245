#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gradibd/diff_core.hpp"
#include "gradibd/icd_graph.hpp"

namespace gradibd {

/// Which signals enter message passing: code similarity (CS), code
/// occurrence frequency (CF) and time decay (TD).
struct Ablation {
  bool code_similarity = true;
  bool frequency = true;
  bool time_decay = true;

  /// CS and CF off: all edge weights equal, i.e. mean aggregation.
  bool uniform() const noexcept { return !code_similarity && !frequency; }
  std::string label() const;

  friend bool operator==(const Ablation&, const Ablation&) = default;
};

/// The six message-passing variants compared in the ablation table, in
/// reporting order: CS+CF+TD, CS+CF, CS+TD, CF+TD, TD, Uniform.
std::vector<Ablation> ablation_grid();

struct ModelConfig {
  int d_node = 64;
  int d_graph = 256;
  int depth = 3;
  double lambda = 0.3;
  int d_hidden = 128;
  Ablation ablation;
  double sim_floor = 1e-6;

  void validate() const;
};

/// Learnable weights. Update layer 0 maps d_node -> d_graph, later layers
/// d_graph -> d_graph. Biases and layer-norm affines are 1 x d rows.
struct ModelParams {
  ad::Matrix embedding;
  std::vector<ad::Matrix> update_weight;
  std::vector<ad::Matrix> update_bias;
  ad::Matrix head_weight1;
  ad::Matrix head_bias1;
  ad::Matrix norm_gamma;
  ad::Matrix norm_beta;
  ad::Matrix head_weight2;
  ad::Matrix head_bias2;

  /// Deterministic initialization: N(0, 1) embeddings, U(-1/sqrt(fan_in),
  /// 1/sqrt(fan_in)) linear layers, identity layer norm.
  static ModelParams init(const ModelConfig& config, std::size_t n_codes, std::uint64_t seed);

  /// All tensors with stable names, in a fixed order shared by gradients,
  /// optimizer state and checkpoints.
  std::vector<ad::ParamRef> refs();
  std::vector<const ad::Matrix*> tensors() const;
  std::vector<std::string> names() const;
  std::size_t size() const;

  friend bool operator==(const ModelParams&, const ModelParams&);
};

/// Raw weight of one edge: freq * max(cos(src, dst), 0) + sim_floor, with
/// freq -> 1 when CF is off and the similarity factor -> 1 when CS is off.
ad::Var edge_weight(double freq, ad::Var src_embed, ad::Var dst_embed, const ModelConfig& config);

/// Normalizes raw incoming weights of one node to sum to one.
std::vector<double> normalize_incoming(const std::vector<double>& raw_weights);

/// Message-passing network over one graph; returns the 1 x 1 logit.
/// Parameters are bound to `tape` by reference.
ad::Var forward(ad::Tape& tape, const IcdGraph& graph, const ModelParams& params,
                const ModelConfig& config);

/// Probability of the positive class.
double predict(const IcdGraph& graph, const ModelParams& params, const ModelConfig& config);

struct LossGradient {
  double loss = 0.0;
  double logit = 0.0;
  std::vector<ad::Matrix> grads;
};

LossGradient loss_and_gradient(const IcdGraph& graph, int label, const ModelParams& params,
                               const ModelConfig& config);

/// Normalized incoming weight matrices, one per consecutive bucket pair:
/// entry (t, s) is the weight from node s of span i to node t of span i+1.
std::vector<ad::Matrix> incoming_weights(const IcdGraph& graph, const ModelParams& params,
                                         const ModelConfig& config);

// Complexity accounting.

std::uint64_t count_params(const ModelConfig& config, std::size_t n_codes);

struct FlopCount {
  std::uint64_t similarity = 0;
  std::uint64_t edge_weights = 0;
  std::uint64_t aggregation = 0;
  std::uint64_t decay = 0;
  std::uint64_t update = 0;
  std::uint64_t pooling = 0;
  std::uint64_t head = 0;

  std::uint64_t total() const noexcept {
    return similarity + edge_weights + aggregation + decay + update + pooling + head;
  }
};

/// Counting convention, printed next to every FLOP figure.
extern const char* const kFlopConvention;

FlopCount count_flops(const ModelConfig& config, const GraphStats& stats);

}  // namespace gradibd
