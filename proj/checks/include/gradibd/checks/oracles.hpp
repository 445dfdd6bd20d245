#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gradibd/bucketizer.hpp"
#include "gradibd/icd_graph.hpp"
#include "gradibd/metrics.hpp"
#include "gradibd/model.hpp"
#include "gradibd/random.hpp"

// Reference implementations kept deliberately naive. They share no code with
// the library paths they are compared against.
namespace gradibd::checks {

/// Fraction of (positive, negative) pairs ordered correctly, ties worth 1/2.
double pairwise_auroc(std::span<const double> scores, std::span<const int> labels);

/// Walks positives in original order; item j outranks i when its score is
/// higher, or equal with a smaller index.
double rank_walk_ap(std::span<const double> scores, std::span<const int> labels);

/// Hand-rolled t-interval using a caller-supplied critical value.
MetricSummary t_interval_formula(std::span<const double> values, double t_critical);

struct DenseCounts {
  std::size_t n_nodes = 0;
  std::size_t n_edges = 0;
};

/// Node and edge counts from a dense code x bucket array.
DenseCounts dense_graph_counts(const BucketMatrix& matrix);

/// Logit of the uniform-weight network using plain loops: every message is
/// the arithmetic mean of the previous bucket's features.
double mean_aggregator_logit(const IcdGraph& graph, const ModelParams& params, const ModelConfig& config);

/// Closed-form parameter count from the shapes actually allocated by init.
std::uint64_t allocated_param_count(const ModelConfig& config, std::size_t n_codes);

struct GradientCheck {
  double max_rel_error = 0.0;
  std::size_t n_checked = 0;
  std::string worst_tensor;
};

/// Compares every analytic parameter gradient of the BCE loss with central
/// differences. Relative error is |a - n| / max(|a|, |n|, floor).
GradientCheck finite_difference_check(const IcdGraph& graph, int label, const ModelParams& params,
                                      const ModelConfig& config, double step = 1e-5, double floor = 1e-6);

/// Random sparse matrix with at most `max_nodes` cells spread over at most
/// `max_nonempty` distinct buckets out of `n_buckets`.
BucketMatrix random_bucket_matrix(Rng& rng, std::size_t n_codes, std::int32_t n_buckets, std::size_t max_nodes,
                                  std::size_t max_nonempty, int max_frequency = 5);

}  // namespace gradibd::checks
