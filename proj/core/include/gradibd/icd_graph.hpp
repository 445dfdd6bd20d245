#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "gradibd/bucketizer.hpp"

namespace gradibd {

struct GraphNode {
  CodeId code_id = 0;
  std::int32_t bucket = 0;
  std::int32_t frequency = 0;

  friend bool operator==(const GraphNode&, const GraphNode&) = default;
};

/// Contiguous run of nodes that share one non-empty bucket.
struct BucketSpan {
  std::int32_t bucket = 0;
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const noexcept { return end - begin; }
  friend bool operator==(const BucketSpan&, const BucketSpan&) = default;
};

struct Edge {
  std::size_t source = 0;
  std::size_t target = 0;
};

/// Temporally directed patient graph. Nodes are ordered by (bucket, code id);
/// every node of span i points to every node of span i+1. Edges are implied
/// by the spans and never stored.
class IcdGraph {
 public:
  IcdGraph() = default;

  const std::vector<GraphNode>& nodes() const noexcept { return nodes_; }
  const std::vector<BucketSpan>& spans() const noexcept { return spans_; }
  int tau() const noexcept { return tau_; }

  std::size_t n_nodes() const noexcept { return nodes_.size(); }
  std::size_t n_edges() const noexcept;
  bool empty() const noexcept { return nodes_.empty(); }

  /// Gap b_{i+1} - b_i in bucket units between span i and span i+1.
  std::int32_t gap(std::size_t span_index) const;

  /// Materialized edge list, for tests and export only.
  std::vector<Edge> edges() const;

  friend bool operator==(const IcdGraph&, const IcdGraph&) = default;

 private:
  friend IcdGraph build_graph(const BucketMatrix& matrix);
  friend IcdGraph graph_from_json(const std::string& text);

  std::vector<GraphNode> nodes_;
  std::vector<BucketSpan> spans_;
  int tau_ = kDefaultTau;
};

IcdGraph build_graph(const BucketMatrix& matrix);

struct GraphStats {
  std::size_t n_nodes = 0;
  std::size_t n_edges = 0;
  std::size_t n_buckets = 0;
  double mean_gap = 0.0;
  std::size_t max_in_degree = 0;
  /// Nodes outside the first bucket, i.e. nodes that receive messages.
  std::size_t n_message_targets = 0;
};

GraphStats graph_stats(const IcdGraph& graph);

inline constexpr int kGraphFormatVersion = 1;

/// JSON interchange: {"version", "tau", "buckets": [{"bucket_index", "nodes":
/// [{"code_id", "frequency"}]}]}.
std::string graph_to_json(const IcdGraph& graph);
IcdGraph graph_from_json(const std::string& text);

}  // namespace gradibd
