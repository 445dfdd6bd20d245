#include <gtest/gtest.h>

#include "gradibd/checks/oracles.hpp"
#include "gradibd/icd_graph.hpp"
#include "gradibd/random.hpp"
#include "test_util.hpp"

namespace gradibd {
namespace {

using testing::error_code_of;

// A=0, B=1 in bucket 2; C=2 in bucket 5.
BucketMatrix three_nodes() {
  return BucketMatrix::from_entries(4, 10, 7, {{0, 2, 1}, {1, 2, 3}, {2, 5, 2}});
}

TEST(BuildGraph, CartesianProductBetweenConsecutiveBuckets) {
  const auto g = build_graph(three_nodes());
  EXPECT_EQ(g.n_nodes(), 3u);
  EXPECT_EQ(g.n_edges(), 2u);
  const auto edges = g.edges();
  ASSERT_EQ(edges.size(), 2u);
  EXPECT_EQ(g.nodes()[edges[0].source].code_id, 0);
  EXPECT_EQ(g.nodes()[edges[1].source].code_id, 1);
  EXPECT_EQ(g.nodes()[edges[0].target].code_id, 2);
  EXPECT_EQ(g.nodes()[edges[1].target].code_id, 2);
  EXPECT_EQ(g.nodes()[1].frequency, 3);
  EXPECT_EQ(g.gap(0), 3);
}

TEST(BuildGraph, SingleBucketHasNoEdges) {
  const auto g = build_graph(BucketMatrix::from_entries(4, 10, 7, {{0, 1, 1}, {3, 1, 1}}));
  EXPECT_EQ(g.n_nodes(), 2u);
  EXPECT_EQ(g.n_edges(), 0u);
  EXPECT_TRUE(g.edges().empty());
}

TEST(BuildGraph, OnlyAdjacentBucketsConnect) {
  const auto g = build_graph(BucketMatrix::from_entries(3, 10, 7, {{0, 0, 1}, {1, 4, 1}, {2, 9, 1}}));
  EXPECT_EQ(g.n_edges(), 2u);
  for (const auto& e : g.edges()) {
    EXPECT_EQ(e.target, e.source + 1);
  }
}

TEST(GraphStats, MeanGapAndDegrees) {
  const auto s = graph_stats(build_graph(three_nodes()));
  EXPECT_EQ(s.n_nodes, 3u);
  EXPECT_EQ(s.n_edges, 2u);
  EXPECT_EQ(s.n_buckets, 2u);
  EXPECT_DOUBLE_EQ(s.mean_gap, 3.0);
  EXPECT_EQ(s.max_in_degree, 2u);
  EXPECT_EQ(s.n_message_targets, 1u);
}

TEST(GraphStats, EmptyGraphIsAllZeros) {
  const auto g = build_graph(BucketMatrix(4, 10, 7));
  EXPECT_TRUE(g.empty());
  const auto s = graph_stats(g);
  EXPECT_EQ(s.n_nodes, 0u);
  EXPECT_EQ(s.n_edges, 0u);
  EXPECT_EQ(s.n_buckets, 0u);
  EXPECT_EQ(s.mean_gap, 0.0);
  EXPECT_EQ(s.max_in_degree, 0u);
}

TEST(BuildGraph, CountsMatchDenseOracle) {
  auto rng = make_rng(21, {2});
  for (int i = 0; i < 300; ++i) {
    const auto m = checks::random_bucket_matrix(rng, 12, 40, 25, 6);
    const auto g = build_graph(m);
    const auto dense = checks::dense_graph_counts(m);
    EXPECT_EQ(g.n_nodes(), dense.n_nodes);
    EXPECT_EQ(g.n_edges(), dense.n_edges);
    EXPECT_EQ(g.edges().size(), g.n_edges());
  }
}

TEST(GraphJson, RoundTrip) {
  auto rng = make_rng(22, {2});
  for (int i = 0; i < 50; ++i) {
    const auto g = build_graph(checks::random_bucket_matrix(rng, 9, 30, 20, 5));
    EXPECT_EQ(graph_from_json(graph_to_json(g)), g);
  }
}

TEST(GraphJson, RejectsMalformedDocuments) {
  EXPECT_EQ(error_code_of([] { graph_from_json("{"); }), ErrorCode::FormatError);
  EXPECT_EQ(error_code_of([] { graph_from_json(R"({"version":9,"tau":7,"buckets":[]})"); }),
            ErrorCode::FormatError);
  EXPECT_EQ(error_code_of([] {
              graph_from_json(
                  R"({"version":1,"tau":7,"buckets":[{"bucket_index":3,"nodes":[{"code_id":1,"frequency":1}]},)"
                  R"({"bucket_index":2,"nodes":[{"code_id":1,"frequency":1}]}]})");
            }),
            ErrorCode::FormatError);
}

}  // namespace
}  // namespace gradibd
