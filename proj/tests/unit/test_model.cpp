#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "gradibd/checks/oracles.hpp"
#include "gradibd/model.hpp"
#include "gradibd/random.hpp"
#include "test_util.hpp"

namespace gradibd {
namespace {

using ad::Matrix;
using testing::error_code_of;

ModelConfig small_config(Ablation ablation = {}) {
  ModelConfig c;
  c.d_node = 4;
  c.d_graph = 5;
  c.depth = 2;
  c.d_hidden = 3;
  c.ablation = ablation;
  return c;
}

Matrix row(std::initializer_list<double> values) {
  Matrix m(1, static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double v : values) m(0, i++) = v;
  return m;
}

IcdGraph graph_of(std::size_t n_codes, const std::vector<BucketEntry>& entries, std::int32_t n_buckets = 20) {
  return build_graph(BucketMatrix::from_entries(n_codes, n_buckets, 7, entries));
}

void randomize_norm(ModelParams& p, Rng& rng) {
  std::uniform_real_distribution<double> u(0.5, 1.5);
  for (Eigen::Index j = 0; j < p.norm_gamma.cols(); ++j) {
    p.norm_gamma(0, j) = u(rng);
    p.norm_beta(0, j) = u(rng) - 1.0;
  }
}

TEST(EdgeWeight, ClosedForms) {
  ad::Tape tape;
  const ModelConfig c;
  const auto same = tape.constant(row({0.3, -1.2}));
  EXPECT_NEAR(edge_weight(3, same, same, c).scalar(), 3 + c.sim_floor, 1e-11);
  EXPECT_NEAR(edge_weight(7, tape.constant(row({1, 0})), tape.constant(row({0, 2})), c).scalar(), c.sim_floor,
              1e-15);
  EXPECT_NEAR(edge_weight(2, tape.constant(row({1, 0})), tape.constant(row({1, 1})), c).scalar(), 1.41422, 1e-5);
  EXPECT_NEAR(edge_weight(2, tape.constant(row({1, 0})), tape.constant(row({-1, 0})), c).scalar(), c.sim_floor,
              1e-15);
}

TEST(EdgeWeight, AblationsDropFactors) {
  ad::Tape tape;
  const auto a = tape.constant(row({1, 0}));
  const auto b = tape.constant(row({1, 1}));
  EXPECT_NEAR(edge_weight(2, a, b, small_config({true, false, true})).scalar(), std::sqrt(0.5) + 1e-6, 1e-12);
  EXPECT_NEAR(edge_weight(2, a, b, small_config({false, true, true})).scalar(), 2 + 1e-6, 1e-12);
  EXPECT_NEAR(edge_weight(2, a, b, small_config({false, false, true})).scalar(), 1 + 1e-6, 1e-12);
}

TEST(NormalizeIncoming, Examples) {
  EXPECT_EQ(normalize_incoming({4.2}), std::vector<double>{1.0});
  const auto thirds = normalize_incoming({0.7, 0.7, 0.7});
  for (double w : thirds) EXPECT_NEAR(w, 1.0 / 3.0, 1e-15);
  EXPECT_EQ(normalize_incoming({1, 3}), (std::vector<double>{0.25, 0.75}));
  EXPECT_EQ(error_code_of([] { normalize_incoming({}); }), ErrorCode::EmptyIncoming);
}

TEST(IncomingWeights, RowsAreConvexUnderEveryAblation) {
  auto rng = make_rng(31);
  for (const auto& ablation : ablation_grid()) {
    const auto c = small_config(ablation);
    const auto params = ModelParams::init(c, 10, 3);
    for (int i = 0; i < 30; ++i) {
      const auto g = build_graph(checks::random_bucket_matrix(rng, 10, 30, 16, 4));
      for (const auto& w : incoming_weights(g, params, c)) {
        EXPECT_GE(w.minCoeff(), 0.0);
        for (Eigen::Index r = 0; r < w.rows(); ++r) EXPECT_NEAR(w.row(r).sum(), 1.0, 1e-12);
      }
    }
  }
}

TEST(Forward, ZeroLambdaMatchesNoDecay) {
  auto rng = make_rng(32);
  auto on = small_config();
  on.lambda = 0.0;
  auto off = on;
  off.ablation.time_decay = false;
  const auto params = ModelParams::init(on, 10, 4);
  for (int i = 0; i < 20; ++i) {
    const auto g = build_graph(checks::random_bucket_matrix(rng, 10, 40, 16, 5));
    ad::Tape t1, t2;
    EXPECT_EQ(forward(t1, g, params, on).scalar(), forward(t2, g, params, off).scalar());
  }
}

// Depth-1 network on one source node and one target node, written out by hand.
double two_node_logit(const ModelParams& p, CodeId src, CodeId dst, double decay) {
  auto update = [&](const Matrix& x) {
    return Matrix((x * p.update_weight[0].transpose() + p.update_bias[0]).cwiseMax(0.0));
  };
  const Matrix h_src = update(p.embedding.row(src));
  const Matrix h_dst = update(p.embedding.row(dst) + decay * p.embedding.row(src));
  const Matrix pooled = (h_src + h_dst) / 2.0;
  const Matrix z = pooled * p.head_weight1.transpose() + p.head_bias1;
  const double mean = z.mean();
  const double var = (z.array() - mean).square().mean();
  const Matrix xhat = ((z.array() - mean) / std::sqrt(var + ad::kLayerNormEps)).matrix();
  const Matrix hidden = (xhat.array() * p.norm_gamma.array() + p.norm_beta.array()).cwiseMax(0.0).matrix();
  return (hidden * p.head_weight2.transpose() + p.head_bias2)(0, 0);
}

TEST(Forward, DecayUsesBucketGap) {
  EXPECT_NEAR(std::exp(-0.3 * 1), 0.740818, 1e-6);
  auto c = small_config();
  c.depth = 1;
  c.lambda = 0.3;
  auto p = ModelParams::init(c, 4, 5);
  auto rng = make_rng(33);
  randomize_norm(p, rng);
  for (int gap : {1, 2, 7}) {
    const auto g = graph_of(4, {{1, 3, 2}, {2, 3 + gap, 1}});
    ad::Tape tape;
    EXPECT_NEAR(forward(tape, g, p, c).scalar(), two_node_logit(p, 1, 2, std::exp(-0.3 * gap)), 1e-12);
  }
  c.ablation.time_decay = false;
  ad::Tape tape;
  EXPECT_NEAR(forward(tape, graph_of(4, {{1, 3, 2}, {2, 9, 1}}), p, c).scalar(), two_node_logit(p, 1, 2, 1.0),
              1e-12);
}

TEST(Forward, SingleNodeHasNoAggregationPath) {
  auto c = small_config();
  c.depth = 1;
  const auto p = ModelParams::init(c, 4, 6);
  ad::Tape tape;
  const auto logit = forward(tape, graph_of(4, {{3, 0, 5}}), p, c).scalar();
  auto q = p;
  q.embedding.row(0).setConstant(9.0);
  ad::Tape tape2;
  EXPECT_EQ(forward(tape2, graph_of(4, {{3, 0, 1}}), q, c).scalar(), logit);
}

TEST(Forward, UniformMatchesMeanOracle) {
  auto rng = make_rng(34);
  for (int i = 0; i < 100; ++i) {
    const auto c = small_config({false, false, i % 2 == 0});
    auto p = ModelParams::init(c, 12, static_cast<std::uint64_t>(i));
    randomize_norm(p, rng);
    const auto g = build_graph(checks::random_bucket_matrix(rng, 12, 40, 20, 2 + i % 4));
    ad::Tape tape;
    EXPECT_NEAR(forward(tape, g, p, c).scalar(), checks::mean_aggregator_logit(g, p, c), 1e-12);
  }
}

TEST(Forward, PermutingCodeIdsLeavesLogitUnchanged) {
  auto rng = make_rng(35);
  const std::size_t n = 9;
  for (const auto& ablation : ablation_grid()) {
    const auto c = small_config(ablation);
    const auto p = ModelParams::init(c, n, 7);
    std::vector<CodeId> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    shuffle_in_place(perm, rng);
    auto q = p;
    for (std::size_t k = 0; k < n; ++k) q.embedding.row(perm[k]) = p.embedding.row(static_cast<Eigen::Index>(k));
    const auto m = checks::random_bucket_matrix(rng, n, 30, 15, 4);
    std::vector<BucketEntry> renamed;
    for (const auto& [key, f] : m.entries()) renamed.push_back({perm[static_cast<std::size_t>(key.second)], key.first, f});
    ad::Tape t1, t2;
    EXPECT_NEAR(forward(t1, build_graph(m), p, c).scalar(),
                forward(t2, build_graph(BucketMatrix::from_entries(n, 30, 7, renamed)), q, c).scalar(), 1e-12);
  }
}

TEST(Forward, EmptyGraphUsesZeroPool) {
  const auto c = small_config();
  const auto p = ModelParams::init(c, 4, 8);
  ad::Tape tape;
  const auto logit = forward(tape, IcdGraph(), p, c).scalar();
  EXPECT_TRUE(std::isfinite(logit));
  auto q = p;
  q.embedding.setRandom();
  ad::Tape tape2;
  EXPECT_EQ(forward(tape2, IcdGraph(), q, c).scalar(), logit);
}

TEST(Gradients, MatchFiniteDifferences) {
  auto rng = make_rng(36);
  for (const auto& ablation : ablation_grid()) {
    const auto c = small_config(ablation);
    auto p = ModelParams::init(c, 8, 9);
    randomize_norm(p, rng);
    for (int i = 0; i < 4; ++i) {
      const auto g = build_graph(checks::random_bucket_matrix(rng, 8, 20, 8, 3));
      const auto check = checks::finite_difference_check(g, i % 2, p, c);
      EXPECT_LT(check.max_rel_error, 1e-4) << ablation.label() << " " << check.worst_tensor;
    }
  }
}

TEST(Gradients, EmbeddingReceivesSimilarityPath) {
  auto c = small_config();
  c.depth = 1;
  const auto p = ModelParams::init(c, 5, 10);
  // Two sources so the normalized weights depend on the similarities.
  const auto g = graph_of(5, {{0, 1, 1}, {1, 1, 2}, {2, 2, 1}});
  const auto with_sim = loss_and_gradient(g, 1, p, c).grads[0];
  auto no_sim = c;
  no_sim.ablation.code_similarity = false;
  const auto without_sim = loss_and_gradient(g, 1, p, no_sim).grads[0];
  EXPECT_GT(with_sim.row(0).norm(), 0.0);
  EXPECT_GT((with_sim.row(0) - without_sim.row(0)).norm(), 1e-8);
  EXPECT_LT(checks::finite_difference_check(g, 1, p, c).max_rel_error, 1e-4);
}

TEST(ModelParams, DeterministicInitAndStableNames) {
  const auto c = small_config();
  EXPECT_EQ(ModelParams::init(c, 6, 1), ModelParams::init(c, 6, 1));
  EXPECT_FALSE(ModelParams::init(c, 6, 1) == ModelParams::init(c, 6, 2));
  auto p = ModelParams::init(c, 6, 1);
  EXPECT_EQ(p.refs().size(), p.names().size());
  EXPECT_EQ(p.names().front(), "embedding");
  EXPECT_EQ(p.size(), count_params(c, 6));
}

TEST(CountParams, HandSummedExample) {
  ModelConfig c;
  c.d_node = 2;
  c.d_graph = 2;
  c.depth = 1;
  c.d_hidden = 2;
  EXPECT_EQ(count_params(c, 2), 23u);
  EXPECT_EQ(ModelParams::init(c, 2, 0).size(), 23u);
}

TEST(CountParams, AgreesWithAllocationAndScalesWithVocab) {
  for (std::size_t n : {1u, 17u, 1983u}) {
    const ModelConfig c;
    EXPECT_EQ(count_params(c, n), checks::allocated_param_count(c, n));
    EXPECT_EQ(count_params(c, 2 * n) - count_params(c, n), n * static_cast<std::uint64_t>(c.d_node));
  }
}

TEST(CountFlops, EmptyGraphIsHeadOnly) {
  const ModelConfig c;
  const auto f = count_flops(c, GraphStats{});
  EXPECT_EQ(f.total(), f.head);
  EXPECT_GT(f.head, 0u);
}

TEST(CountFlops, AggregationIsLinearInEdges) {
  const ModelConfig c;
  GraphStats s{.n_nodes = 30, .n_edges = 50, .n_buckets = 6, .mean_gap = 2.0, .max_in_degree = 5,
               .n_message_targets = 24};
  const auto a = count_flops(c, s);
  s.n_edges *= 2;
  const auto b = count_flops(c, s);
  EXPECT_EQ(b.aggregation, 2 * a.aggregation);
  EXPECT_EQ(b.update, a.update);
}

TEST(ModelConfig, Validation) {
  auto c = small_config();
  c.depth = 0;
  EXPECT_EQ(error_code_of([&] { c.validate(); }), ErrorCode::ConfigError);
}

}  // namespace
}  // namespace gradibd
