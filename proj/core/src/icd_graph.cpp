#include "gradibd/icd_graph.hpp"

#include <algorithm>

#include <nlohmann/json.hpp>

#include "gradibd/error.hpp"

namespace gradibd {

std::size_t IcdGraph::n_edges() const noexcept {
  std::size_t n = 0;
  for (std::size_t i = 0; i + 1 < spans_.size(); ++i) n += spans_[i].size() * spans_[i + 1].size();
  return n;
}

std::int32_t IcdGraph::gap(std::size_t span_index) const {
  if (span_index + 1 >= spans_.size()) {
    fail(ErrorCode::InvariantViolation, "gap requested past the last bucket");
  }
  return spans_[span_index + 1].bucket - spans_[span_index].bucket;
}

std::vector<Edge> IcdGraph::edges() const {
  std::vector<Edge> out;
  out.reserve(n_edges());
  for (std::size_t i = 0; i + 1 < spans_.size(); ++i) {
    for (auto s = spans_[i].begin; s < spans_[i].end; ++s) {
      for (auto t = spans_[i + 1].begin; t < spans_[i + 1].end; ++t) out.push_back({s, t});
    }
  }
  return out;
}

IcdGraph build_graph(const BucketMatrix& matrix) {
  IcdGraph g;
  g.tau_ = matrix.tau();
  g.nodes_.reserve(matrix.entries().size());
  // entries() is ordered by (bucket, code), which is the canonical node order.
  for (const auto& [key, freq] : matrix.entries()) {
    const auto [bucket, code] = key;
    if (g.spans_.empty() || g.spans_.back().bucket != bucket) {
      g.spans_.push_back({bucket, g.nodes_.size(), g.nodes_.size()});
    }
    g.nodes_.push_back({code, bucket, freq});
    g.spans_.back().end = g.nodes_.size();
  }
  return g;
}

GraphStats graph_stats(const IcdGraph& graph) {
  GraphStats s;
  s.n_nodes = graph.n_nodes();
  s.n_edges = graph.n_edges();
  s.n_buckets = graph.spans().size();
  if (s.n_buckets > 1) {
    const auto& spans = graph.spans();
    s.mean_gap = static_cast<double>(spans.back().bucket - spans.front().bucket) /
                 static_cast<double>(s.n_buckets - 1);
    for (std::size_t i = 0; i + 1 < spans.size(); ++i) s.max_in_degree = std::max(s.max_in_degree, spans[i].size());
    s.n_message_targets = s.n_nodes - spans.front().size();
  }
  return s;
}

std::string graph_to_json(const IcdGraph& graph) {
  nlohmann::ordered_json j;
  j["version"] = kGraphFormatVersion;
  j["tau"] = graph.tau();
  auto buckets = nlohmann::ordered_json::array();
  for (const auto& span : graph.spans()) {
    nlohmann::ordered_json b;
    b["bucket_index"] = span.bucket;
    auto nodes = nlohmann::ordered_json::array();
    for (auto i = span.begin; i < span.end; ++i) {
      nodes.push_back({{"code_id", graph.nodes()[i].code_id}, {"frequency", graph.nodes()[i].frequency}});
    }
    b["nodes"] = std::move(nodes);
    buckets.push_back(std::move(b));
  }
  j["buckets"] = std::move(buckets);
  return j.dump();
}

IcdGraph graph_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorCode::FormatError, std::string("graph json: ") + e.what());
  }
  try {
    if (j.at("version").get<int>() != kGraphFormatVersion) {
      fail(ErrorCode::FormatError, "unsupported graph format version");
    }
    IcdGraph g;
    g.tau_ = j.at("tau").get<int>();
    std::int32_t previous = -1;
    for (const auto& b : j.at("buckets")) {
      const auto bucket = b.at("bucket_index").get<std::int32_t>();
      if (bucket <= previous) fail(ErrorCode::FormatError, "graph buckets must be strictly increasing");
      previous = bucket;
      BucketSpan span{bucket, g.nodes_.size(), g.nodes_.size()};
      CodeId last_code = -1;
      for (const auto& n : b.at("nodes")) {
        GraphNode node{n.at("code_id").get<CodeId>(), bucket, n.at("frequency").get<std::int32_t>()};
        if (node.frequency < 1) fail(ErrorCode::FormatError, "graph node frequency must be positive");
        if (node.code_id <= last_code) fail(ErrorCode::FormatError, "graph nodes must be sorted by code id");
        last_code = node.code_id;
        g.nodes_.push_back(node);
      }
      span.end = g.nodes_.size();
      if (span.size() == 0) fail(ErrorCode::FormatError, "graph bucket without nodes");
      g.spans_.push_back(span);
    }
    return g;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::FormatError, std::string("graph json: ") + e.what());
  }
}

}  // namespace gradibd
