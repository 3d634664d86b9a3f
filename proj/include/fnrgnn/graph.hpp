#pragma once

#include "fnrgnn/tensor.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace fnr {

using Edge = std::pair<std::size_t, std::size_t>;

/// Attributed undirected graph. Validated on construction and immutable after.
///
/// Edges are stored once per undirected pair as (min, max), sorted. Duplicate
/// pairs (in either orientation) and self-loops are rejected; use the loader
/// for lenient ingestion.
class Graph {
 public:
  Graph(Tensor features, std::vector<Edge> edges, std::vector<int> sensitive, std::vector<double> targets);

  std::size_t num_nodes() const noexcept { return features_.rows(); }
  std::size_t feature_dim() const noexcept { return features_.cols(); }
  const Tensor& features() const noexcept { return features_; }
  const std::vector<Edge>& edges() const noexcept { return edges_; }
  const std::vector<int>& sensitive() const noexcept { return sensitive_; }
  const std::vector<double>& targets() const noexcept { return targets_; }

  // Same topology, groups and targets with a different feature matrix.
  Graph with_features(Tensor features) const;

  friend bool operator==(const Graph&, const Graph&) = default;

 private:
  Tensor features_;
  std::vector<Edge> edges_;
  std::vector<int> sensitive_;
  std::vector<double> targets_;
};

struct ReweightConfig {
  double gamma = 1.0;
  double weight_floor = 1e-3;

  void validate() const;
};

struct ReweightStats {
  // Edges whose endpoints both had zero-norm features.
  std::size_t degenerate_pairs = 0;
};

/// Fairness-adjusted raw edge weight:
///   max(clamp(cos(x_i, x_j), floor, 1) * exp(-gamma * [s_i != s_j]), floor)
double compute_edge_weight(std::span<const double> xi, std::span<const double> xj, int si, int sj,
                           const ReweightConfig& cfg, ReweightStats* stats = nullptr);

/// Symmetric-normalized adjacency with unit self-loops:
/// w'_ij = a_ij / sqrt(deg(i) deg(j)), deg(i) = sum_j a_ij including the self-loop.
class ReweightedAdjacency {
 public:
  ReweightedAdjacency() = default;
  explicit ReweightedAdjacency(CsrMatrix matrix) : matrix_(std::move(matrix)) {}

  std::size_t num_nodes() const noexcept { return matrix_.rows(); }
  const CsrMatrix& matrix() const noexcept { return matrix_; }
  std::vector<CsrMatrix::Entry> entries() const { return matrix_.entries(); }

 private:
  CsrMatrix matrix_;
};

// Raw (pre-normalization) per-edge weights in Graph::edges() order.
std::vector<double> raw_edge_weights(const Graph& g, const ReweightConfig& cfg, ReweightStats* stats = nullptr);

// Normalizes the given raw per-edge weights (Graph::edges() order). Every
// node receives a self-loop of self_loop_weight before normalization.
ReweightedAdjacency normalize_adjacency(const Graph& g, std::span<const double> raw_weights,
                                        double self_loop_weight = 1.0);

ReweightedAdjacency build_reweighted_adjacency(const Graph& g, const ReweightConfig& cfg,
                                               ReweightStats* stats = nullptr);

// Plain GCN adjacency: every edge weight 1 before normalization.
ReweightedAdjacency build_plain_adjacency(const Graph& g);

}  // namespace fnr
