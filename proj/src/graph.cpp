#include "fnrgnn/graph.hpp"

#include "fnrgnn/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace fnr {

Graph::Graph(Tensor features, std::vector<Edge> edges, std::vector<int> sensitive, std::vector<double> targets)
    : features_(std::move(features)), sensitive_(std::move(sensitive)), targets_(std::move(targets)) {
  const std::size_t n = features_.rows();
  if (sensitive_.size() != n) {
    throw std::invalid_argument("Graph: sensitive vector has " + std::to_string(sensitive_.size()) +
                                " entries, expected " + std::to_string(n));
  }
  if (targets_.size() != n) {
    throw std::invalid_argument("Graph: target vector has " + std::to_string(targets_.size()) + " entries, expected " +
                                std::to_string(n));
  }
  if (!features_.all_finite()) throw std::invalid_argument("Graph: features contain non-finite values");
  for (std::size_t i = 0; i < n; ++i) {
    if (sensitive_[i] != 0 && sensitive_[i] != 1) {
      throw std::invalid_argument("Graph: sensitive value of node " + std::to_string(i) + " is " +
                                  std::to_string(sensitive_[i]) + ", expected 0 or 1");
    }
  }
  edges_.reserve(edges.size());
  for (auto [a, b] : edges) {
    if (a >= n || b >= n) {
      throw std::invalid_argument("Graph: edge (" + std::to_string(a) + ", " + std::to_string(b) +
                                  ") references a node outside [0, " + std::to_string(n) + ")");
    }
    if (a == b) throw std::invalid_argument("Graph: self-loop on node " + std::to_string(a));
    edges_.emplace_back(std::min(a, b), std::max(a, b));
  }
  std::sort(edges_.begin(), edges_.end());
  if (auto dup = std::adjacent_find(edges_.begin(), edges_.end()); dup != edges_.end()) {
    throw std::invalid_argument("Graph: duplicate edge (" + std::to_string(dup->first) + ", " +
                                std::to_string(dup->second) + ")");
  }
}

Graph Graph::with_features(Tensor features) const {
  if (features.rows() != num_nodes()) throw std::invalid_argument("Graph::with_features: row count mismatch");
  return Graph(std::move(features), edges_, sensitive_, targets_);
}

void ReweightConfig::validate() const {
  if (!(gamma >= 0.0)) throw std::invalid_argument("ReweightConfig: gamma must be >= 0");
  if (!(weight_floor > 0.0 && weight_floor <= 1.0)) {
    throw std::invalid_argument("ReweightConfig: weight_floor must be in (0, 1]");
  }
}

double compute_edge_weight(std::span<const double> xi, std::span<const double> xj, int si, int sj,
                           const ReweightConfig& cfg, ReweightStats* stats) {
  if (xi.size() != xj.size()) throw std::invalid_argument("compute_edge_weight: feature length mismatch");
  const double dot = kernels::dot(xi.data(), xj.data(), xi.size());
  const double ni = std::sqrt(kernels::dot(xi.data(), xi.data(), xi.size()));
  const double nj = std::sqrt(kernels::dot(xj.data(), xj.data(), xj.size()));
  double sim = cfg.weight_floor;
  if (ni > 0.0 && nj > 0.0) {
    sim = std::clamp(dot / (ni * nj), cfg.weight_floor, 1.0);
  } else if (stats != nullptr && ni == 0.0 && nj == 0.0) {
    ++stats->degenerate_pairs;
  }
  // A single zero vector has cosine 0 against anything, which clamps to the floor as well.
  // The penalized weight is floored too so cross-group edges never vanish.
  return si != sj ? std::max(sim * std::exp(-cfg.gamma), cfg.weight_floor) : sim;
}

std::vector<double> raw_edge_weights(const Graph& g, const ReweightConfig& cfg, ReweightStats* stats) {
  cfg.validate();
  std::vector<double> w;
  w.reserve(g.edges().size());
  const auto& x = g.features();
  for (auto [i, j] : g.edges()) {
    w.push_back(compute_edge_weight(x.row(i), x.row(j), g.sensitive()[i], g.sensitive()[j], cfg, stats));
  }
  return w;
}

ReweightedAdjacency normalize_adjacency(const Graph& g, std::span<const double> raw_weights,
                                        double self_loop_weight) {
  const std::size_t n = g.num_nodes();
  if (raw_weights.size() != g.edges().size()) throw std::invalid_argument("normalize_adjacency: weight count mismatch");
  if (!(self_loop_weight > 0.0)) throw std::invalid_argument("normalize_adjacency: self-loop weight must be positive");
  std::vector<double> degree(n, self_loop_weight);
  for (std::size_t k = 0; k < raw_weights.size(); ++k) {
    const double w = raw_weights[k];
    if (!(w > 0.0) || !std::isfinite(w)) throw std::invalid_argument("normalize_adjacency: weights must be positive");
    degree[g.edges()[k].first] += w;
    degree[g.edges()[k].second] += w;
  }

  std::vector<CsrMatrix::Entry> entries;
  entries.reserve(n + 2 * raw_weights.size());
  for (std::size_t i = 0; i < n; ++i) entries.push_back({i, i, self_loop_weight / degree[i]});
  for (std::size_t k = 0; k < raw_weights.size(); ++k) {
    const auto [i, j] = g.edges()[k];
    const double w = raw_weights[k] / std::sqrt(degree[i] * degree[j]);
    entries.push_back({i, j, w});
    entries.push_back({j, i, w});
  }
  return ReweightedAdjacency(CsrMatrix(n, n, std::move(entries)));
}

ReweightedAdjacency build_reweighted_adjacency(const Graph& g, const ReweightConfig& cfg, ReweightStats* stats) {
  const auto raw = raw_edge_weights(g, cfg, stats);
  return normalize_adjacency(g, raw);
}

ReweightedAdjacency build_plain_adjacency(const Graph& g) {
  const std::vector<double> ones(g.edges().size(), 1.0);
  return normalize_adjacency(g, ones);
}

}  // namespace fnr
