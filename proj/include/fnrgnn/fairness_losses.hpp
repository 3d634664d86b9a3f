#pragma once

// Group-fairness regularizers between the two sensitive groups:
//   - RBF-kernel MMD on hidden embeddings
//   - debiased Sinkhorn divergence on scalar predictions
//   - first/second moment matching on scalar predictions

#include "fnrgnn/autodiff.hpp"

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <utility>
#include <vector>

namespace fnr {

struct GroupIndex {
  std::vector<std::size_t> g0;  // s == 0
  std::vector<std::size_t> g1;  // s == 1
};

// Splits `nodes` by sensitive value; all nodes when `nodes` is empty.
GroupIndex make_group_index(std::span<const int> sensitive, std::span<const std::size_t> nodes = {});

// Uniform sampling without replacement, k per group; smaller groups are taken
// whole. Each returned subset is sorted. Throws if either group is empty.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> sample_group_nodes(const GroupIndex& idx, std::size_t k,
                                                                                 std::mt19937_64& rng);

enum class BandwidthMode { median, fixed };

struct MMDConfig {
  BandwidthMode bandwidth_mode = BandwidthMode::median;
  double sigma = 1.0;  // used when bandwidth_mode == fixed
  std::size_t sample_per_group = 500;
};

// Median of all pairwise Euclidean distances between rows of A and B pooled;
// 1 when that median is 0.
double median_bandwidth(const Tensor& a, const Tensor& b);

// Biased (V-statistic) MMD^2 with k(x, y) = exp(-||x - y||^2 / (2 sigma^2)).
// The bandwidth is resolved from the current values and treated as a constant.
ad::Var mmd_rbf(ad::Var a, ad::Var b, const MMDConfig& cfg, double* sigma_used = nullptr);

struct SinkhornConfig {
  double epsilon = 0.05;
  std::size_t iterations = 50;
};

struct SinkhornDiagnostics {
  // Largest row or column marginal error of the returned plan.
  double marginal_violation = 0.0;
};

// Per-iteration epsilon: geometric decay from a power of two at or above
// max(cost) down to `epsilon` over the first half of the sweeps, then
// `epsilon`. Flat when max(cost) <= epsilon.
std::vector<double> sinkhorn_schedule(const Tensor& cost, double epsilon, std::size_t iterations);

// Entropic OT between uniform empirical measures on column vectors a (m x 1)
// and b (p x 1), squared cost, KL reference = product of the marginals.
// Runs `iterations` averaged log-domain (f, g) sweeps from zero potentials along
// sinkhorn_schedule, unrolled on the tape, and returns <pi, C> + eps * KL(pi | mu x nu) evaluated on the final plan.
ad::Var entropic_ot(ad::Var a, ad::Var b, const SinkhornConfig& cfg, SinkhornDiagnostics* diag = nullptr);

// OT(a, b) - (OT(a, a) + OT(b, b)) / 2
ad::Var sinkhorn_divergence(ad::Var a, ad::Var b, const SinkhornConfig& cfg);

// |mean(a) - mean(b)| + |var(a) - var(b)|, population variance.
ad::Var moment_loss(ad::Var a, ad::Var b);
// |mean(a) - mean(b)|
ad::Var mean_gap_loss(ad::Var a, ad::Var b);

enum class DistMode { full, mean_only };

// full: sinkhorn_divergence + moment_loss; mean_only: mean_gap_loss.
ad::Var dist_loss(ad::Var a, ad::Var b, const SinkhornConfig& cfg, DistMode mode = DistMode::full);

}  // namespace fnr
