#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace fnr {

double mean_of(std::span<const double> x);
// Population variance (divide by count).
double variance_of(std::span<const double> x);

// |mean(a) - mean(b)|
double mean_gap(std::span<const double> a, std::span<const double> b);
// |Var(a) - Var(b)|
double variance_gap(std::span<const double> a, std::span<const double> b);

// Exact W1 between the uniform empirical measures on `a` and `b`, computed by
// integrating |F_a^{-1}(t) - F_b^{-1}(t)| over the merged quantile breakpoints.
double wasserstein_1d(std::span<const double> a, std::span<const double> b);

struct ErrorPair {
  double mse = 0.0;
  double mae = 0.0;
};

// Over the indices in `mask`.
ErrorPair mse_mae(std::span<const double> prediction, std::span<const double> target,
                  std::span<const std::size_t> mask);

struct MetricsReport {
  std::string split;
  double mse = 0.0;
  double mae = 0.0;
  double mg = 0.0;
  double vg = 0.0;
  double wd = 0.0;
  std::array<std::size_t, 2> group_sizes{};
  std::array<double, 2> group_means{};
  std::array<double, 2> group_vars{};
  // Same gaps measured on ground-truth targets of the split.
  double label_mg = 0.0;
  double label_vg = 0.0;
  double label_wd = 0.0;

  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

// Metrics over the nodes in `mask`, grouped by `sensitive`. Throws when a
// group has no node in the mask.
MetricsReport evaluate_split(std::string split, std::span<const double> prediction, std::span<const double> target,
                             std::span<const int> sensitive, std::span<const std::size_t> mask);

}  // namespace fnr
