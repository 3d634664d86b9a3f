#pragma once

// Central finite-difference checks of the analytic gradients produced by the
// tape. The numeric side only ever evaluates forward values, so it stays
// independent of every backward rule it checks.

#include "fnrgnn/tensor.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace fnr {

// (f(x + h e_k) - f(x - h e_k)) / 2h for every entry k of x.
Tensor numeric_gradient(const std::function<double(const Tensor&)>& f, const Tensor& x, double h);

// |a - n| / max(|a|, |n|, floor)
double relative_error(double analytic, double numeric, double floor = 1e-6);

struct GradCheckOptions {
  std::size_t nodes = 20;
  std::size_t feature_dim = 4;
  std::size_t hidden = 6;
  double edge_probability = 0.2;
  double step = 1e-5;
  double tolerance = 1e-4;
  double sinkhorn_epsilon = 0.1;
  std::size_t sinkhorn_iterations = 50;
  std::uint64_t seed = 7;
};

struct GradCheckEntry {
  std::string loss;
  std::string param;
  std::size_t entries = 0;
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  double seconds = 0.0;

  bool passed() const { return max_rel_error < tolerance; }
};

// Checks MSE, MMD, L_dist (unrolled Sinkhorn + moments) and their weighted
// total with respect to every model parameter on a random small graph.
GradCheckReport run_gradient_suite(const GradCheckOptions& opts = {});

}  // namespace fnr
