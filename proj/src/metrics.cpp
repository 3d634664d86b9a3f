#include "fnrgnn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fnr {

namespace {

void require_nonempty(std::span<const double> x, const char* what) {
  if (x.empty()) throw std::invalid_argument(std::string(what) + ": empty group");
}

}  // namespace

double mean_of(std::span<const double> x) {
  require_nonempty(x, "mean_of");
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

double variance_of(std::span<const double> x) {
  const double mu = mean_of(x);
  double s = 0.0;
  for (double v : x) s += (v - mu) * (v - mu);
  return s / static_cast<double>(x.size());
}

double mean_gap(std::span<const double> a, std::span<const double> b) {
  require_nonempty(a, "mean_gap (group 0)");
  require_nonempty(b, "mean_gap (group 1)");
  return std::fabs(mean_of(a) - mean_of(b));
}

double variance_gap(std::span<const double> a, std::span<const double> b) {
  require_nonempty(a, "variance_gap (group 0)");
  require_nonempty(b, "variance_gap (group 1)");
  return std::fabs(variance_of(a) - variance_of(b));
}

double wasserstein_1d(std::span<const double> a, std::span<const double> b) {
  require_nonempty(a, "wasserstein_1d (first sample)");
  require_nonempty(b, "wasserstein_1d (second sample)");
  std::vector<double> sa(a.begin(), a.end());
  std::vector<double> sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());

  // Walk the quantile levels k/|a| and l/|b| in integer arithmetic: the level
  // boundary k/|a| vs l/|b| is compared as k*|b| vs l*|a|, and segment widths
  // are accumulated in units of 1/(|a||b|) to avoid drift.
  const std::size_t na = sa.size();
  const std::size_t nb = sb.size();
  std::size_t i = 0;
  std::size_t j = 0;
  std::size_t pos = 0;  // current level in units of 1/(na*nb)
  const std::size_t total = na * nb;
  double acc = 0.0;
  while (pos < total) {
    const std::size_t next_a = (i + 1) * nb;
    const std::size_t next_b = (j + 1) * na;
    const std::size_t next = std::min(next_a, next_b);
    acc += static_cast<double>(next - pos) * std::fabs(sa[i] - sb[j]);
    pos = next;
    if (next == next_a) ++i;
    if (next == next_b) ++j;
  }
  return acc / static_cast<double>(total);
}

ErrorPair mse_mae(std::span<const double> prediction, std::span<const double> target,
                  std::span<const std::size_t> mask) {
  if (mask.empty()) throw std::invalid_argument("mse_mae: empty node mask");
  if (prediction.size() != target.size()) throw std::invalid_argument("mse_mae: prediction/target length mismatch");
  ErrorPair e;
  for (auto k : mask) {
    if (k >= prediction.size()) throw std::out_of_range("mse_mae: mask index out of range");
    const double r = prediction[k] - target[k];
    e.mse += r * r;
    e.mae += std::fabs(r);
  }
  e.mse /= static_cast<double>(mask.size());
  e.mae /= static_cast<double>(mask.size());
  return e;
}

MetricsReport evaluate_split(std::string split, std::span<const double> prediction, std::span<const double> target,
                             std::span<const int> sensitive, std::span<const std::size_t> mask) {
  if (sensitive.size() != prediction.size()) throw std::invalid_argument("evaluate_split: sensitive length mismatch");
  MetricsReport r;
  r.split = std::move(split);
  const auto err = mse_mae(prediction, target, mask);
  r.mse = err.mse;
  r.mae = err.mae;

  std::array<std::vector<double>, 2> pred;
  std::array<std::vector<double>, 2> label;
  for (auto k : mask) {
    pred[sensitive[k]].push_back(prediction[k]);
    label[sensitive[k]].push_back(target[k]);
  }
  for (int g = 0; g < 2; ++g) {
    if (pred[g].empty()) {
      throw std::invalid_argument("evaluate_split: group " + std::to_string(g) + " has no nodes in split '" +
                                  r.split + "'");
    }
    r.group_sizes[g] = pred[g].size();
    r.group_means[g] = mean_of(pred[g]);
    r.group_vars[g] = variance_of(pred[g]);
  }
  r.mg = mean_gap(pred[0], pred[1]);
  r.vg = variance_gap(pred[0], pred[1]);
  r.wd = wasserstein_1d(pred[0], pred[1]);
  r.label_mg = mean_gap(label[0], label[1]);
  r.label_vg = variance_gap(label[0], label[1]);
  r.label_wd = wasserstein_1d(label[0], label[1]);
  return r;
}

}  // namespace fnr
