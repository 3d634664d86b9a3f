#include "fnrgnn/fairness_losses.hpp"

#include "fnrgnn/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fnr {

GroupIndex make_group_index(std::span<const int> sensitive, std::span<const std::size_t> nodes) {
  GroupIndex idx;
  auto put = [&](std::size_t i) {
    if (i >= sensitive.size()) throw std::out_of_range("make_group_index: node index out of range");
    (sensitive[i] == 0 ? idx.g0 : idx.g1).push_back(i);
  };
  if (nodes.empty()) {
    for (std::size_t i = 0; i < sensitive.size(); ++i) put(i);
  } else {
    for (auto i : nodes) put(i);
  }
  return idx;
}

namespace {

std::vector<std::size_t> sample_without_replacement(const std::vector<std::size_t>& pool, std::size_t k,
                                                    std::mt19937_64& rng) {
  if (pool.size() <= k) return pool;
  std::vector<std::size_t> v = pool;
  // Partial Fisher-Yates: the first k slots end up a uniform k-subset.
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, v.size() - 1);
    std::swap(v[i], v[pick(rng)]);
  }
  v.resize(k);
  std::sort(v.begin(), v.end());
  return v;
}

}  // namespace

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> sample_group_nodes(const GroupIndex& idx, std::size_t k,
                                                                                 std::mt19937_64& rng) {
  if (idx.g0.empty()) throw std::invalid_argument("sample_group_nodes: group 0 is empty");
  if (idx.g1.empty()) throw std::invalid_argument("sample_group_nodes: group 1 is empty");
  if (k == 0) throw std::invalid_argument("sample_group_nodes: k must be positive");
  auto s0 = sample_without_replacement(idx.g0, k, rng);
  auto s1 = sample_without_replacement(idx.g1, k, rng);
  return {std::move(s0), std::move(s1)};
}

double median_bandwidth(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.cols()) throw std::invalid_argument("median_bandwidth: dimension mismatch");
  std::vector<const double*> rows;
  rows.reserve(a.rows() + b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) rows.push_back(a.row(i).data());
  for (std::size_t i = 0; i < b.rows(); ++i) rows.push_back(b.row(i).data());
  std::vector<double> dist;
  dist.reserve(rows.size() * (rows.size() - 1) / 2);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = i + 1; j < rows.size(); ++j)
      dist.push_back(std::sqrt(kernels::squared_distance(rows[i], rows[j], a.cols())));
  if (dist.empty()) return 1.0;
  const std::size_t mid = dist.size() / 2;
  std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(mid), dist.end());
  double median = dist[mid];
  if (dist.size() % 2 == 0) {
    const double lower = *std::max_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(mid));
    median = 0.5 * (median + lower);
  }
  return median > 0.0 ? median : 1.0;
}

ad::Var mmd_rbf(ad::Var a, ad::Var b, const MMDConfig& cfg, double* sigma_used) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rows() == 0 || bv.rows() == 0) throw std::invalid_argument("mmd_rbf: both sample sets must be non-empty");
  if (!av.all_finite() || !bv.all_finite()) throw std::domain_error("mmd_rbf: non-finite embeddings");
  double sigma = cfg.sigma;
  if (cfg.bandwidth_mode == BandwidthMode::median) {
    sigma = median_bandwidth(av, bv);
  } else if (!(sigma > 0.0)) {
    throw std::invalid_argument("mmd_rbf: fixed bandwidth must be positive");
  }
  if (sigma_used != nullptr) *sigma_used = sigma;

  const double coef = -1.0 / (2.0 * sigma * sigma);
  auto kernel_mean = [coef](ad::Var x, ad::Var y) { return ad::mean(ad::exp(ad::scale(ad::pairwise_sq_dist(x, y), coef))); };
  ad::Var kaa = kernel_mean(a, a);
  ad::Var kbb = kernel_mean(b, b);
  // Both orientations of the cross term, so swapping A and B is bit-exact.
  ad::Var cross = ad::add(kernel_mean(a, b), kernel_mean(b, a));
  // The V-statistic is a squared RKHS norm; relu only removes rounding noise below 0.
  return ad::relu(ad::sub(ad::add(kaa, kbb), cross));
}

std::vector<double> sinkhorn_schedule(const Tensor& cost, double epsilon, std::size_t iterations) {
  std::vector<double> eps(iterations, epsilon);
  double cmax = 0.0;
  for (double c : cost.values()) cmax = std::max(cmax, c);
  if (!(cmax > epsilon) || iterations < 2) return eps;
  // Power of two above the cost scale: the schedule is locally constant in the
  // inputs, so the unrolled gradient needs no term for it.
  const double start = std::exp2(std::ceil(std::log2(cmax)));
  const std::size_t ramp = iterations / 2;
  const double ratio = std::pow(epsilon / start, 1.0 / static_cast<double>(ramp));
  double e = start;
  for (std::size_t k = 0; k < ramp && e > epsilon; ++k, e *= ratio) eps[k] = e;
  return eps;
}

ad::Var entropic_ot(ad::Var a, ad::Var b, const SinkhornConfig& cfg, SinkhornDiagnostics* diag) {
  if (!(cfg.epsilon > 0.0)) throw std::invalid_argument("entropic_ot: epsilon must be positive");
  if (cfg.iterations == 0) throw std::invalid_argument("entropic_ot: iterations must be >= 1");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.cols() != 1 || bv.cols() != 1 || av.rows() == 0 || bv.rows() == 0) {
    throw std::invalid_argument("entropic_ot: expected non-empty column vectors, got " + av.shape_string() + " and " +
                                bv.shape_string());
  }
  if (!av.all_finite() || !bv.all_finite()) throw std::domain_error("entropic_ot: non-finite input");

  ad::Tape& tape = *a.tape;
  const std::size_t m = av.rows();
  const std::size_t p = bv.rows();
  const double eps = cfg.epsilon;
  const std::vector<double> log_mu(m, -std::log(static_cast<double>(m)));
  const std::vector<double> log_nu(p, -std::log(static_cast<double>(p)));

  ad::Var cost = ad::pairwise_sq_dist(a, b);
  // Transposed copy so both half-sweeps reduce over contiguous rows.
  ad::Var cost_t = ad::pairwise_sq_dist(b, a);
  const auto schedule = sinkhorn_schedule(cost.value(), eps, cfg.iterations);
  ad::Var f = tape.constant(Tensor(m, 1));
  ad::Var g = tape.constant(Tensor(p, 1));
  // Averaged simultaneous updates: swapping a and b swaps f and g exactly.
  for (double e : schedule) {
    ad::Var f_next = ad::softmin(cost, g, log_nu, e, ad::Axis::rows);
    ad::Var g_next = ad::softmin(cost_t, f, log_mu, e, ad::Axis::rows);
    f = ad::scale(ad::add(f, f_next), 0.5);
    g = ad::scale(ad::add(g, g_next), 0.5);
  }

  // log pi_ij = log mu_i + log nu_j + (f_i + g_j - C_ij) / eps
  Tensor log_ref(m, p, log_mu[0] + log_nu[0]);
  ad::Var potentials = ad::outer_sum(f, g);
  ad::Var plan = ad::exp(ad::add(ad::scale(ad::sub(potentials, cost), 1.0 / eps), tape.constant(std::move(log_ref))));

  if (diag != nullptr) {
    const Tensor& pi = plan.value();
    double worst = 0.0;
    std::vector<double> col_mass(p, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      worst = std::max(worst, std::fabs(kernels::sum(pi.row(i).data(), p) - std::exp(log_mu[i])));
      for (std::size_t j = 0; j < p; ++j) col_mass[j] += pi(i, j);
    }
    for (std::size_t j = 0; j < p; ++j) worst = std::max(worst, std::fabs(col_mass[j] - std::exp(log_nu[j])));
    diag->marginal_violation = worst;
  }

  // <pi, C> + eps KL(pi | mu x nu) = <pi, f + g> - eps (sum(pi) - 1)
  ad::Var transport = ad::sum(ad::mul(plan, potentials));
  ad::Var mass_term = ad::scale(ad::add_constant(ad::sum(plan), -1.0), -eps);
  return ad::add(transport, mass_term);
}

ad::Var sinkhorn_divergence(ad::Var a, ad::Var b, const SinkhornConfig& cfg) {
  ad::Var ab = entropic_ot(a, b, cfg);
  ad::Var aa = entropic_ot(a, a, cfg);
  ad::Var bb = entropic_ot(b, b, cfg);
  return ad::sub(ab, ad::scale(ad::add(aa, bb), 0.5));
}

namespace {

struct Moments {
  ad::Var mean;
  ad::Var var;
};

Moments moments(ad::Var x) {
  if (x.value().empty()) throw std::invalid_argument("moment_loss: empty prediction set");
  if (!x.value().all_finite()) throw std::domain_error("moment_loss: non-finite input");
  ad::Var mu = ad::mean(x);
  ad::Var centered = ad::add_scalar(x, ad::scale(mu, -1.0));
  return {mu, ad::mean(ad::square(centered))};
}

}  // namespace

ad::Var moment_loss(ad::Var a, ad::Var b) {
  const Moments ma = moments(a);
  const Moments mb = moments(b);
  return ad::add(ad::abs(ad::sub(ma.mean, mb.mean)), ad::abs(ad::sub(ma.var, mb.var)));
}

ad::Var mean_gap_loss(ad::Var a, ad::Var b) {
  if (a.value().empty() || b.value().empty()) throw std::invalid_argument("mean_gap_loss: empty prediction set");
  return ad::abs(ad::sub(ad::mean(a), ad::mean(b)));
}

ad::Var dist_loss(ad::Var a, ad::Var b, const SinkhornConfig& cfg, DistMode mode) {
  if (mode == DistMode::mean_only) return mean_gap_loss(a, b);
  return ad::add(sinkhorn_divergence(a, b, cfg), moment_loss(a, b));
}

}  // namespace fnr
