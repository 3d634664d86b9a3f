#include "fnrgnn/gradcheck.hpp"

#include "fnrgnn/fairness_losses.hpp"
#include "fnrgnn/graph.hpp"
#include "fnrgnn/model.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>

namespace fnr {

Tensor numeric_gradient(const std::function<double(const Tensor&)>& f, const Tensor& x, double h) {
  Tensor g(x.rows(), x.cols());
  Tensor probe = x;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double orig = probe[k];
    probe[k] = orig + h;
    const double up = f(probe);
    probe[k] = orig - h;
    const double down = f(probe);
    probe[k] = orig;
    g[k] = (up - down) / (2.0 * h);
  }
  return g;
}

double relative_error(double analytic, double numeric, double floor) {
  return std::fabs(analytic - numeric) / std::max({std::fabs(analytic), std::fabs(numeric), floor});
}

namespace {

struct Problem {
  Tensor features;
  std::vector<double> targets;
  ReweightedAdjacency adj;
  std::vector<std::size_t> group0;
  std::vector<std::size_t> group1;
  std::vector<std::size_t> all;
};

Problem make_problem(const GradCheckOptions& o) {
  std::mt19937_64 rng(o.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Tensor x(o.nodes, o.feature_dim);
  std::vector<int> s(o.nodes);
  std::vector<double> y(o.nodes);
  for (std::size_t i = 0; i < o.nodes; ++i) {
    s[i] = static_cast<int>(i % 2);
    for (std::size_t c = 0; c < o.feature_dim; ++c) x(i, c) = normal(rng) + 0.5 * s[i];
    y[i] = normal(rng) + s[i];
  }
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < o.nodes; ++i)
    for (std::size_t j = i + 1; j < o.nodes; ++j)
      if (unif(rng) < o.edge_probability) edges.emplace_back(i, j);
  Graph g(x, std::move(edges), s, y);
  Problem p{x, y, build_reweighted_adjacency(g, {1.0, 1e-3}), {}, {}, {}};
  for (std::size_t i = 0; i < o.nodes; ++i) {
    (s[i] == 0 ? p.group0 : p.group1).push_back(i);
    p.all.push_back(i);
  }
  return p;
}

enum class LossKind { mse, mmd, dist, total };

const char* loss_name(LossKind k) {
  switch (k) {
    case LossKind::mse:
      return "mse";
    case LossKind::mmd:
      return "mmd";
    case LossKind::dist:
      return "dist";
    case LossKind::total:
      return "total";
  }
  return "?";
}

ad::Var build_loss(ad::Tape& tape, const Problem& p, const ParamVars& pv, LossKind kind, double sigma,
                   const SinkhornConfig& sk) {
  const ForwardResult fw = forward(tape, tape.constant(p.features), p.adj, pv);
  auto mse = [&] { return mse_loss(fw.prediction, p.targets, p.all); };
  auto mmd = [&] {
    MMDConfig cfg;
    cfg.bandwidth_mode = BandwidthMode::fixed;
    cfg.sigma = sigma;
    return mmd_rbf(ad::gather_rows(fw.hidden, p.group0), ad::gather_rows(fw.hidden, p.group1), cfg);
  };
  auto dist = [&] {
    return dist_loss(ad::gather_rows(fw.prediction, p.group0), ad::gather_rows(fw.prediction, p.group1), sk);
  };
  switch (kind) {
    case LossKind::mse:
      return mse();
    case LossKind::mmd:
      return mmd();
    case LossKind::dist:
      return dist();
    case LossKind::total:
      return ad::add(ad::add(mse(), ad::scale(mmd(), 0.5)), ad::scale(dist(), 0.5));
  }
  return mse();
}

}  // namespace

GradCheckReport run_gradient_suite(const GradCheckOptions& opts) {
  const auto t0 = std::chrono::steady_clock::now();
  const Problem problem = make_problem(opts);
  ModelParams base = init_params(opts.feature_dim, {opts.hidden, opts.seed + 1});
  {
    // Nonzero biases so every bias gradient path is exercised away from the init.
    std::mt19937_64 rng(opts.seed + 2);
    std::normal_distribution<double> normal(0.0, 0.1);
    for (auto* b : {&base.b1, &base.b2, &base.head_b})
      for (auto& v : b->data()) v = normal(rng);
  }

  // Bandwidth is resolved once and held fixed, as during training.
  double sigma = 1.0;
  {
    ad::Tape tape;
    const ForwardResult fw = forward(tape, tape.constant(problem.features), problem.adj, bind_params(tape, base));
    const Tensor& h = tape.value(fw.hidden);
    Tensor a(problem.group0.size(), h.cols());
    Tensor b(problem.group1.size(), h.cols());
    for (std::size_t k = 0; k < problem.group0.size(); ++k)
      std::copy(h.row(problem.group0[k]).begin(), h.row(problem.group0[k]).end(), a.row(k).begin());
    for (std::size_t k = 0; k < problem.group1.size(); ++k)
      std::copy(h.row(problem.group1[k]).begin(), h.row(problem.group1[k]).end(), b.row(k).begin());
    sigma = median_bandwidth(a, b);
  }
  const SinkhornConfig sk{opts.sinkhorn_epsilon, opts.sinkhorn_iterations};

  GradCheckReport report;
  report.tolerance = opts.tolerance;
  for (LossKind kind : {LossKind::mse, LossKind::mmd, LossKind::dist, LossKind::total}) {
    ad::Tape tape;
    const ParamVars pv = bind_params(tape, base);
    tape.backward(build_loss(tape, problem, pv, kind, sigma, sk));
    const ad::Var vars[] = {pv.w1, pv.b1, pv.w2, pv.b2, pv.head_w, pv.head_b};

    const auto names = base.named();
    for (std::size_t k = 0; k < names.size(); ++k) {
      const Tensor analytic = tape.grad(vars[k]);
      auto loss_at = [&](const Tensor& value) {
        ModelParams probe = base;
        *probe.named()[k].second = value;
        ad::Tape t;
        ParamVars cv{t.constant(probe.w1), t.constant(probe.b1),     t.constant(probe.w2),
                     t.constant(probe.b2), t.constant(probe.head_w), t.constant(probe.head_b)};
        return build_loss(t, problem, cv, kind, sigma, sk).value().item();
      };
      const Tensor numeric = numeric_gradient(loss_at, *names[k].second, opts.step);
      GradCheckEntry e{loss_name(kind), names[k].first, analytic.size(), 0.0, 0.0};
      for (std::size_t i = 0; i < analytic.size(); ++i) {
        e.max_rel_error = std::max(e.max_rel_error, relative_error(analytic[i], numeric[i]));
        e.max_abs_error = std::max(e.max_abs_error, std::fabs(analytic[i] - numeric[i]));
      }
      report.max_rel_error = std::max(report.max_rel_error, e.max_rel_error);
      report.entries.push_back(std::move(e));
    }
  }
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

}  // namespace fnr
