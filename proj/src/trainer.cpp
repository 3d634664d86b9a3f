#include "fnrgnn/trainer.hpp"

#include "fnrgnn/adam.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <thread>

namespace fnr {

std::string_view ablation_name(Ablation a) {
  switch (a) {
    case Ablation::full:
      return "full";
    case Ablation::no_reweight:
      return "no_reweight";
    case Ablation::no_mmd:
      return "no_mmd";
    case Ablation::mean_only_dist:
      return "mean_only_dist";
    case Ablation::vanilla:
      return "vanilla";
  }
  return "unknown";
}

Ablation parse_ablation(std::string_view name) {
  for (Ablation a : kAllAblations)
    if (ablation_name(a) == name) return a;
  throw std::invalid_argument("unknown ablation '" + std::string(name) +
                              "' (expected full, no_reweight, no_mmd, mean_only_dist or vanilla)");
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("TrainConfig: " + msg); };
  if (!(lambda_mmd >= 0.0) || !std::isfinite(lambda_mmd)) fail("lambda_mmd must be >= 0");
  if (!(lambda_dist >= 0.0) || !std::isfinite(lambda_dist)) fail("lambda_dist must be >= 0");
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) fail("gamma must be >= 0");
  if (!(weight_floor > 0.0 && weight_floor <= 1.0)) fail("weight_floor must be in (0, 1]");
  if (epochs == 0) fail("epochs must be >= 1");
  if (!(lr > 0.0)) fail("lr must be positive");
  if (!(weight_decay >= 0.0)) fail("weight_decay must be >= 0");
  if (patience > epochs) fail("patience must not exceed epochs");
  double total = 0.0;
  for (double f : split_fractions) {
    if (!(f > 0.0)) fail("split fractions must be positive");
    total += f;
  }
  if (std::fabs(total - 1.0) > 1e-9) fail("split fractions must sum to 1");
  if (hidden == 0) fail("hidden must be >= 1");
  if (sample_per_group == 0) fail("sample_per_group must be >= 1");
  if (!(mmd_sigma >= 0.0)) fail("mmd_sigma must be >= 0 (0 selects the median heuristic)");
  if (sinkhorn_iterations == 0) fail("sinkhorn_iterations must be >= 1");
  if (!(sinkhorn_epsilon_scale > 0.0)) fail("sinkhorn_epsilon_scale must be positive");
}

double TrainConfig::effective_lambda_mmd() const {
  return (ablation == Ablation::vanilla || ablation == Ablation::no_mmd) ? 0.0 : lambda_mmd;
}

double TrainConfig::effective_lambda_dist() const { return ablation == Ablation::vanilla ? 0.0 : lambda_dist; }

bool TrainConfig::uses_reweighting() const {
  return ablation != Ablation::vanilla && ablation != Ablation::no_reweight;
}

std::uint64_t derive_seed(std::uint64_t seed, SeedStream stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

Splits split_nodes(const Graph& g, const std::array<double, 3>& fractions, std::uint64_t seed) {
  if (g.num_nodes() < 10) throw std::invalid_argument("split_nodes: need at least 10 nodes");
  std::mt19937_64 rng(derive_seed(seed, SeedStream::split));
  Splits s;
  const GroupIndex groups = make_group_index(g.sensitive());
  for (int gi = 0; gi < 2; ++gi) {
    std::vector<std::size_t> nodes = gi == 0 ? groups.g0 : groups.g1;
    std::shuffle(nodes.begin(), nodes.end(), rng);
    const auto n = static_cast<double>(nodes.size());
    const auto n_train = static_cast<std::size_t>(std::llround(fractions[0] * n));
    const auto n_val = static_cast<std::size_t>(std::llround(fractions[1] * n));
    if (n_train == 0 || n_val == 0 || n_train + n_val >= nodes.size()) {
      throw std::invalid_argument("split_nodes: group " + std::to_string(gi) + " has " +
                                  std::to_string(nodes.size()) +
                                  " nodes, too few to appear in every split; use smaller val/test fractions");
    }
    s.train.insert(s.train.end(), nodes.begin(), nodes.begin() + static_cast<std::ptrdiff_t>(n_train));
    s.val.insert(s.val.end(), nodes.begin() + static_cast<std::ptrdiff_t>(n_train),
                 nodes.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
    s.test.insert(s.test.end(), nodes.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), nodes.end());
  }
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.val.begin(), s.val.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

Tensor FeatureScaler::apply(const Tensor& x) const {
  if (x.cols() != mean.size()) throw std::invalid_argument("FeatureScaler: column count mismatch");
  Tensor out(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < x.cols(); ++c) out(r, c) = std[c] > 0.0 ? (x(r, c) - mean[c]) / std[c] : 0.0;
  return out;
}

FeatureScaler fit_scaler(const Tensor& features, std::span<const std::size_t> rows) {
  if (rows.empty()) throw std::invalid_argument("fit_scaler: no rows");
  FeatureScaler s;
  s.mean.assign(features.cols(), 0.0);
  s.std.assign(features.cols(), 0.0);
  const auto n = static_cast<double>(rows.size());
  for (auto r : rows)
    for (std::size_t c = 0; c < features.cols(); ++c) s.mean[c] += features(r, c);
  for (auto& m : s.mean) m /= n;
  for (auto r : rows)
    for (std::size_t c = 0; c < features.cols(); ++c) {
      const double d = features(r, c) - s.mean[c];
      s.std[c] += d * d;
    }
  for (auto& v : s.std) {
    v = std::sqrt(v / n);
    if (v < 1e-12) v = 0.0;
  }
  return s;
}

PreparedData prepare(const Graph& raw, const TrainConfig& cfg) {
  cfg.validate();
  Splits splits = split_nodes(raw, cfg.split_fractions, cfg.seed);
  const FeatureScaler scaler = fit_scaler(raw.features(), splits.train);
  Graph graph = raw.with_features(scaler.apply(raw.features()));
  ReweightStats stats;
  ReweightedAdjacency adj = cfg.uses_reweighting()
                                ? build_reweighted_adjacency(graph, {cfg.gamma, cfg.weight_floor}, &stats)
                                : build_plain_adjacency(graph);
  std::vector<double> y_train;
  for (auto i : splits.train) y_train.push_back(graph.targets()[i]);
  const double var_y = variance_of(y_train);
  const double eps = cfg.sinkhorn_epsilon_scale * (var_y > 0.0 ? var_y : 1.0);
  return PreparedData{std::move(graph), std::move(splits), std::move(adj), stats, eps};
}

namespace {

Evaluation evaluate_prepared(const PreparedData& data, const ModelParams& params) {
  const auto yhat = predict(data.graph.features(), data.adjacency, params);
  const auto& y = data.graph.targets();
  const auto& s = data.graph.sensitive();
  return Evaluation{evaluate_split("train", yhat, y, s, data.splits.train),
                    evaluate_split("val", yhat, y, s, data.splits.val),
                    evaluate_split("test", yhat, y, s, data.splits.test)};
}

double masked_mse(std::span<const double> yhat, std::span<const double> y, std::span<const std::size_t> mask) {
  return mse_mae(yhat, y, mask).mse;
}

}  // namespace

Evaluation evaluate(const Graph& g, const TrainConfig& cfg, const ModelParams& params) {
  const PreparedData data = prepare(g, cfg);
  if (params.input_dim() != data.graph.feature_dim()) {
    throw std::invalid_argument("evaluate: model expects " + std::to_string(params.input_dim()) +
                                " features, graph has " + std::to_string(data.graph.feature_dim()));
  }
  return evaluate_prepared(data, params);
}

TrainResult train(const Graph& g, const TrainConfig& cfg) {
  cfg.validate();
  return train(g, cfg, init_params(g.feature_dim(), {cfg.hidden, derive_seed(cfg.seed, SeedStream::init)}));
}

TrainResult train(const Graph& g, const TrainConfig& cfg, const ModelParams& initial) {
  const auto t0 = std::chrono::steady_clock::now();
  const PreparedData data = prepare(g, cfg);
  initial.validate();
  if (initial.input_dim() != data.graph.feature_dim() || initial.hidden() != cfg.hidden) {
    throw std::invalid_argument("train: initial parameters are " + std::to_string(initial.input_dim()) + "->" +
                                std::to_string(initial.hidden()) + ", expected " +
                                std::to_string(data.graph.feature_dim()) + "->" + std::to_string(cfg.hidden));
  }
  const auto& y = data.graph.targets();
  const GroupIndex train_groups = make_group_index(data.graph.sensitive(), data.splits.train);
  if (train_groups.g0.empty() || train_groups.g1.empty()) {
    throw std::invalid_argument("train: both sensitive groups must be present in the training split");
  }

  ModelParams params = initial;
  std::array<Tensor, 6> grads;
  std::vector<ParamSlot> slots;
  {
    const auto named = params.named();
    for (std::size_t k = 0; k < named.size(); ++k) {
      const bool is_bias = named[k].first == "b1" || named[k].first == "b2" || named[k].first == "head_b";
      slots.push_back({named[k].first, named[k].second, &grads[k], !is_bias});
    }
  }
  AdamState opt = make_adam_state(slots, {cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay});

  const double lambda_mmd = cfg.effective_lambda_mmd();
  const double lambda_dist = cfg.effective_lambda_dist();
  const DistMode dist_mode = cfg.ablation == Ablation::mean_only_dist ? DistMode::mean_only : DistMode::full;
  MMDConfig mmd_cfg;
  mmd_cfg.bandwidth_mode = cfg.mmd_sigma > 0.0 ? BandwidthMode::fixed : BandwidthMode::median;
  mmd_cfg.sigma = cfg.mmd_sigma > 0.0 ? cfg.mmd_sigma : 1.0;
  mmd_cfg.sample_per_group = cfg.sample_per_group;
  const SinkhornConfig sk_cfg{data.sinkhorn_epsilon, cfg.sinkhorn_iterations};
  std::mt19937_64 sample_rng(derive_seed(cfg.seed, SeedStream::sample));

  TrainResult result;
  ModelParams best = params;
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    EpochRecord rec;
    ad::Tape tape;
    try {
      const ParamVars pv = bind_params(tape, params);
      const ForwardResult fw = forward(tape, tape.constant(data.graph.features()), data.adjacency, pv);
      ad::Var mse = mse_loss(fw.prediction, y, data.splits.train);
      rec.mse = mse.value().item();
      ad::Var total = mse;
      if (lambda_mmd > 0.0 || lambda_dist > 0.0) {
        const auto [s0, s1] = sample_group_nodes(train_groups, cfg.sample_per_group, sample_rng);
        if (lambda_mmd > 0.0) {
          ad::Var mmd = mmd_rbf(ad::gather_rows(fw.hidden, s0), ad::gather_rows(fw.hidden, s1), mmd_cfg);
          rec.mmd = mmd.value().item();
          total = ad::add(total, ad::scale(mmd, lambda_mmd));
        }
        if (lambda_dist > 0.0) {
          ad::Var dist = dist_loss(ad::gather_rows(fw.prediction, s0), ad::gather_rows(fw.prediction, s1), sk_cfg,
                                   dist_mode);
          rec.dist = dist.value().item();
          total = ad::add(total, ad::scale(dist, lambda_dist));
        }
      }
      rec.total = total.value().item();
      tape.backward(total);
      const ad::Var vars[] = {pv.w1, pv.b1, pv.w2, pv.b2, pv.head_w, pv.head_b};
      for (std::size_t k = 0; k < grads.size(); ++k) grads[k] = tape.grad(vars[k]);
    } catch (const std::domain_error& e) {
      std::ostringstream msg;
      msg << "non-finite loss at epoch " << epoch << " (mse=" << rec.mse << ", mmd=" << rec.mmd
          << ", dist=" << rec.dist << "): " << e.what();
      throw NumericalError(msg.str());
    }
    adam_step(slots, opt);

    const auto yhat = predict(data.graph.features(), data.adjacency, params);
    rec.val_mse = masked_mse(yhat, y, data.splits.val);
    if (!std::isfinite(rec.val_mse)) {
      throw NumericalError("non-finite validation MSE at epoch " + std::to_string(epoch));
    }
    result.curve.push_back(rec);
    if (rec.val_mse < best_val) {
      best_val = rec.val_mse;
      best = params;
      result.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }

  result.params = std::move(best);
  const Evaluation ev = evaluate_prepared(data, result.params);
  result.train = ev.train;
  result.val = ev.val;
  result.test = ev.test;
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

std::vector<AblationRow> run_ablation_suite(const Graph& g, const TrainConfig& base, std::size_t num_seeds,
                                            std::size_t jobs) {
  base.validate();
  std::vector<AblationRow> rows;
  for (Ablation a : kAllAblations)
    for (std::size_t s = 0; s < num_seeds; ++s) {
      AblationRow r;
      r.ablation = a;
      r.seed = base.seed + s;
      rows.push_back(r);
    }

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next.fetch_add(1); k < rows.size(); k = next.fetch_add(1)) {
      AblationRow& r = rows[k];
      TrainConfig cfg = base;
      cfg.ablation = r.ablation;
      cfg.seed = r.seed;
      try {
        const TrainResult res = train(g, cfg);
        r.ok = true;
        r.test = res.test;
        r.best_epoch = res.best_epoch;
        r.seconds = res.seconds;
      } catch (const std::exception& e) {
        r.ok = false;
        r.error = e.what();
      }
    }
  };
  const std::size_t n_threads = std::clamp<std::size_t>(jobs, 1, rows.size());
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  return rows;
}

std::vector<AblationSummary> summarize_ablation(const std::vector<AblationRow>& rows) {
  std::vector<AblationSummary> out;
  for (Ablation a : kAllAblations) {
    AblationSummary s;
    s.ablation = a;
    for (const auto& r : rows) {
      if (r.ablation != a || !r.ok) continue;
      ++s.runs;
      s.mse += r.test.mse;
      s.mae += r.test.mae;
      s.mg += r.test.mg;
      s.vg += r.test.vg;
      s.wd += r.test.wd;
    }
    if (s.runs > 0) {
      const auto n = static_cast<double>(s.runs);
      s.mse /= n;
      s.mae /= n;
      s.mg /= n;
      s.vg /= n;
      s.wd /= n;
    }
    out.push_back(s);
  }
  return out;
}

}  // namespace fnr
