#include "fnrgnn/adam.hpp"
#include "fnrgnn/data_io.hpp"
#include "fnrgnn/trainer.hpp"
#include "support/gen.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

using namespace fnr;
using fnr::testing::Gen;

namespace {

Graph small_graph(std::uint64_t seed = 1, std::size_t n = 60) {
  SyntheticConfig sc;
  sc.n = n;
  sc.d = 4;
  sc.p_intra = 0.15;
  sc.p_inter = 0.05;
  sc.seed = seed;
  return generate_synthetic(sc);
}

TrainConfig quick_config() {
  TrainConfig c;
  c.epochs = 25;
  c.patience = 10;
  c.hidden = 8;
  c.lr = 1e-2;
  c.sinkhorn_iterations = 10;
  return c;
}

void check_same_run(const TrainResult& a, const TrainResult& b) {
  CHECK(a.params == b.params);
  CHECK(a.best_epoch == b.best_epoch);
  REQUIRE(a.curve.size() == b.curve.size());
  for (std::size_t e = 0; e < a.curve.size(); ++e) {
    CHECK(a.curve[e].total == b.curve[e].total);
    CHECK(a.curve[e].mse == b.curve[e].mse);
    CHECK(a.curve[e].mmd == b.curve[e].mmd);
    CHECK(a.curve[e].dist == b.curve[e].dist);
    CHECK(a.curve[e].val_mse == b.curve[e].val_mse);
  }
  CHECK(a.train == b.train);
  CHECK(a.val == b.val);
  CHECK(a.test == b.test);
}

}  // namespace

TEST_SUITE("trainer") {
  TEST_CASE("balanced split sizes and group coverage") {
    std::vector<int> s(100);
    for (std::size_t i = 0; i < 100; ++i) s[i] = static_cast<int>(i % 2);
    const Graph g(Tensor(100, 1), {}, s, std::vector<double>(100, 0.0));
    const Splits a = split_nodes(g, {0.6, 0.2, 0.2}, 4);
    CHECK(a.train.size() == 60);
    CHECK(a.val.size() == 20);
    CHECK(a.test.size() == 20);
    for (const auto* part : {&a.train, &a.val, &a.test}) {
      const GroupIndex idx = make_group_index(g.sensitive(), *part);
      CHECK(idx.g0.size() == idx.g1.size());
    }
    const Splits b = split_nodes(g, {0.6, 0.2, 0.2}, 4);
    CHECK(a.train == b.train);
    CHECK(a.test == b.test);
    CHECK(split_nodes(g, {0.6, 0.2, 0.2}, 5).train != a.train);
  }

  TEST_CASE("splits are disjoint and cover every node") {
    for (std::size_t k = 0; k < 30; ++k) {
      Gen gen(testing::case_seed(91, k));
      const std::size_t n = gen.index(30, 200);
      const Graph g = gen.graph(n, 1, 0.0);
      const double tr = gen.uniform(0.4, 0.8);
      const double va = gen.uniform(0.05, (1 - tr) / 2);
      Splits s;
      try {
        s = split_nodes(g, {tr, va, 1 - tr - va}, k);
      } catch (const std::invalid_argument&) {
        continue;  // a tiny group is allowed to be rejected
      }
      std::set<std::size_t> all;
      for (const auto* part : {&s.train, &s.val, &s.test}) {
        const GroupIndex idx = make_group_index(g.sensitive(), *part);
        CHECK_FALSE(idx.g0.empty());
        CHECK_FALSE(idx.g1.empty());
        all.insert(part->begin(), part->end());
      }
      CHECK(all.size() == n);
      CHECK(s.train.size() + s.val.size() + s.test.size() == n);
    }
  }

  TEST_CASE("split errors") {
    std::vector<int> s(20, 0);
    s[0] = 1;
    s[1] = 1;
    const Graph g(Tensor(20, 1), {}, s, std::vector<double>(20, 0.0));
    CHECK_THROWS_WITH_AS(split_nodes(g, {0.6, 0.2, 0.2}, 0), doctest::Contains("smaller"), std::invalid_argument);
    const Graph tiny(Tensor(9, 1), {}, {0, 1, 0, 1, 0, 1, 0, 1, 0}, std::vector<double>(9, 0.0));
    CHECK_THROWS_AS(split_nodes(tiny, {0.6, 0.2, 0.2}, 0), std::invalid_argument);
  }

  TEST_CASE("config validation") {
    CHECK_NOTHROW(TrainConfig{}.validate());
    auto bad = [](auto mutate) {
      TrainConfig c;
      mutate(c);
      return c;
    };
    CHECK_THROWS_AS(bad([](TrainConfig& c) { c.lambda_mmd = -0.1; }).validate(), std::invalid_argument);
    CHECK_THROWS_AS(bad([](TrainConfig& c) { c.lambda_dist = -1; }).validate(), std::invalid_argument);
    CHECK_THROWS_AS(bad([](TrainConfig& c) { c.gamma = -1; }).validate(), std::invalid_argument);
    CHECK_THROWS_AS(bad([](TrainConfig& c) { c.split_fractions = {0.5, 0.2, 0.2}; }).validate(), std::invalid_argument);
    CHECK_THROWS_AS(bad([](TrainConfig& c) { c.patience = c.epochs + 1; }).validate(), std::invalid_argument);
    CHECK_THROWS_AS(bad([](TrainConfig& c) { c.epochs = 0; }).validate(), std::invalid_argument);
    CHECK_NOTHROW(bad([](TrainConfig& c) { c.patience = c.epochs; }).validate());
  }

  TEST_CASE("ablation switches") {
    TrainConfig c;
    c.lambda_mmd = 0.3;
    c.lambda_dist = 0.7;
    c.ablation = Ablation::vanilla;
    CHECK(c.effective_lambda_mmd() == 0.0);
    CHECK(c.effective_lambda_dist() == 0.0);
    CHECK_FALSE(c.uses_reweighting());
    c.ablation = Ablation::no_mmd;
    CHECK(c.effective_lambda_mmd() == 0.0);
    CHECK(c.effective_lambda_dist() == 0.7);
    CHECK(c.uses_reweighting());
    c.ablation = Ablation::no_reweight;
    CHECK_FALSE(c.uses_reweighting());
    CHECK(c.effective_lambda_mmd() == 0.3);
    c.ablation = Ablation::mean_only_dist;
    CHECK(c.uses_reweighting());
    for (Ablation a : kAllAblations) CHECK(parse_ablation(ablation_name(a)) == a);
    CHECK_THROWS_AS(parse_ablation("nope"), std::invalid_argument);
  }

  TEST_CASE("vanilla training is plain GCN regression") {
    const Graph g = small_graph(2);
    TrainConfig cfg = quick_config();
    cfg.ablation = Ablation::vanilla;
    cfg.lambda_mmd = 0.0;
    cfg.lambda_dist = 0.0;
    const TrainResult res = train(g, cfg);

    // Reference loop without any fairness code.
    const PreparedData data = prepare(g, cfg);
    const auto plain = build_plain_adjacency(data.graph);
    ModelParams p = init_params(g.feature_dim(), {cfg.hidden, derive_seed(cfg.seed, SeedStream::init)});
    std::array<Tensor, 6> grads;
    std::vector<ParamSlot> slots;
    for (auto& [name, t] : p.named()) slots.push_back({name, t, nullptr, name[0] == 'w' || name == "head_w"});
    for (std::size_t k = 0; k < slots.size(); ++k) slots[k].grad = &grads[k];
    AdamState st = make_adam_state(slots, {cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay});
    for (std::size_t e = 0; e < res.curve.size(); ++e) {
      ad::Tape tape;
      const ParamVars pv = bind_params(tape, p);
      const ForwardResult fw = forward(tape, tape.constant(data.graph.features()), plain, pv);
      const ad::Var loss = mse_loss(fw.prediction, data.graph.targets(), data.splits.train);
      CHECK(res.curve[e].mse == loss.value().item());
      CHECK(res.curve[e].total == loss.value().item());
      CHECK(res.curve[e].mmd == 0.0);
      CHECK(res.curve[e].dist == 0.0);
      tape.backward(loss);
      const ad::Var vars[] = {pv.w1, pv.b1, pv.w2, pv.b2, pv.head_w, pv.head_b};
      for (std::size_t k = 0; k < 6; ++k) grads[k] = tape.grad(vars[k]);
      adam_step(slots, st);
      const auto yhat = predict(data.graph.features(), plain, p);
      CHECK(res.curve[e].val_mse == mse_mae(yhat, data.graph.targets(), data.splits.val).mse);
    }

    TrainConfig forced = cfg;
    forced.lambda_mmd = 0.9;
    forced.lambda_dist = 2.0;
    check_same_run(train(g, forced), res);
  }

  TEST_CASE("first epoch loss with all-zero weights") {
    // Constant prediction head_b = 0: MSE is the mean squared train target and
    // both fairness losses vanish on constant outputs.
    const Graph g = small_graph(3, 10);
    TrainConfig cfg = quick_config();
    cfg.epochs = 1;
    cfg.patience = 1;
    cfg.hidden = 3;
    const ModelParams zero{Tensor(4, 3), Tensor(1, 3), Tensor(3, 3), Tensor(1, 3), Tensor(3, 1), Tensor(1, 1)};
    const TrainResult res = train(g, cfg, zero);
    const Splits s = split_nodes(g, cfg.split_fractions, cfg.seed);
    double hand = 0.0;
    for (auto i : s.train) hand += g.targets()[i] * g.targets()[i];
    hand /= double(s.train.size());
    REQUIRE(res.curve.size() == 1);
    CHECK(res.curve[0].mse == doctest::Approx(hand).epsilon(1e-14));
    CHECK(res.curve[0].mmd == 0.0);
    CHECK(std::fabs(res.curve[0].dist) < 1e-12);
    CHECK(res.curve[0].total == doctest::Approx(hand).epsilon(1e-12));
    const ModelParams wrong{Tensor(5, 3), Tensor(1, 3), Tensor(3, 3), Tensor(1, 3), Tensor(3, 1), Tensor(1, 1)};
    CHECK_THROWS_AS(train(g, cfg, wrong), std::invalid_argument);
  }

  TEST_CASE("training is deterministic") {
    const Graph g = small_graph(4);
    const TrainConfig cfg = quick_config();
    check_same_run(train(g, cfg), train(g, cfg));
  }

  TEST_CASE("recorded total is the weighted sum of its parts") {
    const Graph g = small_graph(5);
    TrainConfig cfg = quick_config();
    cfg.lambda_mmd = 0.37;
    cfg.lambda_dist = 1.3;
    for (Ablation a : kAllAblations) {
      cfg.ablation = a;
      const TrainResult res = train(g, cfg);
      for (const auto& r : res.curve) {
        const double parts = r.mse + cfg.effective_lambda_mmd() * r.mmd + cfg.effective_lambda_dist() * r.dist;
        CHECK(std::fabs(r.total - parts) <= 1e-12);
      }
    }
  }

  TEST_CASE("early stopping restores the best epoch") {
    for (std::uint64_t seed : {0u, 1u, 2u}) {
      const Graph g = small_graph(6 + seed);
      TrainConfig cfg = quick_config();
      cfg.epochs = 60;
      cfg.patience = 5;
      cfg.lr = 5e-2;
      cfg.seed = seed;
      const TrainResult res = train(g, cfg);
      REQUIRE(res.best_epoch >= 1);
      CHECK(res.best_epoch <= res.curve.size());
      CHECK(res.curve.size() <= cfg.epochs);
      double best = HUGE_VAL;
      for (const auto& r : res.curve) best = std::min(best, r.val_mse);
      CHECK(res.curve[res.best_epoch - 1].val_mse == best);
      CHECK(res.val.mse == best);
      if (res.curve.size() < cfg.epochs) CHECK(res.curve.size() == res.best_epoch + cfg.patience);
    }
  }

  TEST_CASE("evaluate reproduces training-time metrics") {
    const Graph g = small_graph(9);
    const TrainConfig cfg = quick_config();
    const TrainResult res = train(g, cfg);
    const Evaluation ev = evaluate(g, cfg, res.params);
    CHECK(ev.train == res.train);
    CHECK(ev.val == res.val);
    CHECK(ev.test == res.test);
    const ModelParams other = init_params(g.feature_dim() + 1, {cfg.hidden, 0});
    CHECK_THROWS_AS(evaluate(g, cfg, other), std::invalid_argument);
  }

  TEST_CASE("non-finite loss aborts with the epoch") {
    const Graph base = small_graph(10);
    std::vector<double> y(base.targets());
    for (auto& v : y) v *= 1e160;
    const Graph g(base.features(), base.edges(), base.sensitive(), y);
    CHECK_THROWS_WITH_AS(train(g, quick_config()), doctest::Contains("epoch 1"), NumericalError);
  }

  TEST_CASE("ablation suite table and aggregation") {
    const Graph g = small_graph(11);
    TrainConfig cfg = quick_config();
    cfg.epochs = 4;
    cfg.patience = 2;
    const auto rows = run_ablation_suite(g, cfg, 5, 1);
    REQUIRE(rows.size() == 25);
    for (std::size_t k = 0; k < rows.size(); ++k) {
      CHECK(rows[k].ok);
      CHECK(rows[k].ablation == kAllAblations[k / 5]);
      CHECK(rows[k].seed == cfg.seed + k % 5);
    }
    const auto summary = summarize_ablation(rows);
    REQUIRE(summary.size() == 5);
    for (std::size_t c = 0; c < 5; ++c) {
      double wd = 0, mse = 0;
      for (std::size_t s = 0; s < 5; ++s) {
        wd += rows[c * 5 + s].test.wd;
        mse += rows[c * 5 + s].test.mse;
      }
      CHECK(summary[c].runs == 5);
      CHECK(summary[c].wd == doctest::Approx(wd / 5).epsilon(1e-14));
      CHECK(summary[c].mse == doctest::Approx(mse / 5).epsilon(1e-14));
    }

    const auto parallel = run_ablation_suite(g, cfg, 5, 3);
    for (std::size_t k = 0; k < rows.size(); ++k) {
      CHECK(parallel[k].test == rows[k].test);
      CHECK(parallel[k].best_epoch == rows[k].best_epoch);
    }
  }

  TEST_CASE("failed runs are recorded without aborting the suite") {
    const Graph base = small_graph(12);
    std::vector<double> y(base.targets());
    for (auto& v : y) v *= 1e160;
    const Graph g(base.features(), base.edges(), base.sensitive(), y);
    TrainConfig cfg = quick_config();
    cfg.epochs = 2;
    cfg.patience = 1;
    const auto rows = run_ablation_suite(g, cfg, 2, 2);
    REQUIRE(rows.size() == 10);
    for (const auto& r : rows) {
      CHECK_FALSE(r.ok);
      CHECK(r.error.find("epoch 1") != std::string::npos);
    }
    for (const auto& s : summarize_ablation(rows)) CHECK(s.runs == 0);
  }
}

TEST_SUITE("experiment") {
  TEST_CASE("test WD does not increase when the distribution loss is switched on") {
    const Graph g = generate_synthetic({});
    TrainConfig off;
    off.lambda_dist = 0.0;
    TrainConfig on;
    double wd_off = 0.0, wd_on = 0.0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      off.seed = on.seed = seed;
      wd_off += train(g, off).test.wd;
      wd_on += train(g, on).test.wd;
    }
    MESSAGE("mean test WD, lambda_dist 0: " << wd_off / 5 << ", default: " << wd_on / 5);
    CHECK(wd_on <= wd_off);
  }
}
