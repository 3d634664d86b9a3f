#include "fnrgnn/graph.hpp"
#include "fnrgnn/model.hpp"
#include "support/gen.hpp"

#include <doctest.h>

#include <cmath>

using namespace fnr;
using fnr::testing::Gen;

namespace {

ForwardResult run(ad::Tape& tape, const Tensor& x, const ReweightedAdjacency& adj, const ModelParams& p) {
  return forward(tape, tape.constant(x), adj, bind_params(tape, p));
}

ModelParams zero_params(std::size_t d, std::size_t h) {
  return {Tensor(d, h), Tensor(1, h), Tensor(h, h), Tensor(1, h), Tensor(h, 1), Tensor(1, 1)};
}

}  // namespace

TEST_SUITE("model") {
  TEST_CASE("init is seeded and within the Glorot bound") {
    const ModelParams a = init_params(5, {7, 3});
    const ModelParams b = init_params(5, {7, 3});
    const ModelParams c = init_params(5, {7, 4});
    CHECK(a == b);
    CHECK_FALSE(a == c);
    CHECK(a.w1.rows() == 5);
    CHECK(a.w2.rows() == 7);
    CHECK(a.head_w.cols() == 1);
    auto within = [](const Tensor& w) {
      const double bound = std::sqrt(6.0 / double(w.rows() + w.cols()));
      for (double v : w.data())
        if (std::fabs(v) > bound) return false;
      return true;
    };
    CHECK(within(a.w1));
    CHECK(within(a.w2));
    CHECK(within(a.head_w));
    for (double v : a.b1.data()) CHECK(v == 0.0);
    CHECK(a.head_b.item() == 0.0);
    CHECK_NOTHROW(a.validate());
  }

  TEST_CASE("zero weights predict the head bias") {
    Gen gen(61);
    const Graph g = gen.graph(8, 3, 0.3);
    ModelParams p = zero_params(3, 4);
    p.head_b[0] = 1.75;
    for (double v : predict(g.features(), build_plain_adjacency(g), p)) CHECK(v == 1.75);
  }

  TEST_CASE("isolated nodes reduce to a per-node MLP") {
    Gen gen(62);
    const Graph g(gen.tensor(6, 3), {}, {0, 1, 0, 1, 0, 1}, std::vector<double>(6, 0.0));
    ModelParams p = init_params(3, {5, 9});
    p.b1 = gen.tensor(1, 5, 0.2);
    p.b2 = gen.tensor(1, 5, 0.2);
    p.head_b = Tensor::scalar(0.4);
    const auto yhat = predict(g.features(), build_reweighted_adjacency(g, {}), p);
    for (std::size_t i = 0; i < 6; ++i) {
      std::vector<double> h1(5), h2(5);
      for (std::size_t c = 0; c < 5; ++c) {
        double s = p.b1[c];
        for (std::size_t k = 0; k < 3; ++k) s += g.features()(i, k) * p.w1(k, c);
        h1[c] = std::max(s, 0.0);
      }
      double y = p.head_b[0];
      for (std::size_t c = 0; c < 5; ++c) {
        double s = p.b2[c];
        for (std::size_t k = 0; k < 5; ++k) s += h1[k] * p.w2(k, c);
        h2[c] = std::max(s, 0.0);
        y += h2[c] * p.head_w[c];
      }
      CHECK(yhat[i] == doctest::Approx(y).epsilon(1e-14));
    }
  }

  TEST_CASE("two-node hand example") {
    // Single-edge adjacency with raw weight 1: every entry is 1/2. With unit
    // weights and zero biases yhat = A (A X) = (1/2, 1/2).
    const Graph g(Tensor(2, 1, {1.0, 0.0}), {{0, 1}}, {0, 0}, {0.0, 0.0});
    const auto adj = normalize_adjacency(g, std::vector<double>{1.0});
    const ModelParams p{Tensor(1, 1, {1.0}), Tensor(1, 1), Tensor(1, 1, {1.0}),
                        Tensor(1, 1),        Tensor(1, 1, {1.0}), Tensor(1, 1)};
    const auto yhat = predict(g.features(), adj, p);
    CHECK(yhat[0] == 0.5);
    CHECK(yhat[1] == 0.5);
  }

  TEST_CASE("forward and predict agree") {
    Gen gen(63);
    const Graph g = gen.graph(12, 4, 0.3);
    const ModelParams p = init_params(4, {6, 1});
    const auto adj = build_reweighted_adjacency(g, {});
    ad::Tape tape;
    const auto fw = run(tape, g.features(), adj, p);
    CHECK(fw.hidden.rows() == 12);
    CHECK(fw.hidden.cols() == 6);
    CHECK(fw.prediction.value().values() == predict(g.features(), adj, p));
  }

  TEST_CASE("forward is permutation-equivariant") {
    for (std::size_t k = 0; k < 10; ++k) {
      Gen gen(testing::case_seed(64, k));
      const Graph g = gen.graph(10, 3, 0.3);
      const auto perm = gen.permutation(10);  // new index of old node i is perm[i]
      Tensor x(10, 3);
      std::vector<int> s(10);
      std::vector<double> y(10);
      for (std::size_t i = 0; i < 10; ++i) {
        for (std::size_t c = 0; c < 3; ++c) x(perm[i], c) = g.features()(i, c);
        s[perm[i]] = g.sensitive()[i];
        y[perm[i]] = g.targets()[i];
      }
      std::vector<Edge> edges;
      for (const auto& [a, b] : g.edges()) edges.emplace_back(perm[a], perm[b]);
      const Graph h(x, edges, s, y);
      const ModelParams p = init_params(3, {5, k});
      const auto ya = predict(g.features(), build_reweighted_adjacency(g, {}), p);
      const auto yb = predict(h.features(), build_reweighted_adjacency(h, {}), p);
      for (std::size_t i = 0; i < 10; ++i) CHECK(yb[perm[i]] == doctest::Approx(ya[i]).epsilon(1e-13));
    }
  }

  TEST_CASE("gamma reaches the model only through the adjacency") {
    Gen gen(65);
    const Graph g = gen.graph(15, 3, 0.3);
    const ModelParams p = init_params(3, {4, 2});
    for (double gamma : {0.0, 0.7, 4.0}) {
      const ReweightConfig cfg{gamma, 1e-3};
      const auto adj = build_reweighted_adjacency(g, cfg);
      const auto direct = normalize_adjacency(g, raw_edge_weights(g, cfg));
      CHECK(predict(g.features(), adj, p) == predict(g.features(), direct, p));
    }
  }

  TEST_CASE("mse loss") {
    ad::Tape tape;
    const ad::Var yhat = tape.leaf(Tensor::column({0.0, 0.0, 9.0}));
    const std::vector<double> y{1.0, 3.0, 0.0};
    const std::vector<std::size_t> mask{0, 1};
    CHECK(mse_loss(yhat, y, mask).value().item() == 5.0);
    const ad::Var exact = tape.leaf(Tensor::column({1.0, 3.0, 0.0}));
    CHECK(mse_loss(exact, y, mask).value().item() == 0.0);
    CHECK(mse_loss(ad::add_constant(exact, 0.5), y, mask).value().item() == 0.25);
    CHECK_THROWS_AS(mse_loss(yhat, y, {}), std::invalid_argument);
  }

  TEST_CASE("shape mismatches are rejected") {
    Gen gen(66);
    const Graph g = gen.graph(5, 3, 0.5);
    const ModelParams p = init_params(4, {3, 0});
    ad::Tape tape;
    CHECK_THROWS_AS(run(tape, g.features(), build_plain_adjacency(g), p), std::invalid_argument);
    ModelParams bad = init_params(3, {3, 0});
    bad.b2 = Tensor(1, 4);
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  }
}
