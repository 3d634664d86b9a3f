#include "fnrgnn/model.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace fnr {

std::vector<std::pair<std::string, Tensor*>> ModelParams::named() {
  return {{"w1", &w1}, {"b1", &b1}, {"w2", &w2}, {"b2", &b2}, {"head_w", &head_w}, {"head_b", &head_b}};
}

std::vector<std::pair<std::string, const Tensor*>> ModelParams::named() const {
  return {{"w1", &w1}, {"b1", &b1}, {"w2", &w2}, {"b2", &b2}, {"head_w", &head_w}, {"head_b", &head_b}};
}

void ModelParams::validate() const {
  const std::size_t d = w1.rows();
  const std::size_t h = w1.cols();
  auto expect = [](const Tensor& t, std::size_t r, std::size_t c, const char* name) {
    if (t.rows() != r || t.cols() != c) {
      throw std::invalid_argument(std::string("ModelParams: ") + name + " has shape " + t.shape_string() +
                                  ", expected (" + std::to_string(r) + ", " + std::to_string(c) + ")");
    }
    if (!t.all_finite()) throw std::invalid_argument(std::string("ModelParams: ") + name + " is not finite");
  };
  if (d == 0 || h == 0) throw std::invalid_argument("ModelParams: empty w1");
  expect(w1, d, h, "w1");
  expect(b1, 1, h, "b1");
  expect(w2, h, h, "w2");
  expect(b2, 1, h, "b2");
  expect(head_w, h, 1, "head_w");
  expect(head_b, 1, 1, "head_b");
}

namespace {

Tensor glorot(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor t(fan_in, fan_out);
  for (auto& v : t.data()) v = dist(rng);
  return t;
}

}  // namespace

ModelParams init_params(std::size_t input_dim, const ModelConfig& cfg) {
  if (input_dim == 0) throw std::invalid_argument("init_params: input dimension must be >= 1");
  if (cfg.hidden == 0) throw std::invalid_argument("init_params: hidden width must be >= 1");
  std::mt19937_64 rng(cfg.init_seed);
  const std::size_t h = cfg.hidden;
  ModelParams p;
  p.w1 = glorot(input_dim, h, rng);
  p.b1 = Tensor(1, h);
  p.w2 = glorot(h, h, rng);
  p.b2 = Tensor(1, h);
  p.head_w = glorot(h, 1, rng);
  p.head_b = Tensor(1, 1);
  return p;
}

ParamVars bind_params(ad::Tape& tape, const ModelParams& params) {
  params.validate();
  return ParamVars{tape.leaf(params.w1),     tape.leaf(params.b1),     tape.leaf(params.w2),
                   tape.leaf(params.b2),     tape.leaf(params.head_w), tape.leaf(params.head_b)};
}

ForwardResult forward(ad::Tape& tape, ad::Var features, const ReweightedAdjacency& adj, const ParamVars& params) {
  const auto& x = tape.value(features);
  if (adj.num_nodes() != x.rows()) {
    throw std::invalid_argument("forward: adjacency has " + std::to_string(adj.num_nodes()) + " nodes, features " +
                                x.shape_string());
  }
  const auto& a = adj.matrix();
  // A X W == (A X) W; aggregating first keeps the sparse product on the narrower side.
  ad::Var h1 = ad::relu(ad::add_row_bias(ad::matmul(ad::spmm(a, features), params.w1), params.b1));
  ad::Var h2 = ad::relu(ad::add_row_bias(ad::matmul(ad::spmm(a, h1), params.w2), params.b2));
  ad::Var yhat = ad::add_scalar(ad::matmul(h2, params.head_w), params.head_b);
  return {h2, yhat};
}

std::vector<double> predict(const Tensor& features, const ReweightedAdjacency& adj, const ModelParams& params) {
  params.validate();
  ad::Tape tape;
  ParamVars vars{tape.constant(params.w1), tape.constant(params.b1),     tape.constant(params.w2),
                 tape.constant(params.b2), tape.constant(params.head_w), tape.constant(params.head_b)};
  const auto out = forward(tape, tape.constant(features), adj, vars);
  return tape.value(out.prediction).values();
}

ad::Var mse_loss(ad::Var prediction, std::span<const double> targets, std::span<const std::size_t> mask) {
  if (mask.empty()) throw std::invalid_argument("mse_loss: empty node mask");
  std::vector<double> y;
  y.reserve(mask.size());
  for (auto i : mask) {
    if (i >= targets.size()) throw std::out_of_range("mse_loss: mask index out of range");
    y.push_back(targets[i]);
  }
  ad::Tape& tape = *prediction.tape;
  ad::Var picked = ad::gather_rows(prediction, mask);
  return ad::mean(ad::square(ad::sub(picked, tape.constant(Tensor::column(std::move(y))))));
}

}  // namespace fnr
