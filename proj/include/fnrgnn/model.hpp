#pragma once

#include "fnrgnn/autodiff.hpp"
#include "fnrgnn/graph.hpp"
#include "fnrgnn/tensor.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace fnr {

struct ModelConfig {
  std::size_t hidden = 64;
  std::uint64_t init_seed = 0;
};

/// Two GCN layers (d -> h -> h) followed by a linear regression head (h -> 1).
struct ModelParams {
  Tensor w1;      // d x h
  Tensor b1;      // 1 x h
  Tensor w2;      // h x h
  Tensor b2;      // 1 x h
  Tensor head_w;  // h x 1
  Tensor head_b;  // 1 x 1

  std::size_t input_dim() const { return w1.rows(); }
  std::size_t hidden() const { return w1.cols(); }

  // Stable (name, tensor) listing used by the optimizer and checkpoints.
  std::vector<std::pair<std::string, Tensor*>> named();
  std::vector<std::pair<std::string, const Tensor*>> named() const;

  // Throws std::invalid_argument describing the first inconsistent shape.
  void validate() const;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

// Glorot-uniform weights, zero biases.
ModelParams init_params(std::size_t input_dim, const ModelConfig& cfg);

struct ParamVars {
  ad::Var w1, b1, w2, b2, head_w, head_b;
};

// Registers every parameter as a leaf on `tape`.
ParamVars bind_params(ad::Tape& tape, const ModelParams& params);

struct ForwardResult {
  ad::Var hidden;      // H2, n x h
  ad::Var prediction;  // yhat, n x 1
};

// H1 = relu(A X W1 + b1), H2 = relu(A H1 W2 + b2), yhat = H2 head_w + head_b
ForwardResult forward(ad::Tape& tape, ad::Var features, const ReweightedAdjacency& adj, const ParamVars& params);

// Forward pass without gradient tracking.
std::vector<double> predict(const Tensor& features, const ReweightedAdjacency& adj, const ModelParams& params);

// Mean squared residual over the rows listed in `mask`.
ad::Var mse_loss(ad::Var prediction, std::span<const double> targets, std::span<const std::size_t> mask);

}  // namespace fnr
