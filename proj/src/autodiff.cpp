#include "fnrgnn/autodiff.hpp"

#include "fnrgnn/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace fnr::ad {

const Tensor& Var::value() const { return tape->value(*this); }
const Tensor& Var::grad() const { return tape->grad(*this); }

Tape::Node& Tape::node(Var v) {
  if (v.tape != this || v.id >= nodes_.size()) throw std::invalid_argument("Var does not belong to this tape");
  return nodes_[v.id];
}

const Tape::Node& Tape::node(Var v) const {
  if (v.tape != this || v.id >= nodes_.size()) throw std::invalid_argument("Var does not belong to this tape");
  return nodes_[v.id];
}

Var Tape::leaf(Tensor value) {
  if (!value.all_finite()) throw std::domain_error("leaf: non-finite value");
  nodes_.push_back(Node{std::move(value), {}, {}, true, true});
  return Var{this, nodes_.size() - 1};
}

Var Tape::constant(Tensor value) {
  if (!value.all_finite()) throw std::domain_error("constant: non-finite value");
  nodes_.push_back(Node{std::move(value), {}, {}, false, false});
  return Var{this, nodes_.size() - 1};
}

Var Tape::record(const char* op, Tensor value, std::span<const Var> inputs, BackwardFn backward) {
  if (!value.all_finite()) throw std::domain_error(std::string(op) + ": non-finite value " + value.shape_string());
  const bool needs =
      std::any_of(inputs.begin(), inputs.end(), [this](Var in) { return node(in).requires_grad; });
  nodes_.push_back(Node{std::move(value), {}, needs ? std::move(backward) : BackwardFn{}, needs, false});
  return Var{this, nodes_.size() - 1};
}

const Tensor& Tape::value(Var v) const { return node(v).value; }

const Tensor& Tape::grad(Var v) const {
  const Node& n = node(v);
  if (!n.grad.empty() || n.value.empty()) return n.grad;
  zero_scratch_ = Tensor(n.value.rows(), n.value.cols());
  return zero_scratch_;
}

bool Tape::requires_grad(Var v) const { return node(v).requires_grad; }

void Tape::accumulate(Var v, const Tensor& g) {
  Node& n = node(v);
  if (!n.requires_grad) return;
  require_same_shape(n.value, g, "accumulate");
  if (n.grad.empty()) {
    n.grad = g;
  } else {
    n.grad.add_scaled(g);
  }
}

Tensor& Tape::grad_buffer(Var v) {
  Node& n = node(v);
  if (!n.requires_grad) throw std::logic_error("grad_buffer: record does not require a gradient");
  if (n.grad.empty()) n.grad = Tensor(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::backward(Var loss) {
  const Node& out = node(loss);
  if (out.value.size() != 1) {
    throw std::invalid_argument("backward: loss must be scalar, got shape " + out.value.shape_string());
  }
  for (auto& n : nodes_) n.grad = Tensor();
  if (!out.requires_grad) return;
  nodes_[loss.id].grad = Tensor::scalar(1.0);
  for (std::size_t id = loss.id + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (n.grad.empty()) continue;
    if (n.backward) {
      if (!n.grad.all_finite()) throw std::domain_error("backward: non-finite gradient at record " + std::to_string(id));
      n.backward(*this, n.grad);
    }
    if (!n.is_leaf) n.grad = Tensor();
  }
}

void Tape::clear() { nodes_.clear(); }

namespace {

Tape& tape_of(Var a, Var b) {
  if (a.tape == nullptr || a.tape != b.tape) throw std::invalid_argument("operands live on different tapes");
  return *a.tape;
}

}  // namespace

Var add(Var a, Var b) {
  Tape& t = tape_of(a, b);
  require_same_shape(a.value(), b.value(), "add");
  Tensor out = a.value();
  out.add_scaled(b.value());
  const Var in[] = {a, b};
  return t.record("add", std::move(out), in, [a, b](Tape& tp, const Tensor& up) {
    tp.accumulate(a, up);
    tp.accumulate(b, up);
  });
}

Var sub(Var a, Var b) {
  Tape& t = tape_of(a, b);
  require_same_shape(a.value(), b.value(), "sub");
  Tensor out = a.value();
  out.add_scaled(b.value(), -1.0);
  const Var in[] = {a, b};
  return t.record("sub", std::move(out), in, [a, b](Tape& tp, const Tensor& up) {
    tp.accumulate(a, up);
    if (tp.requires_grad(b)) {
      Tensor g = up;
      kernels::scale(-1.0, g.data().data(), g.size());
      tp.accumulate(b, g);
    }
  });
}

Var mul(Var a, Var b) {
  Tape& t = tape_of(a, b);
  require_same_shape(a.value(), b.value(), "mul");
  Tensor out = a.value();
  const auto bv = b.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  const Var in[] = {a, b};
  return t.record("mul", std::move(out), in, [a, b](Tape& tp, const Tensor& up) {
    if (tp.requires_grad(a)) {
      Tensor g = up;
      const auto bv = tp.value(b).data();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] *= bv[i];
      tp.accumulate(a, g);
    }
    if (tp.requires_grad(b)) {
      Tensor g = up;
      const auto av = tp.value(a).data();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] *= av[i];
      tp.accumulate(b, g);
    }
  });
}

Var scale(Var a, double factor) {
  Tensor out = a.value();
  kernels::scale(factor, out.data().data(), out.size());
  const Var in[] = {a};
  return a.tape->record("scale", std::move(out), in, [a, factor](Tape& tp, const Tensor& up) {
    Tensor g = up;
    kernels::scale(factor, g.data().data(), g.size());
    tp.accumulate(a, g);
  });
}

Var add_constant(Var a, double c) {
  Tensor out = a.value();
  for (auto& v : out.data()) v += c;
  const Var in[] = {a};
  return a.tape->record("add_constant", std::move(out), in,
                        [a](Tape& tp, const Tensor& up) { tp.accumulate(a, up); });
}

Var add_row_bias(Var x, Var bias) {
  Tape& t = tape_of(x, bias);
  const Tensor& xv = x.value();
  const Tensor& bv = bias.value();
  if (bv.rows() != 1 || bv.cols() != xv.cols()) {
    throw std::invalid_argument("add_row_bias: shape mismatch " + xv.shape_string() + " vs " + bv.shape_string());
  }
  Tensor out = xv;
  for (std::size_t r = 0; r < out.rows(); ++r) kernels::axpy(1.0, bv.data().data(), out.row(r).data(), out.cols());
  const Var in[] = {x, bias};
  return t.record("add_row_bias", std::move(out), in, [x, bias](Tape& tp, const Tensor& up) {
    tp.accumulate(x, up);
    if (tp.requires_grad(bias)) {
      Tensor g(1, up.cols());
      for (std::size_t r = 0; r < up.rows(); ++r) kernels::axpy(1.0, up.row(r).data(), g.data().data(), up.cols());
      tp.accumulate(bias, g);
    }
  });
}

Var add_scalar(Var x, Var s) {
  Tape& t = tape_of(x, s);
  const double sv = s.value().item();
  Tensor out = x.value();
  for (auto& v : out.data()) v += sv;
  const Var in[] = {x, s};
  return t.record("add_scalar", std::move(out), in, [x, s](Tape& tp, const Tensor& up) {
    tp.accumulate(x, up);
    if (tp.requires_grad(s)) tp.accumulate(s, Tensor::scalar(kernels::sum(up.data().data(), up.size())));
  });
}

Var matmul(Var a, Var b) {
  Tape& t = tape_of(a, b);
  Tensor out = fnr::matmul(a.value(), b.value());
  const Var in[] = {a, b};
  return t.record("matmul", std::move(out), in, [a, b](Tape& tp, const Tensor& up) {
    if (tp.requires_grad(a)) tp.accumulate(a, matmul_nt(up, tp.value(b)));
    if (tp.requires_grad(b)) tp.accumulate(b, matmul_tn(tp.value(a), up));
  });
}

Var spmm(const CsrMatrix& adjacency, Var x) {
  Tensor out = fnr::spmm(adjacency, x.value());
  const Var in[] = {x};
  const CsrMatrix* adj = &adjacency;
  return x.tape->record("spmm", std::move(out), in,
                        [adj, x](Tape& tp, const Tensor& up) { tp.accumulate(x, spmm_transposed(*adj, up)); });
}

Var relu(Var x) {
  Tensor out = x.value();
  for (auto& v : out.data()) v = v > 0.0 ? v : 0.0;
  const Var in[] = {x};
  return x.tape->record("relu", std::move(out), in, [x](Tape& tp, const Tensor& up) {
    Tensor g = up;
    const auto xv = tp.value(x).data();
    for (std::size_t i = 0; i < g.size(); ++i)
      if (!(xv[i] > 0.0)) g[i] = 0.0;
    tp.accumulate(x, g);
  });
}

Var abs(Var x) {
  Tensor out = x.value();
  for (auto& v : out.data()) v = std::fabs(v);
  const Var in[] = {x};
  return x.tape->record("abs", std::move(out), in, [x](Tape& tp, const Tensor& up) {
    Tensor g = up;
    const auto xv = tp.value(x).data();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] *= xv[i] > 0.0 ? 1.0 : (xv[i] < 0.0 ? -1.0 : 0.0);
    tp.accumulate(x, g);
  });
}

Var square(Var x) {
  Tensor out = x.value();
  for (auto& v : out.data()) v *= v;
  const Var in[] = {x};
  return x.tape->record("square", std::move(out), in, [x](Tape& tp, const Tensor& up) {
    Tensor g = up;
    const auto xv = tp.value(x).data();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] *= 2.0 * xv[i];
    tp.accumulate(x, g);
  });
}

Var exp(Var x) {
  Tensor out(x.rows(), x.cols());
  kernels::exp(x.value().data().data(), out.data().data(), out.size());
  const Var in[] = {x};
  Tape* t = x.tape;
  const std::size_t self = t->size();
  return t->record("exp", std::move(out), in, [x, self](Tape& tp, const Tensor& up) {
    Tensor g = up;
    const auto yv = tp.value(Var{&tp, self}).data();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] *= yv[i];
    tp.accumulate(x, g);
  });
}

Var gather_rows(Var x, std::span<const std::size_t> rows) {
  const Tensor& xv = x.value();
  Tensor out(rows.size(), xv.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k] >= xv.rows()) throw std::out_of_range("gather_rows: row index out of range");
    std::copy(xv.row(rows[k]).begin(), xv.row(rows[k]).end(), out.row(k).begin());
  }
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  const Var in[] = {x};
  return x.tape->record("gather_rows", std::move(out), in, [x, idx = std::move(idx)](Tape& tp, const Tensor& up) {
    const Tensor& xv = tp.value(x);
    Tensor g(xv.rows(), xv.cols());
    for (std::size_t k = 0; k < idx.size(); ++k) kernels::axpy(1.0, up.row(k).data(), g.row(idx[k]).data(), g.cols());
    tp.accumulate(x, g);
  });
}

Var sum(Var x) {
  const Tensor& xv = x.value();
  Tensor out = Tensor::scalar(kernels::sum(xv.data().data(), xv.size()));
  const Var in[] = {x};
  return x.tape->record("sum", std::move(out), in, [x](Tape& tp, const Tensor& up) {
    const Tensor& xv = tp.value(x);
    tp.accumulate(x, Tensor(xv.rows(), xv.cols(), up.item()));
  });
}

Var mean(Var x) {
  const Tensor& xv = x.value();
  if (xv.empty()) throw std::invalid_argument("mean: empty tensor");
  const double n = static_cast<double>(xv.size());
  Tensor out = Tensor::scalar(kernels::sum(xv.data().data(), xv.size()) / n);
  const Var in[] = {x};
  return x.tape->record("mean", std::move(out), in, [x, n](Tape& tp, const Tensor& up) {
    const Tensor& xv = tp.value(x);
    tp.accumulate(x, Tensor(xv.rows(), xv.cols(), up.item() / n));
  });
}

Var pairwise_sq_dist(Var a, Var b) {
  Tape& t = tape_of(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.cols() != bv.cols()) {
    throw std::invalid_argument("pairwise_sq_dist: shape mismatch " + av.shape_string() + " vs " + bv.shape_string());
  }
  Tensor out(av.rows(), bv.rows());
  for (std::size_t i = 0; i < av.rows(); ++i)
    for (std::size_t j = 0; j < bv.rows(); ++j)
      out(i, j) = kernels::squared_distance(av.row(i).data(), bv.row(j).data(), av.cols());
  const Var in[] = {a, b};
  return t.record("pairwise_sq_dist", std::move(out), in, [a, b](Tape& tp, const Tensor& up) {
    const Tensor& av = tp.value(a);
    const Tensor& bv = tp.value(b);
    // dD_ij/da_i = 2 (a_i - b_j), dD_ij/db_j = -2 (a_i - b_j)
    if (tp.requires_grad(a)) {
      Tensor g = fnr::matmul(up, bv);
      for (std::size_t i = 0; i < av.rows(); ++i) {
        const double rs = kernels::sum(up.row(i).data(), up.cols());
        auto gi = g.row(i);
        const auto ai = av.row(i);
        for (std::size_t c = 0; c < g.cols(); ++c) gi[c] = 2.0 * (rs * ai[c] - gi[c]);
      }
      tp.accumulate(a, g);
    }
    if (tp.requires_grad(b)) {
      Tensor g = matmul_tn(up, av);
      std::vector<double> cs(bv.rows(), 0.0);
      for (std::size_t i = 0; i < up.rows(); ++i) kernels::axpy(1.0, up.row(i).data(), cs.data(), up.cols());
      for (std::size_t j = 0; j < bv.rows(); ++j) {
        auto gj = g.row(j);
        const auto bj = bv.row(j);
        for (std::size_t c = 0; c < g.cols(); ++c) gj[c] = 2.0 * (cs[j] * bj[c] - gj[c]);
      }
      tp.accumulate(b, g);
    }
  });
}

Var outer_sum(Var u, Var v) {
  Tape& t = tape_of(u, v);
  const Tensor& uv = u.value();
  const Tensor& vv = v.value();
  if (uv.cols() != 1 || vv.cols() != 1) {
    throw std::invalid_argument("outer_sum: expected column vectors, got " + uv.shape_string() + " and " +
                                vv.shape_string());
  }
  Tensor out(uv.rows(), vv.rows());
  for (std::size_t i = 0; i < uv.rows(); ++i)
    for (std::size_t j = 0; j < vv.rows(); ++j) out(i, j) = uv[i] + vv[j];
  const Var in[] = {u, v};
  return t.record("outer_sum", std::move(out), in, [u, v](Tape& tp, const Tensor& up) {
    if (tp.requires_grad(u)) {
      Tensor g(up.rows(), 1);
      for (std::size_t i = 0; i < up.rows(); ++i) g[i] = kernels::sum(up.row(i).data(), up.cols());
      tp.accumulate(u, g);
    }
    if (tp.requires_grad(v)) {
      Tensor g(up.cols(), 1);
      for (std::size_t i = 0; i < up.rows(); ++i) kernels::axpy(1.0, up.row(i).data(), g.data().data(), up.cols());
      tp.accumulate(v, g);
    }
  });
}

Var softmin(Var cost, Var potential, std::span<const double> log_weights, double eps, Axis axis) {
  Tape& t = tape_of(cost, potential);
  if (!(eps > 0.0)) throw std::invalid_argument("softmin: eps must be positive");
  const Tensor& c = cost.value();
  const Tensor& pot = potential.value();
  const bool by_rows = axis == Axis::rows;
  const std::size_t n_out = by_rows ? c.rows() : c.cols();
  const std::size_t n_in = by_rows ? c.cols() : c.rows();
  if (pot.cols() != 1 || pot.rows() != n_in || log_weights.size() != n_in) {
    throw std::invalid_argument("softmin: cost " + c.shape_string() + " incompatible with potential " +
                                pot.shape_string() + " and " + std::to_string(log_weights.size()) + " weights");
  }

  // Row k of `plan` holds the normalized weights of output k; reused by backward.
  Tensor out(n_out, 1);
  Tensor plan(n_out, n_in);
  std::vector<double> column(by_rows ? 0 : n_in);
  const double inv_eps = 1.0 / eps;
  for (std::size_t k = 0; k < n_out; ++k) {
    const double* ck = c.row(by_rows ? k : 0).data();
    if (!by_rows) {
      for (std::size_t j = 0; j < n_in; ++j) column[j] = c(j, k);
      ck = column.data();
    }
    auto z = plan.row(k);
    const double lo = kernels::softmin_logits(ck, pot.data().data(), log_weights.data(), inv_eps, z.data(), n_in);
    kernels::exp(z.data(), z.data(), n_in);
    const double total = kernels::sum(z.data(), n_in);
    out[k] = lo - eps * std::log(total);
    kernels::scale(1.0 / total, z.data(), n_in);
  }

  const Var in[] = {cost, potential};
  return t.record("softmin", std::move(out), in,
                  [cost, potential, by_rows, plan = std::move(plan)](Tape& tp, const Tensor& up) {
                    // d out_k / d C = P_k, d out_k / d pot = -P_k
                    const std::size_t n_out = plan.rows();
                    const std::size_t n_in = plan.cols();
                    if (tp.requires_grad(cost)) {
                      Tensor& g = tp.grad_buffer(cost);
                      for (std::size_t k = 0; k < n_out; ++k) {
                        const auto p = plan.row(k);
                        if (by_rows) {
                          kernels::axpy(up[k], p.data(), g.row(k).data(), n_in);
                        } else {
                          for (std::size_t j = 0; j < n_in; ++j) g(j, k) += up[k] * p[j];
                        }
                      }
                    }
                    if (tp.requires_grad(potential)) {
                      Tensor g(n_in, 1);
                      for (std::size_t k = 0; k < n_out; ++k) kernels::axpy(-up[k], plan.row(k).data(), g.data().data(), n_in);
                      tp.accumulate(potential, g);
                    }
                  });
}

}  // namespace fnr::ad
