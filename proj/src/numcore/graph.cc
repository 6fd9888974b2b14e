#include "rephrase/numcore/graph.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace rephrase::numcore {

namespace {

using StridedMap = Eigen::Map<Tensor, 0, Eigen::OuterStride<>>;
using ConstStridedMap = Eigen::Map<const Tensor, 0, Eigen::OuterStride<>>;

// Rows b, b + batch, b + 2 * batch, ... of a time-major tensor.
ConstStridedMap batch_rows(const Tensor& t, Index batch, Index b) {
  return ConstStridedMap(t.data() + b * t.cols(), t.rows() / batch, t.cols(),
                         Eigen::OuterStride<>(batch * t.cols()));
}

StridedMap batch_rows(Tensor& t, Index batch, Index b) {
  return StridedMap(t.data() + b * t.cols(), t.rows() / batch, t.cols(),
                    Eigen::OuterStride<>(batch * t.cols()));
}

[[noreturn]] void fail(const char* op, const std::string& what) {
  throw std::invalid_argument(std::string(op) + ": " + what);
}

void same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!(a.rows() == b.rows() && a.cols() == b.cols()))
    fail(op, "shape mismatch " + shape_string(a) + " vs " + shape_string(b));
}

Graph& graph_of(Var a) {
  if (!a.valid()) throw std::invalid_argument("operation on an empty Var");
  return *a.graph;
}

}  // namespace

const Tensor& Var::value() const { return graph->value(id); }

Graph::Graph(GraphOptions opts) : opts_(opts), rng_(opts.dropout_seed) { nodes_.reserve(256); }

Var Graph::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Graph::param(Parameter& p) {
  if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return Var{this, it->second};
  Node n;
  n.external = &p.value;
  n.requires_grad = opts_.track_gradients;
  if (n.requires_grad) {
    if (p.grad.rows() != p.value.rows() || p.grad.cols() != p.value.cols()) {
      p.grad = Tensor::Zero(p.value.rows(), p.value.cols());
    }
    Parameter* target = &p;
    n.backward = [target](Graph& g, int self) { target->grad += g.out_grad(self); };
  }
  nodes_.push_back(std::move(n));
  param_nodes_[&p] = static_cast<int>(nodes_.size()) - 1;
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Tensor& Graph::grad(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.grad.size() == 0) {
    const Tensor& v = n.external != nullptr ? *n.external : n.value;
    n.grad = Tensor::Zero(v.rows(), v.cols());
  }
  return n.grad;
}

Var Graph::push(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward) {
  return push(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()), std::move(backward));
}

Var Graph::push(Tensor value, std::span<const Var> inputs, BackwardFn backward) {
  bool rg = false;
  if (opts_.track_gradients) {
    for (const Var& v : inputs) {
      if (v.graph != this) throw std::invalid_argument("Var from a different graph");
      rg = rg || requires_grad(v.id);
    }
  }
  Node n;
  n.value = std::move(value);
  n.requires_grad = rg;
  if (rg) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

void Graph::backward(Var loss) {
  if (loss.graph != this) throw std::invalid_argument("loss from a different graph");
  if (!opts_.track_gradients) throw std::logic_error("backward on a graph without gradients");
  const Tensor& lv = value(loss.id);
  if (lv.rows() != 1 || lv.cols() != 1) {
    throw std::invalid_argument("backward needs a scalar loss, got " + shape_string(lv));
  }
  if (!requires_grad(loss.id)) return;
  grad(loss.id).setOnes();
  for (int i = loss.id; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (n.requires_grad && n.backward && n.grad.size() != 0) n.backward(*this, i);
  }
}

// --- primitives -----------------------------------------------------------

Var matmul(Var a, Var b) {
  Graph& g = graph_of(a);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  if (!(A.cols() == B.rows())) fail("matmul", shape_string(A) + " x " + shape_string(B));
  Tensor out = A * B;
  return g.push(std::move(out), {a, b}, [a, b](Graph& g, int self) {
    const Tensor& G = g.out_grad(self);
    if (g.requires_grad(a.id)) g.grad(a.id).noalias() += G * g.value(b.id).transpose();
    if (g.requires_grad(b.id)) g.grad(b.id).noalias() += g.value(a.id).transpose() * G;
  });
}

Var add(Var a, Var b) {
  Graph& g = graph_of(a);
  same_shape(a.value(), b.value(), "add");
  Tensor out = a.value() + b.value();
  return g.push(std::move(out), {a, b}, [a, b](Graph& g, int self) {
    const Tensor& G = g.out_grad(self);
    if (g.requires_grad(a.id)) g.grad(a.id) += G;
    if (g.requires_grad(b.id)) g.grad(b.id) += G;
  });
}

Var sub(Var a, Var b) {
  Graph& g = graph_of(a);
  same_shape(a.value(), b.value(), "sub");
  Tensor out = a.value() - b.value();
  return g.push(std::move(out), {a, b}, [a, b](Graph& g, int self) {
    const Tensor& G = g.out_grad(self);
    if (g.requires_grad(a.id)) g.grad(a.id) += G;
    if (g.requires_grad(b.id)) g.grad(b.id) -= G;
  });
}

Var mul(Var a, Var b) {
  Graph& g = graph_of(a);
  same_shape(a.value(), b.value(), "mul");
  Tensor out = a.value().cwiseProduct(b.value());
  return g.push(std::move(out), {a, b}, [a, b](Graph& g, int self) {
    const Tensor& G = g.out_grad(self);
    if (g.requires_grad(a.id)) g.grad(a.id) += G.cwiseProduct(g.value(b.id));
    if (g.requires_grad(b.id)) g.grad(b.id) += G.cwiseProduct(g.value(a.id));
  });
}

Var add_row(Var a, Var row) {
  Graph& g = graph_of(a);
  const Tensor& R = row.value();
  if (!(R.rows() == 1 && R.cols() == a.cols()))
    fail("add_row", shape_string(a.value()) + " + " + shape_string(R));
  Tensor out = a.value().rowwise() + R.row(0);
  return g.push(std::move(out), {a, row}, [a, row](Graph& g, int self) {
    const Tensor& G = g.out_grad(self);
    if (g.requires_grad(a.id)) g.grad(a.id) += G;
    if (g.requires_grad(row.id)) g.grad(row.id) += G.colwise().sum();
  });
}

Var mul_col(Var a, Var col) {
  Graph& g = graph_of(a);
  const Tensor& C = col.value();
  if (!(C.cols() == 1 && C.rows() == a.rows()))
    fail("mul_col", shape_string(a.value()) + " * " + shape_string(C));
  Tensor out = a.value().array().colwise() * C.col(0).array();
  return g.push(std::move(out), {a, col}, [a, col](Graph& g, int self) {
    const Tensor& G = g.out_grad(self);
    if (g.requires_grad(a.id)) {
      g.grad(a.id).array() += G.array().colwise() * g.value(col.id).col(0).array();
    }
    if (g.requires_grad(col.id)) {
      g.grad(col.id) += G.cwiseProduct(g.value(a.id)).rowwise().sum();
    }
  });
}

Var affine(Var a, Real scale, Real shift) {
  Graph& g = graph_of(a);
  Tensor out = (a.value().array() * scale + shift).matrix();
  return g.push(std::move(out), {a},
                [a, scale](Graph& g, int self) { g.grad(a.id) += scale * g.out_grad(self); });
}

Var concat_cols(std::initializer_list<Var> parts) {
  return concat_cols(std::span<const Var>(parts.begin(), parts.size()));
}

Var concat_cols(std::span<const Var> parts) {
  if (!(!parts.empty())) fail("concat_cols", "no inputs");
  Graph& g = graph_of(parts[0]);
  Index rows = parts[0].rows(), cols = 0;
  for (const Var& p : parts) {
    if (!(p.rows() == rows)) fail("concat_cols", "row count mismatch");
    cols += p.cols();
  }
  Tensor out(rows, cols);
  std::vector<Index> offsets;
  Index at = 0;
  for (const Var& p : parts) {
    offsets.push_back(at);
    out.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return g.push(std::move(out), parts, [inputs, offsets](Graph& g, int self) {
    const Tensor& G = g.out_grad(self);
    for (std::size_t k = 0; k < inputs.size(); ++k) {
      int id = inputs[k].id;
      if (g.requires_grad(id)) g.grad(id) += G.middleCols(offsets[k], g.value(id).cols());
    }
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (!(!parts.empty())) fail("concat_rows", "no inputs");
  Graph& g = graph_of(parts[0]);
  Index cols = parts[0].cols(), rows = 0;
  for (const Var& p : parts) {
    if (!(p.cols() == cols)) fail("concat_rows", "column count mismatch");
    rows += p.rows();
  }
  Tensor out(rows, cols);
  std::vector<Index> offsets;
  Index at = 0;
  for (const Var& p : parts) {
    offsets.push_back(at);
    out.middleRows(at, p.rows()) = p.value();
    at += p.rows();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return g.push(std::move(out), parts, [inputs, offsets](Graph& g, int self) {
    const Tensor& G = g.out_grad(self);
    for (std::size_t k = 0; k < inputs.size(); ++k) {
      int id = inputs[k].id;
      if (g.requires_grad(id)) g.grad(id) += G.middleRows(offsets[k], g.value(id).rows());
    }
  });
}

Var slice_cols(Var a, Index start, Index width) {
  Graph& g = graph_of(a);
  if (!(start >= 0 && width >= 0 && start + width <= a.cols())) fail("slice_cols", "out of range");
  Tensor out = a.value().middleCols(start, width);
  return g.push(std::move(out), {a}, [a, start, width](Graph& g, int self) {
    g.grad(a.id).middleCols(start, width) += g.out_grad(self);
  });
}

Var slice_rows(Var a, Index start, Index count) {
  Graph& g = graph_of(a);
  if (!(start >= 0 && count >= 0 && start + count <= a.rows())) fail("slice_rows", "out of range");
  Tensor out = a.value().middleRows(start, count);
  return g.push(std::move(out), {a}, [a, start, count](Graph& g, int self) {
    g.grad(a.id).middleRows(start, count) += g.out_grad(self);
  });
}

Var pad_cols(Var a, Index width) {
  Graph& g = graph_of(a);
  if (!(width >= a.cols())) fail("pad_cols", "target narrower than input");
  Index c = a.cols();
  Tensor out = Tensor::Zero(a.rows(), width);
  out.leftCols(c) = a.value();
  return g.push(std::move(out), {a},
                [a, c](Graph& g, int self) { g.grad(a.id) += g.out_grad(self).leftCols(c); });
}

Var embedding(Var table, std::span<const int> ids) {
  Graph& g = graph_of(table);
  const Tensor& T = table.value();
  Tensor out(static_cast<Index>(ids.size()), T.cols());
  for (std::size_t k = 0; k < ids.size(); ++k) {
    if (!(ids[k] >= 0 && ids[k] < T.rows())) fail("embedding", "id " + std::to_string(ids[k]));
    out.row(static_cast<Index>(k)) = T.row(ids[k]);
  }
  std::vector<int> idv(ids.begin(), ids.end());
  return g.push(std::move(out), {table}, [table, idv](Graph& g, int self) {
    const Tensor& G = g.out_grad(self);
    Tensor& D = g.grad(table.id);
    for (std::size_t k = 0; k < idv.size(); ++k) D.row(idv[k]) += G.row(static_cast<Index>(k));
  });
}

Var softmax_rows(Var a) {
  Graph& g = graph_of(a);
  Tensor out = a.value();
  for (Index r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    row.array() -= row.maxCoeff();
    row = row.array().exp().matrix();
    row /= row.sum();
  }
  return g.push(std::move(out), {a}, [a](Graph& g, int self) {
    const Tensor& G = g.out_grad(self);
    const Tensor& Y = g.value(self);
    auto dot = G.cwiseProduct(Y).rowwise().sum();
    g.grad(a.id).array() += (G.colwise() - dot).array() * Y.array();
  });
}

Var sigmoid(Var a) {
  Graph& g = graph_of(a);
  Tensor out = (1 / (1 + (-a.value().array()).exp())).matrix();
  return g.push(std::move(out), {a}, [a](Graph& g, int self) {
    const Tensor& Y = g.value(self);
    g.grad(a.id).array() += g.out_grad(self).array() * Y.array() * (1 - Y.array());
  });
}

Var tanh(Var a) {
  Graph& g = graph_of(a);
  Tensor out = a.value().array().tanh().matrix();
  return g.push(std::move(out), {a}, [a](Graph& g, int self) {
    const Tensor& Y = g.value(self);
    g.grad(a.id).array() += g.out_grad(self).array() * (1 - Y.array().square());
  });
}

Var relu(Var a) {
  Graph& g = graph_of(a);
  Tensor out = a.value().cwiseMax(Real(0));
  return g.push(std::move(out), {a}, [a](Graph& g, int self) {
    const Tensor& X = g.value(a.id);
    g.grad(a.id).array() += (X.array() > 0).select(g.out_grad(self).array(), Real(0));
  });
}

Var log_clamped(Var a, Real floor, std::int64_t* clamped) {
  Graph& g = graph_of(a);
  const Tensor& X = a.value();
  if (clamped != nullptr) *clamped += (X.array() < floor).count();
  Tensor out = X.cwiseMax(floor).array().log().matrix();
  return g.push(std::move(out), {a}, [a, floor](Graph& g, int self) {
    const Tensor& X = g.value(a.id);
    g.grad(a.id).array() += (X.array() >= floor).select(g.out_grad(self).array() / X.array(), Real(0));
  });
}

Var dropout(Var a, Real p) {
  Graph& g = graph_of(a);
  if (!(p >= 0 && p < 1)) fail("dropout", "rate must be in [0, 1)");
  if (!g.training() || p == 0) return a;
  Tensor mask(a.rows(), a.cols());
  Real keep_scale = 1 / (1 - p);
  for (Index k = 0; k < mask.size(); ++k) {
    mask.data()[k] = uniform01(g.rng()) < p ? Real(0) : keep_scale;
  }
  Tensor out = a.value().cwiseProduct(mask);
  return g.push(std::move(out), {a}, [a, mask = std::move(mask)](Graph& g, int self) {
    g.grad(a.id) += g.out_grad(self).cwiseProduct(mask);
  });
}

Var pick(Var a, std::span<const int> cols) {
  Graph& g = graph_of(a);
  const Tensor& X = a.value();
  if (!(static_cast<Index>(cols.size()) == X.rows())) fail("pick", "one column per row");
  Tensor out(X.rows(), 1);
  for (Index r = 0; r < X.rows(); ++r) {
    int c = cols[static_cast<std::size_t>(r)];
    if (!(c >= 0 && c < X.cols())) fail("pick", "column " + std::to_string(c));
    out(r, 0) = X(r, c);
  }
  std::vector<int> cv(cols.begin(), cols.end());
  return g.push(std::move(out), {a}, [a, cv](Graph& g, int self) {
    const Tensor& G = g.out_grad(self);
    Tensor& D = g.grad(a.id);
    for (Index r = 0; r < G.rows(); ++r) D(r, cv[static_cast<std::size_t>(r)]) += G(r, 0);
  });
}

Var sum(Var a) {
  Graph& g = graph_of(a);
  Tensor out(1, 1);
  out(0, 0) = a.value().sum();
  return g.push(std::move(out), {a},
                [a](Graph& g, int self) { g.grad(a.id).array() += g.out_grad(self)(0, 0); });
}

Var layer_norm(Var a, Var gain, Var bias, Real eps) {
  Graph& g = graph_of(a);
  const Tensor& X = a.value();
  Index m = X.cols();
  if (!(gain.rows() == 1 && gain.cols() == m && bias.rows() == 1 && bias.cols() == m))
    fail("layer_norm", "gain and bias must be 1 x " + std::to_string(m));
  Tensor xhat(X.rows(), m);
  Tensor inv_std(X.rows(), 1);
  for (Index r = 0; r < X.rows(); ++r) {
    Real mu = X.row(r).mean();
    Real var = (X.row(r).array() - mu).square().mean();
    inv_std(r, 0) = 1 / std::sqrt(var + eps);
    xhat.row(r) = (X.row(r).array() - mu) * inv_std(r, 0);
  }
  Tensor out = (xhat.array().rowwise() * gain.value().row(0).array()).rowwise() + bias.value().row(0).array();
  return g.push(std::move(out), {a, gain, bias},
                [a, gain, bias, xhat = std::move(xhat), inv_std = std::move(inv_std)](Graph& g, int self) {
                  const Tensor& G = g.out_grad(self);
                  if (g.requires_grad(gain.id)) {
                    g.grad(gain.id) += G.cwiseProduct(xhat).colwise().sum();
                  }
                  if (g.requires_grad(bias.id)) g.grad(bias.id) += G.colwise().sum();
                  if (g.requires_grad(a.id)) {
                    Tensor dxhat = G.array().rowwise() * g.value(gain.id).row(0).array();
                    auto mean_d = dxhat.rowwise().mean();
                    auto mean_dx = dxhat.cwiseProduct(xhat).rowwise().mean();
                    Tensor dx = dxhat;
                    dx.colwise() -= mean_d;
                    dx -= (xhat.array().colwise() * mean_dx.array()).matrix();
                    dx.array().colwise() *= inv_std.col(0).array();
                    g.grad(a.id) += dx;
                  }
                });
}

Var cross_entropy(Var probs, std::span<const int> targets, std::span<const Real> weights,
                  std::int64_t* clamped) {
  constexpr Real kFloor = 1e-30;
  Graph& g = graph_of(probs);
  const Tensor& P = probs.value();
  if (!(static_cast<Index>(targets.size()) == P.rows() && static_cast<Index>(weights.size()) == P.rows()))
    fail("cross_entropy", "one target and weight per row");
  Real total_w = 0, loss = 0;
  for (Index r = 0; r < P.rows(); ++r) {
    Real w = weights[static_cast<std::size_t>(r)];
    if (w == 0) continue;
    int t = targets[static_cast<std::size_t>(r)];
    if (!(t >= 0 && t < P.cols())) fail("cross_entropy", "target " + std::to_string(t));
    Real p = P(r, t);
    if (p < kFloor) {
      if (clamped != nullptr) ++*clamped;
      p = kFloor;
    }
    loss -= w * std::log(p);
    total_w += w;
  }
  if (!(total_w > 0)) fail("cross_entropy", "all weights are zero");
  Tensor out(1, 1);
  out(0, 0) = loss / total_w;
  std::vector<int> tv(targets.begin(), targets.end());
  std::vector<Real> wv(weights.begin(), weights.end());
  return g.push(std::move(out), {probs}, [probs, tv, wv, total_w](Graph& g, int self) {
    Real up = g.out_grad(self)(0, 0);
    const Tensor& P = g.value(probs.id);
    Tensor& D = g.grad(probs.id);
    for (Index r = 0; r < P.rows(); ++r) {
      Real w = wv[static_cast<std::size_t>(r)];
      int t = tv[static_cast<std::size_t>(r)];
      if (w == 0 || P(r, t) < kFloor) continue;
      D(r, t) -= up * w / (total_w * P(r, t));
    }
  });
}

Var attention_probs(Var q, Var k, Index batch, std::span<const Real> key_mask, bool causal, Real scale) {
  Graph& g = graph_of(q);
  const Tensor& Q = q.value();
  const Tensor& K = k.value();
  if (!(batch > 0 && Q.rows() % batch == 0 && K.rows() % batch == 0))
    fail("attention_probs", "rows must be a multiple of the batch size");
  if (!(Q.cols() == K.cols())) fail("attention_probs", "query and key widths differ");
  Index tq = Q.rows() / batch, tk = K.rows() / batch;
  if (!(static_cast<Index>(key_mask.size()) == batch * tk))
    fail("attention_probs", "key mask must be batch x key length");
  Tensor out = Tensor::Zero(Q.rows(), tk);
  for (Index b = 0; b < batch; ++b) {
    Tensor s = scale * (batch_rows(Q, batch, b) * batch_rows(K, batch, b).transpose());
    auto ob = batch_rows(out, batch, b);
    for (Index t = 0; t < tq; ++t) {
      Real mx = -std::numeric_limits<Real>::infinity();
      for (Index j = 0; j < tk; ++j) {
        bool ok = key_mask[static_cast<std::size_t>(b * tk + j)] != 0 && (!causal || j <= t);
        if (ok) mx = std::max(mx, s(t, j));
      }
      if (!std::isfinite(mx)) continue;  // nothing to attend to
      Real z = 0;
      for (Index j = 0; j < tk; ++j) {
        bool ok = key_mask[static_cast<std::size_t>(b * tk + j)] != 0 && (!causal || j <= t);
        ob(t, j) = ok ? std::exp(s(t, j) - mx) : Real(0);
        z += ob(t, j);
      }
      ob.row(t) /= z;
    }
  }
  return g.push(std::move(out), {q, k}, [q, k, batch, scale](Graph& g, int self) {
    const Tensor& G = g.out_grad(self);
    const Tensor& P = g.value(self);
    bool gq = g.requires_grad(q.id), gk = g.requires_grad(k.id);
    for (Index b = 0; b < batch; ++b) {
      auto gb = batch_rows(G, batch, b);
      auto pb = batch_rows(P, batch, b);
      Tensor ds =
          ((gb.array().colwise() - gb.cwiseProduct(pb).rowwise().sum().array()) * pb.array()).matrix() *
          scale;
      if (gq) batch_rows(g.grad(q.id), batch, b).noalias() += ds * batch_rows(g.value(k.id), batch, b);
      if (gk) {
        batch_rows(g.grad(k.id), batch, b).noalias() += ds.transpose() * batch_rows(g.value(q.id), batch, b);
      }
    }
  });
}

Var attention_context(Var probs, Var v, Index batch) {
  Graph& g = graph_of(probs);
  const Tensor& P = probs.value();
  const Tensor& V = v.value();
  if (!(batch > 0 && P.rows() % batch == 0 && V.rows() % batch == 0))
    fail("attention_context", "rows must be a multiple of the batch size");
  if (!(P.cols() == V.rows() / batch)) fail("attention_context", "key length mismatch");
  Tensor out(P.rows(), V.cols());
  for (Index b = 0; b < batch; ++b) {
    batch_rows(out, batch, b).noalias() = batch_rows(P, batch, b) * batch_rows(V, batch, b);
  }
  return g.push(std::move(out), {probs, v}, [probs, v, batch](Graph& g, int self) {
    const Tensor& G = g.out_grad(self);
    bool gp = g.requires_grad(probs.id), gv = g.requires_grad(v.id);
    for (Index b = 0; b < batch; ++b) {
      auto gb = batch_rows(G, batch, b);
      if (gp) {
        batch_rows(g.grad(probs.id), batch, b).noalias() +=
            gb * batch_rows(g.value(v.id), batch, b).transpose();
      }
      if (gv) {
        batch_rows(g.grad(v.id), batch, b).noalias() +=
            batch_rows(g.value(probs.id), batch, b).transpose() * gb;
      }
    }
  });
}

Var copy_scatter(Var probs, std::span<const int> ids, Index batch, Index width) {
  Graph& g = graph_of(probs);
  const Tensor& P = probs.value();
  Index s = P.cols();
  if (!(batch > 0 && P.rows() % batch == 0)) fail("copy_scatter", "rows must be a multiple of batch");
  if (!(static_cast<Index>(ids.size()) == batch * s))
    fail("copy_scatter", "ids must be batch x source length");
  for (int id : ids) {
    if (!(id >= 0 && id < width)) fail("copy_scatter", "id " + std::to_string(id) + " outside width");
  }
  Tensor out = Tensor::Zero(P.rows(), width);
  for (Index r = 0; r < P.rows(); ++r) {
    const int* row_ids = ids.data() + (r % batch) * s;
    for (Index j = 0; j < s; ++j) out(r, row_ids[j]) += P(r, j);
  }
  std::vector<int> iv(ids.begin(), ids.end());
  return g.push(std::move(out), {probs}, [probs, iv, batch, s](Graph& g, int self) {
    const Tensor& G = g.out_grad(self);
    Tensor& D = g.grad(probs.id);
    for (Index r = 0; r < D.rows(); ++r) {
      const int* row_ids = iv.data() + (r % batch) * s;
      for (Index j = 0; j < s; ++j) D(r, j) += G(r, row_ids[j]);
    }
  });
}

}  // namespace rephrase::numcore
