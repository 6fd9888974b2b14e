#ifndef REPHRASE_NUMCORE_GRAPH_H_
#define REPHRASE_NUMCORE_GRAPH_H_

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <unordered_map>
#include <vector>

#include "rephrase/numcore/tensor.h"

namespace rephrase::numcore {

class Graph;

// Handle to a node on a Graph tape.
struct Var {
  Graph* graph = nullptr;
  int id = -1;

  bool valid() const { return graph != nullptr && id >= 0; }
  const Tensor& value() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
};

struct GraphOptions {
  bool track_gradients = true;
  bool training = false;  // enables dropout
  std::uint64_t dropout_seed = 0;
};

// Reverse-mode tape. Nodes are appended in topological order by the op
// functions below; backward() walks them in reverse.
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, int self)>;

  explicit Graph(GraphOptions opts = {});
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool training() const { return opts_.training; }
  bool tracking() const { return opts_.track_gradients; }
  std::mt19937_64& rng() { return rng_; }

  Var constant(Tensor value);
  // The parameter must outlive the graph and stay unchanged while it is used.
  // Repeated calls for the same parameter return the same node.
  Var param(Parameter& p);

  const Tensor& value(int id) const {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    return n.external != nullptr ? *n.external : n.value;
  }
  bool requires_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }
  // Gradient buffer of a node, zero-initialized on first access.
  Tensor& grad(int id);
  // Gradient of `self` during backward (never empty there).
  const Tensor& out_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].grad; }

  // Appends a node. `backward` is dropped when no input requires grad.
  Var push(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward);
  Var push(Tensor value, std::span<const Var> inputs, BackwardFn backward);

  // Seeds d(loss)/d(loss) = 1 and accumulates gradients into parameters.
  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    const Tensor* external = nullptr;  // parameters are read in place
    Tensor grad;
    BackwardFn backward;
    bool requires_grad = false;
  };

  GraphOptions opts_;
  std::mt19937_64 rng_;
  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, int> param_nodes_;
};

// --- primitives -----------------------------------------------------------

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);                      // elementwise
Var add_row(Var a, Var row);                // a + broadcast 1 x m row
Var mul_col(Var a, Var col);                // a .* broadcast n x 1 column
Var affine(Var a, Real scale, Real shift);  // scale * a + shift
Var concat_cols(std::span<const Var> parts);
Var concat_cols(std::initializer_list<Var> parts);
Var concat_rows(std::span<const Var> parts);
Var slice_cols(Var a, Index start, Index width);
Var slice_rows(Var a, Index start, Index count);
Var pad_cols(Var a, Index width);  // zero-extends to `width` columns
Var embedding(Var table, std::span<const int> ids);
Var softmax_rows(Var a);
Var sigmoid(Var a);
Var tanh(Var a);
Var relu(Var a);
// log(max(a, floor)); counts clamped entries into *clamped when given.
Var log_clamped(Var a, Real floor, std::int64_t* clamped = nullptr);
Var dropout(Var a, Real p);
Var pick(Var a, std::span<const int> cols);  // n x 1: a(r, cols[r])
Var sum(Var a);                              // 1 x 1
Var layer_norm(Var a, Var gain, Var bias, Real eps = 1e-5);

// Cross-entropy of row-wise probabilities against target columns, averaged
// over rows whose weight is nonzero: -sum_r w_r log p(r, t_r) / sum_r w_r.
Var cross_entropy(Var probs, std::span<const int> targets, std::span<const Real> weights,
                  std::int64_t* clamped = nullptr);

// Batched attention with time-major rows (row = t * batch + b).
// Returns probabilities of shape (Tq * batch) x Tk; masked keys get 0.
Var attention_probs(Var q, Var k, Index batch, std::span<const Real> key_mask, bool causal, Real scale);
// Context rows: sum_s P(r, s) * V(s * batch + b).
Var attention_context(Var probs, Var v, Index batch);
// Scatters per-position probabilities onto extended vocabulary ids:
// out(r, ids[b * S + s]) += P(r, s) with b = r % batch.
Var copy_scatter(Var probs, std::span<const int> ids, Index batch, Index width);

}  // namespace rephrase::numcore

#endif  // REPHRASE_NUMCORE_GRAPH_H_
