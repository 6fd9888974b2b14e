#ifndef REPHRASE_MODELS_LAYERS_H_
#define REPHRASE_MODELS_LAYERS_H_

#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rephrase/numcore/graph.h"

namespace rephrase::models {

using numcore::Graph;
using numcore::Index;
using numcore::Parameter;
using numcore::ParameterSet;
using numcore::Real;
using numcore::Tensor;
using numcore::Var;

struct Linear {
  Parameter* w = nullptr;
  Parameter* b = nullptr;  // optional

  static Linear create(ParameterSet& ps, const std::string& name, Index in, Index out, std::mt19937_64& rng,
                       bool bias = true);
  Var operator()(Graph& g, Var x) const;
};

struct LayerNorm {
  Parameter* gain = nullptr;
  Parameter* bias = nullptr;

  static LayerNorm create(ParameterSet& ps, const std::string& name, Index dim, std::mt19937_64& rng);
  Var operator()(Graph& g, Var x) const;
};

struct LstmState {
  Var h;
  Var c;
};

// Single LSTM layer with fused gate weights [x; h] -> (i, f, g, o).
struct LstmLayer {
  Parameter* w = nullptr;
  Parameter* b = nullptr;
  Index hidden = 0;

  static LstmLayer create(ParameterSet& ps, const std::string& name, Index in, Index hidden,
                          std::mt19937_64& rng);
  LstmState step(Graph& g, Var x, const LstmState& prev) const;
  LstmState zero_state(Graph& g, Index batch) const;
};

// Multi-layer bidirectional LSTM over time-major rows (t * batch + b).
// Padded steps leave the recurrent state untouched.
struct BiLstmEncoder {
  std::vector<LstmLayer> fwd;
  std::vector<LstmLayer> bwd;
  Real dropout = 0;

  static BiLstmEncoder create(ParameterSet& ps, const std::string& name, Index in, Index hidden, int layers,
                              Real dropout, std::mt19937_64& rng);
  Index output_dim() const { return 2 * fwd.front().hidden; }
  // step_mask is time-major (t * batch + b).
  Var operator()(Graph& g, Var x, Index batch, std::span<const Real> step_mask) const;
};

// Multi-head attention with per-head projection matrices, no biases.
struct MultiHeadAttention {
  std::vector<Parameter*> wq, wk, wv;  // d_model x d_head each
  Linear out;
  Index heads = 0;
  Index head_dim = 0;

  static MultiHeadAttention create(ParameterSet& ps, const std::string& name, Index d_model, Index heads,
                                   std::mt19937_64& rng);
  // query rows: (tq * batch), memory rows: (tk * batch).
  Var operator()(Graph& g, Var query, Var memory, Index batch, std::span<const Real> key_mask,
                 bool causal) const;
};

// Column of ones and zeros from a mask vector.
Var mask_column(Graph& g, std::span<const Real> mask);

// Mean over valid time steps per example: rows (t * batch + b) -> batch rows.
Var masked_mean(Graph& g, Var x, Index batch, std::span<const Real> step_mask);

// Transposes an example-major mask (b * len + t) to time-major (t * batch + b).
std::vector<Real> time_major_mask(std::span<const Real> mask, Index batch, Index len);

}  // namespace rephrase::models

#endif  // REPHRASE_MODELS_LAYERS_H_
