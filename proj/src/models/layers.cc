#include "rephrase/models/layers.h"

#include <cmath>
#include <stdexcept>

namespace rephrase::models {

using numcore::Init;

Linear Linear::create(ParameterSet& ps, const std::string& name, Index in, Index out, std::mt19937_64& rng,
                      bool bias) {
  Linear l;
  l.w = &ps.add(name + ".w", in, out, Init::kXavier, rng);
  if (bias) l.b = &ps.add(name + ".b", 1, out, Init::kZeros, rng);
  return l;
}

Var Linear::operator()(Graph& g, Var x) const {
  Var y = numcore::matmul(x, g.param(*w));
  return b != nullptr ? numcore::add_row(y, g.param(*b)) : y;
}

LayerNorm LayerNorm::create(ParameterSet& ps, const std::string& name, Index dim, std::mt19937_64& rng) {
  LayerNorm n;
  n.gain = &ps.add(name + ".gain", 1, dim, Init::kOnes, rng);
  n.bias = &ps.add(name + ".bias", 1, dim, Init::kZeros, rng);
  return n;
}

Var LayerNorm::operator()(Graph& g, Var x) const {
  return numcore::layer_norm(x, g.param(*gain), g.param(*bias));
}

LstmLayer LstmLayer::create(ParameterSet& ps, const std::string& name, Index in, Index hidden,
                            std::mt19937_64& rng) {
  LstmLayer l;
  l.hidden = hidden;
  l.w = &ps.add(name + ".w", in + hidden, 4 * hidden, Init::kXavier, rng);
  l.b = &ps.add(name + ".b", 1, 4 * hidden, Init::kZeros, rng);
  l.b->value.middleCols(hidden, hidden).setOnes();  // forget gate
  return l;
}

LstmState LstmLayer::step(Graph& g, Var x, const LstmState& prev) const {
  using namespace numcore;
  Var z = add_row(matmul(concat_cols({x, prev.h}), g.param(*w)), g.param(*b));
  Var i = sigmoid(slice_cols(z, 0, hidden));
  Var f = sigmoid(slice_cols(z, hidden, hidden));
  Var cand = numcore::tanh(slice_cols(z, 2 * hidden, hidden));
  Var o = sigmoid(slice_cols(z, 3 * hidden, hidden));
  Var c = add(mul(f, prev.c), mul(i, cand));
  Var h = mul(o, numcore::tanh(c));
  return {h, c};
}

LstmState LstmLayer::zero_state(Graph& g, Index batch) const {
  Var z = g.constant(Tensor::Zero(batch, hidden));
  return {z, z};
}

BiLstmEncoder BiLstmEncoder::create(ParameterSet& ps, const std::string& name, Index in, Index hidden,
                                    int layers, Real dropout, std::mt19937_64& rng) {
  if (layers < 1) throw std::invalid_argument("encoder needs at least one layer");
  BiLstmEncoder e;
  e.dropout = dropout;
  for (int l = 0; l < layers; ++l) {
    Index layer_in = l == 0 ? in : 2 * hidden;
    e.fwd.push_back(LstmLayer::create(ps, name + ".l" + std::to_string(l) + ".fwd", layer_in, hidden, rng));
    e.bwd.push_back(LstmLayer::create(ps, name + ".l" + std::to_string(l) + ".bwd", layer_in, hidden, rng));
  }
  return e;
}

namespace {

// Keeps the previous state where the step is padding.
LstmState masked_update(const LstmState& prev, const LstmState& next, Var m) {
  using namespace numcore;
  return {add(prev.h, mul_col(sub(next.h, prev.h), m)), add(prev.c, mul_col(sub(next.c, prev.c), m))};
}

}  // namespace

Var BiLstmEncoder::operator()(Graph& g, Var x, Index batch, std::span<const Real> step_mask) const {
  using namespace numcore;
  const Index steps = x.rows() / batch;
  if (steps * batch != x.rows()) throw std::invalid_argument("encoder rows not divisible by batch");
  std::vector<Var> masks(static_cast<std::size_t>(steps));
  std::vector<bool> full(static_cast<std::size_t>(steps), true);
  for (Index t = 0; t < steps; ++t) {
    auto m = step_mask.subspan(static_cast<std::size_t>(t * batch), static_cast<std::size_t>(batch));
    for (Real v : m) full[static_cast<std::size_t>(t)] = full[static_cast<std::size_t>(t)] && v != 0;
    if (!full[static_cast<std::size_t>(t)]) masks[static_cast<std::size_t>(t)] = mask_column(g, m);
  }
  Var input = x;
  for (std::size_t l = 0; l < fwd.size(); ++l) {
    if (l > 0) input = numcore::dropout(input, dropout);
    std::vector<Var> xs(static_cast<std::size_t>(steps));
    for (Index t = 0; t < steps; ++t) xs[static_cast<std::size_t>(t)] = slice_rows(input, t * batch, batch);
    std::vector<Var> out_f(xs.size()), out_b(xs.size());
    LstmState sf = fwd[l].zero_state(g, batch);
    for (std::size_t t = 0; t < xs.size(); ++t) {
      LstmState next = fwd[l].step(g, xs[t], sf);
      sf = full[t] ? next : masked_update(sf, next, masks[t]);
      out_f[t] = sf.h;
    }
    LstmState sb = bwd[l].zero_state(g, batch);
    for (std::size_t t = xs.size(); t-- > 0;) {
      LstmState next = bwd[l].step(g, xs[t], sb);
      sb = full[t] ? next : masked_update(sb, next, masks[t]);
      out_b[t] = sb.h;
    }
    input = concat_cols({concat_rows(out_f), concat_rows(out_b)});
  }
  return numcore::dropout(input, dropout);
}

MultiHeadAttention MultiHeadAttention::create(ParameterSet& ps, const std::string& name, Index d_model,
                                              Index heads, std::mt19937_64& rng) {
  if (heads < 1 || d_model % heads != 0) {
    throw std::invalid_argument("model dim must be a multiple of the head count");
  }
  MultiHeadAttention a;
  a.heads = heads;
  a.head_dim = d_model / heads;
  for (Index h = 0; h < heads; ++h) {
    std::string hn = name + ".h" + std::to_string(h);
    a.wq.push_back(&ps.add(hn + ".wq", d_model, a.head_dim, Init::kXavier, rng));
    a.wk.push_back(&ps.add(hn + ".wk", d_model, a.head_dim, Init::kXavier, rng));
    a.wv.push_back(&ps.add(hn + ".wv", d_model, a.head_dim, Init::kXavier, rng));
  }
  a.out = Linear::create(ps, name + ".out", d_model, d_model, rng);
  return a;
}

Var MultiHeadAttention::operator()(Graph& g, Var query, Var memory, Index batch,
                                   std::span<const Real> key_mask, bool causal) const {
  using namespace numcore;
  const Real scale = static_cast<Real>(1.0 / std::sqrt(static_cast<double>(head_dim)));
  std::vector<Var> ctx;
  for (Index h = 0; h < heads; ++h) {
    auto hh = static_cast<std::size_t>(h);
    Var q = matmul(query, g.param(*wq[hh]));
    Var k = matmul(memory, g.param(*wk[hh]));
    Var v = matmul(memory, g.param(*wv[hh]));
    ctx.push_back(attention_context(attention_probs(q, k, batch, key_mask, causal, scale), v, batch));
  }
  return out(g, concat_cols(ctx));
}

Var mask_column(Graph& g, std::span<const Real> mask) {
  Tensor m(static_cast<Index>(mask.size()), 1);
  for (std::size_t k = 0; k < mask.size(); ++k) m(static_cast<Index>(k), 0) = mask[k];
  return g.constant(std::move(m));
}

Var masked_mean(Graph& g, Var x, Index batch, std::span<const Real> step_mask) {
  const Index steps = x.rows() / batch;
  Tensor pool = Tensor::Zero(batch, x.rows());
  for (Index b = 0; b < batch; ++b) {
    Real n = 0;
    for (Index t = 0; t < steps; ++t) n += step_mask[static_cast<std::size_t>(t * batch + b)];
    if (n == 0) continue;
    for (Index t = 0; t < steps; ++t) {
      pool(b, t * batch + b) = step_mask[static_cast<std::size_t>(t * batch + b)] / n;
    }
  }
  return numcore::matmul(g.constant(std::move(pool)), x);
}

std::vector<Real> time_major_mask(std::span<const Real> mask, Index batch, Index len) {
  std::vector<Real> out(mask.size());
  for (Index b = 0; b < batch; ++b) {
    for (Index t = 0; t < len; ++t) {
      out[static_cast<std::size_t>(t * batch + b)] = mask[static_cast<std::size_t>(b * len + t)];
    }
  }
  return out;
}

}  // namespace rephrase::models
