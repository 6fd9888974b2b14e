#include "rephrase/models/pointer_gen.h"

#include <cmath>
#include <stdexcept>

namespace rephrase::models {

using namespace numcore;

Var mix_distributions(Var p_vocab, Var p_copy, Var alpha, std::span<const int> src_ext, Index batch,
                      Index ext_width) {
  Var gen = mul_col(pad_cols(p_vocab, ext_width), affine(alpha, -1, 1));
  Var copy = mul_col(copy_scatter(p_copy, src_ext, batch, ext_width), alpha);
  return add(gen, copy);
}

double max_normalization_error(const Tensor& p_output) {
  double worst = 0;
  for (Index r = 0; r < p_output.rows(); ++r) {
    worst = std::max(worst, std::abs(static_cast<double>(p_output.row(r).sum()) - 1.0));
  }
  return worst;
}

nlohmann::json PointerGenConfig::to_json() const {
  nlohmann::json j = {{"embedding_dim", embedding_dim},
                      {"encoder_hidden", encoder_hidden},
                      {"encoder_layers", encoder_layers},
                      {"decoder_hidden", decoder_hidden},
                      {"decoder_layers", decoder_layers},
                      {"attention_dim", attention_dim},
                      {"dropout", dropout},
                      {"seed", seed}};
  j["pinned_alpha"] = pinned_alpha ? nlohmann::json(*pinned_alpha) : nlohmann::json(nullptr);
  return j;
}

PointerGenConfig PointerGenConfig::from_json(const nlohmann::json& j) {
  PointerGenConfig c;
  c.embedding_dim = j.value("embedding_dim", c.embedding_dim);
  c.encoder_hidden = j.value("encoder_hidden", c.encoder_hidden);
  c.encoder_layers = j.value("encoder_layers", c.encoder_layers);
  c.decoder_hidden = j.value("decoder_hidden", c.decoder_hidden);
  c.decoder_layers = j.value("decoder_layers", c.decoder_layers);
  c.attention_dim = j.value("attention_dim", c.attention_dim);
  c.dropout = j.value("dropout", c.dropout);
  c.seed = j.value("seed", c.seed);
  if (j.contains("pinned_alpha") && !j["pinned_alpha"].is_null()) {
    c.pinned_alpha = j["pinned_alpha"].get<double>();
  }
  if (c.embedding_dim < 1 || c.encoder_hidden < 1 || c.decoder_hidden < 1 || c.attention_dim < 1 ||
      c.encoder_layers < 1 || c.decoder_layers < 1) {
    throw std::invalid_argument("pointer-lstm sizes must be positive");
  }
  if (c.dropout < 0 || c.dropout >= 1) throw std::invalid_argument("dropout must be in [0, 1)");
  if (c.pinned_alpha && (*c.pinned_alpha < 0 || *c.pinned_alpha > 1)) {
    throw std::invalid_argument("pinned_alpha must be in [0, 1]");
  }
  return c;
}

PointerGenLSTM::PointerGenLSTM(const PointerGenConfig& config, Vocabulary vocab)
    : config_(config), vocab_(std::move(vocab)) {
  std::mt19937_64 rng(config_.seed);
  const Index v = vocab_.size();
  const Index enc_out = 2 * config_.encoder_hidden;
  const Index da = config_.attention_dim;
  embedding_ = &params_.add("embedding", v, config_.embedding_dim, Init::kNormal, rng, 0.1);
  encoder_ = BiLstmEncoder::create(params_, "encoder", config_.embedding_dim, config_.encoder_hidden,
                                   config_.encoder_layers, config_.dropout, rng);
  for (int l = 0; l < config_.decoder_layers; ++l) {
    Index in = l == 0 ? config_.embedding_dim + da : config_.decoder_hidden;
    decoder_.push_back(
        LstmLayer::create(params_, "decoder.l" + std::to_string(l), in, config_.decoder_hidden, rng));
    bridge_.push_back(
        Linear::create(params_, "bridge.l" + std::to_string(l), enc_out, config_.decoder_hidden, rng));
  }
  w_q_ = &params_.add("attn.w_q", config_.decoder_hidden, da, Init::kXavier, rng);
  w_k_ = &params_.add("attn.w_k", enc_out, da, Init::kXavier, rng);
  w_v_ = &params_.add("attn.w_v", enc_out, da, Init::kXavier, rng);
  w_mix_ = Linear::create(params_, "mix", da + config_.decoder_hidden, 1, rng);
  w_out_ = Linear::create(params_, "out", config_.decoder_hidden + da, v, rng);
}

nlohmann::json PointerGenLSTM::config() const {
  nlohmann::json j = config_.to_json();
  j["arch"] = arch();
  j["vocab_size"] = vocab_.size();
  j["vocab_hash"] = vocab_.hash();
  return j;
}

Var PointerGenLSTM::encode(Graph& g, const Batch& batch) {
  if (batch.src_len == 0) throw std::invalid_argument("empty source");
  Var x = dropout(embedding(g.param(*embedding_), batch.src), config_.dropout);
  std::vector<Real> mask = time_major_mask(batch.src_mask, batch.size, batch.src_len);
  return encoder_(g, x, batch.size, mask);
}

PointerGenLSTM::StepVars PointerGenLSTM::initial_state(Graph& g, Var encoded, Index batch,
                                                       std::span<const Real> step_mask) {
  Var pooled = masked_mean(g, encoded, batch, step_mask);
  StepVars s;
  for (std::size_t l = 0; l < decoder_.size(); ++l) {
    Var h = numcore::tanh(bridge_[l](g, pooled));
    s.layers.push_back({h, g.constant(Tensor::Zero(batch, config_.decoder_hidden))});
  }
  s.context = g.constant(Tensor::Zero(batch, config_.attention_dim));
  return s;
}

Var PointerGenLSTM::gate(Graph& g, Var context, Var hidden, Index rows) {
  if (config_.pinned_alpha) {
    return g.constant(Tensor::Constant(rows, 1, static_cast<Real>(*config_.pinned_alpha)));
  }
  return sigmoid(w_mix_(g, concat_cols({context, hidden})));
}

PointerGenLSTM::StepOut PointerGenLSTM::step(Graph& g, const Memory& mem, StepVars& state, Var prev_embedding,
                                             std::span<const Real> src_mask, Index batch) {
  Var x = concat_cols({prev_embedding, state.context});
  for (std::size_t l = 0; l < decoder_.size(); ++l) {
    state.layers[l] = decoder_[l].step(g, dropout(x, config_.dropout), state.layers[l]);
    x = state.layers[l].h;
  }
  Var h = x;
  Var q = matmul(h, g.param(*w_q_));
  const Real scale = static_cast<Real>(1.0 / std::sqrt(static_cast<double>(config_.attention_dim)));
  Var p_copy = attention_probs(q, mem.keys, batch, src_mask, false, scale);
  state.context = attention_context(p_copy, mem.values, batch);
  Var alpha = gate(g, state.context, h, batch);
  Var features = dropout(concat_cols({h, state.context}), config_.dropout);
  Var p_vocab = softmax_rows(w_out_(g, features));
  return {p_vocab, p_copy, alpha};
}

Mixture PointerGenLSTM::forward(Graph& g, const Batch& batch) {
  if (batch.tgt_len == 0) throw std::invalid_argument("forward needs targets");
  const Index B = batch.size;
  Var encoded = encode(g, batch);
  Memory mem{matmul(encoded, g.param(*w_k_)), matmul(encoded, g.param(*w_v_))};
  std::vector<Real> step_mask = time_major_mask(batch.src_mask, B, batch.src_len);
  StepVars state = initial_state(g, encoded, B, step_mask);
  Var emb = embedding(g.param(*embedding_), batch.tgt_in);
  emb = dropout(emb, config_.dropout);
  std::vector<Var> pv, pc, al;
  for (Index t = 0; t < batch.tgt_len; ++t) {
    StepOut o = step(g, mem, state, slice_rows(emb, t * B, B), batch.src_mask, B);
    pv.push_back(o.p_vocab);
    pc.push_back(o.p_copy);
    al.push_back(o.alpha);
  }
  Mixture m;
  m.p_vocab = concat_rows(pv);
  m.p_copy = concat_rows(pc);
  m.alpha = concat_rows(al);
  m.p_output = mix_distributions(m.p_vocab, m.p_copy, m.alpha, batch.src_ext, B, batch.ext_width);
  return m;
}

namespace {

Tensor take_rows(const Tensor& t, std::span<const int> rows) {
  Tensor out(static_cast<Index>(rows.size()), t.cols());
  for (std::size_t j = 0; j < rows.size(); ++j) out.row(static_cast<Index>(j)) = t.row(rows[j]);
  return out;
}

// Reorders the example index of a time-major tensor.
Tensor take_time_major(const Tensor& t, Index batch, std::span<const int> rows) {
  const Index steps = t.rows() / batch;
  const auto nb = static_cast<Index>(rows.size());
  Tensor out(steps * nb, t.cols());
  for (Index s = 0; s < steps; ++s) {
    for (Index j = 0; j < nb; ++j) out.row(s * nb + j) = t.row(s * batch + rows[static_cast<std::size_t>(j)]);
  }
  return out;
}

template <typename T>
std::vector<T> take_blocks(const std::vector<T>& v, Index width, std::span<const int> rows) {
  std::vector<T> out;
  for (int r : rows) {
    out.insert(out.end(), v.begin() + r * width, v.begin() + (r + 1) * width);
  }
  return out;
}

struct LstmDecodeState : DecodeState {
  Index batch = 0;
  Index src_len = 0;
  Index ext_width = 0;
  Tensor keys, values;
  std::vector<Real> src_mask;
  std::vector<int> src_ext;
  std::vector<Tensor> h, c;
  Tensor context;

  void select(std::span<const int> rows) override {
    keys = take_time_major(keys, batch, rows);
    values = take_time_major(values, batch, rows);
    src_mask = take_blocks(src_mask, src_len, rows);
    src_ext = take_blocks(src_ext, src_len, rows);
    for (auto& t : h) t = take_rows(t, rows);
    for (auto& t : c) t = take_rows(t, rows);
    context = take_rows(context, rows);
    batch = static_cast<Index>(rows.size());
  }
};

}  // namespace

std::unique_ptr<DecodeState> PointerGenLSTM::begin_decode(const Batch& batch) {
  Graph g(GraphOptions{false});
  Var encoded = encode(g, batch);
  std::vector<Real> step_mask = time_major_mask(batch.src_mask, batch.size, batch.src_len);
  StepVars init = initial_state(g, encoded, batch.size, step_mask);
  auto st = std::make_unique<LstmDecodeState>();
  st->batch = batch.size;
  st->src_len = batch.src_len;
  st->ext_width = batch.ext_width;
  st->keys = matmul(encoded, g.param(*w_k_)).value();
  st->values = matmul(encoded, g.param(*w_v_)).value();
  st->src_mask = batch.src_mask;
  st->src_ext = batch.src_ext;
  for (const auto& l : init.layers) {
    st->h.push_back(l.h.value());
    st->c.push_back(l.c.value());
  }
  st->context = init.context.value();
  return st;
}

StepDistribution PointerGenLSTM::decode_step(DecodeState& state, std::span<const int> prev) {
  auto& st = dynamic_cast<LstmDecodeState&>(state);
  if (static_cast<Index>(prev.size()) != st.batch) {
    throw std::invalid_argument("one previous token per decoding row");
  }
  Graph g(GraphOptions{false});
  Memory mem{g.constant(st.keys), g.constant(st.values)};
  StepVars vars;
  for (std::size_t l = 0; l < st.h.size(); ++l) {
    vars.layers.push_back({g.constant(st.h[l]), g.constant(st.c[l])});
  }
  vars.context = g.constant(st.context);
  std::vector<int> ids(prev.begin(), prev.end());
  for (int& id : ids) {
    if (id >= vocab_.size()) id = kUnk;
  }
  Var emb = embedding(g.param(*embedding_), ids);
  StepOut o = step(g, mem, vars, emb, st.src_mask, st.batch);
  Var p = mix_distributions(o.p_vocab, o.p_copy, o.alpha, st.src_ext, st.batch, st.ext_width);
  for (std::size_t l = 0; l < st.h.size(); ++l) {
    st.h[l] = vars.layers[l].h.value();
    st.c[l] = vars.layers[l].c.value();
  }
  st.context = vars.context.value();
  return {p.value(), o.p_copy.value(), o.alpha.value()};
}

}  // namespace rephrase::models
