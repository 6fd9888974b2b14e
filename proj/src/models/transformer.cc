#include "rephrase/models/transformer.h"

#include <cmath>
#include <stdexcept>

namespace rephrase::models {

using namespace numcore;

nlohmann::json TransformerConfig::to_json() const {
  return {{"model_dim", model_dim},
          {"heads", heads},
          {"ff_dim", ff_dim},
          {"encoder_layers", encoder_layers},
          {"decoder_layers", decoder_layers},
          {"max_positions", max_positions},
          {"dropout", dropout},
          {"seed", seed}};
}

TransformerConfig TransformerConfig::from_json(const nlohmann::json& j) {
  TransformerConfig c;
  c.model_dim = j.value("model_dim", c.model_dim);
  c.heads = j.value("heads", c.heads);
  c.ff_dim = j.value("ff_dim", c.ff_dim);
  c.encoder_layers = j.value("encoder_layers", c.encoder_layers);
  c.decoder_layers = j.value("decoder_layers", c.decoder_layers);
  c.max_positions = j.value("max_positions", c.max_positions);
  c.dropout = j.value("dropout", c.dropout);
  c.seed = j.value("seed", c.seed);
  if (c.heads < 1 || c.model_dim % c.heads != 0) {
    throw std::invalid_argument("model_dim must be a multiple of heads");
  }
  if (c.ff_dim < 1 || c.encoder_layers < 1 || c.decoder_layers < 1 || c.max_positions < 1) {
    throw std::invalid_argument("transformer sizes must be positive");
  }
  if (c.dropout < 0 || c.dropout >= 1) throw std::invalid_argument("dropout must be in [0, 1)");
  return c;
}

CopyHead copy_head_init(const MultiHeadAttention& attn, ParameterSet& ps, Index model_dim,
                        std::mt19937_64& rng, const std::string& prefix) {
  if (attn.heads < 1 || attn.wq.empty()) {
    throw std::invalid_argument("copy head needs a layer with cross-attention heads");
  }
  auto mean_of = [&](const std::vector<Parameter*>& mats, const std::string& name) {
    Parameter& p = ps.add(prefix + "." + name, mats.front()->value.rows(), mats.front()->value.cols(),
                          Init::kZeros, rng);
    for (const Parameter* m : mats) p.value += m->value;
    p.value /= static_cast<Real>(mats.size());
    return &p;
  };
  CopyHead h;
  h.w_q = mean_of(attn.wq, "w_q");
  h.w_k = mean_of(attn.wk, "w_k");
  h.w_v = mean_of(attn.wv, "w_v");
  h.mix = Linear::create(ps, prefix + ".mix", attn.head_dim + model_dim, 1, rng);
  return h;
}

MiniTransformer::MiniTransformer(const TransformerConfig& config, Vocabulary vocab)
    : config_(config), vocab_(std::move(vocab)) {
  std::mt19937_64 rng(config_.seed);
  const Index d = config_.model_dim;
  const double emb_scale = 1.0 / std::sqrt(static_cast<double>(d));
  embedding_ = &params_.add("embedding", vocab_.size(), d, Init::kNormal, rng, emb_scale);
  positions_ = &params_.add("positions", config_.max_positions, d, Init::kNormal, rng, 0.02);
  for (int l = 0; l < config_.encoder_layers; ++l) {
    std::string n = "enc.l" + std::to_string(l);
    EncoderLayer e{LayerNorm::create(params_, n + ".ln1", d, rng),
                   LayerNorm::create(params_, n + ".ln2", d, rng),
                   MultiHeadAttention::create(params_, n + ".attn", d, config_.heads, rng),
                   Linear::create(params_, n + ".ff1", d, config_.ff_dim, rng),
                   Linear::create(params_, n + ".ff2", config_.ff_dim, d, rng)};
    encoder_.push_back(e);
  }
  for (int l = 0; l < config_.decoder_layers; ++l) {
    std::string n = "dec.l" + std::to_string(l);
    DecoderLayer e{LayerNorm::create(params_, n + ".ln1", d, rng),
                   LayerNorm::create(params_, n + ".ln2", d, rng),
                   LayerNorm::create(params_, n + ".ln3", d, rng),
                   MultiHeadAttention::create(params_, n + ".self", d, config_.heads, rng),
                   MultiHeadAttention::create(params_, n + ".cross", d, config_.heads, rng),
                   Linear::create(params_, n + ".ff1", d, config_.ff_dim, rng),
                   Linear::create(params_, n + ".ff2", config_.ff_dim, d, rng)};
    decoder_.push_back(e);
  }
  enc_norm_ = LayerNorm::create(params_, "enc.norm", d, rng);
  dec_norm_ = LayerNorm::create(params_, "dec.norm", d, rng);
  out_ = Linear::create(params_, "out", d, vocab_.size(), rng);
}

nlohmann::json MiniTransformer::config() const {
  nlohmann::json j = config_.to_json();
  j["arch"] = arch();
  j["copy_head"] = copy_.has_value();
  j["vocab_size"] = vocab_.size();
  j["vocab_hash"] = vocab_.hash();
  return j;
}

const MultiHeadAttention& MiniTransformer::last_cross_attention() const {
  if (decoder_.empty()) throw std::logic_error("decoder has no cross-attention");
  return decoder_.back().cross_attn;
}

void MiniTransformer::graft_copy_head(std::uint64_t seed) {
  if (copy_) throw std::logic_error("copy head already present");
  std::mt19937_64 rng(seed);
  copy_ = copy_head_init(last_cross_attention(), params_, config_.model_dim, rng);
}

void MiniTransformer::add_copy_head_parameters() { graft_copy_head(0); }

Var MiniTransformer::embed(Graph& g, std::span<const int> ids, Index batch) {
  const Index steps = static_cast<Index>(ids.size()) / batch;
  if (steps > config_.max_positions) {
    throw std::invalid_argument("sequence of length " + std::to_string(steps) + " exceeds max_positions");
  }
  std::vector<int> pos(ids.size());
  std::vector<int> tok(ids.begin(), ids.end());
  for (std::size_t r = 0; r < ids.size(); ++r) {
    pos[r] = static_cast<int>(static_cast<Index>(r) / batch);
    if (tok[r] >= vocab_.size()) tok[r] = kUnk;
  }
  Var x = add(embedding(g.param(*embedding_), tok), embedding(g.param(*positions_), pos));
  return dropout(x, config_.dropout);
}

Var MiniTransformer::feed_forward(Graph& g, const Linear& ff1, const Linear& ff2, Var x) {
  return ff2(g, dropout(relu(ff1(g, x)), config_.dropout));
}

Var MiniTransformer::encode(Graph& g, const Batch& batch) {
  if (batch.src_len == 0) throw std::invalid_argument("empty source");
  Var x = embed(g, batch.src, batch.size);
  for (const auto& l : encoder_) {
    Var n = l.ln1(g, x);
    x = add(x, dropout(l.attn(g, n, n, batch.size, batch.src_mask, false), config_.dropout));
    x = add(x, dropout(feed_forward(g, l.ff1, l.ff2, l.ln2(g, x)), config_.dropout));
  }
  return enc_norm_(g, x);
}

Var MiniTransformer::decode_hidden(Graph& g, Var memory, std::span<const int> tgt_in, Index batch,
                                   std::span<const Real> src_mask, std::span<const Real> tgt_mask) {
  Var x = embed(g, tgt_in, batch);
  for (const auto& l : decoder_) {
    Var n = l.ln1(g, x);
    x = add(x, dropout(l.self_attn(g, n, n, batch, tgt_mask, true), config_.dropout));
    x = add(x, dropout(l.cross_attn(g, l.ln2(g, x), memory, batch, src_mask, false), config_.dropout));
    x = add(x, dropout(feed_forward(g, l.ff1, l.ff2, l.ln3(g, x)), config_.dropout));
  }
  return dec_norm_(g, x);
}

Mixture MiniTransformer::heads(Graph& g, Var hidden, Var memory, std::span<const Real> src_mask,
                               std::span<const int> src_ext, Index batch, Index ext_width) {
  Mixture m;
  m.p_vocab = softmax_rows(out_(g, hidden));
  if (!copy_) {
    m.p_output = pad_cols(m.p_vocab, ext_width);
    return m;
  }
  const Index dh = copy_->w_q->value.cols();
  const Real scale = static_cast<Real>(1.0 / std::sqrt(static_cast<double>(dh)));
  Var q = matmul(hidden, g.param(*copy_->w_q));
  Var k = matmul(memory, g.param(*copy_->w_k));
  Var v = matmul(memory, g.param(*copy_->w_v));
  m.p_copy = attention_probs(q, k, batch, src_mask, false, scale);
  Var ctx = attention_context(m.p_copy, v, batch);
  m.alpha = sigmoid(copy_->mix(g, concat_cols({ctx, hidden})));
  m.p_output = mix_distributions(m.p_vocab, m.p_copy, m.alpha, src_ext, batch, ext_width);
  return m;
}

Mixture MiniTransformer::forward(Graph& g, const Batch& batch) {
  if (batch.tgt_len == 0) throw std::invalid_argument("forward needs targets");
  Var memory = encode(g, batch);
  std::vector<Real> tgt_mask(static_cast<std::size_t>(batch.size * batch.tgt_len));
  for (Index b = 0; b < batch.size; ++b) {
    for (Index t = 0; t < batch.tgt_len; ++t) {
      tgt_mask[static_cast<std::size_t>(b * batch.tgt_len + t)] =
          batch.tgt_mask[static_cast<std::size_t>(t * batch.size + b)];
    }
  }
  Var hidden = decode_hidden(g, memory, batch.tgt_in, batch.size, batch.src_mask, tgt_mask);
  return heads(g, hidden, memory, batch.src_mask, batch.src_ext, batch.size, batch.ext_width);
}

namespace {

struct TransformerDecodeState : DecodeState {
  Index batch = 0;
  Index src_len = 0;
  Index ext_width = 0;
  Tensor memory;  // time-major
  std::vector<Real> src_mask;
  std::vector<int> src_ext;
  std::vector<std::vector<int>> prefix;  // per row, starts with kStart

  void select(std::span<const int> rows) override {
    const auto nb = static_cast<Index>(rows.size());
    Tensor m(src_len * nb, memory.cols());
    std::vector<Real> mask;
    std::vector<int> ext;
    std::vector<std::vector<int>> pre;
    for (Index j = 0; j < nb; ++j) {
      int r = rows[static_cast<std::size_t>(j)];
      for (Index s = 0; s < src_len; ++s) m.row(s * nb + j) = memory.row(s * batch + r);
      mask.insert(mask.end(), src_mask.begin() + r * src_len, src_mask.begin() + (r + 1) * src_len);
      ext.insert(ext.end(), src_ext.begin() + r * src_len, src_ext.begin() + (r + 1) * src_len);
      pre.push_back(prefix[static_cast<std::size_t>(r)]);
    }
    memory = std::move(m);
    src_mask = std::move(mask);
    src_ext = std::move(ext);
    prefix = std::move(pre);
    batch = nb;
  }
};

}  // namespace

std::unique_ptr<DecodeState> MiniTransformer::begin_decode(const Batch& batch) {
  Graph g(GraphOptions{false});
  auto st = std::make_unique<TransformerDecodeState>();
  st->batch = batch.size;
  st->src_len = batch.src_len;
  st->ext_width = batch.ext_width;
  st->memory = encode(g, batch).value();
  st->src_mask = batch.src_mask;
  st->src_ext = batch.src_ext;
  st->prefix.assign(static_cast<std::size_t>(batch.size), std::vector<int>{});
  return st;
}

StepDistribution MiniTransformer::decode_step(DecodeState& state, std::span<const int> prev) {
  auto& st = dynamic_cast<TransformerDecodeState&>(state);
  if (static_cast<Index>(prev.size()) != st.batch) {
    throw std::invalid_argument("one previous token per decoding row");
  }
  for (std::size_t j = 0; j < prev.size(); ++j) st.prefix[j].push_back(prev[j]);
  const Index len = static_cast<Index>(st.prefix.front().size());
  std::vector<int> tgt_in(static_cast<std::size_t>(len * st.batch));
  for (Index t = 0; t < len; ++t) {
    for (Index b = 0; b < st.batch; ++b) {
      tgt_in[static_cast<std::size_t>(t * st.batch + b)] =
          st.prefix[static_cast<std::size_t>(b)][static_cast<std::size_t>(t)];
    }
  }
  std::vector<Real> tgt_mask(tgt_in.size(), 1);
  Graph g(GraphOptions{false});
  Var memory = g.constant(st.memory);
  Var hidden = decode_hidden(g, memory, tgt_in, st.batch, st.src_mask, tgt_mask);
  Var last = slice_rows(hidden, (len - 1) * st.batch, st.batch);
  Mixture m = heads(g, last, memory, st.src_mask, st.src_ext, st.batch, st.ext_width);
  StepDistribution out;
  out.p_output = m.p_output.value();
  if (m.p_copy.valid()) {
    out.p_copy = m.p_copy.value();
    out.alpha = m.alpha.value();
  }
  return out;
}

}  // namespace rephrase::models
