#ifndef REPHRASE_MODELS_TRANSFORMER_H_
#define REPHRASE_MODELS_TRANSFORMER_H_

#include <optional>

#include "rephrase/models/seq2seq.h"

namespace rephrase::models {

struct TransformerConfig {
  Index model_dim = 128;
  Index heads = 4;
  Index ff_dim = 256;
  int encoder_layers = 2;
  int decoder_layers = 2;
  Index max_positions = 64;
  Real dropout = 0.1;
  std::uint64_t seed = 1;

  nlohmann::json to_json() const;
  static TransformerConfig from_json(const nlohmann::json& j);
};

// Dedicated attention head producing the copy distribution plus the gate.
struct CopyHead {
  Parameter* w_q = nullptr;  // model_dim x head_dim
  Parameter* w_k = nullptr;
  Parameter* w_v = nullptr;
  Linear mix;  // [context; hidden] -> 1
};

class MiniTransformer : public Seq2SeqModel {
 public:
  MiniTransformer(const TransformerConfig& config, Vocabulary vocab);

  std::string arch() const override { return "mini-transformer"; }
  ParameterSet& params() override { return params_; }
  const Vocabulary& vocab() const override { return vocab_; }
  bool has_copy() const override { return copy_.has_value(); }
  nlohmann::json config() const override;
  int max_decode_steps() const override { return static_cast<int>(config_.max_positions); }
  const TransformerConfig& settings() const { return config_; }

  const MultiHeadAttention& last_cross_attention() const;
  const std::optional<CopyHead>& copy_head() const { return copy_; }
  // Registers a copy head (with parameters named copy.*) initialized by
  // copy_head_init; the gate is freshly initialized from `seed`.
  void graft_copy_head(std::uint64_t seed);
  // Adds uninitialized copy head parameters, e.g. before loading a checkpoint.
  void add_copy_head_parameters();

  Var encode(Graph& g, const Batch& batch);

  Mixture forward(Graph& g, const Batch& batch) override;
  std::unique_ptr<DecodeState> begin_decode(const Batch& batch) override;
  StepDistribution decode_step(DecodeState& state, std::span<const int> prev) override;

 private:
  struct EncoderLayer {
    LayerNorm ln1, ln2;
    MultiHeadAttention attn;
    Linear ff1, ff2;
  };
  struct DecoderLayer {
    LayerNorm ln1, ln2, ln3;
    MultiHeadAttention self_attn, cross_attn;
    Linear ff1, ff2;
  };

  Var embed(Graph& g, std::span<const int> ids, Index batch);
  Var feed_forward(Graph& g, const Linear& ff1, const Linear& ff2, Var x);
  // Final decoder states for time-major target inputs.
  Var decode_hidden(Graph& g, Var memory, std::span<const int> tgt_in, Index batch,
                    std::span<const Real> src_mask, std::span<const Real> tgt_mask);
  Mixture heads(Graph& g, Var hidden, Var memory, std::span<const Real> src_mask,
                std::span<const int> src_ext, Index batch, Index ext_width);

  TransformerConfig config_;
  Vocabulary vocab_;
  ParameterSet params_;
  Parameter* embedding_ = nullptr;
  Parameter* positions_ = nullptr;
  std::vector<EncoderLayer> encoder_;
  std::vector<DecoderLayer> decoder_;
  LayerNorm enc_norm_, dec_norm_;
  Linear out_;
  std::optional<CopyHead> copy_;
};

// Copy head whose W_q, W_k, W_v are the elementwise means of the
// corresponding matrices over the heads of `attn`. Parameters are
// registered in `ps` under `prefix`.
CopyHead copy_head_init(const MultiHeadAttention& attn, ParameterSet& ps, Index model_dim,
                        std::mt19937_64& rng, const std::string& prefix = "copy");

}  // namespace rephrase::models

#endif  // REPHRASE_MODELS_TRANSFORMER_H_
