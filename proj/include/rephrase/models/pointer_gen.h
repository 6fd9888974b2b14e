#ifndef REPHRASE_MODELS_POINTER_GEN_H_
#define REPHRASE_MODELS_POINTER_GEN_H_

#include <optional>

#include "rephrase/models/seq2seq.h"

namespace rephrase::models {

struct PointerGenConfig {
  Index embedding_dim = 128;
  Index encoder_hidden = 128;  // per direction
  int encoder_layers = 2;
  Index decoder_hidden = 256;
  int decoder_layers = 2;
  Index attention_dim = 256;
  Real dropout = 0.3;
  std::optional<double> pinned_alpha;  // fixes alpha_mix; 0 removes the copy path
  std::uint64_t seed = 1;

  nlohmann::json to_json() const;
  static PointerGenConfig from_json(const nlohmann::json& j);
};

class PointerGenLSTM : public Seq2SeqModel {
 public:
  PointerGenLSTM(const PointerGenConfig& config, Vocabulary vocab);

  std::string arch() const override { return "pointer-lstm"; }
  ParameterSet& params() override { return params_; }
  const Vocabulary& vocab() const override { return vocab_; }
  bool has_copy() const override { return !config_.pinned_alpha || *config_.pinned_alpha != 0; }
  nlohmann::json config() const override;
  const PointerGenConfig& settings() const { return config_; }
  void set_pinned_alpha(std::optional<double> alpha) { config_.pinned_alpha = alpha; }

  // Encoder outputs H_e, rows time-major, width 2 * encoder_hidden.
  Var encode(Graph& g, const Batch& batch);

  Mixture forward(Graph& g, const Batch& batch) override;
  std::unique_ptr<DecodeState> begin_decode(const Batch& batch) override;
  StepDistribution decode_step(DecodeState& state, std::span<const int> prev) override;

 private:
  struct Memory {
    Var keys;    // H_e W_k
    Var values;  // H_e W_v
  };
  struct StepVars {
    std::vector<LstmState> layers;
    Var context;
  };
  struct StepOut {
    Var p_vocab, p_copy, alpha;
  };

  StepOut step(Graph& g, const Memory& mem, StepVars& state, Var prev_embedding,
               std::span<const Real> src_mask, Index batch);
  StepVars initial_state(Graph& g, Var encoded, Index batch, std::span<const Real> step_mask);
  Var gate(Graph& g, Var context, Var hidden, Index rows);

  PointerGenConfig config_;
  Vocabulary vocab_;
  ParameterSet params_;
  Parameter* embedding_ = nullptr;
  BiLstmEncoder encoder_;
  std::vector<LstmLayer> decoder_;
  std::vector<Linear> bridge_;
  Parameter* w_q_ = nullptr;
  Parameter* w_k_ = nullptr;
  Parameter* w_v_ = nullptr;
  Linear w_mix_;
  Linear w_out_;
};

}  // namespace rephrase::models

#endif  // REPHRASE_MODELS_POINTER_GEN_H_
