#ifndef REPHRASE_MODELS_SEQ2SEQ_H_
#define REPHRASE_MODELS_SEQ2SEQ_H_

#include <limits>
#include <memory>
#include <span>
#include <string>

#include "json.hpp"
#include "rephrase/models/layers.h"
#include "rephrase/models/vocab.h"

namespace rephrase::models {

// Per-step output distributions, rows time-major (t * batch + b).
struct Mixture {
  Var p_output;  // over vocab plus per-example OOV slots (Batch::ext_width)
  Var p_vocab;   // over vocab
  Var p_copy;    // over source positions; empty without a copy path
  Var alpha;     // gate column; empty without a copy path
};

// Tensors of one decoding step for `batch` rows.
struct StepDistribution {
  Tensor p_output;
  Tensor p_copy;  // empty without a copy path
  Tensor alpha;
};

class DecodeState {
 public:
  virtual ~DecodeState() = default;
  // Row j of the new state becomes row rows[j] of the old one.
  virtual void select(std::span<const int> rows) = 0;
};

class Seq2SeqModel {
 public:
  virtual ~Seq2SeqModel() = default;

  virtual std::string arch() const = 0;
  virtual ParameterSet& params() = 0;
  virtual const Vocabulary& vocab() const = 0;
  virtual bool has_copy() const = 0;
  virtual nlohmann::json config() const = 0;
  // Longest output the model can produce; decoding stops there.
  virtual int max_decode_steps() const { return std::numeric_limits<int>::max(); }

  // Teacher-forced pass over the whole target.
  virtual Mixture forward(Graph& g, const Batch& batch) = 0;

  // Incremental decoding without gradients.
  virtual std::unique_ptr<DecodeState> begin_decode(const Batch& batch) = 0;
  virtual StepDistribution decode_step(DecodeState& state, std::span<const int> prev) = 0;
};

// p_output = (1 - alpha) * pad(p_vocab) + alpha * scatter(p_copy), where
// scatter sends source position s of example b to id src_ext[b * src_len + s].
Var mix_distributions(Var p_vocab, Var p_copy, Var alpha, std::span<const int> src_ext, Index batch,
                      Index ext_width);

// Largest deviation of any row sum of p_output from 1.
double max_normalization_error(const Tensor& p_output);

}  // namespace rephrase::models

#endif  // REPHRASE_MODELS_SEQ2SEQ_H_
