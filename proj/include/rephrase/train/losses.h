#ifndef REPHRASE_TRAIN_LOSSES_H_
#define REPHRASE_TRAIN_LOSSES_H_

#include <cstdint>

#include "rephrase/models/seq2seq.h"

namespace rephrase::train {

using models::Batch;
using models::Mixture;
using numcore::Graph;
using numcore::Var;

struct CopyLossConfig {
  double lambda = 0.25;
  double threshold = 0.9;  // T
  // P = alpha instead of alpha * (copy mass on matching source positions).
  bool hinge_on_alpha_only = false;

  void validate() const;
  nlohmann::json to_json() const;
  static CopyLossConfig from_json(const nlohmann::json& j);
};

// lambda * max(T - P, 0) for a single position.
double hinge_term(double p, const CopyLossConfig& cfg);

// Mean -log p_output(target) over unmasked target positions. Probabilities
// below 1e-30 are clamped and counted in `clamped`.
Var nll_loss(const Mixture& mix, const Batch& batch, std::int64_t* clamped = nullptr);

// Copy-path probability per target row (rows x 1) and the indicator of rows
// whose target token occurs in the source (copiable and unmasked).
struct CopyTerms {
  Var p;                     // empty when the model has no copy path
  numcore::Tensor copiable;  // rows x 1, 0 or 1
};
CopyTerms copy_terms(Graph& g, const Mixture& mix, const Batch& batch, bool alpha_only);

// Sum over copiable target positions of lambda * max(T - P, 0). Models
// without a copy path contribute a constant 0.
Var copy_hinge_loss(Graph& g, const Mixture& mix, const Batch& batch, const CopyLossConfig& cfg);

}  // namespace rephrase::train

#endif  // REPHRASE_TRAIN_LOSSES_H_
