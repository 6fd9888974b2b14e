#ifndef REPHRASE_MODELS_CRF_H_
#define REPHRASE_MODELS_CRF_H_

#include <span>
#include <vector>

#include "json.hpp"
#include "rephrase/editops.h"
#include "rephrase/models/layers.h"
#include "rephrase/models/vocab.h"

namespace rephrase::models {

// Linear-chain CRF over emissions (length x tags) and transitions
// (tags x tags, from row to column). A path scores
// sum_i E[i, y_i] + sum_{i>0} T[y_{i-1}, y_i].
double crf_path_score(const Tensor& emissions, const Tensor& transitions, std::span<const int> tags);
double crf_log_partition(const Tensor& emissions, const Tensor& transitions);
double crf_loglik(const Tensor& emissions, const Tensor& transitions, std::span<const int> tags);

struct ViterbiPath {
  std::vector<int> tags;
  double score = 0;
};
ViterbiPath crf_viterbi(const Tensor& emissions, const Tensor& transitions);

// Differentiable negative log-likelihood, 1 x 1.
Var crf_nll(Var emissions, Var transitions, std::span<const int> tags);

struct TaggerConfig {
  Index embedding_dim = 64;
  Index hidden = 64;  // per direction
  int layers = 1;
  Index mlp_dim = 64;
  Real dropout = 0.1;
  std::uint64_t seed = 1;

  nlohmann::json to_json() const;
  static TaggerConfig from_json(const nlohmann::json& j);
};

// Keep/Delete tagger with phrase insertions. Each source token plus a final
// end slot gets one tag; tag id = action * (P + 1) + (phrase index + 1).
class CrfTagger {
 public:
  CrfTagger(const TaggerConfig& config, Vocabulary vocab, editops::PhraseVocabulary phrases);

  ParameterSet& params() { return params_; }
  const Vocabulary& vocab() const { return vocab_; }
  const editops::PhraseVocabulary& phrases() const { return phrases_; }
  nlohmann::json config() const;
  int num_tags() const { return 2 * (static_cast<int>(phrases_.size()) + 1); }

  int tag_id(const editops::EditTag& tag) const;
  editops::EditTag tag_of(int id) const;

  // Source plus end slot, encoded for the tagger.
  Example make_example(std::span<const std::string> source, std::string id = {}) const;

  // Emissions for example-major slots: a vector of (len_b + 1) x num_tags
  // Vars, one per batch element. Final-slot DELETE tags are masked.
  std::vector<Var> emissions(Graph& g, const Batch& batch);
  Var transitions(Graph& g) { return g.param(*transitions_); }

  // Mean CRF negative log-likelihood over the batch.
  Var loss(Graph& g, const Batch& batch, std::span<const std::vector<int>> gold);

  std::vector<editops::TagSequence> predict_tags(const Batch& batch);
  std::vector<Words> predict(std::span<const Words> sources, std::size_t batch_size = 64);

 private:
  TaggerConfig config_;
  Vocabulary vocab_;
  editops::PhraseVocabulary phrases_;
  ParameterSet params_;
  Parameter* embedding_ = nullptr;
  BiLstmEncoder encoder_;
  Linear hidden_;
  Linear emit_;
  Parameter* transitions_ = nullptr;
};

}  // namespace rephrase::models

#endif  // REPHRASE_MODELS_CRF_H_
