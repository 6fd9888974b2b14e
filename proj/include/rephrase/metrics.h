#ifndef REPHRASE_METRICS_H_
#define REPHRASE_METRICS_H_

#include <map>
#include <span>
#include <string>
#include <vector>

#include "rephrase/corpus.h"
#include "rephrase/text.h"

namespace rephrase::metrics {

using Predictions = std::map<std::string, Words>;

struct EvalReport {
  double em = 0;
  double em_any = 0;
  double em_exact = 0;
  double em_rephrase = 0;
  double bleu = 0;
  double sari = 0;
  std::size_t n_exact = 0;
  std::size_t n_rephrase = 0;
};

// Flat "key=value" lines.
std::string to_text(const EvalReport& r);
std::string to_json(const EvalReport& r);

struct SariBreakdown {
  double keep_f1 = 0;
  double add_f1 = 0;
  double delete_f1 = 0;  // precision instead when delete_precision is set
  double sari = 0;
};

struct SariConfig {
  // Score deletions by precision only, as the original SARI formulation.
  bool delete_precision = false;
};

// Both arguments are normalized with text::kMetricPolicy before comparison.
// Throws std::invalid_argument for a REPHRASE utterance without rephrases.
bool exact_match(std::span<const std::string> pred, const corpus::Utterance& u);
bool em_any(std::span<const std::string> pred, const corpus::Utterance& u);

// Corpus BLEU-4: clipped counts summed over the corpus, add-one smoothing on
// orders 2..4, brevity penalty against the closest reference length (ties
// to the shorter one). Returns a value in [0, 100].
double bleu(std::span<const Words> preds, std::span<const std::vector<Words>> refs);

SariBreakdown sari(std::span<const std::string> source, std::span<const std::string> pred,
                   std::span<const Words> refs, const SariConfig& cfg = {});

// Throws std::invalid_argument naming the missing ids when `preds` does
// not cover the dataset.
EvalReport corpus_eval(const Predictions& preds, const corpus::Dataset& ds, const SariConfig& sari_cfg = {});

// Fraction of utterances whose content carries a proper-noun-guess token
// that is missing from the prediction.
double copy_error_rate(const Predictions& preds, const corpus::Dataset& ds);

}  // namespace rephrase::metrics

#endif  // REPHRASE_METRICS_H_
