#ifndef REPHRASE_MODELS_DECODE_H_
#define REPHRASE_MODELS_DECODE_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rephrase/models/seq2seq.h"

namespace rephrase::models {

struct Hypothesis {
  std::vector<int> ids;  // includes kEnd when the hypothesis finished
  double logprob = 0;
  // Length-normalized log-probability, logprob / ids.size().
  double score() const { return ids.empty() ? 0.0 : logprob / static_cast<double>(ids.size()); }
};

// Argmax of p_output at each step until kEnd or max_len, for every row.
std::vector<Hypothesis> greedy_decode(Seq2SeqModel& model, const Batch& batch, int max_len);

// Beam search over length-normalized log-probability for one example.
// The greedy hypothesis also competes, so the result never scores below it.
Hypothesis beam_decode(Seq2SeqModel& model, const Example& example, int max_len, int width);

struct DecodeConfig {
  int beam_width = 1;  // 1 means greedy
  int max_len = 40;

  // "greedy" or "beam:k".
  static DecodeConfig parse(const std::string& spec);
  std::string to_string() const;
};

// Decodes every example; greedy runs batched, beam runs per example.
std::vector<Words> decode_all(Seq2SeqModel& model, std::span<const Example> examples,
                              const DecodeConfig& config, std::size_t batch_size = 64);

}  // namespace rephrase::models

#endif  // REPHRASE_MODELS_DECODE_H_
