#ifndef REPHRASE_TRAIN_TRAINER_H_
#define REPHRASE_TRAIN_TRAINER_H_

#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "rephrase/corpus.h"
#include "rephrase/metrics.h"
#include "rephrase/models/crf.h"
#include "rephrase/models/decode.h"
#include "rephrase/models/denoise.h"
#include "rephrase/models/transformer.h"
#include "rephrase/train/losses.h"

namespace rephrase::train {

struct TrainConfig {
  std::size_t batch_size = 16;
  double learning_rate = 1e-3;
  double weight_decay = 1e-6;
  int epochs = 40;
  std::uint64_t seed = 1;
  bool teacher_forcing = true;      // only teacher forcing is supported
  double clip_norm = 5.0;           // 0 disables clipping
  int patience = 0;                 // epochs without a better valid EM; 0 disables
  std::optional<double> target_em;  // stop once valid EM reaches this (percent)
  models::DecodeConfig valid_decode;
  std::optional<std::filesystem::path> log_path;  // JSONL, appended

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0;
  std::optional<double> valid_loss;
  std::optional<double> valid_em;
  std::optional<double> valid_em_any;
  double wall_time = 0;  // seconds since the run started
  std::int64_t clamped = 0;

  nlohmann::json to_json() const;
};

struct TrainResult {
  std::vector<EpochRecord> log;
  int best_epoch = 0;  // 0: no evaluation ran
  double best_valid_em = 0;
  bool diverged = false;
  std::string divergence;
};

struct EvalPoint {
  double em = 0;
  double em_any = 0;
  double loss = 0;
};

// The model-agnostic loop. `batch_loss` builds the loss of a minibatch
// (indices into the training set) in a training graph; `evaluate` runs after
// each epoch. The best-EM parameters (ties: lower loss) are restored at the
// end. A non-finite loss or gradient restores the last finite parameters
// and stops the run with `diverged` set.
struct LoopHooks {
  std::size_t train_size = 0;
  std::function<Var(Graph&, std::span<const std::size_t>, int epoch, std::int64_t* clamped)> batch_loss;
  std::function<EvalPoint()> evaluate;  // optional
};
TrainResult train_loop(numcore::ParameterSet& params, const TrainConfig& cfg, const LoopHooks& hooks);

// Content span as source, top reference as target.
std::vector<models::Example> make_examples(const models::Vocabulary& vocab, const corpus::Dataset& ds);
// Sources only, for prediction.
std::vector<models::Example> source_examples(const models::Vocabulary& vocab, const corpus::Dataset& ds);
// Vocabulary over training contents and top references.
models::Vocabulary build_vocabulary(const corpus::Dataset& train, std::size_t cap = 8000);

metrics::Predictions predict(models::Seq2SeqModel& model, const corpus::Dataset& ds,
                             const models::DecodeConfig& decode);
// Teacher-forced nll averaged over target tokens, dropout off.
double mean_nll(models::Seq2SeqModel& model, std::span<const models::Example> examples,
                std::size_t batch_size = 64);

TrainResult train_seq2seq(models::Seq2SeqModel& model, const corpus::Dataset& train,
                          const corpus::Dataset& valid, const TrainConfig& cfg,
                          const std::optional<CopyLossConfig>& copy = std::nullopt);

struct PretrainConfig {
  TrainConfig train;
  models::CorruptionPolicy corruption;
};
// Reconstructs sentences from denoise_corrupt inputs; corruption is redrawn
// every epoch. The log has training loss only.
TrainResult pretrain_denoising(models::MiniTransformer& model, std::span<const Words> corpus,
                               const PretrainConfig& cfg);
// Grafts the averaged copy head, then trains with nll plus the hinge term.
TrainResult finetune_with_copy(models::MiniTransformer& model, const corpus::Dataset& train,
                               const corpus::Dataset& valid, const TrainConfig& cfg,
                               const CopyLossConfig& copy, std::uint64_t graft_seed);

// Teacher-forced copy statistics over target tokens found in the source.
struct CopyUsage {
  double mean_p = 0;  // alpha * copy mass on matching positions
  double frac_alpha_over_half = 0;
  std::size_t positions = 0;
};
CopyUsage copy_usage(models::Seq2SeqModel& model, const corpus::Dataset& ds);

class NotCoveredError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};
// Trains the CRF tagger on (source, target) pairs; every pair must be
// expressible with the tagger's phrase vocabulary. `valid` drives
// best-checkpoint selection when given.
TrainResult train_tagger(models::CrfTagger& tagger, std::span<const editops::Pair> pairs,
                         const corpus::Dataset* valid, const TrainConfig& cfg);
// Fraction of tags predicted correctly on (source, target) pairs.
double tag_accuracy(models::CrfTagger& tagger, std::span<const editops::Pair> pairs);
metrics::Predictions predict_tagger(models::CrfTagger& tagger, const corpus::Dataset& ds);
// Training pairs (content, top reference) of a dataset.
std::vector<editops::Pair> dataset_pairs(const corpus::Dataset& ds);

}  // namespace rephrase::train

#endif  // REPHRASE_TRAIN_TRAINER_H_
