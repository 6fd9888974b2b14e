#ifndef REPHRASE_TRAIN_DISTILL_H_
#define REPHRASE_TRAIN_DISTILL_H_

#include <functional>

#include "rephrase/train/trainer.h"

namespace rephrase::train {

// Maps a source utterance to a pseudo-target. Must be safe to call from
// several threads at once.
using Teacher = std::function<Words(const corpus::Utterance&)>;

// Decodes the content span with a trained model. Decoding only reads the
// parameters, so worker threads share the instance.
Teacher model_teacher(models::Seq2SeqModel& model, const models::DecodeConfig& decode);
// Emits the gold top reference.
Teacher oracle_teacher();
// Emits the content span unchanged.
Teacher copy_teacher();

struct DistillConfig {
  models::DecodeConfig decode{5, 40};  // used by model_teacher callers
  bool finetune_on_gold = false;
  TrainConfig student;   // stage 2
  TrainConfig finetune;  // stage 3
  unsigned threads = 0;  // 0: hardware concurrency

  void validate() const;
  nlohmann::json to_json() const;
  static DistillConfig from_json(const nlohmann::json& j);
};

struct DistillResult {
  corpus::Dataset pseudo;  // training utterances with teacher outputs as the top reference
  std::size_t skipped = 0;
  TrainResult stage2;
  std::optional<TrainResult> stage3;
};

// Stage 1 labels every training source with the teacher (empty outputs are
// skipped), stage 2 trains the student on those labels, stage 3 optionally
// continues on gold targets.
DistillResult distill(const Teacher& teacher, models::Seq2SeqModel& student, const corpus::Dataset& train,
                      const corpus::Dataset& valid, const DistillConfig& cfg);

// Stage 1 alone.
corpus::Dataset pseudo_label(const Teacher& teacher, const corpus::Dataset& train, unsigned threads,
                             std::size_t* skipped);

}  // namespace rephrase::train

#endif  // REPHRASE_TRAIN_DISTILL_H_
