#ifndef REPHRASE_MODELS_MODEL_IO_H_
#define REPHRASE_MODELS_MODEL_IO_H_

#include <filesystem>
#include <memory>
#include <string>

#include "rephrase/models/crf.h"
#include "rephrase/models/pointer_gen.h"
#include "rephrase/models/transformer.h"

namespace rephrase::models {

// Builds a fresh model; arch is "pointer-lstm" or "mini-transformer".
std::unique_ptr<Seq2SeqModel> make_seq2seq(const std::string& arch, const nlohmann::json& config,
                                           Vocabulary vocab);

// A model directory holds the numcore checkpoint plus vocab.txt
// (and phrases.txt for the tagger).
void save_seq2seq(const std::filesystem::path& dir, Seq2SeqModel& model);
std::unique_ptr<Seq2SeqModel> load_seq2seq(const std::filesystem::path& dir);

void save_tagger(const std::filesystem::path& dir, CrfTagger& tagger);
std::unique_ptr<CrfTagger> load_tagger(const std::filesystem::path& dir);

// The "arch" field of a saved model.
std::string checkpoint_arch(const std::filesystem::path& dir);

}  // namespace rephrase::models

#endif  // REPHRASE_MODELS_MODEL_IO_H_
