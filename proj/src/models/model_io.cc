#include "rephrase/models/model_io.h"

#include <fstream>
#include <stdexcept>

#include "rephrase/numcore/checkpoint.h"

namespace rephrase::models {

namespace fs = std::filesystem;

namespace {

void write_vocab(const fs::path& dir, const Vocabulary& vocab) {
  fs::create_directories(dir);
  std::ofstream out(dir / "vocab.txt");
  vocab.write(out);
  if (!out) throw numcore::CheckpointError("cannot write vocab.txt");
}

Vocabulary read_vocab(const fs::path& dir, const nlohmann::json& config) {
  std::ifstream in(dir / "vocab.txt");
  if (!in) throw numcore::CheckpointError("cannot open " + (dir / "vocab.txt").string());
  Vocabulary v = Vocabulary::read(in);
  if (config.contains("vocab_hash") && config["vocab_hash"].get<std::uint64_t>() != v.hash()) {
    throw numcore::CheckpointError("vocab.txt does not match the checkpoint");
  }
  return v;
}

nlohmann::json read_config(const fs::path& dir) {
  return nlohmann::json::parse(numcore::read_checkpoint_config(dir));
}

}  // namespace

std::unique_ptr<Seq2SeqModel> make_seq2seq(const std::string& arch, const nlohmann::json& config,
                                           Vocabulary vocab) {
  if (arch == "pointer-lstm") {
    return std::make_unique<PointerGenLSTM>(PointerGenConfig::from_json(config), std::move(vocab));
  }
  if (arch == "mini-transformer") {
    return std::make_unique<MiniTransformer>(TransformerConfig::from_json(config), std::move(vocab));
  }
  throw std::invalid_argument("unknown seq2seq arch '" + arch + "'");
}

void save_seq2seq(const fs::path& dir, Seq2SeqModel& model) {
  numcore::save_checkpoint(dir, model.params(), model.config().dump());
  write_vocab(dir, model.vocab());
}

std::unique_ptr<Seq2SeqModel> load_seq2seq(const fs::path& dir) {
  nlohmann::json config = read_config(dir);
  std::string arch = config.value("arch", std::string());
  auto model = make_seq2seq(arch, config, read_vocab(dir, config));
  if (arch == "mini-transformer" && config.value("copy_head", false)) {
    dynamic_cast<MiniTransformer&>(*model).add_copy_head_parameters();
  }
  numcore::load_checkpoint(dir, model->params());
  return model;
}

void save_tagger(const fs::path& dir, CrfTagger& tagger) {
  numcore::save_checkpoint(dir, tagger.params(), tagger.config().dump());
  write_vocab(dir, tagger.vocab());
  std::ofstream out(dir / "phrases.txt");
  tagger.phrases().write(out);
  if (!out) throw numcore::CheckpointError("cannot write phrases.txt");
}

std::unique_ptr<CrfTagger> load_tagger(const fs::path& dir) {
  nlohmann::json config = read_config(dir);
  if (config.value("arch", std::string()) != "tagger") {
    throw numcore::CheckpointError("checkpoint is not a tagger");
  }
  std::ifstream in(dir / "phrases.txt");
  if (!in) throw numcore::CheckpointError("cannot open " + (dir / "phrases.txt").string());
  auto tagger = std::make_unique<CrfTagger>(TaggerConfig::from_json(config), read_vocab(dir, config),
                                            editops::PhraseVocabulary::read(in));
  numcore::load_checkpoint(dir, tagger->params());
  return tagger;
}

std::string checkpoint_arch(const fs::path& dir) { return read_config(dir).value("arch", std::string()); }

}  // namespace rephrase::models
