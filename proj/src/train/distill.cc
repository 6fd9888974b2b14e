#include "rephrase/train/distill.h"

#include <algorithm>
#include <thread>

namespace rephrase::train {

Teacher model_teacher(models::Seq2SeqModel& model, const models::DecodeConfig& decode) {
  return [&model, decode](const corpus::Utterance& u) {
    models::Example e = models::encode_example(model.vocab(), u.content(), nullptr, u.id);
    return models::decode_all(model, std::span<const models::Example>(&e, 1), decode).front();
  };
}

Teacher oracle_teacher() {
  return [](const corpus::Utterance& u) { return u.top_reference(); };
}

Teacher copy_teacher() {
  return [](const corpus::Utterance& u) { return u.content(); };
}

void DistillConfig::validate() const {
  if (decode.beam_width < 1) throw std::invalid_argument("teacher beam width must be >= 1");
  student.validate();
  if (finetune_on_gold) finetune.validate();
}

nlohmann::json DistillConfig::to_json() const {
  return {{"decode", decode.to_string()},         {"max_len", decode.max_len},
          {"finetune_on_gold", finetune_on_gold}, {"student", student.to_json()},
          {"finetune", finetune.to_json()},       {"threads", threads}};
}

DistillConfig DistillConfig::from_json(const nlohmann::json& j) {
  DistillConfig c;
  if (j.contains("decode")) c.decode = models::DecodeConfig::parse(j["decode"].get<std::string>());
  c.decode.max_len = j.value("max_len", c.decode.max_len);
  c.finetune_on_gold = j.value("finetune_on_gold", c.finetune_on_gold);
  if (j.contains("student")) c.student = TrainConfig::from_json(j["student"]);
  if (j.contains("finetune")) c.finetune = TrainConfig::from_json(j["finetune"]);
  c.threads = j.value("threads", c.threads);
  c.validate();
  return c;
}

corpus::Dataset pseudo_label(const Teacher& teacher, const corpus::Dataset& train, unsigned threads,
                             std::size_t* skipped) {
  std::size_t n = train.size();
  std::vector<Words> outputs(n);
  unsigned workers = threads != 0 ? threads : std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, std::max<std::size_t>(n, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) outputs[i] = teacher(train.utterances[i]);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < n; i += workers) outputs[i] = teacher(train.utterances[i]);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  corpus::Dataset pseudo;
  pseudo.split_tag = train.split_tag;
  std::size_t skip = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (outputs[i].empty()) {
      ++skip;
      continue;
    }
    corpus::Utterance u = train.utterances[i];
    u.rephrases = {std::move(outputs[i])};
    pseudo.utterances.push_back(std::move(u));
  }
  if (skipped != nullptr) *skipped = skip;
  return pseudo;
}

DistillResult distill(const Teacher& teacher, models::Seq2SeqModel& student, const corpus::Dataset& train,
                      const corpus::Dataset& valid, const DistillConfig& cfg) {
  cfg.validate();
  DistillResult r;
  r.pseudo = pseudo_label(teacher, train, cfg.threads, &r.skipped);
  if (r.pseudo.empty()) throw std::runtime_error("teacher produced no usable targets");
  r.stage2 = train_seq2seq(student, r.pseudo, valid, cfg.student);
  if (cfg.finetune_on_gold && !r.stage2.diverged) {
    r.stage3 = train_seq2seq(student, train, valid, cfg.finetune);
  }
  return r;
}

}  // namespace rephrase::train
