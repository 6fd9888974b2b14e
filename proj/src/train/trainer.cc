#include "rephrase/train/trainer.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "rephrase/numcore/optim.h"

namespace rephrase::train {

using models::Example;
using numcore::GraphOptions;
using numcore::Index;
using numcore::Tensor;

void TrainConfig::validate() const {
  if (batch_size == 0) throw std::invalid_argument("batch_size must be positive");
  if (!(learning_rate > 0)) throw std::invalid_argument("learning_rate must be positive");
  if (!(weight_decay >= 0)) throw std::invalid_argument("weight_decay must be >= 0");
  if (epochs < 1) throw std::invalid_argument("epochs must be positive");
  if (!(clip_norm >= 0)) throw std::invalid_argument("clip_norm must be >= 0");
  if (patience < 0) throw std::invalid_argument("patience must be >= 0");
  if (!teacher_forcing) throw std::invalid_argument("only teacher forcing is supported");
  if (valid_decode.beam_width < 1 || valid_decode.max_len < 1) {
    throw std::invalid_argument("invalid validation decode settings");
  }
}

nlohmann::json TrainConfig::to_json() const {
  nlohmann::json j = {{"batch_size", batch_size},
                      {"learning_rate", learning_rate},
                      {"weight_decay", weight_decay},
                      {"epochs", epochs},
                      {"seed", seed},
                      {"teacher_forcing", teacher_forcing},
                      {"clip_norm", clip_norm},
                      {"patience", patience},
                      {"valid_decode", valid_decode.to_string()},
                      {"max_len", valid_decode.max_len}};
  j["target_em"] = target_em ? nlohmann::json(*target_em) : nlohmann::json(nullptr);
  return j;
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.batch_size = j.value("batch_size", c.batch_size);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.epochs = j.value("epochs", c.epochs);
  c.seed = j.value("seed", c.seed);
  c.teacher_forcing = j.value("teacher_forcing", c.teacher_forcing);
  c.clip_norm = j.value("clip_norm", c.clip_norm);
  c.patience = j.value("patience", c.patience);
  if (j.contains("valid_decode")) {
    c.valid_decode = models::DecodeConfig::parse(j["valid_decode"].get<std::string>());
  }
  c.valid_decode.max_len = j.value("max_len", c.valid_decode.max_len);
  if (j.contains("target_em") && !j["target_em"].is_null()) c.target_em = j["target_em"].get<double>();
  c.validate();
  return c;
}

nlohmann::json EpochRecord::to_json() const {
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  return {{"epoch", epoch},
          {"train_loss", train_loss},
          {"valid_loss", opt(valid_loss)},
          {"valid_em", opt(valid_em)},
          {"valid_em_any", opt(valid_em_any)},
          {"wall_time", wall_time},
          {"clamped", clamped}};
}

namespace {

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t x = a * 0x9E3779B97F4A7C15ULL + b + 0x632BE59BD9B4E019ULL;
  x ^= x >> 31;
  x *= 0xBF58476D1CE4E5B9ULL;
  return x ^ (x >> 29);
}

class NonFiniteLoss : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

bool better(const EvalPoint& a, const EvalPoint& best) {
  return a.em > best.em || (a.em == best.em && a.loss < best.loss);
}

}  // namespace

TrainResult train_loop(numcore::ParameterSet& params, const TrainConfig& cfg, const LoopHooks& hooks) {
  cfg.validate();
  if (hooks.train_size == 0) throw std::invalid_argument("training set is empty");
  auto start = std::chrono::steady_clock::now();
  std::vector<numcore::Parameter*> plist = params.all();
  numcore::AdamState adam;
  adam.config.lr = cfg.learning_rate;
  adam.config.weight_decay = cfg.weight_decay;
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(hooks.train_size);
  std::iota(order.begin(), order.end(), 0);

  std::ofstream log_file;
  if (cfg.log_path) {
    log_file.open(*cfg.log_path, std::ios::app);
    if (!log_file) throw std::runtime_error("cannot open log " + cfg.log_path->string());
  }

  TrainResult result;
  std::vector<Tensor> last_finite = params.snapshot();
  std::vector<Tensor> best_params;
  EvalPoint best;
  int stale = 0;
  std::uint64_t step = 0;
  params.zero_grad();

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0;
    std::size_t batches = 0;
    EpochRecord rec;
    rec.epoch = epoch;
    try {
      for (std::size_t s = 0; s < order.size(); s += cfg.batch_size) {
        std::size_t e = std::min(order.size(), s + cfg.batch_size);
        std::span<const std::size_t> idx(order.data() + s, e - s);
        Graph g(GraphOptions{true, true, mix_seed(cfg.seed, ++step)});
        Var loss = hooks.batch_loss(g, idx, epoch, &rec.clamped);
        double value = static_cast<double>(loss.value()(0, 0));
        if (!std::isfinite(value)) throw NonFiniteLoss("non-finite loss at step " + std::to_string(step));
        g.backward(loss);
        if (cfg.clip_norm > 0) numcore::clip_global_norm(plist, cfg.clip_norm);
        numcore::adam_step(plist, adam);
        loss_sum += value;
        ++batches;
      }
    } catch (const std::runtime_error& err) {
      if (dynamic_cast<const NonFiniteLoss*>(&err) == nullptr &&
          dynamic_cast<const numcore::NonFiniteGradient*>(&err) == nullptr) {
        throw;
      }
      params.restore(best_params.empty() ? last_finite : best_params);
      params.zero_grad();
      result.diverged = true;
      result.divergence = err.what();
      return result;
    }
    rec.train_loss = loss_sum / static_cast<double>(batches);
    bool improved = false;
    if (hooks.evaluate) {
      EvalPoint p = hooks.evaluate();
      rec.valid_loss = p.loss;
      rec.valid_em = p.em;
      rec.valid_em_any = p.em_any;
      if (best_params.empty() || better(p, best)) {
        best = p;
        best_params = params.snapshot();
        result.best_epoch = epoch;
        result.best_valid_em = p.em;
        improved = true;
      }
    }
    last_finite = params.snapshot();
    rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.log.push_back(rec);
    if (log_file) log_file << rec.to_json().dump() << '\n' << std::flush;
    if (hooks.evaluate) {
      stale = improved ? 0 : stale + 1;
      if (cfg.patience > 0 && stale >= cfg.patience) break;
      if (cfg.target_em && best.em >= *cfg.target_em) break;
    }
  }
  if (!best_params.empty()) params.restore(best_params);
  return result;
}

std::vector<Example> make_examples(const models::Vocabulary& vocab, const corpus::Dataset& ds) {
  std::vector<Example> out;
  out.reserve(ds.size());
  for (const auto& u : ds.utterances) {
    Words target = u.top_reference();
    out.push_back(models::encode_example(vocab, u.content(), &target, u.id));
  }
  return out;
}

std::vector<Example> source_examples(const models::Vocabulary& vocab, const corpus::Dataset& ds) {
  std::vector<Example> out;
  out.reserve(ds.size());
  for (const auto& u : ds.utterances) {
    out.push_back(models::encode_example(vocab, u.content(), nullptr, u.id));
  }
  return out;
}

models::Vocabulary build_vocabulary(const corpus::Dataset& train, std::size_t cap) {
  std::vector<Words> texts;
  for (const auto& u : train.utterances) {
    texts.push_back(u.content());
    texts.push_back(u.top_reference());
  }
  return models::Vocabulary::build(texts, cap);
}

metrics::Predictions predict(models::Seq2SeqModel& model, const corpus::Dataset& ds,
                             const models::DecodeConfig& decode) {
  auto examples = source_examples(model.vocab(), ds);
  auto outputs = models::decode_all(model, examples, decode);
  metrics::Predictions preds;
  for (std::size_t i = 0; i < examples.size(); ++i) preds[examples[i].id] = std::move(outputs[i]);
  return preds;
}

double mean_nll(models::Seq2SeqModel& model, std::span<const Example> examples, std::size_t batch_size) {
  double total = 0, tokens = 0;
  for (std::size_t s = 0; s < examples.size(); s += batch_size) {
    std::size_t e = std::min(examples.size(), s + batch_size);
    models::Batch b = models::make_batch(examples.subspan(s, e - s), model.vocab().size(), model.has_copy());
    Graph g(GraphOptions{false});
    double n = std::accumulate(b.tgt_mask.begin(), b.tgt_mask.end(), 0.0);
    total += static_cast<double>(nll_loss(model.forward(g, b), b).value()(0, 0)) * n;
    tokens += n;
  }
  return tokens > 0 ? total / tokens : 0.0;
}

namespace {

std::vector<const Example*> gather(const std::vector<Example>& all, std::span<const std::size_t> idx) {
  std::vector<const Example*> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(&all[i]);
  return out;
}

}  // namespace

TrainResult train_seq2seq(models::Seq2SeqModel& model, const corpus::Dataset& train,
                          const corpus::Dataset& valid, const TrainConfig& cfg,
                          const std::optional<CopyLossConfig>& copy) {
  if (train.empty()) throw std::invalid_argument("training set is empty");
  if (copy) copy->validate();
  auto examples = make_examples(model.vocab(), train);
  auto valid_examples = make_examples(model.vocab(), valid);
  LoopHooks hooks;
  hooks.train_size = examples.size();
  hooks.batch_loss = [&](Graph& g, std::span<const std::size_t> idx, int, std::int64_t* clamped) {
    auto ptrs = gather(examples, idx);
    models::Batch b = models::make_batch(ptrs, model.vocab().size(), model.has_copy());
    Mixture mix = model.forward(g, b);
    Var loss = nll_loss(mix, b, clamped);
    if (copy && copy->lambda > 0) {
      Var hinge = copy_hinge_loss(g, mix, b, *copy);
      loss = numcore::add(loss, numcore::affine(hinge, 1.0 / static_cast<double>(b.size), 0));
    }
    return loss;
  };
  if (!valid.empty()) {
    hooks.evaluate = [&] {
      metrics::EvalReport r = metrics::corpus_eval(predict(model, valid, cfg.valid_decode), valid);
      return EvalPoint{r.em, r.em_any, mean_nll(model, valid_examples)};
    };
  }
  return train_loop(model.params(), cfg, hooks);
}

TrainResult pretrain_denoising(models::MiniTransformer& model, std::span<const Words> corpus,
                               const PretrainConfig& cfg) {
  if (corpus.empty()) throw std::invalid_argument("pretraining corpus is empty");
  std::vector<Example> examples;
  int cached_epoch = 0;
  LoopHooks hooks;
  hooks.train_size = corpus.size();
  hooks.batch_loss = [&](Graph& g, std::span<const std::size_t> idx, int epoch, std::int64_t* clamped) {
    if (epoch != cached_epoch) {
      examples.clear();
      for (std::size_t i = 0; i < corpus.size(); ++i) {
        auto c =
            models::denoise_corrupt(corpus[i], cfg.corruption,
                                    mix_seed(mix_seed(cfg.train.seed, static_cast<std::uint64_t>(epoch)), i));
        examples.push_back(models::encode_example(model.vocab(), c.input, &c.target));
      }
      cached_epoch = epoch;
    }
    auto ptrs = gather(examples, idx);
    models::Batch b = models::make_batch(ptrs, model.vocab().size(), model.has_copy());
    return nll_loss(model.forward(g, b), b, clamped);
  };
  return train_loop(model.params(), cfg.train, hooks);
}

TrainResult finetune_with_copy(models::MiniTransformer& model, const corpus::Dataset& train,
                               const corpus::Dataset& valid, const TrainConfig& cfg,
                               const CopyLossConfig& copy, std::uint64_t graft_seed) {
  if (model.has_copy()) throw std::logic_error("model already has a copy head");
  model.graft_copy_head(graft_seed);
  return train_seq2seq(model, train, valid, cfg, copy);
}

CopyUsage copy_usage(models::Seq2SeqModel& model, const corpus::Dataset& ds) {
  auto examples = make_examples(model.vocab(), ds);
  CopyUsage u;
  double p_sum = 0, over = 0;
  const std::size_t bs = 64;
  for (std::size_t s = 0; s < examples.size(); s += bs) {
    std::size_t e = std::min(examples.size(), s + bs);
    models::Batch b = models::make_batch(std::span<const Example>(examples).subspan(s, e - s),
                                         model.vocab().size(), model.has_copy());
    Graph g(GraphOptions{false});
    Mixture mix = model.forward(g, b);
    CopyTerms t = copy_terms(g, mix, b, false);
    for (Index r = 0; r < t.copiable.rows(); ++r) {
      if (t.copiable(r, 0) == 0) continue;
      ++u.positions;
      if (t.p.valid()) {
        p_sum += static_cast<double>(t.p.value()(r, 0));
        over += mix.alpha.value()(r, 0) > 0.5 ? 1 : 0;
      }
    }
  }
  if (u.positions > 0) {
    u.mean_p = p_sum / static_cast<double>(u.positions);
    u.frac_alpha_over_half = over / static_cast<double>(u.positions);
  }
  return u;
}

std::vector<editops::Pair> dataset_pairs(const corpus::Dataset& ds) {
  std::vector<editops::Pair> out;
  for (const auto& u : ds.utterances) out.emplace_back(u.content(), u.top_reference());
  return out;
}

namespace {

std::vector<std::vector<int>> gold_tag_ids(models::CrfTagger& tagger, std::span<const editops::Pair> pairs) {
  std::vector<std::vector<int>> gold;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    auto tags = editops::to_tags(pairs[i].first, pairs[i].second, &tagger.phrases());
    if (!tags) {
      throw NotCoveredError("training pair " + std::to_string(i) +
                            " needs a phrase outside the tagger vocabulary");
    }
    std::vector<int> ids;
    for (const auto& t : tags->tags) ids.push_back(tagger.tag_id(t));
    gold.push_back(std::move(ids));
  }
  return gold;
}

}  // namespace

TrainResult train_tagger(models::CrfTagger& tagger, std::span<const editops::Pair> pairs,
                         const corpus::Dataset* valid, const TrainConfig& cfg) {
  if (pairs.empty()) throw std::invalid_argument("training set is empty");
  auto gold = gold_tag_ids(tagger, pairs);
  std::vector<Example> examples;
  for (const auto& p : pairs) examples.push_back(tagger.make_example(p.first));
  LoopHooks hooks;
  hooks.train_size = pairs.size();
  hooks.batch_loss = [&](Graph& g, std::span<const std::size_t> idx, int, std::int64_t*) {
    auto ptrs = gather(examples, idx);
    std::vector<std::vector<int>> batch_gold;
    for (std::size_t i : idx) batch_gold.push_back(gold[i]);
    models::Batch b = models::make_batch(ptrs, tagger.vocab().size());
    return tagger.loss(g, b, batch_gold);
  };
  if (valid != nullptr && !valid->empty()) {
    hooks.evaluate = [&] {
      metrics::EvalReport r = metrics::corpus_eval(predict_tagger(tagger, *valid), *valid);
      return EvalPoint{r.em, r.em_any, 0.0};
    };
  }
  return train_loop(tagger.params(), cfg, hooks);
}

double tag_accuracy(models::CrfTagger& tagger, std::span<const editops::Pair> pairs) {
  auto gold = gold_tag_ids(tagger, pairs);
  std::size_t right = 0, total = 0;
  const std::size_t bs = 64;
  for (std::size_t s = 0; s < pairs.size(); s += bs) {
    std::size_t e = std::min(pairs.size(), s + bs);
    std::vector<Example> exs;
    for (std::size_t i = s; i < e; ++i) exs.push_back(tagger.make_example(pairs[i].first));
    auto pred = tagger.predict_tags(models::make_batch(std::span<const Example>(exs), tagger.vocab().size()));
    for (std::size_t i = s; i < e; ++i) {
      const auto& p = pred[i - s].tags;
      for (std::size_t k = 0; k < p.size(); ++k) {
        right += tagger.tag_id(p[k]) == gold[i][k] ? 1 : 0;
        ++total;
      }
    }
  }
  return total ? static_cast<double>(right) / static_cast<double>(total) : 0.0;
}

metrics::Predictions predict_tagger(models::CrfTagger& tagger, const corpus::Dataset& ds) {
  std::vector<Words> sources;
  for (const auto& u : ds.utterances) sources.push_back(u.content());
  auto out = tagger.predict(sources);
  metrics::Predictions preds;
  for (std::size_t i = 0; i < ds.size(); ++i) preds[ds.utterances[i].id] = std::move(out[i]);
  return preds;
}

}  // namespace rephrase::train
