// Desk-scale behavioural checks on synthetic data. Slower than the unit
// tests; each trains small models for a few epochs.

#include <gtest/gtest.h>

#include <chrono>

#include "rephrase/metrics.h"
#include "rephrase/models/pointer_gen.h"
#include "rephrase/train/distill.h"
#include "rephrase/train/grid.h"
#include "rephrase/train/trainer.h"

namespace rephrase::train {
namespace {

corpus::Dataset slice(const corpus::Dataset& ds, std::size_t from, std::size_t to) {
  corpus::Dataset out;
  out.utterances.assign(ds.utterances.begin() + static_cast<std::ptrdiff_t>(from),
                        ds.utterances.begin() + static_cast<std::ptrdiff_t>(to));
  return out;
}

struct Data {
  corpus::Dataset train, valid, test;
  models::Vocabulary vocab;
};

const Data& data() {
  static const Data d = [] {
    corpus::Dataset all = corpus::generate_synthetic(2750, 77);
    Data x{slice(all, 0, 2000), slice(all, 2000, 2250), slice(all, 2250, 2750), {}};
    x.vocab = build_vocabulary(x.train);
    return x;
  }();
  return d;
}

std::vector<Words> sentences(const corpus::Dataset& ds) {
  std::vector<Words> out;
  for (const auto& u : ds.utterances) {
    out.push_back(u.content());
    out.push_back(u.top_reference());
  }
  return out;
}

models::TransformerConfig transformer(Eigen::Index dim) {
  models::TransformerConfig c;
  c.model_dim = dim;
  c.heads = 4;
  c.ff_dim = 2 * dim;
  c.max_positions = 48;
  return c;
}

TEST(ExperimentTest, PretrainLossMovingAverageIsNonincreasing) {
  const Data& d = data();
  models::MiniTransformer m(transformer(32), d.vocab);
  PretrainConfig pc;
  pc.train.epochs = 8;
  auto corpus = sentences(slice(d.train, 0, 1000));
  TrainResult r = pretrain_denoising(m, corpus, pc);
  ASSERT_EQ(r.log.size(), 8u);
  std::vector<double> ma;
  for (std::size_t i = 2; i < r.log.size(); ++i) {
    ma.push_back((r.log[i - 2].train_loss + r.log[i - 1].train_loss + r.log[i].train_loss) / 3);
  }
  for (std::size_t i = 1; i < ma.size(); ++i) EXPECT_LE(ma[i], ma[i - 1] * 1.01) << "window " << i;
  EXPECT_LT(r.log.back().train_loss, r.log.front().train_loss);
}

TEST(ExperimentTest, HingeRaisesShareOfConfidentCopySteps) {
  const Data& d = data();
  corpus::Dataset train = slice(d.train, 0, 800);
  models::MiniTransformer base(transformer(32), d.vocab);
  PretrainConfig pc;
  pc.train.epochs = 2;
  pretrain_denoising(base, sentences(train), pc);
  auto pretrained = base.params().snapshot();
  double frac[2];
  for (int k = 0; k < 2; ++k) {
    models::MiniTransformer m(transformer(32), d.vocab);
    m.params().restore(pretrained);
    CopyLossConfig copy;
    if (k == 1) copy.lambda = 0;
    TrainConfig tc;
    tc.epochs = 4;
    finetune_with_copy(m, train, d.valid, tc, copy, 1);
    frac[k] = copy_usage(m, d.valid).frac_alpha_over_half;
  }
  EXPECT_GT(frac[0], frac[1]);
}

TEST(ExperimentTest, CopyTeacherYieldsCopyingStudent) {
  const Data& d = data();
  models::PointerGenConfig pc;
  pc.embedding_dim = pc.encoder_hidden = 32;
  pc.decoder_hidden = pc.attention_dim = 64;
  pc.encoder_layers = pc.decoder_layers = 1;
  models::PointerGenLSTM student(pc, d.vocab);
  DistillConfig dc;
  dc.student.epochs = 6;
  corpus::Dataset train = slice(d.train, 0, 1000);
  distill(copy_teacher(), student, train, d.valid, dc);
  metrics::EvalReport r = metrics::corpus_eval(predict(student, d.test, {}), d.test);
  EXPECT_GE(r.em_exact, 90.0);
  EXPECT_LE(r.em_rephrase, 5.0);
}

TEST(ExperimentTest, ReducedGridFitsTimeBudget) {
  const Data& d = data();
  auto start = std::chrono::steady_clock::now();
  models::MiniTransformer base(transformer(64), d.vocab);
  PretrainConfig pc;
  pc.train.epochs = 5;
  pretrain_denoising(base, sentences(d.train), pc);
  auto pretrained = base.params().snapshot();
  TrainConfig tc;
  tc.epochs = 5;
  CellRunner run = [&](const CopyLossConfig& copy) {
    models::MiniTransformer m(transformer(64), d.vocab);
    m.params().restore(pretrained);
    return finetune_with_copy(m, d.train, d.valid, tc, copy, 1).best_valid_em;
  };
  GridReport g = grid_search(GridSpec{{0.1, 0.25, 0.5}, {0.7, 0.9}}, run, 0);
  double minutes = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() / 60;
  ASSERT_EQ(g.cells.size(), 6u);
  for (const auto& c : g.cells) EXPECT_LE(c.valid_em, g.best.valid_em);
  EXPECT_LT(minutes, 30.0);
  RecordProperty("minutes", std::to_string(minutes));
}

TEST(ExperimentTest, TaggerFavoursExactOverRephrase) {
  const Data& d = data();
  auto pairs = dataset_pairs(d.train);
  editops::PhraseVocabulary phrases = editops::extract_phrases(pairs).top(100);
  std::vector<editops::Pair> covered;
  for (const auto& p : pairs) {
    if (editops::to_tags(p.first, p.second, &phrases)) covered.push_back(p);
  }
  models::CrfTagger tagger(models::TaggerConfig{}, d.vocab, phrases);
  TrainConfig tc;
  tc.epochs = 10;
  train_tagger(tagger, covered, &d.valid, tc);
  metrics::EvalReport r = metrics::corpus_eval(predict_tagger(tagger, d.test), d.test);
  EXPECT_GE(r.em_exact, r.em_rephrase);
  EXPECT_GT(r.em, 50.0);
}

}  // namespace
}  // namespace rephrase::train
