#include <gtest/gtest.h>

#include <filesystem>
#include <random>
#include <sstream>

#include "oracles/crf_oracle.h"
#include "rephrase/models/crf.h"
#include "rephrase/models/decode.h"
#include "rephrase/models/denoise.h"
#include "rephrase/models/model_io.h"
#include "rephrase/models/pointer_gen.h"
#include "rephrase/models/transformer.h"
#include "rephrase/numcore/optim.h"

namespace rephrase::models {
namespace {

using numcore::GraphOptions;

Words W(const char* s) { return text::split_words(s); }

Vocabulary small_vocab() {
  std::vector<Words> texts = {W("i can pick you up"), W("when is dinner"), W("do you have my keys"),
                              W("i will be on time")};
  return Vocabulary::build(texts);
}

PointerGenConfig tiny_lstm() {
  PointerGenConfig c;
  c.embedding_dim = 6;
  c.encoder_hidden = 5;
  c.decoder_hidden = 7;
  c.attention_dim = 4;
  c.dropout = 0.2;
  c.seed = 3;
  return c;
}

TransformerConfig tiny_transformer() {
  TransformerConfig c;
  c.model_dim = 8;
  c.heads = 2;
  c.ff_dim = 12;
  c.encoder_layers = 1;
  c.decoder_layers = 2;
  c.max_positions = 16;
  c.dropout = 0.1;
  c.seed = 4;
  return c;
}

std::vector<Example> sample_examples(const Vocabulary& v) {
  Words t1 = W("I can pick you up"), t2 = W("do you have my keys");
  return {encode_example(v, W("I can pick her up Zed"), &t1, "a"),
          encode_example(v, W("if he has his keys"), &t2, "b")};
}

TEST(VocabularyTest, FrequencyOrderCapAndSpecials) {
  std::vector<Words> texts = {W("b a b"), W("c b a")};
  Vocabulary v = Vocabulary::build(texts, 2);
  EXPECT_EQ(v.size(), kNumSpecials + 2);
  EXPECT_EQ(v.word(kNumSpecials), "b");
  EXPECT_EQ(v.word(kNumSpecials + 1), "a");
  EXPECT_EQ(v.id("c"), kUnk);
  EXPECT_EQ(v.id("<mask>"), kMask);
  std::stringstream ss;
  v.write(ss);
  Vocabulary back = Vocabulary::read(ss);
  EXPECT_EQ(back.words(), v.words());
  EXPECT_EQ(back.hash(), v.hash());
}

TEST(VocabularyTest, OovSourceWordsGetExtendedIds) {
  Vocabulary v = small_vocab();
  Words tgt = W("call Zed now Zed");
  Example e = encode_example(v, W("tell Zed hi"), &tgt);
  ASSERT_EQ(e.oov.size(), 3u);  // tell, Zed, hi
  EXPECT_EQ(e.src_ext[1], v.size() + 1);
  EXPECT_EQ(e.tgt_ext[1], v.size() + 1);
  EXPECT_EQ(e.tgt_ext[0], kUnk);  // not in source, not in vocab
  EXPECT_EQ(e.tgt_ext.back(), kEnd);
  EXPECT_EQ(decode_ids(v, e.src_ext, e.oov), W("tell Zed hi"));
}

TEST(VocabularyTest, BatchLayoutIsTimeMajor) {
  Vocabulary v = small_vocab();
  auto ex = sample_examples(v);
  Batch b = make_batch(std::span<const Example>(ex), v.size());
  EXPECT_EQ(b.size, 2);
  EXPECT_EQ(b.src_len, 6);
  EXPECT_EQ(b.src[1 * 2 + 1], ex[1].src[1]);
  EXPECT_EQ(b.src[5 * 2 + 1], kPad);
  EXPECT_EQ(b.src_mask[1 * 6 + 5], 0);
  EXPECT_EQ(b.tgt_in[0], kStart);
  EXPECT_EQ(b.tgt_out[0], ex[0].tgt_ext[0]);
  EXPECT_EQ(b.ext_width, v.size() + static_cast<Index>(std::max(ex[0].oov.size(), ex[1].oov.size())));
  Batch plain = make_batch(std::span<const Example>(ex), v.size(), false);
  for (int y : plain.tgt_out) EXPECT_LT(y, v.size());
}

TEST(PointerGenTest, EncodeShapeDeterminismAndOrder) {
  Vocabulary v = small_vocab();
  PointerGenLSTM m(PointerGenConfig{}, v);
  Words src = W("i can pick you up");
  Example e = encode_example(v, src, nullptr);
  Batch b = make_batch(std::span<const Example>(&e, 1), v.size());
  Graph g1(GraphOptions{false}), g2(GraphOptions{false});
  Var h1 = m.encode(g1, b);
  EXPECT_EQ(h1.rows(), 5);
  EXPECT_EQ(h1.cols(), 256);
  EXPECT_EQ(h1.value(), m.encode(g2, b).value());
  Words swapped = W("can i pick you up");
  Example e2 = encode_example(v, swapped, nullptr);
  Batch b2 = make_batch(std::span<const Example>(&e2, 1), v.size());
  Graph g3(GraphOptions{false});
  EXPECT_GT((m.encode(g3, b2).value() - h1.value()).norm(), 1e-6);
  Words empty;
  EXPECT_THROW(make_batch(std::vector<Example>{encode_example(v, empty, nullptr)}, v.size()),
               std::invalid_argument);
}

TEST(PointerGenTest, MixtureInvariants) {
  Vocabulary v = small_vocab();
  PointerGenLSTM m(tiny_lstm(), v);
  auto ex = sample_examples(v);
  Batch b = make_batch(std::span<const Example>(ex), v.size());
  Graph g(GraphOptions{false});
  Mixture mix = m.forward(g, b);
  EXPECT_LT(max_normalization_error(mix.p_output.value()), 1e-9);
  for (Index r = 0; r < mix.p_copy.rows(); ++r) {
    EXPECT_NEAR(mix.p_copy.value().row(r).sum(), 1.0, 1e-12);
    double a = mix.alpha.value()(r, 0);
    EXPECT_GT(a, 0.0);
    EXPECT_LT(a, 1.0);
  }
}

TEST(PointerGenTest, PinnedAlphaEndpoints) {
  Vocabulary v = small_vocab();
  auto ex = sample_examples(v);
  Batch b = make_batch(std::span<const Example>(ex), v.size());
  PointerGenConfig c = tiny_lstm();
  c.pinned_alpha = 0.0;
  PointerGenLSTM m(c, v);
  EXPECT_FALSE(m.has_copy());
  Graph g(GraphOptions{false});
  Mixture mix = m.forward(g, b);
  const Tensor& p = mix.p_output.value();
  EXPECT_EQ(Tensor(p.leftCols(v.size())), mix.p_vocab.value());
  EXPECT_EQ(p.rightCols(p.cols() - v.size()).norm(), 0.0);

  m.set_pinned_alpha(1.0);
  Graph g2(GraphOptions{false});
  Mixture mix1 = m.forward(g2, b);
  const Tensor& p1 = mix1.p_output.value();
  for (Index r = 0; r < p1.rows(); ++r) {
    Index bi = r % b.size;
    std::vector<bool> allowed(static_cast<std::size_t>(p1.cols()), false);
    for (Index s = 0; s < b.src_len; ++s) {
      if (b.src_mask[static_cast<std::size_t>(bi * b.src_len + s)] != 0) {
        allowed[static_cast<std::size_t>(b.src_ext[static_cast<std::size_t>(bi * b.src_len + s)])] = true;
      }
    }
    for (Index k = 0; k < p1.cols(); ++k) {
      if (!allowed[static_cast<std::size_t>(k)]) {
        EXPECT_EQ(p1(r, k), 0.0);
      }
    }
    EXPECT_NEAR(p1.row(r).sum(), 1.0, 1e-12);
  }
}

TEST(PointerGenTest, DecodeStepMatchesTeacherForcing) {
  Vocabulary v = small_vocab();
  PointerGenLSTM m(tiny_lstm(), v);
  auto ex = sample_examples(v);
  Batch b = make_batch(std::span<const Example>(ex), v.size());
  Graph g(GraphOptions{false});
  Tensor full = m.forward(g, b).p_output.value();
  auto st = m.begin_decode(b);
  std::vector<int> prev(2, kStart);
  for (Index t = 0; t < 3; ++t) {
    StepDistribution d = m.decode_step(*st, prev);
    EXPECT_LT((d.p_output - full.middleRows(t * 2, 2)).cwiseAbs().maxCoeff(), 1e-12);
    for (int k = 0; k < 2; ++k)
      prev[static_cast<std::size_t>(k)] = b.tgt_out[static_cast<std::size_t>(t * 2 + k)];
  }
}

TEST(PointerGenTest, StepLossPassesGradCheck) {
  Vocabulary v = small_vocab();
  PointerGenLSTM m(tiny_lstm(), v);
  auto ex = sample_examples(v);
  Batch b = make_batch(std::span<const Example>(ex), v.size());
  numcore::GradCheckOptions o;
  o.training = true;
  o.coords_per_param = 3;
  auto params = m.params().all();
  auto r = numcore::grad_check(
      [&](Graph& g) {
        Mixture mix = m.forward(g, b);
        return numcore::cross_entropy(mix.p_output, b.tgt_out, b.tgt_mask);
      },
      params, o);
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst_param << " " << r.worst_analytic << " " << r.worst_numeric;
}

TEST(TransformerTest, ShapesNormalizationAndIncrementalDecode) {
  Vocabulary v = small_vocab();
  MiniTransformer m(tiny_transformer(), v);
  auto ex = sample_examples(v);
  Batch b = make_batch(std::span<const Example>(ex), v.size());
  for (int pass = 0; pass < 2; ++pass) {
    Graph g(GraphOptions{false});
    Mixture mix = m.forward(g, b);
    EXPECT_EQ(mix.p_output.rows(), b.tgt_len * b.size);
    EXPECT_LT(max_normalization_error(mix.p_output.value()), 1e-9);
    auto st = m.begin_decode(b);
    std::vector<int> prev(2, kStart);
    for (Index t = 0; t < 3; ++t) {
      StepDistribution d = m.decode_step(*st, prev);
      EXPECT_LT((d.p_output - mix.p_output.value().middleRows(t * 2, 2)).cwiseAbs().maxCoeff(), 1e-12);
      for (int k = 0; k < 2; ++k)
        prev[static_cast<std::size_t>(k)] = b.tgt_out[static_cast<std::size_t>(t * 2 + k)];
    }
    if (pass == 0) m.graft_copy_head(9);
  }
  EXPECT_THROW(m.graft_copy_head(9), std::logic_error);
}

TEST(TransformerTest, CopyLossPassesGradCheck) {
  Vocabulary v = small_vocab();
  MiniTransformer m(tiny_transformer(), v);
  m.graft_copy_head(2);
  auto ex = sample_examples(v);
  Batch b = make_batch(std::span<const Example>(ex), v.size());
  numcore::GradCheckOptions o;
  o.training = true;
  o.coords_per_param = 2;
  auto params = m.params().all();
  auto r = numcore::grad_check(
      [&](Graph& g) {
        Mixture mix = m.forward(g, b);
        return numcore::cross_entropy(mix.p_output, b.tgt_out, b.tgt_mask);
      },
      params, o);
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst_param << " " << r.worst_analytic << " " << r.worst_numeric;
}

MultiHeadAttention random_attention(ParameterSet& ps, Index d, Index heads, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return MultiHeadAttention::create(ps, "a", d, heads, rng);
}

TEST(CopyHeadInitTest, IdenticalHeadsGiveThatHead) {
  ParameterSet ps;
  MultiHeadAttention a = random_attention(ps, 8, 4, 1);
  for (Index h = 1; h < 4; ++h) {
    a.wq[static_cast<std::size_t>(h)]->value = a.wq[0]->value;
    a.wk[static_cast<std::size_t>(h)]->value = a.wk[0]->value;
    a.wv[static_cast<std::size_t>(h)]->value = a.wv[0]->value;
  }
  std::mt19937_64 rng(2);
  CopyHead c = copy_head_init(a, ps, 8, rng);
  EXPECT_LT((c.w_q->value - a.wq[0]->value).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LT((c.w_v->value - a.wv[0]->value).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(CopyHeadInitTest, OppositeHeadsCancel) {
  ParameterSet ps;
  MultiHeadAttention a = random_attention(ps, 6, 2, 3);
  a.wq[1]->value = -a.wq[0]->value;
  a.wk[1]->value = -a.wk[0]->value;
  a.wv[1]->value = -a.wv[0]->value;
  std::mt19937_64 rng(2);
  CopyHead c = copy_head_init(a, ps, 6, rng);
  EXPECT_EQ(c.w_q->value.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(c.w_k->value.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(c.w_v->value.cwiseAbs().maxCoeff(), 0.0);
}

TEST(CopyHeadInitTest, RandomHeadsElementwiseMean) {
  Vocabulary v = small_vocab();
  TransformerConfig cfg = tiny_transformer();
  cfg.model_dim = 12;
  cfg.heads = 4;
  MiniTransformer m(cfg, v);
  const MultiHeadAttention& a = m.last_cross_attention();
  m.graft_copy_head(5);
  const CopyHead& c = *m.copy_head();
  for (Index i = 0; i < c.w_k->value.rows(); ++i) {
    for (Index j = 0; j < c.w_k->value.cols(); ++j) {
      double s = 0;
      for (int h = 0; h < 4; ++h) s += a.wk[static_cast<std::size_t>(h)]->value(i, j);
      EXPECT_NEAR(c.w_k->value(i, j), s / 4, 1e-15);
    }
  }
  EXPECT_EQ(c.mix.w->value.rows(), 3 + 12);
  ParameterSet empty;
  MultiHeadAttention none;
  std::mt19937_64 rng(1);
  EXPECT_THROW(copy_head_init(none, empty, 8, rng), std::invalid_argument);
}

oracle::CrfInstance random_crf(std::mt19937_64& rng, std::size_t len, int tags) {
  std::normal_distribution<double> nd(0, 1.5);
  oracle::CrfInstance c;
  c.emit.assign(len, std::vector<double>(static_cast<std::size_t>(tags)));
  c.trans.assign(static_cast<std::size_t>(tags), std::vector<double>(static_cast<std::size_t>(tags)));
  for (auto& r : c.emit)
    for (auto& x : r) x = nd(rng);
  for (auto& r : c.trans)
    for (auto& x : r) x = nd(rng);
  return c;
}

std::pair<Tensor, Tensor> to_tensors(const oracle::CrfInstance& c) {
  Tensor e(static_cast<Index>(c.emit.size()), static_cast<Index>(c.trans.size()));
  Tensor t(e.cols(), e.cols());
  for (Index i = 0; i < e.rows(); ++i)
    for (Index j = 0; j < e.cols(); ++j)
      e(i, j) = c.emit[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  for (Index i = 0; i < t.rows(); ++i)
    for (Index j = 0; j < t.cols(); ++j)
      t(i, j) = c.trans[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  return {e, t};
}

TEST(CrfTest, LogPartitionMatchesEnumerationForLengthThreeFourTags) {
  std::mt19937_64 rng(21);
  auto c = random_crf(rng, 3, 4);
  auto [e, t] = to_tensors(c);
  EXPECT_NEAR(crf_log_partition(e, t), oracle::brute_log_partition(c), 1e-9);
}

TEST(CrfTest, AgreesWithEnumerationOnSmallInstances) {
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 200; ++trial) {
    std::size_t len = 1 + rng() % 5;
    int tags = 1 + static_cast<int>(rng() % 4);
    auto c = random_crf(rng, len, tags);
    auto [e, t] = to_tensors(c);
    EXPECT_NEAR(crf_log_partition(e, t), oracle::brute_log_partition(c), 1e-9);
    double best = 0;
    std::vector<int> arg = oracle::brute_argmax(c, &best);
    ViterbiPath p = crf_viterbi(e, t);
    EXPECT_EQ(p.tags, arg);
    EXPECT_NEAR(p.score, best, 1e-9);
    EXPECT_NEAR(p.score, crf_path_score(e, t, p.tags), 1e-12);
    EXPECT_LE(crf_loglik(e, t, arg), 1e-12);
  }
}

TEST(CrfTest, UniformScoresClosedForm) {
  Tensor e = Tensor::Zero(4, 3), t = Tensor::Zero(3, 3);
  EXPECT_NEAR(crf_log_partition(e, t), 4 * std::log(3.0), 1e-12);
}

TEST(CrfTest, EqualTransitionsDecoupleSlots) {
  std::mt19937_64 rng(5);
  auto c = random_crf(rng, 5, 4);
  auto [e, t] = to_tensors(c);
  t.setConstant(0.7);
  ViterbiPath p = crf_viterbi(e, t);
  for (Index i = 0; i < e.rows(); ++i) {
    Index arg = 0;
    e.row(i).maxCoeff(&arg);
    EXPECT_EQ(p.tags[static_cast<std::size_t>(i)], arg);
  }
}

TEST(CrfTest, TagOutOfRangeRejected) {
  Tensor e = Tensor::Zero(2, 3), t = Tensor::Zero(3, 3);
  std::vector<int> bad = {0, 3};
  EXPECT_THROW(crf_loglik(e, t, bad), std::invalid_argument);
  EXPECT_THROW(crf_log_partition(e, Tensor::Zero(2, 2)), std::invalid_argument);
}

TEST(CrfTest, NllPassesGradCheck) {
  std::mt19937_64 rng(1);
  ParameterSet ps;
  Parameter& e = ps.add("e", 4, 3, numcore::Init::kNormal, rng, 1.0);
  Parameter& t = ps.add("t", 3, 3, numcore::Init::kNormal, rng, 1.0);
  std::vector<int> gold = {2, 0, 0, 1};
  numcore::GradCheckOptions o;
  o.coords_per_param = 0;
  std::vector<Parameter*> params = {&e, &t};
  auto r = numcore::grad_check([&](Graph& g) { return crf_nll(g.param(e), g.param(t), gold); }, params, o);
  EXPECT_LT(r.max_rel_error, 1e-4);
  Graph g;
  EXPECT_NEAR(crf_nll(g.param(e), g.param(t), gold).value()(0, 0), -crf_loglik(e.value, t.value, gold),
              1e-12);
}

TEST(CrfTaggerTest, TagIdsRoundTripAndFinalDeleteIsMasked) {
  Vocabulary v = small_vocab();
  editops::PhraseVocabulary pv({editops::Phrase{W("do you"), 3}, editops::Phrase{W("is"), 2}});
  TaggerConfig cfg;
  cfg.embedding_dim = 6;
  cfg.hidden = 5;
  cfg.mlp_dim = 7;
  CrfTagger tagger(cfg, v, pv);
  EXPECT_EQ(tagger.num_tags(), 6);
  for (int id = 0; id < 6; ++id) EXPECT_EQ(tagger.tag_id(tagger.tag_of(id)), id);
  EXPECT_THROW(tagger.tag_id(editops::EditTag{editops::EditAction::kKeep, W("zzz")}), std::invalid_argument);
  tagger.params().at("emit.b").value.rightCols(3).setConstant(50);  // favor DELETE
  std::vector<Words> srcs = {W("when dinner is"), W("a b")};
  auto out = tagger.predict(srcs);
  ASSERT_EQ(out.size(), 2u);
  std::vector<Example> exs = {tagger.make_example(srcs[0])};
  Batch b = make_batch(std::span<const Example>(exs), v.size());
  auto tags = tagger.predict_tags(b);
  EXPECT_EQ(tags[0].tags.size(), 4u);
  EXPECT_EQ(tags[0].tags.back().action, editops::EditAction::kKeep);
}

TEST(DecodeTest, BeamOneEqualsGreedyAndBeamDominates) {
  Vocabulary v = small_vocab();
  PointerGenLSTM m(tiny_lstm(), v);
  auto ex = sample_examples(v);
  for (const auto& e : ex) {
    const Example* one[] = {&e};
    Hypothesis greedy = greedy_decode(m, make_batch(one, v.size()), 8).front();
    Hypothesis b1 = beam_decode(m, e, 8, 1);
    EXPECT_EQ(b1.ids, greedy.ids);
    Hypothesis b4 = beam_decode(m, e, 8, 4);
    EXPECT_GE(b4.score(), greedy.score());
    Hypothesis single = greedy_decode(m, make_batch(one, v.size()), 1).front();
    EXPECT_EQ(single.ids.size(), 1u);
  }
  EXPECT_EQ(DecodeConfig::parse("beam:5").beam_width, 5);
  EXPECT_EQ(DecodeConfig::parse("greedy").beam_width, 1);
  EXPECT_THROW(DecodeConfig::parse("beam:0"), std::invalid_argument);
  EXPECT_THROW(DecodeConfig::parse("sample"), std::invalid_argument);
}

TEST(DecodeTest, TransformerBeamOneEqualsGreedy) {
  Vocabulary v = small_vocab();
  MiniTransformer m(tiny_transformer(), v);
  m.graft_copy_head(1);
  auto ex = sample_examples(v);
  const Example* one[] = {&ex[0]};
  Hypothesis greedy = greedy_decode(m, make_batch(one, v.size()), 6).front();
  EXPECT_EQ(beam_decode(m, ex[0], 6, 1).ids, greedy.ids);
  EXPECT_GE(beam_decode(m, ex[0], 6, 3).score(), greedy.score());
}

TEST(DenoiseTest, BoundaryPoliciesAndDeterminism) {
  Words x = W("pick up your phone now");
  Corrupted none = denoise_corrupt(x, {0.0, true}, 1);
  EXPECT_EQ(none.input, x);
  EXPECT_EQ(none.target, x);
  Corrupted all = denoise_corrupt(x, {1.0, true}, 1);
  EXPECT_EQ(all.input, Words{kMaskWord});
  EXPECT_EQ(all.target, x);
  Corrupted each = denoise_corrupt(x, {1.0, false}, 1);
  EXPECT_EQ(each.input, Words(x.size(), kMaskWord));
  EXPECT_EQ(denoise_corrupt(x, {0.5, true}, 77).input, denoise_corrupt(x, {0.5, true}, 77).input);
  EXPECT_THROW(denoise_corrupt(Words{}, {}, 1), std::invalid_argument);
}

TEST(ModelIoTest, SaveLoadPreservesOutputs) {
  Vocabulary v = small_vocab();
  auto dir = std::filesystem::temp_directory_path() / "rephrase_model_io";
  std::filesystem::remove_all(dir);
  auto ex = sample_examples(v);
  Batch b = make_batch(std::span<const Example>(ex), v.size());
  std::vector<std::unique_ptr<Seq2SeqModel>> models;
  models.push_back(std::make_unique<PointerGenLSTM>(tiny_lstm(), v));
  auto tr = std::make_unique<MiniTransformer>(tiny_transformer(), v);
  tr->graft_copy_head(3);
  models.push_back(std::move(tr));
  for (auto& m : models) {
    save_seq2seq(dir, *m);
    EXPECT_EQ(checkpoint_arch(dir), m->arch());
    auto back = load_seq2seq(dir);
    Graph g1(GraphOptions{false}), g2(GraphOptions{false});
    EXPECT_EQ(m->forward(g1, b).p_output.value(), back->forward(g2, b).p_output.value());
    std::filesystem::remove_all(dir);
  }
}

}  // namespace
}  // namespace rephrase::models
