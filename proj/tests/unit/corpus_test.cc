#include "rephrase/corpus.h"

#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "rephrase/editops.h"

namespace rephrase::corpus {
namespace {

Words W(const char* s) { return text::split_words(s); }

TEST(LoadTest, BracketMarkupRecoversSpan) {
  std::istringstream in(
      R"({"id":"1","query":"Let Kira know [ I can pick her up ]","class":"REPHRASE","rephrases":["I can pick you up"]})"
      "\n");
  Dataset ds = read_jsonl(in);
  ASSERT_EQ(ds.size(), 1u);
  EXPECT_EQ(ds.utterances[0].content(), W("I can pick her up"));
  EXPECT_EQ(ds.utterances[0].top_reference(), W("I can pick you up"));
}

TEST(LoadTest, AttachedBrackets) {
  MarkedQuery q = parse_marked_query("Tell Jo [I will be on time]");
  ASSERT_TRUE(q.has_span);
  EXPECT_EQ(text::surfaces(q.tokens, q.span_start, q.span_end), W("I will be on time"));
  EXPECT_TRUE(q.tokens[1].is_proper_noun_guess);
  EXPECT_FALSE(q.tokens[2].is_proper_noun_guess);
}

TEST(LoadTest, ExactWithoutRephrases) {
  std::istringstream in(
      R"({"id":"e","query":"tell Jo I will be on time","span_start":2,"span_end":7,"class":"EXACT"})"
      "\n");
  Dataset ds = read_jsonl(in);
  ASSERT_EQ(ds.size(), 1u);
  EXPECT_TRUE(ds.utterances[0].rephrases.empty());
  EXPECT_EQ(ds.utterances[0].top_reference(), W("I will be on time"));
}

TEST(LoadTest, SpanBeyondQueryIsValidationError) {
  std::istringstream in(R"({"id":"e","query":"tell Jo hi","span_start":2,"span_end":9,"class":"EXACT"})"
                        "\n");
  EXPECT_THROW(read_jsonl(in), ValidationError);
}

TEST(LoadTest, MalformedRecordNamesLine) {
  std::istringstream in(R"({"id":"a","query":"tell [ hi ]","class":"EXACT"})"
                        "\n{not json\n");
  try {
    read_jsonl(in);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(LoadTest, RephraseWithoutAnnotationRejected) {
  std::istringstream in(R"({"id":"a","query":"tell [ he is ok ]","class":"REPHRASE"})"
                        "\n");
  EXPECT_THROW(read_jsonl(in), ValidationError);
}

TEST(LoadTest, DuplicateIdsRejected) {
  std::istringstream in(R"({"id":"a","query":"tell [ hi ]","class":"EXACT"})"
                        "\n"
                        R"({"id":"a","query":"tell [ yo ]","class":"EXACT"})"
                        "\n");
  EXPECT_THROW(read_jsonl(in), ValidationError);
}

TEST(LoadTest, TsvAdapter) {
  std::istringstream in(
      "id\tq\tc\tr1\tr2\n"
      "7\tmessage Brad and ask [ if he has my keys ]\tREPHRASE\tdo you have my keys\tdo you have my keys ?\n"
      "8\tTell Jo [I will be on time]\tEXACT\t\t\n");
  TsvColumns cols;
  cols.id = 0;
  cols.query = 1;
  cols.cls = 2;
  cols.rephrases = {3, 4};
  cols.has_header = true;
  Dataset ds = read_tsv(in, cols);
  ASSERT_EQ(ds.size(), 2u);
  EXPECT_EQ(ds.utterances[0].id, "7");
  EXPECT_EQ(ds.utterances[0].rephrases.size(), 2u);
  EXPECT_EQ(ds.utterances[1].cls, RephraseClass::kExact);
  EXPECT_TRUE(ds.utterances[1].rephrases.empty());
}

TEST(LoadTest, JsonlRoundTrip) {
  Dataset ds = generate_synthetic(50, 3);
  std::stringstream ss;
  write_jsonl(ss, ds);
  Dataset back = read_jsonl(ss);
  ASSERT_EQ(back.size(), ds.size());
  for (std::size_t k = 0; k < ds.size(); ++k) {
    EXPECT_EQ(back.utterances[k].id, ds.utterances[k].id);
    EXPECT_EQ(back.utterances[k].query_tokens, ds.utterances[k].query_tokens);
    EXPECT_EQ(back.utterances[k].span_start, ds.utterances[k].span_start);
    EXPECT_EQ(back.utterances[k].rephrases, ds.utterances[k].rephrases);
  }
}

TEST(SplitTest, SizesForThreeThousand) {
  Dataset ds = generate_synthetic(3000, 1);
  Splits s = split(ds, {0.7, 0.2, 0.1}, 42);
  EXPECT_EQ(s.train.size(), 2100u);
  EXPECT_EQ(s.test.size(), 600u);
  EXPECT_EQ(s.valid.size(), 300u);
}

TEST(SplitTest, DeterministicPartition) {
  Dataset ds = generate_synthetic(257, 2);
  Splits a = split(ds, {0.7, 0.2, 0.1}, 9);
  Splits b = split(ds, {0.7, 0.2, 0.1}, 9);
  std::multiset<std::string> ids;
  for (const auto* part : {&a.train, &a.test, &a.valid}) {
    for (const auto& u : part->utterances) ids.insert(u.id);
  }
  EXPECT_EQ(ids.size(), ds.size());
  for (const auto& u : ds.utterances) EXPECT_EQ(ids.count(u.id), 1u);
  ASSERT_EQ(a.train.size(), b.train.size());
  for (std::size_t k = 0; k < a.train.size(); ++k) {
    EXPECT_EQ(a.train.utterances[k].id, b.train.utterances[k].id);
  }
}

TEST(SplitTest, EmptyDatasetGivesEmptySplits) {
  Splits s = split(Dataset{}, {0.7, 0.2, 0.1}, 1);
  EXPECT_TRUE(s.train.empty() && s.test.empty() && s.valid.empty());
}

TEST(SplitTest, BadRatiosRejected) {
  EXPECT_THROW(split(Dataset{}, {0.7, 0.2, 0.2}, 1), std::invalid_argument);
}

TEST(ClassifyTest, PaperExamples) {
  EXPECT_EQ(classify_change(W("I can pick her up"), W("I can pick you up")), ChangeCategory::kPronoun);
  EXPECT_EQ(classify_change(W("when dinner is"), W("when is dinner")), ChangeCategory::kQuestion);
  EXPECT_EQ(classify_change(W("if he has my keys"), W("do you have my keys")),
            ChangeCategory::kPronounAndQuestion);
  EXPECT_EQ(classify_change(W("I will be on time"), W("I will be on time")), ChangeCategory::kNone);
}

TEST(StatsTest, ToyPairCounts) {
  Dataset ds;
  Utterance u;
  u.id = "t";
  u.query_tokens = text::tokenize("let Kira know I can pick her up");
  u.span_start = 3;
  u.span_end = 8;
  u.cls = RephraseClass::kRephrase;
  u.rephrases = {W("I can pick you up")};
  ds.utterances.push_back(u);
  CorpusStats st = compute_stats(ds);
  EXPECT_DOUBLE_EQ(st.avg_keep, 4);
  EXPECT_DOUBLE_EQ(st.avg_add, 1);
  EXPECT_DOUBLE_EQ(st.avg_delete, 1);
  EXPECT_DOUBLE_EQ(st.avg_source_len, 5);
  EXPECT_DOUBLE_EQ(st.class_freq[ChangeCategory::kPronoun], 1.0);
}

TEST(StatsTest, EmptyDatasetThrows) { EXPECT_THROW(compute_stats(Dataset{}), std::invalid_argument); }

TEST(StatsTest, InvariantsOnSynthetic) {
  CorpusStats st = compute_stats(generate_synthetic(800, 12));
  EXPECT_NEAR(st.avg_keep + st.avg_delete, st.avg_source_len, 1e-9);
  EXPECT_NEAR(st.avg_keep + st.avg_add, st.avg_target_len, 1e-9);
  double sum = 0;
  for (auto& [c, f] : st.class_freq) sum += f;
  EXPECT_NEAR(sum, 1.0, 1e-9);
}

TEST(SyntheticTest, Deterministic) {
  Dataset a = generate_synthetic(200, 7);
  Dataset b = generate_synthetic(200, 7);
  std::stringstream sa, sb;
  write_jsonl(sa, a);
  write_jsonl(sb, b);
  EXPECT_EQ(sa.str(), sb.str());
  std::stringstream sc;
  write_jsonl(sc, generate_synthetic(200, 8));
  EXPECT_NE(sa.str(), sc.str());
}

TEST(SyntheticTest, RephrasePairsAlwaysNeedAChange) {
  Dataset ds = generate_synthetic(2000, 5);
  std::size_t exact = 0;
  for (const auto& u : ds.utterances) {
    u.validate();
    if (u.cls == RephraseClass::kRephrase) {
      EXPECT_NE(classify_change(u.content(), u.top_reference()), ChangeCategory::kNone)
          << text::join(u.content()) << " -> " << text::join(u.top_reference());
    } else {
      ++exact;
      EXPECT_EQ(classify_change(u.content(), u.top_reference()), ChangeCategory::kNone);
    }
  }
  EXPECT_GT(exact, 800u);
  EXPECT_LT(exact, 1200u);
}

TEST(SyntheticTest, ProperNounsCarryOverIntoRephrases) {
  Dataset ds = generate_synthetic(2000, 6);
  std::size_t with_names = 0;
  for (const auto& u : ds.utterances) {
    Words ref = u.top_reference();
    for (const auto& tok : u.content_tokens()) {
      if (!tok.is_proper_noun_guess) continue;
      ++with_names;
      EXPECT_NE(std::find(ref.begin(), ref.end(), tok.surface), ref.end());
    }
  }
  EXPECT_GT(with_names, 100u);
}

TEST(SyntheticTest, QuestionRuleByHand) {
  // Every "if he <s3> ..." content must come with the do-support question.
  Dataset ds = generate_synthetic(3000, 13);
  int checked = 0;
  for (const auto& u : ds.utterances) {
    Words c = u.content();
    if (c.size() >= 3 && c[0] == "if" && c[1] == "he" && c[2] == "has") {
      Words expect = {"do", "you", "have"};
      expect.insert(expect.end(), c.begin() + 3, c.end());
      for (auto& w : expect) {
        if (w == "his") w = "your";
      }
      EXPECT_EQ(u.top_reference(), expect);
      ++checked;
    }
  }
  EXPECT_GT(checked, 0);
}

TEST(SyntheticTest, AlignmentIdentitiesHold) {
  Dataset ds = generate_synthetic(500, 14);
  for (const auto& u : ds.utterances) {
    if (u.cls != RephraseClass::kRephrase) continue;
    Words c = u.content(), r = u.top_reference();
    editops::Alignment a = editops::align(c, r);
    EXPECT_EQ(a.kept.size() + a.deleted.size(), c.size());
    EXPECT_EQ(a.kept.size() + a.added.size(), r.size());
  }
}

}  // namespace
}  // namespace rephrase::corpus
