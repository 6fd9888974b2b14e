#include "rephrase/corpus.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <unordered_set>

#include "json.hpp"
#include "rephrase/editops.h"

namespace rephrase::corpus {

using nlohmann::json;

const char* to_string(RephraseClass c) { return c == RephraseClass::kExact ? "EXACT" : "REPHRASE"; }

RephraseClass parse_class(std::string_view s) {
  std::string up(s);
  for (char& ch : up) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  if (up == "EXACT") return RephraseClass::kExact;
  if (up == "REPHRASE") return RephraseClass::kRephrase;
  throw ValidationError("unknown class '" + std::string(s) + "'");
}

const char* to_string(ChangeCategory c) {
  switch (c) {
    case ChangeCategory::kNone:
      return "NONE";
    case ChangeCategory::kPronoun:
      return "PRONOUN";
    case ChangeCategory::kQuestion:
      return "QUESTION";
    case ChangeCategory::kPronounAndQuestion:
      return "PRONOUN_AND_QUESTION";
  }
  return "?";
}

Words Utterance::content() const { return text::surfaces(query_tokens, span_start, span_end); }

text::Tokens Utterance::content_tokens() const {
  return text::Tokens(query_tokens.begin() + span_start, query_tokens.begin() + span_end);
}

Words Utterance::top_reference() const {
  if (!rephrases.empty()) return rephrases.front();
  return content();
}

std::vector<Words> Utterance::references() const {
  std::vector<Words> refs;
  if (cls == RephraseClass::kExact) refs.push_back(content());
  for (const auto& r : rephrases) {
    if (std::find(refs.begin(), refs.end(), r) == refs.end()) refs.push_back(r);
  }
  return refs;
}

void Utterance::validate() const {
  if (!(span_start < span_end && span_end <= query_tokens.size())) {
    throw ValidationError("utterance '" + id + "': span [" + std::to_string(span_start) + ", " +
                          std::to_string(span_end) + ") outside query of " +
                          std::to_string(query_tokens.size()) + " tokens");
  }
  if (cls == RephraseClass::kRephrase && rephrases.empty()) {
    throw ValidationError("utterance '" + id + "': REPHRASE requires at least one rephrase");
  }
}

const Utterance* Dataset::find(const std::string& id) const {
  for (const auto& u : utterances) {
    if (u.id == id) return &u;
  }
  return nullptr;
}

void Dataset::validate() const {
  std::unordered_set<std::string> seen;
  for (const auto& u : utterances) {
    u.validate();
    if (!seen.insert(u.id).second) {
      throw ValidationError("duplicate utterance id '" + u.id + "'");
    }
  }
}

MarkedQuery parse_marked_query(std::string_view raw) {
  MarkedQuery q;
  auto open = raw.find('[');
  auto close = raw.find(']', open == std::string_view::npos ? 0 : open);
  if (open == std::string_view::npos || close == std::string_view::npos) {
    q.tokens = text::tokenize(raw);
    return q;
  }
  text::Tokens prefix = text::tokenize(raw.substr(0, open));
  text::Tokens inner = text::tokenize_at(raw.substr(open + 1, close - open - 1), prefix.size());
  text::Tokens suffix = text::tokenize_at(raw.substr(close + 1), prefix.size() + inner.size());
  q.span_start = prefix.size();
  q.span_end = prefix.size() + inner.size();
  q.has_span = true;
  q.tokens = std::move(prefix);
  q.tokens.insert(q.tokens.end(), inner.begin(), inner.end());
  q.tokens.insert(q.tokens.end(), suffix.begin(), suffix.end());
  return q;
}

namespace {

Utterance utterance_from_json(const json& rec, std::size_t line_no) {
  if (!rec.is_object()) throw ParseError("record is not an object", line_no);
  Utterance u;
  try {
    u.id = rec.contains("id") ? rec.at("id").get<std::string>() : "line-" + std::to_string(line_no);
    MarkedQuery q = parse_marked_query(rec.at("query").get<std::string>());
    u.query_tokens = std::move(q.tokens);
    if (rec.contains("span_start") && rec.contains("span_end")) {
      u.span_start = rec.at("span_start").get<std::size_t>();
      u.span_end = rec.at("span_end").get<std::size_t>();
    } else if (q.has_span) {
      u.span_start = q.span_start;
      u.span_end = q.span_end;
    } else {
      throw ParseError("no content span (span fields or [ ] markup)", line_no);
    }
    u.cls = parse_class(rec.at("class").get<std::string>());
    if (rec.contains("rephrases")) {
      for (const auto& r : rec.at("rephrases")) {
        auto words = text::surfaces(text::tokenize(r.get<std::string>()));
        if (!words.empty()) u.rephrases.push_back(std::move(words));
      }
    }
  } catch (const json::exception& e) {
    throw ParseError(e.what(), line_no);
  } catch (const ValidationError& e) {
    throw ValidationError("line " + std::to_string(line_no) + ": " + e.what());
  }
  return u;
}

void check_and_add(Dataset& ds, Utterance u, std::size_t line_no, std::unordered_set<std::string>& seen) {
  try {
    u.validate();
  } catch (const ValidationError& e) {
    throw ValidationError("line " + std::to_string(line_no) + ": " + e.what());
  }
  if (!seen.insert(u.id).second) {
    throw ValidationError("line " + std::to_string(line_no) + ": duplicate id '" + u.id + "'");
  }
  ds.utterances.push_back(std::move(u));
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> cols;
  std::size_t start = 0;
  while (true) {
    auto tab = line.find('\t', start);
    cols.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  if (!cols.empty() && !cols.back().empty() && cols.back().back() == '\r') {
    cols.back().pop_back();
  }
  return cols;
}

}  // namespace

Dataset read_jsonl(std::istream& in) {
  Dataset ds;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(e.what(), line_no);
    }
    check_and_add(ds, utterance_from_json(rec, line_no), line_no, seen);
  }
  return ds;
}

void write_jsonl(std::ostream& out, const Dataset& ds) {
  for (const auto& u : ds.utterances) {
    json rec;
    rec["id"] = u.id;
    rec["query"] = text::join(text::surfaces(u.query_tokens));
    rec["span_start"] = u.span_start;
    rec["span_end"] = u.span_end;
    rec["class"] = to_string(u.cls);
    json refs = json::array();
    for (const auto& r : u.rephrases) refs.push_back(text::join(r));
    rec["rephrases"] = refs;
    out << rec.dump() << '\n';
  }
}

Dataset read_tsv(std::istream& in, const TsvColumns& cols) {
  Dataset ds;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && cols.has_header) continue;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto fields = split_tabs(line);
    auto field = [&](int c) -> const std::string& {
      if (c < 0 || static_cast<std::size_t>(c) >= fields.size()) {
        throw ParseError("missing column " + std::to_string(c), line_no);
      }
      return fields[static_cast<std::size_t>(c)];
    };
    Utterance u;
    u.id = cols.id >= 0 ? field(cols.id) : "line-" + std::to_string(line_no);
    MarkedQuery q = parse_marked_query(field(cols.query));
    if (!q.has_span) throw ParseError("query has no [ ] content span", line_no);
    u.query_tokens = std::move(q.tokens);
    u.span_start = q.span_start;
    u.span_end = q.span_end;
    try {
      u.cls = parse_class(field(cols.cls));
    } catch (const ValidationError& e) {
      throw ParseError(e.what(), line_no);
    }
    for (int c : cols.rephrases) {
      if (c < 0 || static_cast<std::size_t>(c) >= fields.size()) continue;
      auto words = text::surfaces(text::tokenize(fields[static_cast<std::size_t>(c)]));
      if (!words.empty()) u.rephrases.push_back(std::move(words));
    }
    check_and_add(ds, std::move(u), line_no, seen);
  }
  return ds;
}

Dataset load_dataset(const std::filesystem::path& path, Format format, const TsvColumns& cols) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return format == Format::kJsonl ? read_jsonl(in) : read_tsv(in, cols);
}

Splits split(const Dataset& ds, const SplitRatios& r, std::uint64_t seed) {
  if (r.train <= 0 || r.test <= 0 || r.valid <= 0 || std::abs(r.train + r.test + r.valid - 1.0) > 1e-9) {
    throw std::invalid_argument("split: ratios must be positive and sum to 1");
  }
  const std::size_t n = ds.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  auto n_train = static_cast<std::size_t>(std::llround(r.train * static_cast<double>(n)));
  auto n_test = static_cast<std::size_t>(std::llround(r.test * static_cast<double>(n)));
  n_train = std::min(n_train, n);
  n_test = std::min(n_test, n - n_train);

  Splits out;
  out.train.split_tag = SplitTag::kTrain;
  out.test.split_tag = SplitTag::kTest;
  out.valid.split_tag = SplitTag::kValid;
  for (std::size_t k = 0; k < n; ++k) {
    const Utterance& u = ds.utterances[order[k]];
    if (k < n_train) {
      out.train.utterances.push_back(u);
    } else if (k < n_train + n_test) {
      out.test.utterances.push_back(u);
    } else {
      out.valid.utterances.push_back(u);
    }
  }
  return out;
}

namespace {

const std::set<std::string>& wh_words() {
  static const std::set<std::string> w = {"what", "when",  "where", "who", "why",
                                          "how",  "which", "whose", "whom"};
  return w;
}

const std::set<std::string>& aux_words() {
  static const std::set<std::string> w = {"do",  "does",  "did",   "is",   "are",   "was",   "were",
                                          "am",  "can",   "could", "will", "would", "shall", "should",
                                          "may", "might", "must",  "have", "has",   "had"};
  return w;
}

// (content word, reference word) pairs that count as a pronoun change.
const std::set<std::pair<std::string, std::string>>& pronoun_table() {
  static const std::set<std::pair<std::string, std::string>> t = {{"i", "you"},
                                                                  {"you", "i"},
                                                                  {"me", "you"},
                                                                  {"you", "me"},
                                                                  {"my", "your"},
                                                                  {"your", "my"},
                                                                  {"mine", "yours"},
                                                                  {"yours", "mine"},
                                                                  {"myself", "yourself"},
                                                                  {"he", "you"},
                                                                  {"she", "you"},
                                                                  {"him", "you"},
                                                                  {"her", "you"},
                                                                  {"her", "your"},
                                                                  {"his", "your"},
                                                                  {"hers", "yours"},
                                                                  {"himself", "yourself"},
                                                                  {"herself", "yourself"},
                                                                  {"they", "you"},
                                                                  {"them", "you"},
                                                                  {"their", "your"}};
  return t;
}

}  // namespace

bool is_question_formed(std::span<const std::string> words) {
  Words w = text::normalize(words, text::NormalizationPolicy{true, false});
  if (w.empty()) return false;
  if (w.back() == "?") return true;
  if (aux_words().count(w[0])) return true;
  return w.size() >= 2 && wh_words().count(w[0]) && aux_words().count(w[1]);
}

bool has_pronoun_substitution(std::span<const std::string> content, std::span<const std::string> reference) {
  Words c = text::normalize(content, text::kMetricPolicy);
  Words r = text::normalize(reference, text::kMetricPolicy);
  editops::Alignment a = editops::align(c, r);
  for (std::size_t d : a.deleted) {
    for (std::size_t add : a.added) {
      if (pronoun_table().count({c[d], r[add]})) return true;
    }
  }
  return false;
}

ChangeCategory classify_change(std::span<const std::string> content, std::span<const std::string> reference) {
  bool question = is_question_formed(reference) && !is_question_formed(content);
  bool pronoun = has_pronoun_substitution(content, reference);
  if (pronoun && question) return ChangeCategory::kPronounAndQuestion;
  if (question) return ChangeCategory::kQuestion;
  if (pronoun) return ChangeCategory::kPronoun;
  return ChangeCategory::kNone;
}

CorpusStats compute_stats(const Dataset& ds) {
  if (ds.empty()) throw std::invalid_argument("compute_stats: empty dataset");
  CorpusStats st;
  st.n_total = ds.size();
  for (auto c : {ChangeCategory::kNone, ChangeCategory::kPronoun, ChangeCategory::kQuestion,
                 ChangeCategory::kPronounAndQuestion}) {
    st.class_freq[c] = 0.0;
  }
  double src = 0, tgt = 0, keep = 0, add = 0, del = 0;
  for (const auto& u : ds.utterances) {
    Words content = u.content();
    Words ref = u.top_reference();
    st.class_freq[classify_change(content, ref)] += 1.0;
    if (u.cls != RephraseClass::kRephrase) continue;
    editops::Alignment a = editops::align(content, ref);
    src += static_cast<double>(content.size());
    tgt += static_cast<double>(ref.size());
    keep += static_cast<double>(a.kept.size());
    add += static_cast<double>(a.added.size());
    del += static_cast<double>(a.deleted.size());
    ++st.n_rephrase;
  }
  for (auto& [c, f] : st.class_freq) f /= static_cast<double>(ds.size());
  if (st.n_rephrase > 0) {
    const auto n = static_cast<double>(st.n_rephrase);
    st.avg_source_len = src / n;
    st.avg_target_len = tgt / n;
    st.avg_keep = keep / n;
    st.avg_add = add / n;
    st.avg_delete = del / n;
  }
  return st;
}

}  // namespace rephrase::corpus
