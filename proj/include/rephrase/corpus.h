#ifndef REPHRASE_CORPUS_H_
#define REPHRASE_CORPUS_H_

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "rephrase/text.h"

namespace rephrase::corpus {

enum class RephraseClass { kExact, kRephrase };

const char* to_string(RephraseClass c);
RephraseClass parse_class(std::string_view s);

enum class ChangeCategory { kNone, kPronoun, kQuestion, kPronounAndQuestion };

const char* to_string(ChangeCategory c);

// Raised for records that parse but violate the Utterance invariants.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised for records that cannot be parsed at all.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

struct Utterance {
  std::string id;
  text::Tokens query_tokens;
  std::size_t span_start = 0;
  std::size_t span_end = 0;  // exclusive
  RephraseClass cls = RephraseClass::kExact;
  // First entry is the resolved (top) annotation.
  std::vector<Words> rephrases;

  Words content() const;
  text::Tokens content_tokens() const;
  // Top reference: rephrases[0], or the content itself for EXACT with no
  // annotation.
  Words top_reference() const;
  // Every acceptable answer; EXACT always includes the content.
  std::vector<Words> references() const;

  void validate() const;
};

enum class SplitTag { kTrain, kTest, kValid };

struct Dataset {
  std::vector<Utterance> utterances;
  std::optional<SplitTag> split_tag;

  std::size_t size() const { return utterances.size(); }
  bool empty() const { return utterances.empty(); }
  const Utterance* find(const std::string& id) const;
  void validate() const;
};

struct SplitRatios {
  double train = 0.7;
  double test = 0.2;
  double valid = 0.1;
};

struct Splits {
  Dataset train;
  Dataset test;
  Dataset valid;
};

// Column map for tab-separated input. The query column may carry "[ ... ]"
// span markup; rephrase columns that are empty are skipped.
struct TsvColumns {
  int id = -1;  // -1: ids are generated from line numbers
  int query = 0;
  int cls = 1;
  std::vector<int> rephrases = {2};
  bool has_header = false;
};

// Parses "a b [ c d ] e" style markup into tokens plus span.
struct MarkedQuery {
  text::Tokens tokens;
  std::size_t span_start = 0;
  std::size_t span_end = 0;
  bool has_span = false;
};
MarkedQuery parse_marked_query(std::string_view raw);

Dataset read_jsonl(std::istream& in);
void write_jsonl(std::ostream& out, const Dataset& ds);
Dataset read_tsv(std::istream& in, const TsvColumns& cols);

enum class Format { kJsonl, kTsv };
Dataset load_dataset(const std::filesystem::path& path, Format format, const TsvColumns& cols = {});

Splits split(const Dataset& ds, const SplitRatios& ratios, std::uint64_t seed);

struct CorpusStats {
  double avg_source_len = 0;
  double avg_target_len = 0;
  double avg_keep = 0;
  double avg_add = 0;
  double avg_delete = 0;
  std::size_t n_rephrase = 0;
  std::size_t n_total = 0;
  std::map<ChangeCategory, double> class_freq;
};

CorpusStats compute_stats(const Dataset& ds);

bool is_question_formed(std::span<const std::string> words);
bool has_pronoun_substitution(std::span<const std::string> content, std::span<const std::string> reference);
ChangeCategory classify_change(std::span<const std::string> content, std::span<const std::string> reference);

// Closed-grammar generator for desk-scale experiments. Deterministic in
// (n, seed).
Dataset generate_synthetic(std::size_t n, std::uint64_t seed);

}  // namespace rephrase::corpus

#endif  // REPHRASE_CORPUS_H_
