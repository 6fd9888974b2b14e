#ifndef REPHRASE_EDITOPS_H_
#define REPHRASE_EDITOPS_H_

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rephrase/text.h"

namespace rephrase::editops {

// LCS alignment between a source and a target word sequence.
struct Alignment {
  std::vector<std::pair<std::size_t, std::size_t>> kept;  // (src, tgt)
  std::vector<std::size_t> deleted;                       // src indices
  std::vector<std::size_t> added;                         // tgt indices
};

// Kept pairs form a longest common subsequence. Among all of them the one
// with the lexicographically smallest source index list is returned.
Alignment align(std::span<const std::string> source, std::span<const std::string> target);

enum class EditAction { kKeep, kDelete };

struct EditTag {
  EditAction action = EditAction::kKeep;
  Words insert_before;  // empty means no insertion

  friend bool operator==(const EditTag&, const EditTag&) = default;
};

// One tag per source token plus a final slot for sentence-final insertions.
// The final slot never carries DELETE.
struct TagSequence {
  std::vector<EditTag> tags;

  friend bool operator==(const TagSequence&, const TagSequence&) = default;
};

struct Phrase {
  Words words;
  std::int64_t count = 0;
};

// Insertion phrases ordered by descending frequency (ties lexicographic).
class PhraseVocabulary {
 public:
  PhraseVocabulary() = default;
  explicit PhraseVocabulary(std::vector<Phrase> phrases);

  const std::vector<Phrase>& phrases() const { return phrases_; }
  std::size_t size() const { return phrases_.size(); }
  bool empty() const { return phrases_.empty(); }

  // 0-based rank of the phrase, or nullopt.
  std::optional<std::size_t> index_of(std::span<const std::string> phrase) const;
  bool contains(std::span<const std::string> phrase) const { return index_of(phrase).has_value(); }

  PhraseVocabulary top(std::size_t k) const;

  // One phrase per line: space-joined words, TAB, frequency.
  void write(std::ostream& os) const;
  static PhraseVocabulary read(std::istream& is);

 private:
  std::vector<Phrase> phrases_;
};

using Pair = std::pair<Words, Words>;

// Returns nullopt (not covered) iff `vocab` is given and some required
// insertion phrase is missing from it.
std::optional<TagSequence> to_tags(std::span<const std::string> source, std::span<const std::string> target,
                                   const PhraseVocabulary* vocab = nullptr);

Words realize(std::span<const std::string> source, const TagSequence& tags);

PhraseVocabulary extract_phrases(std::span<const Pair> pairs);

double coverage(std::span<const Pair> pairs, const PhraseVocabulary& vocab);

}  // namespace rephrase::editops

#endif  // REPHRASE_EDITOPS_H_
