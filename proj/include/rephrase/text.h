#ifndef REPHRASE_TEXT_H_
#define REPHRASE_TEXT_H_

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace rephrase {

// A plain word sequence. Metrics, alignment and models work on these.
using Words = std::vector<std::string>;

namespace text {

struct Token {
  std::string surface;
  // Capitalized and not sentence-initial. The pronoun "I" (and its
  // contractions) is never flagged.
  bool is_proper_noun_guess = false;

  friend bool operator==(const Token&, const Token&) = default;
};

using Tokens = std::vector<Token>;

struct NormalizationPolicy {
  bool lowercase = true;
  bool strip_terminal_punct = true;
};

// Default policy used whenever predictions are compared to references.
inline constexpr NormalizationPolicy kMetricPolicy{true, true};

// Whitespace split, then leading/trailing punctuation (. , ! ? ' ’ ; :) is
// peeled off each chunk into separate tokens.
Tokens tokenize(std::string_view text);

// Tokenizes a fragment that sits at token offset `offset` of a larger
// sentence; only affects the sentence-initial proper-noun rule.
Tokens tokenize_at(std::string_view text, std::size_t offset);

// Joins surfaces with single spaces, attaching punctuation tokens to the
// preceding word.
std::string detokenize(std::span<const std::string> words);
std::string detokenize(const Tokens& tokens);

// Space join without punctuation attachment (the on-disk prediction form).
std::string join(std::span<const std::string> words);

Tokens normalize(const Tokens& tokens, const NormalizationPolicy& policy);
Words normalize(std::span<const std::string> words, const NormalizationPolicy& policy);

Words surfaces(const Tokens& tokens);
Words surfaces(const Tokens& tokens, std::size_t begin, std::size_t end);
Words split_words(std::string_view text);

bool is_punct_token(std::string_view s);
std::string to_lower(std::string_view s);

using NGram = std::vector<std::string>;
using NGramCounts = std::map<NGram, int>;

// All contiguous n-token windows with multiplicity. Throws
// std::invalid_argument for n == 0.
NGramCounts ngrams(std::span<const std::string> words, std::size_t n);

}  // namespace text
}  // namespace rephrase

#endif  // REPHRASE_TEXT_H_
