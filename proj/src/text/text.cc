#include "rephrase/text.h"

#include <algorithm>
#include <array>
#include <cctype>
#include <stdexcept>

namespace rephrase::text {
namespace {

constexpr std::array<std::string_view, 8> kPunctMarks = {".", ",", "!", "?", "'", "\xE2\x80\x99", ";", ":"};

// Length in bytes of the punctuation mark at the front (or back) of `s`, or 0.
std::size_t leading_mark(std::string_view s) {
  for (auto mark : kPunctMarks) {
    if (s.starts_with(mark)) return mark.size();
  }
  return 0;
}

std::size_t trailing_mark(std::string_view s) {
  for (auto mark : kPunctMarks) {
    if (s.ends_with(mark)) return mark.size();
  }
  return 0;
}

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

bool looks_like_first_person(std::string_view s) {
  return s == "I" || s.starts_with("I'") || s.starts_with("I\xE2\x80\x99");
}

bool proper_noun_guess(std::string_view s, std::size_t position) {
  if (position == 0 || s.empty()) return false;
  if (!std::isupper(static_cast<unsigned char>(s.front()))) return false;
  return !looks_like_first_person(s);
}

}  // namespace

bool is_punct_token(std::string_view s) {
  if (s.empty()) return false;
  while (!s.empty()) {
    std::size_t n = leading_mark(s);
    if (n == 0) return false;
    s.remove_prefix(n);
  }
  return true;
}

std::string to_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

Tokens tokenize_at(std::string_view text, std::size_t offset) {
  Words words;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    std::size_t start = i;
    while (i < text.size() && !is_space(text[i])) ++i;
    if (start == i) break;
    std::string_view chunk = text.substr(start, i - start);

    Words trailing;
    while (!chunk.empty()) {
      std::size_t n = leading_mark(chunk);
      if (n == 0) break;
      words.emplace_back(chunk.substr(0, n));
      chunk.remove_prefix(n);
    }
    while (!chunk.empty()) {
      std::size_t n = trailing_mark(chunk);
      if (n == 0) break;
      trailing.emplace_back(chunk.substr(chunk.size() - n));
      chunk.remove_suffix(n);
    }
    if (!chunk.empty()) words.emplace_back(chunk);
    words.insert(words.end(), trailing.rbegin(), trailing.rend());
  }

  Tokens tokens;
  tokens.reserve(words.size());
  for (std::size_t k = 0; k < words.size(); ++k) {
    bool guess = proper_noun_guess(words[k], offset + k);
    tokens.push_back(Token{std::move(words[k]), guess});
  }
  return tokens;
}

Tokens tokenize(std::string_view text) { return tokenize_at(text, 0); }

std::string detokenize(std::span<const std::string> words) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty() && !is_punct_token(w)) out += ' ';
    out += w;
  }
  return out;
}

std::string detokenize(const Tokens& tokens) { return detokenize(surfaces(tokens)); }

std::string join(std::span<const std::string> words) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

Tokens normalize(const Tokens& tokens, const NormalizationPolicy& policy) {
  Tokens out = tokens;
  if (policy.strip_terminal_punct) {
    while (!out.empty() && is_punct_token(out.back().surface)) out.pop_back();
  }
  if (policy.lowercase) {
    for (auto& t : out) t.surface = to_lower(t.surface);
  }
  return out;
}

Words normalize(std::span<const std::string> words, const NormalizationPolicy& policy) {
  Words out(words.begin(), words.end());
  if (policy.strip_terminal_punct) {
    while (!out.empty() && is_punct_token(out.back())) out.pop_back();
  }
  if (policy.lowercase) {
    for (auto& w : out) w = to_lower(w);
  }
  return out;
}

Words surfaces(const Tokens& tokens) { return surfaces(tokens, 0, tokens.size()); }

Words surfaces(const Tokens& tokens, std::size_t begin, std::size_t end) {
  Words out;
  out.reserve(end - begin);
  for (std::size_t i = begin; i < end; ++i) out.push_back(tokens[i].surface);
  return out;
}

Words split_words(std::string_view text) {
  Words out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    std::size_t start = i;
    while (i < text.size() && !is_space(text[i])) ++i;
    if (i > start) out.emplace_back(text.substr(start, i - start));
  }
  return out;
}

NGramCounts ngrams(std::span<const std::string> words, std::size_t n) {
  if (n == 0) throw std::invalid_argument("ngrams: n must be >= 1");
  NGramCounts counts;
  if (words.size() < n) return counts;
  for (std::size_t i = 0; i + n <= words.size(); ++i) {
    ++counts[NGram(words.begin() + i, words.begin() + i + n)];
  }
  return counts;
}

}  // namespace rephrase::text
