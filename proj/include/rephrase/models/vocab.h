#ifndef REPHRASE_MODELS_VOCAB_H_
#define REPHRASE_MODELS_VOCAB_H_

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "rephrase/numcore/tensor.h"
#include "rephrase/text.h"

namespace rephrase::models {

using numcore::Index;
using numcore::Real;

inline constexpr int kPad = 0;
inline constexpr int kStart = 1;
inline constexpr int kEnd = 2;
inline constexpr int kMask = 3;
inline constexpr int kUnk = 4;
inline constexpr int kNumSpecials = 5;

class Vocabulary {
 public:
  Vocabulary();

  // Most frequent `cap` words (ties broken lexicographically) plus specials.
  static Vocabulary build(std::span<const Words> texts, std::size_t cap = 8000);

  int id(const std::string& word) const;  // kUnk when absent
  bool contains(const std::string& word) const { return index_.count(word) != 0; }
  const std::string& word(int id) const;
  int size() const { return static_cast<int>(words_.size()); }
  const std::vector<std::string>& words() const { return words_; }
  std::uint64_t hash() const;

  void write(std::ostream& out) const;
  static Vocabulary read(std::istream& in);

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, int> index_;
};

// One source/target pair in id space. Source words missing from the
// vocabulary get extended ids size() + k so the copy path can emit them.
struct Example {
  std::string id;
  std::vector<int> src;      // vocabulary ids, kUnk for unknown words
  std::vector<int> src_ext;  // extended ids
  std::vector<std::string> oov;
  std::vector<int> tgt_ext;  // extended ids, ends with kEnd; empty when unlabeled
};

Example encode_example(const Vocabulary& vocab, std::span<const std::string> source, const Words* target,
                       std::string id = {});

// Maps ids back to words; extended ids use the example's OOV list.
// Stops at kEnd and skips kStart and kPad.
Words decode_ids(const Vocabulary& vocab, std::span<const int> ids, std::span<const std::string> oov);

// Padded batch in time-major layout: entry (t, b) lives at t * size + b.
struct Batch {
  Index size = 0;
  Index src_len = 0;
  Index tgt_len = 0;
  int vocab_size = 0;
  Index ext_width = 0;         // vocab_size + largest OOV list
  std::vector<int> src;        // src_len * size, time-major
  std::vector<int> src_ext;    // size * src_len, example-major
  std::vector<Real> src_mask;  // size * src_len, example-major
  std::vector<int> src_lengths;
  std::vector<int> tgt_in;     // tgt_len * size, kStart then targets
  std::vector<int> tgt_out;    // tgt_len * size, extended ids
  std::vector<Real> tgt_mask;  // tgt_len * size
  std::vector<const Example*> examples;
};

// When `extended_targets` is false, target words outside the vocabulary
// become kUnk (used by models without a copy path).
Batch make_batch(std::span<const Example* const> examples, int vocab_size, bool extended_targets = true);
Batch make_batch(std::span<const Example> examples, int vocab_size, bool extended_targets = true);

}  // namespace rephrase::models

#endif  // REPHRASE_MODELS_VOCAB_H_
