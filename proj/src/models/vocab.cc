#include "rephrase/models/vocab.h"

#include <algorithm>
#include <istream>
#include <map>
#include <ostream>
#include <stdexcept>

#include "rephrase/numcore/checkpoint.h"

namespace rephrase::models {

namespace {

const std::vector<std::string>& special_words() {
  static const std::vector<std::string> w = {"<pad>", "<s>", "</s>", "<mask>", "<unk>"};
  return w;
}

}  // namespace

Vocabulary::Vocabulary() : words_(special_words()) {
  for (int k = 0; k < kNumSpecials; ++k) index_[words_[static_cast<std::size_t>(k)]] = k;
}

Vocabulary Vocabulary::build(std::span<const Words> texts, std::size_t cap) {
  std::map<std::string, long> counts;
  for (const Words& t : texts) {
    for (const auto& w : t) ++counts[w];
  }
  std::vector<std::pair<std::string, long>> sorted(counts.begin(), counts.end());
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  Vocabulary v;
  for (const auto& [w, c] : sorted) {
    if (v.words_.size() - kNumSpecials >= cap) break;
    if (v.index_.count(w) != 0) continue;
    v.index_[w] = static_cast<int>(v.words_.size());
    v.words_.push_back(w);
  }
  return v;
}

int Vocabulary::id(const std::string& word) const {
  auto it = index_.find(word);
  return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::word(int id) const {
  if (id < 0 || id >= size()) throw std::out_of_range("vocabulary id " + std::to_string(id));
  return words_[static_cast<std::size_t>(id)];
}

std::uint64_t Vocabulary::hash() const {
  std::string all;
  for (const auto& w : words_) {
    all += w;
    all += '\n';
  }
  return numcore::fnv1a64(all);
}

void Vocabulary::write(std::ostream& out) const {
  for (std::size_t k = kNumSpecials; k < words_.size(); ++k) out << words_[k] << "\n";
}

Vocabulary Vocabulary::read(std::istream& in) {
  Vocabulary v;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (v.index_.count(line) != 0) throw std::invalid_argument("duplicate vocabulary entry " + line);
    v.index_[line] = static_cast<int>(v.words_.size());
    v.words_.push_back(line);
  }
  return v;
}

Example encode_example(const Vocabulary& vocab, std::span<const std::string> source, const Words* target,
                       std::string id) {
  Example ex;
  ex.id = std::move(id);
  for (const auto& w : source) {
    int v = vocab.id(w);
    ex.src.push_back(v);
    if (v != kUnk || w == "<unk>") {
      ex.src_ext.push_back(v);
      continue;
    }
    auto it = std::find(ex.oov.begin(), ex.oov.end(), w);
    if (it == ex.oov.end()) {
      ex.oov.push_back(w);
      it = ex.oov.end() - 1;
    }
    ex.src_ext.push_back(vocab.size() + static_cast<int>(it - ex.oov.begin()));
  }
  if (target != nullptr) {
    for (const auto& w : *target) {
      int v = vocab.id(w);
      if (v == kUnk) {
        auto it = std::find(ex.oov.begin(), ex.oov.end(), w);
        if (it != ex.oov.end()) v = vocab.size() + static_cast<int>(it - ex.oov.begin());
      }
      ex.tgt_ext.push_back(v);
    }
    ex.tgt_ext.push_back(kEnd);
  }
  return ex;
}

Words decode_ids(const Vocabulary& vocab, std::span<const int> ids, std::span<const std::string> oov) {
  Words out;
  for (int id : ids) {
    if (id == kEnd) break;
    if (id == kStart || id == kPad) continue;
    if (id >= vocab.size()) {
      std::size_t k = static_cast<std::size_t>(id - vocab.size());
      if (k >= oov.size()) throw std::out_of_range("extended id without OOV word");
      out.push_back(oov[k]);
    } else {
      out.push_back(vocab.word(id));
    }
  }
  return out;
}

Batch make_batch(std::span<const Example* const> examples, int vocab_size, bool extended_targets) {
  if (examples.empty()) throw std::invalid_argument("empty batch");
  Batch b;
  b.size = static_cast<Index>(examples.size());
  b.vocab_size = vocab_size;
  std::size_t max_oov = 0;
  for (const Example* e : examples) {
    if (e->src.empty()) throw std::invalid_argument("empty source in example " + e->id);
    b.src_len = std::max<Index>(b.src_len, static_cast<Index>(e->src.size()));
    b.tgt_len = std::max<Index>(b.tgt_len, static_cast<Index>(e->tgt_ext.size()));
    max_oov = std::max(max_oov, e->oov.size());
  }
  b.ext_width = vocab_size + static_cast<Index>(max_oov);
  const auto n = static_cast<std::size_t>(b.size);
  b.src.assign(static_cast<std::size_t>(b.src_len) * n, kPad);
  b.src_ext.assign(n * static_cast<std::size_t>(b.src_len), kPad);
  b.src_mask.assign(n * static_cast<std::size_t>(b.src_len), 0);
  b.tgt_in.assign(static_cast<std::size_t>(b.tgt_len) * n, kPad);
  b.tgt_out.assign(static_cast<std::size_t>(b.tgt_len) * n, kPad);
  b.tgt_mask.assign(static_cast<std::size_t>(b.tgt_len) * n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const Example& e = *examples[i];
    b.examples.push_back(&e);
    b.src_lengths.push_back(static_cast<int>(e.src.size()));
    for (std::size_t t = 0; t < e.src.size(); ++t) {
      b.src[t * n + i] = e.src[t];
      b.src_ext[i * static_cast<std::size_t>(b.src_len) + t] = e.src_ext[t];
      b.src_mask[i * static_cast<std::size_t>(b.src_len) + t] = 1;
    }
    for (std::size_t t = 0; t < e.tgt_ext.size(); ++t) {
      int y = e.tgt_ext[t];
      if (!extended_targets && y >= vocab_size) y = kUnk;
      b.tgt_out[t * n + i] = y;
      b.tgt_mask[t * n + i] = 1;
      int prev = t == 0 ? kStart : e.tgt_ext[t - 1];
      b.tgt_in[t * n + i] = prev >= vocab_size ? kUnk : prev;
    }
  }
  return b;
}

Batch make_batch(std::span<const Example> examples, int vocab_size, bool extended_targets) {
  std::vector<const Example*> ptrs;
  for (const auto& e : examples) ptrs.push_back(&e);
  return make_batch(ptrs, vocab_size, extended_targets);
}

}  // namespace rephrase::models
