#include "rephrase/editops.h"

#include <algorithm>
#include <istream>
#include <map>
#include <ostream>
#include <stdexcept>
#include <string>

namespace rephrase::editops {

Alignment align(std::span<const std::string> source, std::span<const std::string> target) {
  const std::size_t n = source.size();
  const std::size_t m = target.size();
  // suffix[i][j] = LCS length of source[i:] and target[j:].
  std::vector<std::vector<std::size_t>> suffix(n + 1, std::vector<std::size_t>(m + 1, 0));
  for (std::size_t i = n; i-- > 0;) {
    for (std::size_t j = m; j-- > 0;) {
      suffix[i][j] =
          source[i] == target[j] ? suffix[i + 1][j + 1] + 1 : std::max(suffix[i + 1][j], suffix[i][j + 1]);
    }
  }

  Alignment a;
  std::size_t remaining = suffix[0][0];
  std::size_t i = 0;
  std::size_t j = 0;
  while (remaining > 0) {
    // Smallest source index that can still start an optimal completion,
    // paired with its earliest feasible target index.
    bool found = false;
    for (std::size_t si = i; si < n && !found; ++si) {
      for (std::size_t tj = j; tj < m; ++tj) {
        if (source[si] == target[tj]) {
          if (suffix[si + 1][tj + 1] + 1 >= remaining) {
            a.kept.emplace_back(si, tj);
            i = si + 1;
            j = tj + 1;
            --remaining;
            found = true;
          }
          // Later target positions only shrink the suffix LCS.
          break;
        }
      }
    }
    if (!found) throw std::logic_error("align: inconsistent LCS table");
  }

  std::vector<bool> src_kept(n, false), tgt_kept(m, false);
  for (auto [s, t] : a.kept) {
    src_kept[s] = true;
    tgt_kept[t] = true;
  }
  for (std::size_t s = 0; s < n; ++s) {
    if (!src_kept[s]) a.deleted.push_back(s);
  }
  for (std::size_t t = 0; t < m; ++t) {
    if (!tgt_kept[t]) a.added.push_back(t);
  }
  return a;
}

PhraseVocabulary::PhraseVocabulary(std::vector<Phrase> phrases) : phrases_(std::move(phrases)) {
  for (std::size_t k = 0; k < phrases_.size(); ++k) {
    if (phrases_[k].words.empty()) {
      throw std::invalid_argument("PhraseVocabulary: empty phrase");
    }
    if (k > 0 && phrases_[k].count > phrases_[k - 1].count) {
      throw std::invalid_argument("PhraseVocabulary: frequencies must be non-increasing");
    }
    for (std::size_t q = 0; q < k; ++q) {
      if (phrases_[q].words == phrases_[k].words) {
        throw std::invalid_argument("PhraseVocabulary: duplicate phrase '" + text::join(phrases_[k].words) +
                                    "'");
      }
    }
  }
}

std::optional<std::size_t> PhraseVocabulary::index_of(std::span<const std::string> phrase) const {
  for (std::size_t k = 0; k < phrases_.size(); ++k) {
    const Words& w = phrases_[k].words;
    if (std::equal(w.begin(), w.end(), phrase.begin(), phrase.end())) return k;
  }
  return std::nullopt;
}

PhraseVocabulary PhraseVocabulary::top(std::size_t k) const {
  std::vector<Phrase> head(phrases_.begin(), phrases_.begin() + std::min(k, phrases_.size()));
  return PhraseVocabulary(std::move(head));
}

void PhraseVocabulary::write(std::ostream& os) const {
  for (const auto& p : phrases_) {
    os << text::join(p.words) << '\t' << p.count << '\n';
  }
}

PhraseVocabulary PhraseVocabulary::read(std::istream& is) {
  std::vector<Phrase> phrases;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto tab = line.rfind('\t');
    if (tab == std::string::npos) {
      throw std::runtime_error("phrase vocabulary line " + std::to_string(line_no) + ": missing TAB");
    }
    Phrase p;
    p.words = text::split_words(line.substr(0, tab));
    p.count = std::stoll(line.substr(tab + 1));
    phrases.push_back(std::move(p));
  }
  return PhraseVocabulary(std::move(phrases));
}

std::optional<TagSequence> to_tags(std::span<const std::string> source, std::span<const std::string> target,
                                   const PhraseVocabulary* vocab) {
  Alignment a = align(source, target);
  TagSequence seq;
  seq.tags.resize(source.size() + 1);
  for (std::size_t s : a.deleted) seq.tags[s].action = EditAction::kDelete;

  // Added target runs attach to the slot of the next kept token.
  std::size_t next_kept = 0;
  Words run;
  for (std::size_t t = 0; t < target.size(); ++t) {
    if (next_kept < a.kept.size() && a.kept[next_kept].second == t) {
      if (!run.empty()) {
        seq.tags[a.kept[next_kept].first].insert_before = std::move(run);
        run.clear();
      }
      ++next_kept;
    } else {
      run.push_back(target[t]);
    }
  }
  if (!run.empty()) seq.tags.back().insert_before = std::move(run);

  if (vocab != nullptr) {
    for (const auto& tag : seq.tags) {
      if (!tag.insert_before.empty() && !vocab->contains(tag.insert_before)) {
        return std::nullopt;
      }
    }
  }
  return seq;
}

Words realize(std::span<const std::string> source, const TagSequence& tags) {
  if (tags.tags.size() != source.size() + 1) {
    throw std::invalid_argument("realize: expected " + std::to_string(source.size() + 1) + " tags, got " +
                                std::to_string(tags.tags.size()));
  }
  if (tags.tags.back().action == EditAction::kDelete) {
    throw std::invalid_argument("realize: DELETE in final slot");
  }
  Words out;
  for (std::size_t i = 0; i <= source.size(); ++i) {
    const EditTag& tag = tags.tags[i];
    out.insert(out.end(), tag.insert_before.begin(), tag.insert_before.end());
    if (i < source.size() && tag.action == EditAction::kKeep) {
      out.push_back(source[i]);
    }
  }
  return out;
}

PhraseVocabulary extract_phrases(std::span<const Pair> pairs) {
  std::map<Words, std::int64_t> counts;
  for (const auto& [src, tgt] : pairs) {
    auto tags = to_tags(src, tgt);
    for (const auto& tag : tags->tags) {
      if (!tag.insert_before.empty()) ++counts[tag.insert_before];
    }
  }
  std::vector<Phrase> phrases;
  phrases.reserve(counts.size());
  for (auto& [words, count] : counts) phrases.push_back(Phrase{words, count});
  // std::map iteration is already lexicographic, so a stable sort on
  // frequency keeps the tie order.
  std::stable_sort(phrases.begin(), phrases.end(),
                   [](const Phrase& a, const Phrase& b) { return a.count > b.count; });
  return PhraseVocabulary(std::move(phrases));
}

double coverage(std::span<const Pair> pairs, const PhraseVocabulary& vocab) {
  if (pairs.empty()) return 1.0;
  std::size_t covered = 0;
  for (const auto& [src, tgt] : pairs) {
    if (to_tags(src, tgt, &vocab).has_value()) ++covered;
  }
  return static_cast<double>(covered) / static_cast<double>(pairs.size());
}

}  // namespace rephrase::editops
