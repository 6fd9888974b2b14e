// Brute-force reference implementations used only by tests. They share no
// code with the library: n-grams are enumerated as joined strings and sets
// are plain sorted vectors.
#ifndef REPHRASE_TESTS_ORACLES_METRIC_ORACLES_H_
#define REPHRASE_TESTS_ORACLES_METRIC_ORACLES_H_

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace oracle {

using Seq = std::vector<std::string>;

inline std::vector<std::string> grams(const Seq& s, int n) {
  std::vector<std::string> out;
  for (int i = 0; i + n <= static_cast<int>(s.size()); ++i) {
    std::string key;
    for (int k = 0; k < n; ++k) key += s[i + k] + '\x1f';
    out.push_back(key);
  }
  return out;
}

inline std::vector<std::string> as_set(std::vector<std::string> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

inline bool member(const std::vector<std::string>& set, const std::string& x) {
  for (const auto& y : set) {
    if (y == x) return true;
  }
  return false;
}

inline double f1_sets(const std::vector<std::string>& pred, const std::vector<std::string>& ref) {
  if (pred.empty() && ref.empty()) return 1.0;
  if (pred.empty() || ref.empty()) return 0.0;
  double good = 0;
  for (const auto& g : pred) good += member(ref, g) ? 1 : 0;
  double p = good / pred.size();
  double r = good / ref.size();
  return (p + r) == 0 ? 0.0 : 2 * p * r / (p + r);
}

inline double precision_sets(const std::vector<std::string>& pred, const std::vector<std::string>& ref) {
  if (pred.empty()) return 1.0;
  double good = 0;
  for (const auto& g : pred) good += member(ref, g) ? 1 : 0;
  return good / pred.size();
}

struct SariParts {
  double keep, add, del, sari;
};

inline SariParts sari(const Seq& src, const Seq& pred, const std::vector<Seq>& refs,
                      bool delete_precision = false) {
  double keep = 0, add = 0, del = 0;
  for (int n = 1; n <= 4; ++n) {
    auto S = as_set(grams(src, n));
    auto P = as_set(grams(pred, n));
    std::vector<std::string> R;
    for (const auto& r : refs) {
      for (auto& g : grams(r, n)) R.push_back(g);
    }
    R = as_set(R);
    std::vector<std::string> keep_p, keep_r, add_p, add_r, del_p, del_r;
    for (const auto& g : S) {
      if (member(P, g))
        keep_p.push_back(g);
      else
        del_p.push_back(g);
      if (member(R, g))
        keep_r.push_back(g);
      else
        del_r.push_back(g);
    }
    for (const auto& g : P)
      if (!member(S, g)) add_p.push_back(g);
    for (const auto& g : R)
      if (!member(S, g)) add_r.push_back(g);
    keep += f1_sets(keep_p, keep_r);
    add += f1_sets(add_p, add_r);
    del += delete_precision ? precision_sets(del_p, del_r) : f1_sets(del_p, del_r);
  }
  SariParts out{keep / 4, add / 4, del / 4, 0};
  out.sari = 100.0 * (out.keep + out.add + out.del) / 3.0;
  return out;
}

inline int count_of(const std::vector<std::string>& v, const std::string& x) {
  int c = 0;
  for (const auto& y : v) c += (y == x);
  return c;
}

inline double bleu(const std::vector<Seq>& hyps, const std::vector<std::vector<Seq>>& refs) {
  double match[4] = {0, 0, 0, 0};
  double tot[4] = {0, 0, 0, 0};
  double c = 0, r = 0;
  for (std::size_t k = 0; k < hyps.size(); ++k) {
    const Seq& h = hyps[k];
    c += h.size();
    // Closest reference length, shorter on ties.
    long best = -1;
    for (const auto& ref : refs[k]) {
      long len = static_cast<long>(ref.size());
      long diff = std::labs(len - static_cast<long>(h.size()));
      long bdiff = best < 0 ? 1L << 40 : std::labs(best - static_cast<long>(h.size()));
      if (best < 0 || diff < bdiff || (diff == bdiff && len < best)) best = len;
    }
    r += best;
    for (int n = 1; n <= 4; ++n) {
      auto hg = grams(h, n);
      auto uniq = as_set(hg);
      for (const auto& g : uniq) {
        int hc = count_of(hg, g);
        int mx = 0;
        for (const auto& ref : refs[k]) mx = std::max(mx, count_of(grams(ref, n), g));
        match[n - 1] += std::min(hc, mx);
      }
      tot[n - 1] += hg.size();
    }
  }
  double logp = 0;
  for (int n = 0; n < 4; ++n) {
    double p = n == 0 ? (tot[0] == 0 ? 0 : match[0] / tot[0]) : (match[n] + 1) / (tot[n] + 1);
    if (p == 0) return 0;
    logp += 0.25 * std::log(p);
  }
  double bp = c >= r ? 1.0 : (c == 0 ? 0.0 : std::exp(1 - r / c));
  return 100 * bp * std::exp(logp);
}

// Longest common subsequence by enumerating every source subset, longest
// first; returns the lexicographically smallest index tuple among the
// longest ones that embed into the target.
inline std::vector<int> brute_lcs_indices(const Seq& s, const Seq& t) {
  const int n = static_cast<int>(s.size());
  std::vector<int> best;
  bool found = false;
  for (int len = n; len >= 0 && !found; --len) {
    // Subsets of size len in lexicographic order of index tuples.
    std::vector<int> idx(len);
    for (int k = 0; k < len; ++k) idx[k] = k;
    while (true) {
      std::size_t j = 0;
      for (std::size_t k = 0; k < t.size() && j < idx.size(); ++k) {
        if (t[k] == s[idx[j]]) ++j;
      }
      if (j == idx.size()) {
        best = idx;
        found = true;
        break;
      }
      int pos = len - 1;
      while (pos >= 0 && idx[pos] == n - len + pos) --pos;
      if (pos < 0) break;
      ++idx[pos];
      for (int k = pos + 1; k < len; ++k) idx[k] = idx[k - 1] + 1;
    }
  }
  return best;
}

}  // namespace oracle

#endif  // REPHRASE_TESTS_ORACLES_METRIC_ORACLES_H_
