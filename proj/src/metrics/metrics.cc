#include "rephrase/metrics.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace rephrase::metrics {
namespace {

constexpr int kMaxOrder = 4;

Words norm(std::span<const std::string> w) { return text::normalize(w, text::kMetricPolicy); }

void require_references(const corpus::Utterance& u) {
  if (u.cls == corpus::RephraseClass::kRephrase && u.rephrases.empty()) {
    throw std::invalid_argument("utterance '" + u.id + "': REPHRASE without rephrases");
  }
}

using GramSet = std::set<text::NGram>;

GramSet gram_set(std::span<const std::string> w, std::size_t n) {
  GramSet s;
  for (auto& [g, c] : text::ngrams(w, n)) s.insert(g);
  return s;
}

GramSet intersect(const GramSet& a, const GramSet& b) {
  GramSet out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::inserter(out, out.begin()));
  return out;
}

GramSet subtract(const GramSet& a, const GramSet& b) {
  GramSet out;
  std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::inserter(out, out.begin()));
  return out;
}

// F1 of a predicted action set against a reference action set. Two empty
// sets score 1, exactly one empty set scores 0.
double set_f1(const GramSet& predicted, const GramSet& reference) {
  if (predicted.empty() && reference.empty()) return 1.0;
  if (predicted.empty() || reference.empty()) return 0.0;
  auto good = static_cast<double>(intersect(predicted, reference).size());
  double p = good / static_cast<double>(predicted.size());
  double r = good / static_cast<double>(reference.size());
  return p + r > 0 ? 2 * p * r / (p + r) : 0.0;
}

// Precision with no predictions counting as perfect.
double set_precision(const GramSet& predicted, const GramSet& reference) {
  if (predicted.empty()) return 1.0;
  auto good = static_cast<double>(intersect(predicted, reference).size());
  return good / static_cast<double>(predicted.size());
}

}  // namespace

std::string to_text(const EvalReport& r) {
  std::ostringstream os;
  os.precision(4);
  os << std::fixed;
  os << "em=" << r.em << '\n'
     << "em_any=" << r.em_any << '\n'
     << "em_exact=" << r.em_exact << '\n'
     << "em_rephrase=" << r.em_rephrase << '\n'
     << "bleu=" << r.bleu << '\n'
     << "sari=" << r.sari << '\n'
     << "n_exact=" << r.n_exact << '\n'
     << "n_rephrase=" << r.n_rephrase << '\n';
  return os.str();
}

std::string to_json(const EvalReport& r) {
  nlohmann::json j = {
      {"em", r.em},     {"em_any", r.em_any}, {"em_exact", r.em_exact}, {"em_rephrase", r.em_rephrase},
      {"bleu", r.bleu}, {"sari", r.sari},     {"n_exact", r.n_exact},   {"n_rephrase", r.n_rephrase}};
  return j.dump(2);
}

bool exact_match(std::span<const std::string> pred, const corpus::Utterance& u) {
  require_references(u);
  Words gold = u.cls == corpus::RephraseClass::kExact ? u.content() : u.rephrases.front();
  return norm(pred) == norm(gold);
}

bool em_any(std::span<const std::string> pred, const corpus::Utterance& u) {
  require_references(u);
  Words p = norm(pred);
  for (const auto& ref : u.references()) {
    if (p == norm(ref)) return true;
  }
  return false;
}

double bleu(std::span<const Words> preds, std::span<const std::vector<Words>> refs) {
  if (preds.empty()) throw std::invalid_argument("bleu: empty corpus");
  if (preds.size() != refs.size()) {
    throw std::invalid_argument("bleu: prediction/reference count mismatch");
  }
  std::array<double, kMaxOrder> matched{};
  std::array<double, kMaxOrder> total{};
  double hyp_len = 0;
  double ref_len = 0;
  for (std::size_t k = 0; k < preds.size(); ++k) {
    if (refs[k].empty()) throw std::invalid_argument("bleu: no references");
    const Words& hyp = preds[k];
    hyp_len += static_cast<double>(hyp.size());

    std::size_t best = refs[k].front().size();
    for (const auto& r : refs[k]) {
      auto d = [&](std::size_t len) { return len > hyp.size() ? len - hyp.size() : hyp.size() - len; };
      if (d(r.size()) < d(best) || (d(r.size()) == d(best) && r.size() < best)) {
        best = r.size();
      }
    }
    ref_len += static_cast<double>(best);

    for (int n = 1; n <= kMaxOrder; ++n) {
      auto hyp_counts = text::ngrams(hyp, static_cast<std::size_t>(n));
      text::NGramCounts max_ref;
      for (const auto& r : refs[k]) {
        for (auto& [g, c] : text::ngrams(r, static_cast<std::size_t>(n))) {
          max_ref[g] = std::max(max_ref[g], c);
        }
      }
      for (auto& [g, c] : hyp_counts) {
        auto it = max_ref.find(g);
        int clip = it == max_ref.end() ? 0 : it->second;
        matched[n - 1] += std::min(c, clip);
        total[n - 1] += c;
      }
    }
  }

  double log_precision = 0;
  for (int n = 0; n < kMaxOrder; ++n) {
    double p = n == 0 ? (total[0] > 0 ? matched[0] / total[0] : 0.0) : (matched[n] + 1.0) / (total[n] + 1.0);
    if (p <= 0) return 0.0;
    log_precision += std::log(p) / kMaxOrder;
  }
  double bp = hyp_len >= ref_len ? 1.0 : hyp_len == 0 ? 0.0 : std::exp(1.0 - ref_len / hyp_len);
  return 100.0 * bp * std::exp(log_precision);
}

SariBreakdown sari(std::span<const std::string> source, std::span<const std::string> pred,
                   std::span<const Words> refs, const SariConfig& cfg) {
  if (refs.empty()) throw std::invalid_argument("sari: no references");
  double keep = 0, add = 0, del = 0;
  for (std::size_t n = 1; n <= kMaxOrder; ++n) {
    GramSet s = gram_set(source, n);
    GramSet p = gram_set(pred, n);
    GramSet r;
    for (const auto& ref : refs) {
      GramSet g = gram_set(ref, n);
      r.insert(g.begin(), g.end());
    }
    keep += set_f1(intersect(s, p), intersect(s, r));
    add += set_f1(subtract(p, s), subtract(r, s));
    GramSet del_pred = subtract(s, p);
    GramSet del_ref = subtract(s, r);
    del += cfg.delete_precision ? set_precision(del_pred, del_ref) : set_f1(del_pred, del_ref);
  }
  SariBreakdown b;
  b.keep_f1 = keep / kMaxOrder;
  b.add_f1 = add / kMaxOrder;
  b.delete_f1 = del / kMaxOrder;
  b.sari = 100.0 * (b.keep_f1 + b.add_f1 + b.delete_f1) / 3.0;
  return b;
}

EvalReport corpus_eval(const Predictions& preds, const corpus::Dataset& ds, const SariConfig& sari_cfg) {
  std::vector<std::string> missing;
  for (const auto& u : ds.utterances) {
    if (!preds.count(u.id)) missing.push_back(u.id);
  }
  if (!missing.empty()) {
    std::string msg = "corpus_eval: missing predictions for";
    for (std::size_t k = 0; k < missing.size() && k < 20; ++k) msg += " " + missing[k];
    if (missing.size() > 20) msg += " ... (" + std::to_string(missing.size()) + " total)";
    throw std::invalid_argument(msg);
  }
  if (ds.empty()) throw std::invalid_argument("corpus_eval: empty dataset");

  EvalReport r;
  std::size_t em = 0, any = 0, em_exact = 0, em_rephrase = 0;
  double sari_sum = 0;
  std::vector<Words> hyps;
  std::vector<std::vector<Words>> refs;
  for (const auto& u : ds.utterances) {
    const Words& pred = preds.at(u.id);
    bool hit = exact_match(pred, u);
    em += hit;
    any += em_any(pred, u);
    if (u.cls == corpus::RephraseClass::kExact) {
      ++r.n_exact;
      em_exact += hit;
    } else {
      ++r.n_rephrase;
      em_rephrase += hit;
    }
    std::vector<Words> ref_norm;
    for (const auto& ref : u.references()) ref_norm.push_back(norm(ref));
    Words hyp = norm(pred);
    sari_sum += sari(norm(u.content()), hyp, ref_norm, sari_cfg).sari;
    hyps.push_back(std::move(hyp));
    refs.push_back(std::move(ref_norm));
  }
  const auto n = static_cast<double>(ds.size());
  r.em = 100.0 * static_cast<double>(em) / n;
  r.em_any = 100.0 * static_cast<double>(any) / n;
  r.em_exact = r.n_exact ? 100.0 * static_cast<double>(em_exact) / static_cast<double>(r.n_exact) : 0.0;
  r.em_rephrase =
      r.n_rephrase ? 100.0 * static_cast<double>(em_rephrase) / static_cast<double>(r.n_rephrase) : 0.0;
  r.bleu = bleu(hyps, refs);
  r.sari = sari_sum / n;
  return r;
}

double copy_error_rate(const Predictions& preds, const corpus::Dataset& ds) {
  if (ds.empty()) return 0.0;
  std::size_t errors = 0;
  for (const auto& u : ds.utterances) {
    auto it = preds.find(u.id);
    static const Words kEmpty;
    const Words& pred = it == preds.end() ? kEmpty : it->second;
    for (std::size_t i = u.span_start; i < u.span_end; ++i) {
      const auto& tok = u.query_tokens[i];
      if (tok.is_proper_noun_guess && std::find(pred.begin(), pred.end(), tok.surface) == pred.end()) {
        ++errors;
        break;
      }
    }
  }
  return static_cast<double>(errors) / static_cast<double>(ds.size());
}

}  // namespace rephrase::metrics
