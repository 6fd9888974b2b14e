#include "rephrase/models/decode.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rephrase::models {

std::vector<Hypothesis> greedy_decode(Seq2SeqModel& model, const Batch& batch, int max_len) {
  if (max_len < 1) throw std::invalid_argument("max_len must be at least 1");
  max_len = std::min(max_len, model.max_decode_steps());
  auto state = model.begin_decode(batch);
  const auto n = static_cast<std::size_t>(batch.size);
  std::vector<Hypothesis> hyps(n);
  std::vector<int> prev(n, kStart);
  std::vector<bool> done(n, false);
  for (int t = 0; t < max_len; ++t) {
    StepDistribution d = model.decode_step(*state, prev);
    bool all_done = true;
    for (std::size_t b = 0; b < n; ++b) {
      if (done[b]) continue;
      Index arg = 0;
      d.p_output.row(static_cast<Index>(b)).maxCoeff(&arg);
      hyps[b].ids.push_back(static_cast<int>(arg));
      hyps[b].logprob += std::log(static_cast<double>(d.p_output(static_cast<Index>(b), arg)));
      prev[b] = static_cast<int>(arg);
      done[b] = arg == kEnd;
      all_done = all_done && done[b];
    }
    if (all_done) break;
  }
  return hyps;
}

Hypothesis beam_decode(Seq2SeqModel& model, const Example& example, int max_len, int width) {
  if (max_len < 1) throw std::invalid_argument("max_len must be at least 1");
  max_len = std::min(max_len, model.max_decode_steps());
  if (width < 1) throw std::invalid_argument("beam width must be at least 1");
  const int vocab_size = model.vocab().size();
  const bool ext = model.has_copy();
  const Example* one[] = {&example};
  Hypothesis greedy = greedy_decode(model, make_batch(one, vocab_size, ext), max_len).front();

  std::vector<const Example*> copies(static_cast<std::size_t>(width), &example);
  Batch batch = make_batch(copies, vocab_size, ext);
  auto state = model.begin_decode(batch);
  std::vector<Hypothesis> live(1);
  std::vector<Hypothesis> finished;
  std::vector<int> prev = {kStart};
  state->select(std::vector<int>{0});

  struct Candidate {
    int parent;
    int token;
    double logprob;
  };
  for (int t = 0; t < max_len && !live.empty(); ++t) {
    StepDistribution d = model.decode_step(*state, prev);
    std::vector<Candidate> cands;
    for (std::size_t h = 0; h < live.size(); ++h) {
      auto row = d.p_output.row(static_cast<Index>(h));
      std::vector<int> order(static_cast<std::size_t>(row.size()));
      for (std::size_t k = 0; k < order.size(); ++k) order[k] = static_cast<int>(k);
      auto top = std::min<std::size_t>(order.size(), static_cast<std::size_t>(width));
      std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(top), order.end(),
                        [&](int a, int b) { return row(a) > row(b) || (row(a) == row(b) && a < b); });
      for (std::size_t k = 0; k < top; ++k) {
        double p = static_cast<double>(row(order[k]));
        if (p <= 0) continue;
        cands.push_back({static_cast<int>(h), order[k], live[h].logprob + std::log(p)});
      }
    }
    // Same length for every candidate, so raw and normalized order agree.
    std::stable_sort(cands.begin(), cands.end(),
                     [](const Candidate& a, const Candidate& b) { return a.logprob > b.logprob; });
    std::vector<Hypothesis> next;
    std::vector<int> rows;
    prev.clear();
    for (const Candidate& c : cands) {
      if (static_cast<int>(next.size() + finished.size()) >= width) break;
      Hypothesis h = live[static_cast<std::size_t>(c.parent)];
      h.ids.push_back(c.token);
      h.logprob = c.logprob;
      if (c.token == kEnd) {
        finished.push_back(std::move(h));
      } else {
        next.push_back(std::move(h));
        rows.push_back(c.parent);
        prev.push_back(c.token);
      }
    }
    live = std::move(next);
    if (static_cast<int>(finished.size()) >= width) break;
    if (!live.empty()) state->select(rows);
  }
  for (auto& h : live) finished.push_back(std::move(h));
  Hypothesis best = greedy;
  for (const auto& h : finished) {
    if (h.score() > best.score()) best = h;
  }
  return best;
}

DecodeConfig DecodeConfig::parse(const std::string& spec) {
  DecodeConfig c;
  if (spec == "greedy") return c;
  if (spec.rfind("beam:", 0) == 0) {
    try {
      std::size_t used = 0;
      c.beam_width = std::stoi(spec.substr(5), &used);
      if (used == spec.size() - 5 && c.beam_width >= 1) return c;
    } catch (const std::exception&) {
    }
  }
  throw std::invalid_argument("decode must be 'greedy' or 'beam:k' with k >= 1, got '" + spec + "'");
}

std::string DecodeConfig::to_string() const {
  return beam_width == 1 ? "greedy" : "beam:" + std::to_string(beam_width);
}

std::vector<Words> decode_all(Seq2SeqModel& model, std::span<const Example> examples,
                              const DecodeConfig& config, std::size_t batch_size) {
  std::vector<Words> out;
  out.reserve(examples.size());
  if (config.beam_width > 1) {
    for (const auto& e : examples) {
      Hypothesis h = beam_decode(model, e, config.max_len, config.beam_width);
      out.push_back(decode_ids(model.vocab(), h.ids, e.oov));
    }
    return out;
  }
  for (std::size_t start = 0; start < examples.size(); start += batch_size) {
    std::size_t end = std::min(examples.size(), start + batch_size);
    Batch batch = make_batch(examples.subspan(start, end - start), model.vocab().size(), model.has_copy());
    auto hyps = greedy_decode(model, batch, config.max_len);
    for (std::size_t k = start; k < end; ++k) {
      out.push_back(decode_ids(model.vocab(), hyps[k - start].ids, examples[k].oov));
    }
  }
  return out;
}

}  // namespace rephrase::models
