#include "rephrase/models/crf.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace rephrase::models {

using namespace numcore;

namespace {

void check_shapes(const Tensor& e, const Tensor& t) {
  if (e.rows() < 1) throw std::invalid_argument("crf: empty emission matrix");
  if (t.rows() != e.cols() || t.cols() != e.cols()) {
    throw std::invalid_argument("crf: transitions " + shape_string(t) + " do not match emissions " +
                                shape_string(e));
  }
}

void check_tags(const Tensor& e, std::span<const int> tags) {
  if (static_cast<Index>(tags.size()) != e.rows()) {
    throw std::invalid_argument("crf: need one tag per emission row");
  }
  for (int y : tags) {
    if (y < 0 || y >= e.cols())
      throw std::invalid_argument("crf: tag " + std::to_string(y) + " out of range");
  }
}

double log_sum_exp(const Eigen::Array<double, Eigen::Dynamic, 1>& v) {
  double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v - m).exp().sum());
}

using Table = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// alpha(i, y): log-sum of scores of prefixes ending in y at position i.
Table forward_table(const Tensor& e, const Tensor& t) {
  const Index L = e.rows(), T = e.cols();
  Table a(L, T);
  a.row(0) = e.row(0).cast<double>().array();
  Eigen::Array<double, Eigen::Dynamic, 1> v(T);
  for (Index i = 1; i < L; ++i) {
    for (Index y = 0; y < T; ++y) {
      for (Index p = 0; p < T; ++p) v(p) = a(i - 1, p) + static_cast<double>(t(p, y));
      a(i, y) = log_sum_exp(v) + static_cast<double>(e(i, y));
    }
  }
  return a;
}

// beta(i, y): log-sum of scores of suffixes after position i given y at i.
Table backward_table(const Tensor& e, const Tensor& t) {
  const Index L = e.rows(), T = e.cols();
  Table b = Table::Zero(L, T);
  Eigen::Array<double, Eigen::Dynamic, 1> v(T);
  for (Index i = L - 1; i-- > 0;) {
    for (Index y = 0; y < T; ++y) {
      for (Index n = 0; n < T; ++n) {
        v(n) = static_cast<double>(t(y, n)) + static_cast<double>(e(i + 1, n)) + b(i + 1, n);
      }
      b(i, y) = log_sum_exp(v);
    }
  }
  return b;
}

}  // namespace

double crf_path_score(const Tensor& emissions, const Tensor& transitions, std::span<const int> tags) {
  check_shapes(emissions, transitions);
  check_tags(emissions, tags);
  double s = 0;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    s += static_cast<double>(emissions(static_cast<Index>(i), tags[i]));
    if (i > 0) s += static_cast<double>(transitions(tags[i - 1], tags[i]));
  }
  return s;
}

double crf_log_partition(const Tensor& emissions, const Tensor& transitions) {
  check_shapes(emissions, transitions);
  Table a = forward_table(emissions, transitions);
  return log_sum_exp(a.row(a.rows() - 1).transpose());
}

double crf_loglik(const Tensor& emissions, const Tensor& transitions, std::span<const int> tags) {
  return crf_path_score(emissions, transitions, tags) - crf_log_partition(emissions, transitions);
}

ViterbiPath crf_viterbi(const Tensor& emissions, const Tensor& transitions) {
  check_shapes(emissions, transitions);
  const Index L = emissions.rows(), T = emissions.cols();
  Table best(L, T);
  Eigen::Array<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> back(L, T);
  best.row(0) = emissions.row(0).cast<double>().array();
  for (Index i = 1; i < L; ++i) {
    for (Index y = 0; y < T; ++y) {
      double top = -std::numeric_limits<double>::infinity();
      int arg = 0;
      for (Index p = 0; p < T; ++p) {
        double s = best(i - 1, p) + static_cast<double>(transitions(p, y));
        if (s > top) {
          top = s;
          arg = static_cast<int>(p);
        }
      }
      best(i, y) = top + static_cast<double>(emissions(i, y));
      back(i, y) = arg;
    }
  }
  ViterbiPath path;
  Index last = 0;
  for (Index y = 1; y < T; ++y) {
    if (best(L - 1, y) > best(L - 1, last)) last = y;
  }
  path.tags.assign(static_cast<std::size_t>(L), 0);
  path.tags.back() = static_cast<int>(last);
  for (Index i = L - 1; i > 0; --i) {
    path.tags[static_cast<std::size_t>(i - 1)] = back(i, path.tags[static_cast<std::size_t>(i)]);
  }
  path.score = crf_path_score(emissions, transitions, path.tags);
  return path;
}

Var crf_nll(Var emissions, Var transitions, std::span<const int> tags) {
  const Tensor& E = emissions.value();
  const Tensor& Tr = transitions.value();
  check_shapes(E, Tr);
  check_tags(E, tags);
  Tensor out(1, 1);
  out(0, 0) = static_cast<Real>(crf_log_partition(E, Tr) - crf_path_score(E, Tr, tags));
  std::vector<int> gold(tags.begin(), tags.end());
  return emissions.graph->push(
      std::move(out), {emissions, transitions}, [emissions, transitions, gold](Graph& g, int self) {
        const Tensor& E = g.value(emissions.id);
        const Tensor& Tr = g.value(transitions.id);
        const Real up = g.out_grad(self)(0, 0);
        const Index L = E.rows(), T = E.cols();
        Table a = forward_table(E, Tr);
        Table b = backward_table(E, Tr);
        const double log_z = log_sum_exp(a.row(L - 1).transpose());
        if (g.requires_grad(emissions.id)) {
          Tensor& dE = g.grad(emissions.id);
          for (Index i = 0; i < L; ++i) {
            for (Index y = 0; y < T; ++y) {
              dE(i, y) += up * static_cast<Real>(std::exp(a(i, y) + b(i, y) - log_z));
            }
            dE(i, gold[static_cast<std::size_t>(i)]) -= up;
          }
        }
        if (g.requires_grad(transitions.id)) {
          Tensor& dT = g.grad(transitions.id);
          for (Index i = 1; i < L; ++i) {
            for (Index p = 0; p < T; ++p) {
              for (Index y = 0; y < T; ++y) {
                double lp = a(i - 1, p) + static_cast<double>(Tr(p, y)) + static_cast<double>(E(i, y)) +
                            b(i, y) - log_z;
                dT(p, y) += up * static_cast<Real>(std::exp(lp));
              }
            }
            dT(gold[static_cast<std::size_t>(i - 1)], gold[static_cast<std::size_t>(i)]) -= up;
          }
        }
      });
}

nlohmann::json TaggerConfig::to_json() const {
  return {{"embedding_dim", embedding_dim},
          {"hidden", hidden},
          {"layers", layers},
          {"mlp_dim", mlp_dim},
          {"dropout", dropout},
          {"seed", seed}};
}

TaggerConfig TaggerConfig::from_json(const nlohmann::json& j) {
  TaggerConfig c;
  c.embedding_dim = j.value("embedding_dim", c.embedding_dim);
  c.hidden = j.value("hidden", c.hidden);
  c.layers = j.value("layers", c.layers);
  c.mlp_dim = j.value("mlp_dim", c.mlp_dim);
  c.dropout = j.value("dropout", c.dropout);
  c.seed = j.value("seed", c.seed);
  if (c.embedding_dim < 1 || c.hidden < 1 || c.layers < 1 || c.mlp_dim < 1) {
    throw std::invalid_argument("tagger sizes must be positive");
  }
  if (c.dropout < 0 || c.dropout >= 1) throw std::invalid_argument("dropout must be in [0, 1)");
  return c;
}

CrfTagger::CrfTagger(const TaggerConfig& config, Vocabulary vocab, editops::PhraseVocabulary phrases)
    : config_(config), vocab_(std::move(vocab)), phrases_(std::move(phrases)) {
  std::mt19937_64 rng(config_.seed);
  embedding_ = &params_.add("embedding", vocab_.size(), config_.embedding_dim, Init::kNormal, rng, 0.1);
  encoder_ = BiLstmEncoder::create(params_, "encoder", config_.embedding_dim, config_.hidden, config_.layers,
                                   config_.dropout, rng);
  hidden_ = Linear::create(params_, "mlp", encoder_.output_dim(), config_.mlp_dim, rng);
  emit_ = Linear::create(params_, "emit", config_.mlp_dim, num_tags(), rng);
  transitions_ = &params_.add("transitions", num_tags(), num_tags(), Init::kZeros, rng);
}

nlohmann::json CrfTagger::config() const {
  nlohmann::json j = config_.to_json();
  j["arch"] = "tagger";
  j["vocab_size"] = vocab_.size();
  j["vocab_hash"] = vocab_.hash();
  j["num_phrases"] = phrases_.size();
  return j;
}

int CrfTagger::tag_id(const editops::EditTag& tag) const {
  int phrase = 0;
  if (!tag.insert_before.empty()) {
    auto idx = phrases_.index_of(tag.insert_before);
    if (!idx) throw std::invalid_argument("phrase not in vocabulary: " + text::join(tag.insert_before));
    phrase = static_cast<int>(*idx) + 1;
  }
  int action = tag.action == editops::EditAction::kKeep ? 0 : 1;
  return action * (static_cast<int>(phrases_.size()) + 1) + phrase;
}

editops::EditTag CrfTagger::tag_of(int id) const {
  const int width = static_cast<int>(phrases_.size()) + 1;
  if (id < 0 || id >= 2 * width) throw std::invalid_argument("tag id out of range");
  editops::EditTag t;
  t.action = id / width == 0 ? editops::EditAction::kKeep : editops::EditAction::kDelete;
  int phrase = id % width;
  if (phrase > 0) t.insert_before = phrases_.phrases()[static_cast<std::size_t>(phrase - 1)].words;
  return t;
}

Example CrfTagger::make_example(std::span<const std::string> source, std::string id) const {
  Words slots(source.begin(), source.end());
  slots.push_back(vocab_.word(kEnd));
  return encode_example(vocab_, slots, nullptr, std::move(id));
}

std::vector<Var> CrfTagger::emissions(Graph& g, const Batch& batch) {
  const Index B = batch.size;
  Var x = dropout(embedding(g.param(*embedding_), batch.src), config_.dropout);
  std::vector<Real> mask = time_major_mask(batch.src_mask, B, batch.src_len);
  Var h = encoder_(g, x, B, mask);
  Var scores = emit_(g, dropout(numcore::tanh(hidden_(g, h)), config_.dropout));
  const int width = static_cast<int>(phrases_.size()) + 1;
  std::vector<Var> out;
  for (Index b = 0; b < B; ++b) {
    const int len = batch.src_lengths[static_cast<std::size_t>(b)];
    std::vector<int> rows(static_cast<std::size_t>(len));
    for (int t = 0; t < len; ++t) rows[static_cast<std::size_t>(t)] = static_cast<int>(t * B + b);
    Tensor forbid = Tensor::Zero(len, num_tags());
    forbid.row(len - 1).tail(width).setConstant(static_cast<Real>(-1e9));
    out.push_back(add(embedding(scores, rows), g.constant(std::move(forbid))));
  }
  return out;
}

Var CrfTagger::loss(Graph& g, const Batch& batch, std::span<const std::vector<int>> gold) {
  if (static_cast<Index>(gold.size()) != batch.size) {
    throw std::invalid_argument("one gold tag sequence per example");
  }
  std::vector<Var> em = emissions(g, batch);
  Var tr = transitions(g);
  std::vector<Var> parts;
  for (std::size_t b = 0; b < em.size(); ++b) parts.push_back(crf_nll(em[b], tr, gold[b]));
  return affine(sum(concat_rows(parts)), static_cast<Real>(1.0 / static_cast<double>(parts.size())), 0);
}

std::vector<editops::TagSequence> CrfTagger::predict_tags(const Batch& batch) {
  Graph g(GraphOptions{false});
  std::vector<Var> em = emissions(g, batch);
  const Tensor& tr = transitions(g).value();
  std::vector<editops::TagSequence> out;
  for (const Var& e : em) {
    ViterbiPath p = crf_viterbi(e.value(), tr);
    editops::TagSequence seq;
    for (int id : p.tags) seq.tags.push_back(tag_of(id));
    out.push_back(std::move(seq));
  }
  return out;
}

std::vector<Words> CrfTagger::predict(std::span<const Words> sources, std::size_t batch_size) {
  std::vector<Words> out;
  for (std::size_t start = 0; start < sources.size(); start += batch_size) {
    std::size_t end = std::min(sources.size(), start + batch_size);
    std::vector<Example> exs;
    for (std::size_t k = start; k < end; ++k) exs.push_back(make_example(sources[k]));
    Batch batch = make_batch(std::span<const Example>(exs), vocab_.size());
    auto tags = predict_tags(batch);
    for (std::size_t k = start; k < end; ++k) {
      out.push_back(editops::realize(sources[k], tags[k - start]));
    }
  }
  return out;
}

}  // namespace rephrase::models
