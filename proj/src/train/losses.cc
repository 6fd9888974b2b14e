#include "rephrase/train/losses.h"

#include <algorithm>
#include <stdexcept>

namespace rephrase::train {

using numcore::Index;
using numcore::Real;
using numcore::Tensor;

void CopyLossConfig::validate() const {
  if (!(lambda >= 0)) throw std::invalid_argument("copy loss lambda must be >= 0");
  if (!(threshold > 0 && threshold <= 1)) {
    throw std::invalid_argument("copy loss threshold must be in (0, 1]");
  }
}

nlohmann::json CopyLossConfig::to_json() const {
  return {{"lambda", lambda}, {"threshold", threshold}, {"hinge_on_alpha_only", hinge_on_alpha_only}};
}

CopyLossConfig CopyLossConfig::from_json(const nlohmann::json& j) {
  CopyLossConfig c;
  c.lambda = j.value("lambda", c.lambda);
  c.threshold = j.value("threshold", c.threshold);
  c.hinge_on_alpha_only = j.value("hinge_on_alpha_only", c.hinge_on_alpha_only);
  c.validate();
  return c;
}

double hinge_term(double p, const CopyLossConfig& cfg) {
  return cfg.lambda * std::max(cfg.threshold - p, 0.0);
}

Var nll_loss(const Mixture& mix, const Batch& batch, std::int64_t* clamped) {
  return numcore::cross_entropy(mix.p_output, batch.tgt_out, batch.tgt_mask, clamped);
}

CopyTerms copy_terms(Graph& g, const Mixture& mix, const Batch& batch, bool alpha_only) {
  Index rows = batch.tgt_len * batch.size;
  CopyTerms out;
  out.copiable = Tensor::Zero(rows, 1);
  Tensor select = Tensor::Zero(rows, batch.src_len);
  for (Index r = 0; r < rows; ++r) {
    auto ur = static_cast<std::size_t>(r);
    if (batch.tgt_mask[ur] == 0) continue;
    Index b = r % batch.size;
    int y = batch.tgt_out[ur];
    if (y == models::kEnd || y == models::kUnk) continue;
    for (Index s = 0; s < batch.src_len; ++s) {
      auto k = static_cast<std::size_t>(b * batch.src_len + s);
      if (batch.src_mask[k] != 0 && batch.src_ext[k] == y) {
        select(r, s) = 1;
        out.copiable(r, 0) = 1;
      }
    }
  }
  if (!mix.alpha.valid()) return out;
  if (alpha_only) {
    out.p = mix.alpha;
  } else {
    Var mass = numcore::matmul(numcore::mul(mix.p_copy, g.constant(std::move(select))),
                               g.constant(Tensor::Ones(batch.src_len, 1)));
    out.p = numcore::mul(mix.alpha, mass);
  }
  return out;
}

Var copy_hinge_loss(Graph& g, const Mixture& mix, const Batch& batch, const CopyLossConfig& cfg) {
  cfg.validate();
  CopyTerms t = copy_terms(g, mix, batch, cfg.hinge_on_alpha_only);
  if (!t.p.valid() || cfg.lambda == 0) return g.constant(Tensor::Zero(1, 1));
  Var gap = numcore::relu(numcore::affine(t.p, -1, static_cast<Real>(cfg.threshold)));
  Var masked = numcore::mul(gap, g.constant(std::move(t.copiable)));
  return numcore::affine(numcore::sum(masked), static_cast<Real>(cfg.lambda), 0);
}

}  // namespace rephrase::train
