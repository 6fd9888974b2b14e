#include "rephrase/numcore/optim.h"

#include <algorithm>
#include <cmath>
#include <random>

namespace rephrase::numcore {

void adam_step(std::span<Parameter* const> params, AdamState& state) {
  for (Parameter* p : params) {
    if (!p->grad.allFinite()) throw NonFiniteGradient(p->name);
  }
  if (state.m.empty()) {
    for (Parameter* p : params) {
      state.m.push_back(Tensor::Zero(p->value.rows(), p->value.cols()));
      state.v.push_back(Tensor::Zero(p->value.rows(), p->value.cols()));
    }
  }
  if (state.m.size() != params.size()) throw std::invalid_argument("optimizer state mismatch");
  const AdamConfig& c = state.config;
  ++state.step;
  const double bc1 = 1 - std::pow(c.beta1, static_cast<double>(state.step));
  const double bc2 = 1 - std::pow(c.beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& p = *params[k];
    Tensor& m = state.m[k];
    Tensor& v = state.v[k];
    m = c.beta1 * m + (1 - c.beta1) * p.grad;
    v = c.beta2 * v + (1 - c.beta2) * p.grad.cwiseAbs2();
    if (c.weight_decay != 0) p.value *= static_cast<Real>(1 - c.lr * c.weight_decay);
    p.value.array() -=
        static_cast<Real>(c.lr) * (m.array() / bc1) / ((v.array() / bc2).sqrt() + static_cast<Real>(c.eps));
    p.grad.setZero();
  }
}

double clip_global_norm(std::span<Parameter* const> params, double max_norm) {
  double sq = 0;
  for (const Parameter* p : params) sq += static_cast<double>(p->grad.squaredNorm());
  double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0) {
    Real f = static_cast<Real>(max_norm / norm);
    for (Parameter* p : params) p->grad *= f;
  }
  return norm;
}

GradCheckResult grad_check(const std::function<Var(Graph&)>& loss_fn, std::span<Parameter* const> params,
                           const GradCheckOptions& opts) {
  auto eval = [&](bool track) {
    Graph g(GraphOptions{track, opts.training, opts.dropout_seed});
    Var loss = loss_fn(g);
    double value = static_cast<double>(loss.value()(0, 0));
    if (!std::isfinite(value)) throw std::runtime_error("grad_check: non-finite loss");
    if (track) g.backward(loss);
    return value;
  };

  for (Parameter* p : params) p->grad.setZero(p->value.rows(), p->value.cols());
  eval(true);
  std::vector<Tensor> analytic;
  for (Parameter* p : params) analytic.push_back(p->grad);

  GradCheckResult result;
  std::mt19937_64 rng(opts.seed);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& p = *params[k];
    std::vector<Index> coords;
    Index n = p.value.size();
    if (opts.coords_per_param == 0 || static_cast<Index>(opts.coords_per_param) >= n) {
      for (Index i = 0; i < n; ++i) coords.push_back(i);
    } else {
      for (std::size_t i = 0; i < opts.coords_per_param; ++i) {
        coords.push_back(static_cast<Index>(rng() % static_cast<std::uint64_t>(n)));
      }
    }
    for (Index i : coords) {
      Real saved = p.value.data()[i];
      p.value.data()[i] = saved + static_cast<Real>(opts.eps);
      double up = eval(false);
      p.value.data()[i] = saved - static_cast<Real>(opts.eps);
      double down = eval(false);
      p.value.data()[i] = saved;
      double numeric = (up - down) / (2 * opts.eps);
      double a = static_cast<double>(analytic[k].data()[i]);
      double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), opts.denom_floor});
      ++result.coords_checked;
      if (rel > result.max_rel_error) {
        result.max_rel_error = rel;
        result.worst_param = p.name;
        result.worst_analytic = a;
        result.worst_numeric = numeric;
      }
    }
  }
  for (Parameter* p : params) p->grad.setZero();
  return result;
}

}  // namespace rephrase::numcore
