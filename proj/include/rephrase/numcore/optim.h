#ifndef REPHRASE_NUMCORE_OPTIM_H_
#define REPHRASE_NUMCORE_OPTIM_H_

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rephrase/numcore/graph.h"

namespace rephrase::numcore {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;  // decoupled, scaled by lr
};

struct AdamState {
  AdamConfig config;
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::int64_t step = 0;
};

class NonFiniteGradient : public std::runtime_error {
 public:
  explicit NonFiniteGradient(const std::string& param)
      : std::runtime_error("non-finite gradient in " + param), param_(param) {}
  const std::string& param() const { return param_; }

 private:
  std::string param_;
};

// One Adam update with bias correction. Throws NonFiniteGradient before
// touching any value if a gradient holds NaN or Inf. Gradients are zeroed
// after the update.
void adam_step(std::span<Parameter* const> params, AdamState& state);

// Rescales gradients so their global L2 norm is at most max_norm.
// Returns the norm before clipping.
double clip_global_norm(std::span<Parameter* const> params, double max_norm);

struct GradCheckOptions {
  double eps = 1e-5;
  std::size_t coords_per_param = 6;  // 0 checks every coordinate
  std::uint64_t seed = 1;
  bool training = false;  // dropout on, with a frozen mask
  std::uint64_t dropout_seed = 7;
  // Denominator floor; keeps roundoff in (L(x+e)-L(x-e))/2e from dominating
  // coordinates whose true gradient is near zero.
  double denom_floor = 1e-6;
};

struct GradCheckResult {
  double max_rel_error = 0;
  std::string worst_param;
  double worst_analytic = 0;
  double worst_numeric = 0;
  std::size_t coords_checked = 0;
};

// Compares backprop gradients to central differences. The loss builder is
// called on a fresh graph each time so dropout masks stay identical.
// Relative error is |a - n| / max(|a|, |n|, denom_floor).
GradCheckResult grad_check(const std::function<Var(Graph&)>& loss_fn, std::span<Parameter* const> params,
                           const GradCheckOptions& opts = {});

}  // namespace rephrase::numcore

#endif  // REPHRASE_NUMCORE_OPTIM_H_
