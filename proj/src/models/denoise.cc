#include "rephrase/models/denoise.h"

#include <random>
#include <stdexcept>

#include "rephrase/numcore/tensor.h"

namespace rephrase::models {

Corrupted denoise_corrupt(std::span<const std::string> tokens, const CorruptionPolicy& policy,
                          std::uint64_t seed) {
  if (tokens.empty()) throw std::invalid_argument("cannot corrupt an empty sequence");
  if (policy.mask_prob < 0 || policy.mask_prob > 1) {
    throw std::invalid_argument("mask_prob must be in [0, 1]");
  }
  std::mt19937_64 rng(seed);
  Corrupted c;
  c.target.assign(tokens.begin(), tokens.end());
  bool in_span = false;
  for (const auto& tok : tokens) {
    bool masked = numcore::uniform01(rng) < policy.mask_prob;
    if (!masked) {
      c.input.push_back(tok);
      in_span = false;
      continue;
    }
    if (!policy.span_infill || !in_span) c.input.push_back(kMaskWord);
    in_span = true;
  }
  return c;
}

}  // namespace rephrase::models
