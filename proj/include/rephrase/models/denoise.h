#ifndef REPHRASE_MODELS_DENOISE_H_
#define REPHRASE_MODELS_DENOISE_H_

#include <cstdint>
#include <span>

#include "rephrase/text.h"

namespace rephrase::models {

struct CorruptionPolicy {
  double mask_prob = 0.15;
  bool span_infill = true;  // a run of masked tokens becomes one mask symbol
};

struct Corrupted {
  Words input;
  Words target;
};

inline constexpr const char* kMaskWord = "<mask>";

// Masks each token independently with probability mask_prob.
Corrupted denoise_corrupt(std::span<const std::string> tokens, const CorruptionPolicy& policy,
                          std::uint64_t seed);

}  // namespace rephrase::models

#endif  // REPHRASE_MODELS_DENOISE_H_
