#ifndef REPHRASE_NUMCORE_CHECKPOINT_H_
#define REPHRASE_NUMCORE_CHECKPOINT_H_

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "rephrase/numcore/tensor.h"

namespace rephrase::numcore {

inline constexpr int kCheckpointFormatVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::uint64_t fnv1a64(const std::string& bytes);

// A checkpoint directory holds params.bin (named little-endian float64
// tensors) and manifest.json (format version, config, config hash).
void save_checkpoint(const std::filesystem::path& dir, const ParameterSet& params,
                     const std::string& config_json);

// Loads every parameter of `params` by name with shape checks and returns
// the stored config JSON. Extra tensors in the file are an error.
std::string load_checkpoint(const std::filesystem::path& dir, ParameterSet& params);

// Reads only the config stored in a checkpoint manifest.
std::string read_checkpoint_config(const std::filesystem::path& dir);

}  // namespace rephrase::numcore

#endif  // REPHRASE_NUMCORE_CHECKPOINT_H_
