#ifndef REPHRASE_NUMCORE_TENSOR_H_
#define REPHRASE_NUMCORE_TENSOR_H_

#include <Eigen/Core>
#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace rephrase::numcore {

#ifdef REPHRASE_FLOAT32
using Real = float;
#else
using Real = double;
#endif

// Dense rank-2 array. Vectors are 1 x n or n x 1 tensors.
using Tensor = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Index = Eigen::Index;

inline std::vector<Index> shape_of(const Tensor& t) { return {t.rows(), t.cols()}; }
std::string shape_string(const Tensor& t);

struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;  // same shape as value
};

enum class Init { kZeros, kOnes, kXavier, kNormal };

// Owns parameters at stable addresses; order of registration is the
// canonical order for checkpoints and optimizer state.
class ParameterSet {
 public:
  ParameterSet() = default;
  ParameterSet(const ParameterSet&) = delete;
  ParameterSet& operator=(const ParameterSet&) = delete;
  ParameterSet(ParameterSet&&) = default;
  ParameterSet& operator=(ParameterSet&&) = default;

  Parameter& add(std::string name, Index rows, Index cols, Init init, std::mt19937_64& rng,
                 double scale = 0.1);

  Parameter* find(const std::string& name);
  const Parameter* find(const std::string& name) const;
  Parameter& at(const std::string& name);

  std::vector<Parameter*> all();
  std::vector<const Parameter*> all() const;
  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;

  void zero_grad();

  std::vector<Tensor> snapshot() const;
  void restore(const std::vector<Tensor>& values);

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
};

// Uniform real in [0, 1) from the top 53 bits of the generator.
inline double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace rephrase::numcore

#endif  // REPHRASE_NUMCORE_TENSOR_H_
