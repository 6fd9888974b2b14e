#include "rephrase/numcore/tensor.h"

#include <cmath>
#include <stdexcept>

namespace rephrase::numcore {

std::string shape_string(const Tensor& t) {
  return "[" + std::to_string(t.rows()) + ", " + std::to_string(t.cols()) + "]";
}

Parameter& ParameterSet::add(std::string name, Index rows, Index cols, Init init, std::mt19937_64& rng,
                             double scale) {
  if (find(name) != nullptr) throw std::invalid_argument("duplicate parameter " + name);
  auto p = std::make_unique<Parameter>();
  p->name = std::move(name);
  p->value.resize(rows, cols);
  p->grad = Tensor::Zero(rows, cols);
  switch (init) {
    case Init::kZeros:
      p->value.setZero();
      break;
    case Init::kOnes:
      p->value.setOnes();
      break;
    case Init::kXavier: {
      double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
      for (Index k = 0; k < p->value.size(); ++k) {
        p->value.data()[k] = static_cast<Real>((2 * uniform01(rng) - 1) * bound);
      }
      break;
    }
    case Init::kNormal: {
      std::normal_distribution<double> nd(0.0, scale);
      for (Index k = 0; k < p->value.size(); ++k) p->value.data()[k] = static_cast<Real>(nd(rng));
      break;
    }
  }
  params_.push_back(std::move(p));
  return *params_.back();
}

Parameter* ParameterSet::find(const std::string& name) {
  for (auto& p : params_) {
    if (p->name == name) return p.get();
  }
  return nullptr;
}

const Parameter* ParameterSet::find(const std::string& name) const {
  for (const auto& p : params_) {
    if (p->name == name) return p.get();
  }
  return nullptr;
}

Parameter& ParameterSet::at(const std::string& name) {
  Parameter* p = find(name);
  if (p == nullptr) throw std::out_of_range("no parameter named " + name);
  return *p;
}

std::vector<Parameter*> ParameterSet::all() {
  std::vector<Parameter*> out;
  out.reserve(params_.size());
  for (auto& p : params_) out.push_back(p.get());
  return out;
}

std::vector<const Parameter*> ParameterSet::all() const {
  std::vector<const Parameter*> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.get());
  return out;
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p->value.size());
  return n;
}

void ParameterSet::zero_grad() {
  for (auto& p : params_) p->grad.setZero(p->value.rows(), p->value.cols());
}

std::vector<Tensor> ParameterSet::snapshot() const {
  std::vector<Tensor> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p->value);
  return out;
}

void ParameterSet::restore(const std::vector<Tensor>& values) {
  if (values.size() != params_.size()) throw std::invalid_argument("snapshot size mismatch");
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (values[k].rows() != params_[k]->value.rows() || values[k].cols() != params_[k]->value.cols()) {
      throw std::invalid_argument("snapshot shape mismatch for " + params_[k]->name);
    }
    params_[k]->value = values[k];
  }
}

}  // namespace rephrase::numcore
