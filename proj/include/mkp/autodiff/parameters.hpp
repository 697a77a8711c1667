#pragma once

#include "mkp/core/types.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace mkp {

// A learnable tensor with its gradient accumulator.
template <typename Scalar>
struct Parameter {
  std::string name;
  Matrix<Scalar> value;
  Matrix<Scalar> grad;

  Eigen::Index size() const { return value.size(); }
};

// Owns every learnable tensor of a model, addressable by name. Insertion
// order is stable and defines checkpoint and optimizer ordering.
template <typename Scalar>
class ParameterStore {
 public:
  ParameterStore() = default;
  ParameterStore(const ParameterStore& other);
  ParameterStore& operator=(const ParameterStore& other);
  ParameterStore(ParameterStore&&) noexcept = default;
  ParameterStore& operator=(ParameterStore&&) noexcept = default;

  // Registers a zero-initialized parameter. Names must be unique.
  Parameter<Scalar>& add(const std::string& name, Eigen::Index rows, Eigen::Index cols);

  // Registers a parameter drawn from uniform(-range, range).
  Parameter<Scalar>& add_uniform(const std::string& name, Eigen::Index rows, Eigen::Index cols,
                                 double range, std::mt19937_64& rng);

  Parameter<Scalar>& get(const std::string& name);
  const Parameter<Scalar>& get(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  std::size_t size() const { return params_.size(); }
  Parameter<Scalar>& operator[](std::size_t i) { return *params_[i]; }
  const Parameter<Scalar>& operator[](std::size_t i) const { return *params_[i]; }

  Eigen::Index num_elements() const;
  void zero_grad();
  // Global L2 norm over all gradients.
  Scalar grad_norm() const;
  void scale_grad(Scalar factor);

 private:
  std::vector<std::unique_ptr<Parameter<Scalar>>> params_;
  std::map<std::string, std::size_t> index_;
};

}  // namespace mkp
