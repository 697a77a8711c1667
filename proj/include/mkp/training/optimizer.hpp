#pragma once

#include "mkp/autodiff/parameters.hpp"

#include <vector>

namespace mkp {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Bias-corrected Adam over every parameter of a store.
template <typename S>
class Adam {
 public:
  Adam(const ParameterStore<S>& store, AdamConfig config);

  void step(ParameterStore<S>& store);
  long steps() const { return t_; }

 private:
  AdamConfig config_;
  std::vector<Matrix<S>> m_, v_;
  long t_ = 0;
};

// Rescales gradients so their global L2 norm is at most max_norm. Returns the
// norm before clipping.
template <typename S>
S clip_grad_norm(ParameterStore<S>& store, S max_norm);

}  // namespace mkp
