#pragma once

#include "mkp/training/losses.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace mkp {

struct GradCheckOptions {
  double eps = 1e-5;
  // Stores with more elements than this are checked on a seeded random
  // subsample of this many elements.
  std::size_t max_elements = 10000;
  std::uint64_t seed = 0;
  // 64-bit errors at or above this are re-differenced at extended precision.
  double refine_above = 1e-6;
};

struct ParameterGradError {
  std::string name;
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t checked = 0;
  std::size_t total = 0;
};

struct GradCheckReport {
  std::vector<ParameterGradError> parameters;
  double max_rel_error = 0.0;
  std::string worst_parameter;
  double loss = 0.0;
  std::size_t refined = 0;  // elements re-evaluated at extended precision

  std::string to_json() const;
};

template <typename S>
using LossBuilder = std::function<Var<S>(Graph<S>&)>;

// A scalar function of a parameter store, available at 64-bit and, reading
// an identically laid out store, at extended precision.
struct CheckedFunction {
  ParameterStore<double>* params = nullptr;
  LossBuilder<double> loss;
  ParameterStore<long double>* wide_params = nullptr;  // optional
  LossBuilder<long double> wide_loss;
};

ParameterStore<long double> widen(const ParameterStore<double>& params);

// Central differences (f(x + eps) - f(x - eps)) / 2eps against reverse-mode
// gradients, relative error |a - n| / max(1e-8, |a| + |n|). An element whose
// 64-bit difference disagrees by refine_above or more is re-differenced at
// extended precision when available, which separates genuine errors from
// rounding noise on near-zero gradients.
GradCheckReport grad_check(const CheckedFunction& f, const GradCheckOptions& options = {});

struct GradCheckBatch {
  std::span<const Triplet> triplets;
  std::span<const MatchingExample> matching;
};

// Sum of the selected batch-mean losses of a model in evaluation mode, with
// A_gt computed once and frozen.
GradCheckReport grad_check(Model<double>& model, const GradCheckBatch& batch, LossSelection terms,
                           const GradCheckOptions& options = {});

}  // namespace mkp
