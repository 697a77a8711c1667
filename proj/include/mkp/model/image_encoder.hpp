#pragma once

#include "mkp/model/layers.hpp"

namespace mkp {

template <typename S>
struct ImageEncoderWeights {
  Parameter<S>* weight = nullptr;  // 512 x d1
  Parameter<S>* bias = nullptr;    // 1 x d1

  static void declare(ParameterStore<S>& store, int d1, double range, std::mt19937_64& rng);
  static ImageEncoderWeights bind(ParameterStore<S>& store);
};

// H_I = raw W + b, one row per grid cell (row r is cell (r / 7, r % 7)).
template <typename S>
Var<S> project_image(Graph<S>& g, const ImageEncoderWeights<S>& w, const FeatureGrid& raw);

}  // namespace mkp
