#pragma once

// Building blocks shared by the model modules.

#include "mkp/autodiff/ops.hpp"

#include <random>
#include <string>

namespace mkp {

// Training mode enables dropout; evaluation mode is deterministic.
struct ForwardContext {
  bool training = false;
  double dropout = 0.0;
  std::mt19937_64* rng = nullptr;
};

// Inverted dropout; identity outside training.
template <typename S>
Var<S> dropout(Var<S> x, const ForwardContext& ctx);

// GRU with gates ordered [update | reset | candidate] in the packed weights:
//   z = sigmoid(x Wz + bz + h Uz + cz)
//   r = sigmoid(x Wr + br + h Ur + cr)
//   n = tanh(x Wn + bn + r * (h Un + cn))
//   h' = (1 - z) * n + z * h
template <typename S>
struct GruWeights {
  Parameter<S>* input = nullptr;       // in x 3h
  Parameter<S>* recurrent = nullptr;   // h x 3h
  Parameter<S>* input_bias = nullptr;  // 1 x 3h
  Parameter<S>* recurrent_bias = nullptr;
  int hidden = 0;

  static void declare(ParameterStore<S>& store, const std::string& prefix, int in, int hidden,
                      double range, std::mt19937_64& rng);
  static GruWeights bind(ParameterStore<S>& store, const std::string& prefix);
};

// One step given the precomputed input projection x Wx + bx (1 x 3h).
template <typename S>
Var<S> gru_step(Graph<S>& g, const GruWeights<S>& w, Var<S> input_projection, Var<S> hidden);

// Convenience: full step from the raw input row.
template <typename S>
Var<S> gru_cell(Graph<S>& g, const GruWeights<S>& w, Var<S> x, Var<S> hidden);

template <typename S>
struct MultiHeadWeights {
  Parameter<S>* wq = nullptr;
  Parameter<S>* bq = nullptr;
  Parameter<S>* wk = nullptr;
  Parameter<S>* bk = nullptr;
  Parameter<S>* wv = nullptr;
  Parameter<S>* bv = nullptr;
  Parameter<S>* wo = nullptr;
  Parameter<S>* bo = nullptr;
  int heads = 1;

  static void declare(ParameterStore<S>& store, const std::string& prefix, int dim, double range,
                      std::mt19937_64& rng);
  static MultiHeadWeights bind(ParameterStore<S>& store, const std::string& prefix, int heads);
};

// Scaled dot-product attention per head on projected query/keys/values,
// heads concatenated and output-projected. query is 1 x d, keys/values n x d.
template <typename S>
Var<S> multihead_cross_attention(Graph<S>& g, const MultiHeadWeights<S>& w, Var<S> query,
                                 Var<S> keys, Var<S> values);

// x W + b with b broadcast over rows; b may be null.
template <typename S>
Var<S> affine(Graph<S>& g, Var<S> x, Parameter<S>& w, Parameter<S>* b);

}  // namespace mkp
