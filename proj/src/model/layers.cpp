#include "mkp/model/layers.hpp"

#include "mkp/core/error.hpp"

#include <cmath>

namespace mkp {

template <typename S>
Var<S> dropout(Var<S> x, const ForwardContext& ctx) {
  if (!ctx.training || ctx.dropout <= 0.0) return x;
  if (!ctx.rng) throw ConfigError("dropout needs a random generator in training mode");
  std::bernoulli_distribution keep(1.0 - ctx.dropout);
  const S scale = S(1) / static_cast<S>(1.0 - ctx.dropout);
  Matrix<S> mask(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = keep(*ctx.rng) ? scale : S(0);
  return cmul_const(x, mask);
}

template <typename S>
void GruWeights<S>::declare(ParameterStore<S>& store, const std::string& prefix, int in,
                            int hidden, double range, std::mt19937_64& rng) {
  store.add_uniform(prefix + ".input", in, 3 * hidden, range, rng);
  store.add_uniform(prefix + ".recurrent", hidden, 3 * hidden, range, rng);
  store.add_uniform(prefix + ".input_bias", 1, 3 * hidden, range, rng);
  store.add_uniform(prefix + ".recurrent_bias", 1, 3 * hidden, range, rng);
}

template <typename S>
GruWeights<S> GruWeights<S>::bind(ParameterStore<S>& store, const std::string& prefix) {
  GruWeights w;
  w.input = &store.get(prefix + ".input");
  w.recurrent = &store.get(prefix + ".recurrent");
  w.input_bias = &store.get(prefix + ".input_bias");
  w.recurrent_bias = &store.get(prefix + ".recurrent_bias");
  w.hidden = static_cast<int>(w.recurrent->value.rows());
  return w;
}

template <typename S>
Var<S> gru_step(Graph<S>& g, const GruWeights<S>& w, Var<S> input_projection, Var<S> hidden) {
  const Eigen::Index h = w.hidden;
  if (hidden.cols() != h || input_projection.cols() != 3 * h) {
    throw ShapeError("gru_step: state or projection width mismatch");
  }
  Var<S> rec = add(hidden * g.parameter(*w.recurrent), g.parameter(*w.recurrent_bias));
  Var<S> z = sigmoid(add(slice_cols(input_projection, 0, h), slice_cols(rec, 0, h)));
  Var<S> r = sigmoid(add(slice_cols(input_projection, h, h), slice_cols(rec, h, h)));
  Var<S> n = tanh(add(slice_cols(input_projection, 2 * h, h), cmul(r, slice_cols(rec, 2 * h, h))));
  // (1 - z) * n + z * h  ==  n + z * (h - n)
  return add(n, cmul(z, sub(hidden, n)));
}

template <typename S>
Var<S> gru_cell(Graph<S>& g, const GruWeights<S>& w, Var<S> x, Var<S> hidden) {
  Var<S> proj = add(x * g.parameter(*w.input), g.parameter(*w.input_bias));
  return gru_step(g, w, proj, hidden);
}

template <typename S>
void MultiHeadWeights<S>::declare(ParameterStore<S>& store, const std::string& prefix, int dim,
                                  double range, std::mt19937_64& rng) {
  for (const char* m : {"q", "k", "v", "o"}) {
    store.add_uniform(prefix + ".w" + m, dim, dim, range, rng);
    store.add_uniform(prefix + ".b" + m, 1, dim, range, rng);
  }
}

template <typename S>
MultiHeadWeights<S> MultiHeadWeights<S>::bind(ParameterStore<S>& store, const std::string& prefix,
                                              int heads) {
  MultiHeadWeights w;
  w.wq = &store.get(prefix + ".wq");
  w.bq = &store.get(prefix + ".bq");
  w.wk = &store.get(prefix + ".wk");
  w.bk = &store.get(prefix + ".bk");
  w.wv = &store.get(prefix + ".wv");
  w.bv = &store.get(prefix + ".bv");
  w.wo = &store.get(prefix + ".wo");
  w.bo = &store.get(prefix + ".bo");
  w.heads = heads;
  return w;
}

template <typename S>
Var<S> affine(Graph<S>& g, Var<S> x, Parameter<S>& w, Parameter<S>* b) {
  Var<S> y = x * g.parameter(w);
  return b ? add_row(y, g.parameter(*b)) : y;
}

template <typename S>
Var<S> multihead_cross_attention(Graph<S>& g, const MultiHeadWeights<S>& w, Var<S> query,
                                 Var<S> keys, Var<S> values) {
  const Eigen::Index d = w.wq->value.rows();
  if (w.heads <= 0 || d % w.heads != 0) {
    throw ConfigError("multihead attention: width " + std::to_string(d) +
                      " not divisible by " + std::to_string(w.heads) + " heads");
  }
  if (query.rows() != 1 || query.cols() != d || keys.cols() != d || values.cols() != d ||
      keys.rows() != values.rows() || keys.rows() == 0) {
    throw ShapeError("multihead attention: query/keys/values shapes disagree");
  }
  const Eigen::Index head = d / w.heads;
  Var<S> q = affine(g, query, *w.wq, w.bq);
  Var<S> k = affine(g, keys, *w.wk, w.bk);
  Var<S> v = affine(g, values, *w.wv, w.bv);
  const S inv_sqrt = S(1) / std::sqrt(static_cast<S>(head));
  std::vector<Var<S>> outs;
  outs.reserve(static_cast<std::size_t>(w.heads));
  for (int hd = 0; hd < w.heads; ++hd) {
    Var<S> qh = slice_cols(q, hd * head, head);
    Var<S> kh = slice_cols(k, hd * head, head);
    Var<S> vh = slice_cols(v, hd * head, head);
    Var<S> weights = softmax(scale(qh * transpose(kh), inv_sqrt));
    outs.push_back(weights * vh);
  }
  Var<S> joined = w.heads == 1 ? outs.front() : concat_cols(outs);
  return affine(g, joined, *w.wo, w.bo);
}

#define MKP_INSTANTIATE_LAYERS(S)                                                            \
  template Var<S> dropout(Var<S>, const ForwardContext&);                                    \
  template struct GruWeights<S>;                                                             \
  template struct MultiHeadWeights<S>;                                                       \
  template Var<S> gru_step(Graph<S>&, const GruWeights<S>&, Var<S>, Var<S>);                 \
  template Var<S> gru_cell(Graph<S>&, const GruWeights<S>&, Var<S>, Var<S>);                 \
  template Var<S> multihead_cross_attention(Graph<S>&, const MultiHeadWeights<S>&, Var<S>,   \
                                            Var<S>, Var<S>);                                 \
  template Var<S> affine(Graph<S>&, Var<S>, Parameter<S>&, Parameter<S>*);

MKP_INSTANTIATE_LAYERS(float)
MKP_INSTANTIATE_LAYERS(double)
MKP_INSTANTIATE_LAYERS(long double)

}  // namespace mkp
