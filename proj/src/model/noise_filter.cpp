#include "mkp/model/noise_filter.hpp"

#include "mkp/core/error.hpp"

#include <cmath>

namespace mkp {

template <typename S>
void NoiseFilterWeights<S>::declare(ParameterStore<S>& store, int d1, int d2, int d_ffn,
                                    double range, std::mt19937_64& rng) {
  MultiHeadWeights<S>::declare(store, "filter.attention", d1, range, rng);
  store.add_uniform("filter.fc_weight", d1, 1, range, rng);
  store.add_uniform("filter.fc_bias", 1, 1, range, rng);
  store.add_uniform("filter.text_proj", d1, d2, range, rng);
  store.add_uniform("filter.region_proj", d1, d2, range, rng);
  store.add_uniform("filter.ffn1_weight", kGridRegions, d_ffn, range, rng);
  store.add_uniform("filter.ffn1_bias", 1, d_ffn, range, rng);
  store.add_uniform("filter.ffn2_weight", d_ffn, kGridRegions, range, rng);
  store.add_uniform("filter.ffn2_bias", 1, kGridRegions, range, rng);
}

template <typename S>
NoiseFilterWeights<S> NoiseFilterWeights<S>::bind(ParameterStore<S>& store, int heads) {
  NoiseFilterWeights w;
  w.attention = MultiHeadWeights<S>::bind(store, "filter.attention", heads);
  w.fc_weight = &store.get("filter.fc_weight");
  w.fc_bias = &store.get("filter.fc_bias");
  w.text_proj = &store.get("filter.text_proj");
  w.region_proj = &store.get("filter.region_proj");
  w.ffn1_weight = &store.get("filter.ffn1_weight");
  w.ffn1_bias = &store.get("filter.ffn1_bias");
  w.ffn2_weight = &store.get("filter.ffn2_weight");
  w.ffn2_bias = &store.get("filter.ffn2_bias");
  return w;
}

template <typename S>
MatchResult<S> match_score(Graph<S>& g, const NoiseFilterWeights<S>& w, Var<S> M_T, Var<S> H_I,
                           S logit_clamp) {
  Var<S> H_c = multihead_cross_attention(g, w.attention, M_T, H_I, H_I);
  Var<S> logit = affine(g, H_c, *w.fc_weight, w.fc_bias);
  return {H_c, sigmoid(clamp(logit, -logit_clamp, logit_clamp))};
}

template <typename S>
CorrelationState<S> correlation_scores(Graph<S>& g, const NoiseFilterWeights<S>& w, Var<S> M_T,
                                       Var<S> H_I, Var<S> s_c, CorrelationOptions opts) {
  if (H_I.rows() != kGridRegions) throw ShapeError("correlation_scores: expected 49 regions");
  if (s_c.rows() != 1 || s_c.cols() != 1) throw ShapeError("correlation_scores: s_c not scalar");
  if (!std::isfinite(static_cast<double>(s_c.scalar()))) {
    throw NumericError("correlation_scores: non-finite matching score");
  }
  Var<S> text = M_T * g.parameter(*w.text_proj);
  Var<S> regions = H_I * g.parameter(*w.region_proj);
  const S inv_sqrt = S(1) / std::sqrt(static_cast<S>(text.cols()));
  Var<S> raw = scale(text * transpose(regions), inv_sqrt);
  if (opts.smoothing) raw = add_scalar(raw, s_c);
  if (opts.ffn_bypass) return {text, regions, raw};
  Var<S> hidden = tanh(affine(g, raw, *w.ffn1_weight, w.ffn1_bias));
  return {text, regions, affine(g, hidden, *w.ffn2_weight, w.ffn2_bias)};
}

template <typename S>
FilteredImage<S> filter_image(Var<S> A, Var<S> H_I) {
  if (A.rows() != 1 || A.cols() != H_I.rows()) {
    throw ShapeError("filter_image: one score per region required");
  }
  Var<S> gate = sigmoid(A);
  return {scale_rows(H_I, transpose(gate)), gate};
}

template <typename S>
Matrix<S> gt_correlation_scores(const std::vector<Words>& keyphrases, const Vocabulary& vocab,
                                const TextEncoderWeights<S>& text, const NoiseFilterWeights<S>& w,
                                const Matrix<S>& H_I, S s_c, CorrelationOptions opts,
                                std::size_t max_len, TextLayout layout) {
  const EncodedInput target = keyphrase_input(keyphrases, vocab, max_len, layout);
  Graph<S> g(false);
  TextEncoding<S> enc = encode_text(g, text, embed(g, text, target));
  Var<S> sc = g.constant(Matrix<S>::Constant(1, 1, s_c));
  return correlation_scores(g, w, enc.M, g.constant(H_I), sc, opts).A.value();
}

#define MKP_INSTANTIATE_FILTER(S)                                                              \
  template struct NoiseFilterWeights<S>;                                                       \
  template MatchResult<S> match_score(Graph<S>&, const NoiseFilterWeights<S>&, Var<S>, Var<S>, \
                                      S);                                                      \
  template CorrelationState<S> correlation_scores(Graph<S>&, const NoiseFilterWeights<S>&,     \
                                                  Var<S>, Var<S>, Var<S>, CorrelationOptions); \
  template FilteredImage<S> filter_image(Var<S>, Var<S>);                                      \
  template Matrix<S> gt_correlation_scores(const std::vector<Words>&, const Vocabulary&,       \
                                           const TextEncoderWeights<S>&,                       \
                                           const NoiseFilterWeights<S>&, const Matrix<S>&, S,  \
                                           CorrelationOptions, std::size_t, TextLayout);

MKP_INSTANTIATE_FILTER(float)
MKP_INSTANTIATE_FILTER(double)
MKP_INSTANTIATE_FILTER(long double)

}  // namespace mkp
