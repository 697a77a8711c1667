#pragma once

#include "mkp/model/text_encoder.hpp"

namespace mkp {

template <typename S>
struct NoiseFilterWeights {
  MultiHeadWeights<S> attention;
  Parameter<S>* fc_weight = nullptr;    // d1 x 1
  Parameter<S>* fc_bias = nullptr;      // 1 x 1
  Parameter<S>* text_proj = nullptr;    // W_T: d1 x d2
  Parameter<S>* region_proj = nullptr;  // W_Ishared: d1 x d2
  Parameter<S>* ffn1_weight = nullptr;  // 49 x h
  Parameter<S>* ffn1_bias = nullptr;
  Parameter<S>* ffn2_weight = nullptr;  // h x 49
  Parameter<S>* ffn2_bias = nullptr;

  static void declare(ParameterStore<S>& store, int d1, int d2, int d_ffn, double range,
                      std::mt19937_64& rng);
  static NoiseFilterWeights bind(ParameterStore<S>& store, int heads);
};

template <typename S>
struct MatchResult {
  Var<S> H_c;  // 1 x d1
  Var<S> s_c;  // 1 x 1, in (0, 1)
};

template <typename S>
struct CorrelationState {
  Var<S> text;     // 1 x d2
  Var<S> regions;  // 49 x d2
  Var<S> A;        // 1 x 49, entry l is grid cell (l / 7, l % 7)
};

template <typename S>
struct FilteredImage {
  Var<S> H;     // 49 x d1
  Var<S> gate;  // 1 x 49
};

struct CorrelationOptions {
  bool smoothing = true;    // add s_c to every raw score
  bool ffn_bypass = false;  // FFN acts as identity
};

// H_c = MHA(M_T, H_I, H_I); s_c = sigmoid(clamp(fc(H_c), +-logit_clamp)).
template <typename S>
MatchResult<S> match_score(Graph<S>& g, const NoiseFilterWeights<S>& w, Var<S> M_T, Var<S> H_I,
                           S logit_clamp = S(30));

// raw_l = <M_T W_T, (H_I W_Ishared)_l> / sqrt(d2) + s_c, A = FFN(raw).
template <typename S>
CorrelationState<S> correlation_scores(Graph<S>& g, const NoiseFilterWeights<S>& w, Var<S> M_T,
                                       Var<S> H_I, Var<S> s_c, CorrelationOptions opts = {});

// Row r of H_I scaled by sigmoid(A_r).
template <typename S>
FilteredImage<S> filter_image(Var<S> A, Var<S> H_I);

// Correlation target: the gold keyphrases encoded as text and scored against
// the same regions with the same parameters. Evaluated without gradients.
template <typename S>
Matrix<S> gt_correlation_scores(const std::vector<Words>& keyphrases, const Vocabulary& vocab,
                                const TextEncoderWeights<S>& text, const NoiseFilterWeights<S>& w,
                                const Matrix<S>& H_I, S s_c, CorrelationOptions opts,
                                std::size_t max_len = kDefaultMaxInputLength,
                                TextLayout layout = {});

}  // namespace mkp
