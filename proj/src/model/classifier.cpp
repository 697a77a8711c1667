#include "mkp/model/classifier.hpp"

#include "mkp/core/error.hpp"
#include "mkp/data/text.hpp"

#include <algorithm>
#include <numeric>

namespace mkp {

LabelSet LabelSet::build(const std::vector<MultiModalSample>& training) {
  std::vector<Words> phrases;
  for (const auto& s : training) phrases.insert(phrases.end(), s.keyphrases.begin(), s.keyphrases.end());
  return from_phrases(std::move(phrases));
}

LabelSet LabelSet::from_phrases(std::vector<Words> phrases) {
  canonicalize_keyphrases(phrases);
  LabelSet set;
  set.phrases_ = std::move(phrases);
  for (std::size_t i = 0; i < set.phrases_.size(); ++i) {
    set.index_.emplace(join(set.phrases_[i]), static_cast<int>(i));
  }
  return set;
}

std::optional<int> LabelSet::find(const Words& phrase) const {
  auto it = index_.find(join(phrase));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

template <typename S>
void ClassifierWeights<S>::declare(ParameterStore<S>& store, int d1, int d_mlp, int num_labels,
                                   double range, std::mt19937_64& rng) {
  MultiHeadWeights<S>::declare(store, "cls.attention", d1, range, rng);
  store.add_uniform("cls.ffn1_weight", d1, 2 * d1, range, rng);
  store.add_uniform("cls.ffn1_bias", 1, 2 * d1, range, rng);
  store.add_uniform("cls.ffn2_weight", 2 * d1, d1, range, rng);
  store.add_uniform("cls.ffn2_bias", 1, d1, range, rng);
  store.add_uniform("cls.mlp1_weight", d1, d_mlp, range, rng);
  store.add_uniform("cls.mlp1_bias", 1, d_mlp, range, rng);
  store.add_uniform("cls.mlp2_weight", d_mlp, num_labels, range, rng);
  store.add_uniform("cls.mlp2_bias", 1, num_labels, range, rng);
}

template <typename S>
ClassifierWeights<S> ClassifierWeights<S>::bind(ParameterStore<S>& store, int heads) {
  ClassifierWeights w;
  w.attention = MultiHeadWeights<S>::bind(store, "cls.attention", heads);
  w.ffn1_weight = &store.get("cls.ffn1_weight");
  w.ffn1_bias = &store.get("cls.ffn1_bias");
  w.ffn2_weight = &store.get("cls.ffn2_weight");
  w.ffn2_bias = &store.get("cls.ffn2_bias");
  w.mlp1_weight = &store.get("cls.mlp1_weight");
  w.mlp1_bias = &store.get("cls.mlp1_bias");
  w.mlp2_weight = &store.get("cls.mlp2_weight");
  w.mlp2_bias = &store.get("cls.mlp2_bias");
  return w;
}

template <typename S>
Var<S> fuse(Graph<S>& g, const ClassifierWeights<S>& w, Var<S> M_T, Var<S> H_filtered,
            S layernorm_eps) {
  Var<S> x = multihead_cross_attention(g, w.attention, M_T, H_filtered, H_filtered);
  Var<S> hidden = relu(affine(g, x, *w.ffn1_weight, w.ffn1_bias));
  Var<S> ffn = affine(g, hidden, *w.ffn2_weight, w.ffn2_bias);
  return layernorm(add(x, ffn), layernorm_eps);
}

template <typename S>
Var<S> classifier_logits(Graph<S>& g, const ClassifierWeights<S>& w, Var<S> H_f) {
  Var<S> hidden = relu(affine(g, H_f, *w.mlp1_weight, w.mlp1_bias));
  return affine(g, hidden, *w.mlp2_weight, w.mlp2_bias);
}

std::vector<int> top_k_indices(const Eigen::Ref<const Eigen::RowVectorXd>& scores, int k) {
  if (k < 1) throw ConfigError("top-k needs k >= 1");
  std::vector<int> order(static_cast<std::size_t>(scores.size()));
  std::iota(order.begin(), order.end(), 0);
  const auto take = std::min<std::size_t>(static_cast<std::size_t>(k), order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(),
                    [&](int a, int b) {
                      if (scores(a) != scores(b)) return scores(a) > scores(b);
                      return a < b;
                    });
  order.resize(take);
  return order;
}

template <typename S>
TopKPredictions<S> top_k_predictions(Var<S> logits, const LabelSet& labels, int k) {
  if (logits.rows() != 1 || logits.cols() != labels.size()) {
    throw ShapeError("top_k_predictions: logits do not cover the label set");
  }
  TopKPredictions<S> out;
  out.labels = top_k_indices(logits.value().template cast<double>(), k);
  Var<S> phrase_weights = softmax(gather_cols(logits, out.labels));
  std::vector<S> shares;
  for (std::size_t r = 0; r < out.labels.size(); ++r) {
    const Words& phrase = labels.phrase(out.labels[r]);
    for (const auto& word : phrase) {
      out.words.push_back(word);
      out.word_phrase.push_back(static_cast<int>(r));
      shares.push_back(S(1) / static_cast<S>(phrase.size()));
    }
  }
  const Matrix<S> split = Eigen::Map<const Matrix<S>>(shares.data(), 1, static_cast<Eigen::Index>(shares.size()));
  out.beta = cmul_const(gather_cols(phrase_weights, out.word_phrase), split);
  return out;
}

#define MKP_INSTANTIATE_CLASSIFIER(S)                                                      \
  template struct ClassifierWeights<S>;                                                    \
  template Var<S> fuse(Graph<S>&, const ClassifierWeights<S>&, Var<S>, Var<S>, S);         \
  template Var<S> classifier_logits(Graph<S>&, const ClassifierWeights<S>&, Var<S>);       \
  template TopKPredictions<S> top_k_predictions(Var<S>, const LabelSet&, int);

MKP_INSTANTIATE_CLASSIFIER(float)
MKP_INSTANTIATE_CLASSIFIER(double)
MKP_INSTANTIATE_CLASSIFIER(long double)

}  // namespace mkp
