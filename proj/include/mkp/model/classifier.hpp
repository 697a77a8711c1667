#pragma once

#include "mkp/data/sample.hpp"
#include "mkp/model/layers.hpp"

#include <optional>
#include <unordered_map>

namespace mkp {

// Candidate keyphrases of the classifier, distinct and sorted by their
// space-joined form.
class LabelSet {
 public:
  LabelSet() = default;
  // Every gold keyphrase of the training corpus.
  static LabelSet build(const std::vector<MultiModalSample>& training);
  static LabelSet from_phrases(std::vector<Words> phrases);

  int size() const { return static_cast<int>(phrases_.size()); }
  const Words& phrase(int index) const { return phrases_.at(static_cast<std::size_t>(index)); }
  const std::vector<Words>& phrases() const { return phrases_; }
  std::optional<int> find(const Words& phrase) const;

  friend bool operator==(const LabelSet& a, const LabelSet& b) { return a.phrases_ == b.phrases_; }

 private:
  std::vector<Words> phrases_;
  std::unordered_map<std::string, int> index_;
};

template <typename S>
struct ClassifierWeights {
  MultiHeadWeights<S> attention;
  Parameter<S>* ffn1_weight = nullptr;  // d1 x 2d1
  Parameter<S>* ffn1_bias = nullptr;
  Parameter<S>* ffn2_weight = nullptr;  // 2d1 x d1
  Parameter<S>* ffn2_bias = nullptr;
  Parameter<S>* mlp1_weight = nullptr;  // d1 x d_mlp
  Parameter<S>* mlp1_bias = nullptr;
  Parameter<S>* mlp2_weight = nullptr;  // d_mlp x |K|
  Parameter<S>* mlp2_bias = nullptr;

  static void declare(ParameterStore<S>& store, int d1, int d_mlp, int num_labels, double range,
                      std::mt19937_64& rng);
  static ClassifierWeights bind(ParameterStore<S>& store, int heads);
};

// x = MHA(M_T, H, H); H_f = layernorm(x + ffn(x)).
template <typename S>
Var<S> fuse(Graph<S>& g, const ClassifierWeights<S>& w, Var<S> M_T, Var<S> H_filtered,
            S layernorm_eps = S(1e-5));

// Pre-softmax scores over the label set, 1 x |K|.
template <typename S>
Var<S> classifier_logits(Graph<S>& g, const ClassifierWeights<S>& w, Var<S> H_f);

template <typename S>
Var<S> classify(Graph<S>& g, const ClassifierWeights<S>& w, Var<S> H_f) {
  return softmax(classifier_logits(g, w, H_f));
}

// Indices of the min(k, n) largest entries of a row, ties by lower index.
std::vector<int> top_k_indices(const Eigen::Ref<const Eigen::RowVectorXd>& scores, int k);

template <typename S>
struct TopKPredictions {
  std::vector<int> labels;        // label indices in rank order
  Words words;                    // their words concatenated in rank order
  std::vector<int> word_phrase;   // rank of the phrase each word came from
  Var<S> beta;                    // 1 x |words|, sums to 1
};

// Softmax over the selected logits; each phrase's weight is split evenly
// over its words.
template <typename S>
TopKPredictions<S> top_k_predictions(Var<S> logits, const LabelSet& labels, int k);

}  // namespace mkp
