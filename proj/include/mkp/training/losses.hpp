#pragma once

#include "mkp/model/model.hpp"

#include <span>

namespace mkp {

// -log(s_c) for a matching pair, -log(1 - s_c) otherwise.
template <typename S>
Var<S> loss_itm(Var<S> s_c, int label);

// Mean squared difference over the 49 region scores.
template <typename S>
Var<S> loss_irtm(Var<S> A, Var<S> A_gt);

// -log(d_cla[gold] + 1e-12).
template <typename S>
Var<S> loss_cla(Var<S> d_cla, int gold);

// Sum over steps of -log(p_j(gold_j) + 1e-12).
template <typename S>
Var<S> loss_gen(const std::vector<Var<S>>& steps, const std::vector<int>& gold);

// An image-text pair prepared for the matching loss.
struct MatchingExample {
  std::shared_ptr<const EncodedInput> input;
  std::shared_ptr<const FeatureGrid> image;
  int label = 0;
};

template <typename S>
std::vector<MatchingExample> prepare_matching(const Model<S>& model,
                                              const std::vector<MatchingSample>& samples);

struct LossSelection {
  bool itm = false;
  bool irtm = false;
  bool cla = false;
  bool gen = false;
};

// Per-term batch means; a term is averaged over the examples it applies to.
template <typename S>
struct BatchLoss {
  Var<S> total;  // invalid when no term applies
  double itm = 0.0, irtm = 0.0, cla = 0.0, gen = 0.0;
  std::size_t n_itm = 0, n_irtm = 0, n_cla = 0, n_gen = 0;
};

// Correlation targets for a triplet batch, one 1 x 49 row per triplet.
template <typename S>
std::vector<Matrix<S>> correlation_targets(const Model<S>& model, std::span<const Triplet> batch);

// Keyphrase-side losses (irtm, cla, gen) of a triplet batch. Terms disabled by
// the ablation are skipped. Without `frozen_targets`, A_gt is recomputed from
// the current parameters; it never carries a gradient.
template <typename S>
BatchLoss<S> triplet_batch_loss(Graph<S>& g, const Model<S>& model, std::span<const Triplet> batch,
                                LossSelection terms, const ForwardContext& ctx = {},
                                const std::vector<Matrix<S>>* frozen_targets = nullptr);

template <typename S>
BatchLoss<S> matching_batch_loss(Graph<S>& g, const Model<S>& model,
                                 std::span<const MatchingExample> batch,
                                 const ForwardContext& ctx = {});

}  // namespace mkp
