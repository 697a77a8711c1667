#include "mkp/training/losses.hpp"

#include "mkp/core/error.hpp"

namespace mkp {

namespace {
constexpr double kLogEps = 1e-12;
}

template <typename S>
Var<S> loss_itm(Var<S> s_c, int label) {
  if (label != 0 && label != 1) throw ConfigError("matching label must be 0 or 1");
  return label == 1 ? neg_log(s_c, S(0)) : neg_log(one_minus(s_c), S(0));
}

template <typename S>
Var<S> loss_irtm(Var<S> A, Var<S> A_gt) {
  return mse(A, A_gt);
}

template <typename S>
Var<S> loss_cla(Var<S> d_cla, int gold) {
  return nll(d_cla, gold, static_cast<S>(kLogEps));
}

template <typename S>
Var<S> loss_gen(const std::vector<Var<S>>& steps, const std::vector<int>& gold) {
  if (steps.size() != gold.size() || steps.empty()) {
    throw ShapeError("loss_gen: " + std::to_string(steps.size()) + " steps for " +
                     std::to_string(gold.size()) + " gold tokens");
  }
  Var<S> total = nll(steps[0], gold[0], static_cast<S>(kLogEps));
  for (std::size_t j = 1; j < steps.size(); ++j) {
    total = add(total, nll(steps[j], gold[j], static_cast<S>(kLogEps)));
  }
  return total;
}

template <typename S>
std::vector<MatchingExample> prepare_matching(const Model<S>& model,
                                              const std::vector<MatchingSample>& samples) {
  std::vector<MatchingExample> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    if (!s.pair.features) throw ShapeError("matching sample without features");
    out.push_back({std::make_shared<const EncodedInput>(model.encode(s.pair)), s.pair.features, s.label});
  }
  return out;
}

template <typename S>
std::vector<Matrix<S>> correlation_targets(const Model<S>& model, std::span<const Triplet> batch) {
  std::vector<Matrix<S>> out;
  out.reserve(batch.size());
  for (const auto& t : batch) {
    Graph<S> g(false);
    SampleForward<S> f = forward_sample(g, model, *t.input, *t.image);
    if (!f.correlation) {
      out.emplace_back();
      continue;
    }
    out.push_back(gt_correlation_scores(*t.sample_keyphrases, model.vocab(), model.text, model.filter,
                                        f.H_I.value(), f.match->s_c.scalar(),
                                        model.correlation_options(), model.config().max_input_len,
                                        model.layout()));
  }
  return out;
}

namespace {

template <typename S>
Var<S> accumulate(Var<S> total, Var<S> term) {
  return total.valid() ? add(total, term) : term;
}

template <typename S>
void finish_term(Graph<S>&, Var<S>& total, Var<S> sum_term, std::size_t n, double& mean_out) {
  if (n == 0) return;
  Var<S> mean_term = scale(sum_term, S(1) / static_cast<S>(n));
  mean_out = static_cast<double>(mean_term.scalar());
  total = accumulate(total, mean_term);
}

}  // namespace

template <typename S>
BatchLoss<S> triplet_batch_loss(Graph<S>& g, const Model<S>& model, std::span<const Triplet> batch,
                                LossSelection terms, const ForwardContext& ctx,
                                const std::vector<Matrix<S>>* frozen_targets) {
  const Ablation& ab = model.config().ablation;
  terms.irtm = terms.irtm && ab.irtm_loss();
  terms.cla = terms.cla && ab.cla_loss();
  if (frozen_targets && frozen_targets->size() != batch.size()) {
    throw ShapeError("frozen correlation targets do not match the batch");
  }
  BatchLoss<S> out;
  Var<S> irtm, cla, gen;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Triplet& t = batch[i];
    SampleForward<S> f = forward_sample(g, model, *t.input, *t.image, ctx);
    if (terms.irtm && f.correlation) {
      Matrix<S> target;
      if (frozen_targets) {
        target = (*frozen_targets)[i];
      } else {
        target = gt_correlation_scores(*t.sample_keyphrases, model.vocab(), model.text, model.filter,
                                       f.H_I.value(), f.match->s_c.scalar(),
                                       model.correlation_options(), model.config().max_input_len,
                                       model.layout());
      }
      irtm = accumulate(irtm, loss_irtm(f.correlation->A, g.constant(std::move(target))));
      ++out.n_irtm;
    }
    if (terms.cla) {
      if (auto label = model.labels().find(t.target)) {
        cla = accumulate(cla, loss_cla(softmax(f.logits), *label));
        ++out.n_cla;
      }
    }
    if (terms.gen) {
      ExtendedVocabulary extended(model.vocab(), *t.input, copy_words(model, f));
      DecodeContext<S> dctx = make_decode_context(g, model, f, *t.input, extended);
      const std::vector<int> gold = target_ids(t.target, *t.input, model.vocab());
      gen = accumulate(gen, loss_gen(teacher_forced_distributions(g, model, f, dctx, gold), gold));
      ++out.n_gen;
    }
  }
  finish_term(g, out.total, irtm, out.n_irtm, out.irtm);
  finish_term(g, out.total, cla, out.n_cla, out.cla);
  finish_term(g, out.total, gen, out.n_gen, out.gen);
  return out;
}

template <typename S>
BatchLoss<S> matching_batch_loss(Graph<S>& g, const Model<S>& model,
                                 std::span<const MatchingExample> batch, const ForwardContext& ctx) {
  BatchLoss<S> out;
  if (!model.config().ablation.itm_loss()) return out;
  Var<S> itm;
  for (const auto& ex : batch) {
    itm = accumulate(itm, loss_itm(forward_match(g, model, *ex.input, *ex.image, ctx), ex.label));
    ++out.n_itm;
  }
  finish_term(g, out.total, itm, out.n_itm, out.itm);
  return out;
}

#define MKP_INSTANTIATE_LOSSES(S)                                                               \
  template Var<S> loss_itm(Var<S>, int);                                                        \
  template Var<S> loss_irtm(Var<S>, Var<S>);                                                    \
  template Var<S> loss_cla(Var<S>, int);                                                        \
  template Var<S> loss_gen(const std::vector<Var<S>>&, const std::vector<int>&);                \
  template std::vector<MatchingExample> prepare_matching(const Model<S>&,                       \
                                                         const std::vector<MatchingSample>&);   \
  template std::vector<Matrix<S>> correlation_targets(const Model<S>&, std::span<const Triplet>); \
  template BatchLoss<S> triplet_batch_loss(Graph<S>&, const Model<S>&, std::span<const Triplet>, \
                                           LossSelection, const ForwardContext&,                \
                                           const std::vector<Matrix<S>>*);                      \
  template BatchLoss<S> matching_batch_loss(Graph<S>&, const Model<S>&,                         \
                                            std::span<const MatchingExample>,                   \
                                            const ForwardContext&);

MKP_INSTANTIATE_LOSSES(float)
MKP_INSTANTIATE_LOSSES(double)
MKP_INSTANTIATE_LOSSES(long double)

}  // namespace mkp
