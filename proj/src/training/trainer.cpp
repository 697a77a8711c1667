#include "mkp/training/trainer.hpp"

#include "mkp/core/error.hpp"
#include "mkp/eval/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>
#include <random>

namespace mkp {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (batch_size < 1) throw ConfigError("batch_size must be positive");
  if (max_epochs < 1) throw ConfigError("max_epochs must be positive");
  if (patience < 0) throw ConfigError("patience must not be negative");
  if (stage != 1 && stage != 2) throw ConfigError("stage must be 1 or 2");
  if (!(clip_norm > 0.0)) throw ConfigError("clip_norm must be positive");
  if (beam_size < 1) throw ConfigError("beam_size must be positive");
}

namespace {

using Clock = std::chrono::steady_clock;

// Which dataset a batch draws from, and its position in that epoch's order.
struct BatchRef {
  bool matching = false;
  std::size_t begin = 0, end = 0;
};

std::vector<BatchRef> batches_for(std::size_t n, int batch_size, bool matching) {
  std::vector<BatchRef> out;
  for (std::size_t b = 0; b < n; b += static_cast<std::size_t>(batch_size)) {
    out.push_back({matching, b, std::min(n, b + static_cast<std::size_t>(batch_size))});
  }
  return out;
}

// Merges two batch sequences so each sits at its relative position
// (k + 0.5) / count; triplet batches go first on ties.
std::vector<BatchRef> interleave(const std::vector<BatchRef>& a, const std::vector<BatchRef>& b) {
  std::vector<BatchRef> out;
  out.reserve(a.size() + b.size());
  std::size_t i = 0, j = 0;
  while (i < a.size() || j < b.size()) {
    const bool take_a =
        j == b.size() ||
        (i < a.size() && (2 * i + 1) * b.size() <= (2 * j + 1) * a.size());
    out.push_back(take_a ? a[i++] : b[j++]);
  }
  return out;
}

template <typename T>
std::vector<T> gather(const std::vector<T>& items, const std::vector<std::size_t>& order,
                      const BatchRef& ref) {
  std::vector<T> out;
  out.reserve(ref.end - ref.begin);
  for (std::size_t k = ref.begin; k < ref.end; ++k) out.push_back(items[order[k]]);
  return out;
}

struct TermAccumulator {
  double sums[4] = {0, 0, 0, 0};
  std::size_t counts[4] = {0, 0, 0, 0};

  template <typename S>
  void add(const BatchLoss<S>& l) {
    const double means[4] = {l.itm, l.irtm, l.cla, l.gen};
    const std::size_t ns[4] = {l.n_itm, l.n_irtm, l.n_cla, l.n_gen};
    for (int t = 0; t < 4; ++t) {
      sums[t] += means[t] * static_cast<double>(ns[t]);
      counts[t] += ns[t];
    }
  }
  double mean(int t) const { return counts[t] ? sums[t] / static_cast<double>(counts[t]) : 0.0; }
};

template <typename S>
void apply_step(Graph<S>& g, Var<S> loss, Model<S>& model, Adam<S>& adam, const TrainConfig& cfg) {
  model.params().zero_grad();
  g.backward(loss);
  clip_grad_norm(model.params(), static_cast<S>(cfg.clip_norm));
  adam.step(model.params());
}

// Tracks the best validation score and the patience budget.
struct EarlyStopping {
  int patience;
  int bad_epochs = 0;

  bool update(bool improved) {
    bad_epochs = improved ? 0 : bad_epochs + 1;
    return bad_epochs > patience;
  }
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

}  // namespace

template <typename S>
BatchLoss<S> validation_losses(const Model<S>& model, const std::vector<Triplet>& triplets,
                               const std::vector<MatchingExample>& matching, int chunk) {
  TermAccumulator acc;
  const std::size_t step = static_cast<std::size_t>(std::max(1, chunk));
  for (std::size_t b = 0; b < triplets.size(); b += step) {
    Graph<S> g(false);
    std::span<const Triplet> span(triplets.data() + b, std::min(step, triplets.size() - b));
    acc.add(triplet_batch_loss(g, model, span, {false, true, true, false}));
  }
  for (std::size_t b = 0; b < matching.size(); b += step) {
    Graph<S> g(false);
    std::span<const MatchingExample> span(matching.data() + b, std::min(step, matching.size() - b));
    acc.add(matching_batch_loss(g, model, span));
  }
  BatchLoss<S> out;
  out.itm = acc.mean(0);
  out.irtm = acc.mean(1);
  out.cla = acc.mean(2);
  out.n_itm = acc.counts[0];
  out.n_irtm = acc.counts[1];
  out.n_cla = acc.counts[2];
  return out;
}

template <typename S>
Checkpoint<S> train_stage1(Model<S> model, const Stage1Data& data, const TrainConfig& cfg,
                           const EpochCallback& on_epoch) {
  cfg.validate();
  if (data.train.empty() || data.matching.empty()) {
    throw ConfigError("stage 1 needs non-empty keyphrase and matching training sets");
  }
  if (data.valid.empty()) throw ConfigError("stage 1 needs a non-empty validation set");
  const std::vector<Triplet> triplets = model.triplets(data.train);
  const std::vector<MatchingExample> matching = prepare_matching(model, data.matching);
  const std::vector<Triplet> valid_triplets = model.triplets(data.valid);
  const std::vector<MatchingExample> valid_matching = prepare_matching(model, data.valid_matching);
  if (triplets.empty()) throw ConfigError("stage 1 training set has no keyphrases");
  const bool use_matching = model.config().ablation.itm_loss();

  auto l1 = [&](const BatchLoss<S>& v) { return v.itm + v.irtm + v.cla; };

  Checkpoint<S> best{model, 1, {}};
  const auto t0 = Clock::now();
  double best_score = l1(validation_losses(model, valid_triplets, valid_matching));
  {
    EpochRecord r;
    r.stage = 1;
    r.epoch = 0;
    r.valid_loss = best_score;
    r.improved = true;
    r.seconds = seconds_since(t0);
    best.history.push_back(r);
    if (on_epoch) on_epoch(r);
  }

  std::mt19937_64 rng(cfg.seed);
  const ForwardContext train_ctx{true, model.config().dropout, &rng};
  Adam<S> adam(model.params(), cfg.adam());
  EarlyStopping stopper{cfg.patience};
  std::vector<std::size_t> t_order(triplets.size()), m_order(matching.size());

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto start = Clock::now();
    std::iota(t_order.begin(), t_order.end(), std::size_t{0});
    std::iota(m_order.begin(), m_order.end(), std::size_t{0});
    std::shuffle(t_order.begin(), t_order.end(), rng);
    std::shuffle(m_order.begin(), m_order.end(), rng);
    const auto schedule =
        interleave(batches_for(triplets.size(), cfg.batch_size, false),
                   use_matching ? batches_for(matching.size(), cfg.batch_size, true)
                                : std::vector<BatchRef>{});
    TermAccumulator acc;
    for (const BatchRef& ref : schedule) {
      Graph<S> g;
      BatchLoss<S> loss;
      if (ref.matching) {
        const auto batch = gather(matching, m_order, ref);
        loss = matching_batch_loss(g, model, std::span<const MatchingExample>(batch), train_ctx);
      } else {
        const auto batch = gather(triplets, t_order, ref);
        loss = triplet_batch_loss(g, model, std::span<const Triplet>(batch), {false, true, true, false},
                                  train_ctx);
      }
      if (!loss.total.valid()) continue;
      acc.add(loss);
      apply_step(g, loss.total, model, adam, cfg);
    }

    const BatchLoss<S> v = validation_losses(model, valid_triplets, valid_matching);
    EpochRecord r;
    r.stage = 1;
    r.epoch = epoch;
    r.train_itm = acc.mean(0);
    r.train_irtm = acc.mean(1);
    r.train_cla = acc.mean(2);
    r.valid_loss = l1(v);
    r.improved = r.valid_loss < best_score;
    r.seconds = seconds_since(start);
    if (r.improved) {
      best_score = r.valid_loss;
      best.model = model;
    }
    best.history.push_back(r);
    if (on_epoch) on_epoch(r);
    if (stopper.update(r.improved)) break;
  }
  return best;
}

template <typename S>
Checkpoint<S> train_stage2(Checkpoint<S> checkpoint, const Stage2Data& data,
                           const TrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  if (checkpoint.stage < 1) throw StageOrderError("stage 2 needs a model trained by stage 1");
  if (data.train.empty()) throw ConfigError("stage 2 needs a non-empty training set");
  if (data.valid.empty()) throw ConfigError("stage 2 needs a non-empty validation set");
  Model<S> model = checkpoint.model;
  const std::vector<Triplet> triplets = model.triplets(data.train);
  if (triplets.empty()) throw ConfigError("stage 2 training set has no keyphrases");
  BeamOptions beam;
  beam.beam_size = cfg.beam_size;
  beam.max_len = model.config().max_decode_len;

  Checkpoint<S> best{model, 2, checkpoint.history};
  const auto t0 = Clock::now();
  double best_score = evaluate(model, data.valid, beam).f1_at_1;
  {
    EpochRecord r;
    r.stage = 2;
    r.epoch = 0;
    r.valid_f1_at_1 = best_score;
    r.improved = true;
    r.seconds = seconds_since(t0);
    best.history.push_back(r);
    if (on_epoch) on_epoch(r);
  }

  std::mt19937_64 rng(cfg.seed);
  const ForwardContext train_ctx{true, model.config().dropout, &rng};
  Adam<S> adam(model.params(), cfg.adam());
  EarlyStopping stopper{cfg.patience};
  std::vector<std::size_t> order(triplets.size());

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto start = Clock::now();
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    TermAccumulator acc;
    for (const BatchRef& ref : batches_for(triplets.size(), cfg.batch_size, false)) {
      Graph<S> g;
      const auto batch = gather(triplets, order, ref);
      BatchLoss<S> loss = triplet_batch_loss(g, model, std::span<const Triplet>(batch),
                                             {false, false, false, true}, train_ctx);
      acc.add(loss);
      apply_step(g, loss.total, model, adam, cfg);
    }

    EpochRecord r;
    r.stage = 2;
    r.epoch = epoch;
    r.train_gen = acc.mean(3);
    r.valid_f1_at_1 = evaluate(model, data.valid, beam).f1_at_1;
    r.improved = r.valid_f1_at_1 > best_score;
    r.seconds = seconds_since(start);
    if (r.improved) {
      best_score = r.valid_f1_at_1;
      best.model = model;
    }
    best.history.push_back(r);
    if (on_epoch) on_epoch(r);
    if (stopper.update(r.improved)) break;
  }
  return best;
}

template <typename S>
Checkpoint<S> train_pipeline(Model<S> model, const Stage1Data& stage1, const Stage2Data& stage2,
                             const TrainConfig& config, const EpochCallback& on_epoch) {
  return train_stage2(train_stage1(std::move(model), stage1, config, on_epoch), stage2, config,
                      on_epoch);
}

#define MKP_INSTANTIATE_TRAINER(S)                                                           \
  template BatchLoss<S> validation_losses(const Model<S>&, const std::vector<Triplet>&,       \
                                          const std::vector<MatchingExample>&, int);          \
  template Checkpoint<S> train_stage1(Model<S>, const Stage1Data&, const TrainConfig&,        \
                                      const EpochCallback&);                                  \
  template Checkpoint<S> train_stage2(Checkpoint<S>, const Stage2Data&, const TrainConfig&,   \
                                      const EpochCallback&);                                  \
  template Checkpoint<S> train_pipeline(Model<S>, const Stage1Data&, const Stage2Data&,       \
                                        const TrainConfig&, const EpochCallback&);

MKP_INSTANTIATE_TRAINER(float)
MKP_INSTANTIATE_TRAINER(double)

}  // namespace mkp
