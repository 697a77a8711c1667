#pragma once

#include "mkp/training/checkpoint.hpp"
#include "mkp/training/losses.hpp"
#include "mkp/training/optimizer.hpp"

#include <cstdint>
#include <functional>

namespace mkp {

// Optimisation schedule. Dropout and lambda_c are model hyper-parameters and
// live in ModelConfig.
struct TrainConfig {
  double learning_rate = 1e-3;
  int batch_size = 16;
  int max_epochs = 50;
  // Training stops once more than `patience` consecutive epochs fail to
  // improve the validation criterion.
  int patience = 5;
  std::uint64_t seed = 1;
  int stage = 1;
  double clip_norm = 5.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  int beam_size = 10;  // stage-2 validation decoding

  void validate() const;
  AdamConfig adam() const { return {learning_rate, beta1, beta2, adam_epsilon}; }
};

struct Stage1Data {
  std::vector<MultiModalSample> train;
  std::vector<MatchingSample> matching;
  std::vector<MultiModalSample> valid;
  std::vector<MatchingSample> valid_matching;
};

struct Stage2Data {
  std::vector<MultiModalSample> train;
  std::vector<MultiModalSample> valid;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Stage-1 validation criterion L1 = L_itm + L_irtm + L_cla, each term a mean
// over the examples it applies to. Evaluation mode.
template <typename S>
BatchLoss<S> validation_losses(const Model<S>& model, const std::vector<Triplet>& triplets,
                               const std::vector<MatchingExample>& matching, int chunk = 32);

// Minimises L1. Triplet batches and matching batches are interleaved in
// proportion to their counts; the parameters with the lowest validation L1
// (epoch 0 is the starting point) are returned.
template <typename S>
Checkpoint<S> train_stage1(Model<S> model, const Stage1Data& data, const TrainConfig& config,
                           const EpochCallback& on_epoch = {});

// Minimises the generation loss over all parameters, keeping the parameters
// with the best validation F1@1 under beam search.
template <typename S>
Checkpoint<S> train_stage2(Checkpoint<S> checkpoint, const Stage2Data& data,
                           const TrainConfig& config, const EpochCallback& on_epoch = {});

// Stage 1 followed by stage 2 with the same schedule.
template <typename S>
Checkpoint<S> train_pipeline(Model<S> model, const Stage1Data& stage1, const Stage2Data& stage2,
                             const TrainConfig& config, const EpochCallback& on_epoch = {});

}  // namespace mkp
