#pragma once

#include "mkp/model/model.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace mkp {

// One training epoch as logged and checkpointed.
struct EpochRecord {
  int stage = 1;
  int epoch = 0;
  double train_itm = 0.0;
  double train_irtm = 0.0;
  double train_cla = 0.0;
  double train_gen = 0.0;
  double valid_loss = 0.0;      // stage 1: L1 on the validation data
  double valid_f1_at_1 = 0.0;   // stage 2: beam-search F1@1 on the validation data
  bool improved = false;
  double seconds = 0.0;

  std::string to_json() const;
  static EpochRecord from_json(const std::string& text);
  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

std::string config_to_json(const ModelConfig& config);
ModelConfig config_from_json(const std::string& text);

// A model with its training stage (0 untrained, 1 or 2 completed) and history.
template <typename S>
struct Checkpoint {
  Model<S> model;
  int stage = 0;
  std::vector<EpochRecord> history;
};

// Layout: 8-byte magic, u32 version, u64 header size, UTF-8 JSON header
// (precision, stage, config, vocabulary, labels, history, parameter table),
// then each parameter's values in table order as little-endian column-major
// 32- or 64-bit floats.
template <typename S>
void save_checkpoint(const Checkpoint<S>& checkpoint, const std::filesystem::path& path);

// Payloads of the other width are converted on load.
template <typename S>
Checkpoint<S> load_checkpoint(const std::filesystem::path& path);

// Precision recorded in a checkpoint header (32 or 64).
int checkpoint_precision(const std::filesystem::path& path);

}  // namespace mkp
