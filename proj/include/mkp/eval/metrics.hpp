#pragma once

#include "mkp/data/sample.hpp"
#include "mkp/model/model.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace mkp {

// Phrases compared after lowercasing and collapsing whitespace. Predictions
// are de-duplicated under the same normalisation, keeping first occurrence.
std::vector<std::string> normalize_predictions(const std::vector<Words>& preds);

// P = hits / min(k, |preds|), R = hits / |gold|, F1 = 2PR / (P + R).
double f1_at_k(const std::vector<Words>& preds, const std::vector<Words>& gold, int k);

// Sum of precision@r at hit ranks r <= 5, divided by min(5, |gold|).
double map_at_5(const std::vector<Words>& preds, const std::vector<Words>& gold);

struct SampleScore {
  std::size_t index = 0;
  double f1_at_1 = 0.0;
  double f1_at_3 = 0.0;
  double map_at_5 = 0.0;
};

struct MetricsReport {
  double f1_at_1 = 0.0;
  double f1_at_3 = 0.0;
  double map_at_5 = 0.0;
  std::size_t n = 0;        // scored samples
  std::size_t skipped = 0;  // samples without gold keyphrases
  std::vector<SampleScore> per_sample;

  std::string to_json() const;  // {"f1@1", "f1@3", "map@5", "n"}
  void write_csv(const std::filesystem::path& path) const;
};

// Macro averages over samples with a non-empty gold set.
MetricsReport score_predictions(const std::vector<std::vector<Words>>& predictions,
                                const std::vector<MultiModalSample>& dataset);

template <typename S>
std::vector<std::vector<Words>> decode_dataset(const Model<S>& model,
                                               const std::vector<MultiModalSample>& dataset,
                                               const BeamOptions& opts);

template <typename S>
MetricsReport evaluate(const Model<S>& model, const std::vector<MultiModalSample>& dataset,
                       const BeamOptions& opts) {
  return score_predictions(decode_dataset(model, dataset, opts), dataset);
}

}  // namespace mkp
