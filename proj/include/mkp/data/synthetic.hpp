#pragma once

#include "mkp/data/sample.hpp"

#include <cstdint>
#include <random>
#include <vector>

namespace mkp {

// Controls for the synthetic corpus. Each sample draws one or more latent
// topics; a topic fixes its gold keyphrase, a pool of words that may appear
// in the source/OCR/entity text, and a Gaussian for its signal grid rows.
// A noise_region_fraction of the 49 rows come from topic-independent
// distractor clusters instead.
struct SyntheticSpec {
  std::size_t n_samples = 256;  // training samples
  std::size_t n_valid = 0;      // 0 -> max(8, n_samples / 4)
  std::size_t n_test = 0;       // 0 -> max(8, n_samples / 4)
  int vocab_size = 200;
  int n_topics = 4;
  double noise_region_fraction = 0.3;
  double avg_keyphrases = 1.33;
  std::uint64_t seed = 7;

  // Probability that a drawn topic leaves words in the source / OCR / entities.
  double source_topic_prob = 0.6;
  double ocr_topic_prob = 0.3;
  double entity_topic_prob = 0.6;
  // Spread of the topic and distractor means, and of rows around their mean.
  double cluster_scale = 0.5;
  double row_noise = 1.0;
  int n_distractors = 4;

  void validate() const;
};

struct SyntheticCorpus {
  std::vector<MultiModalSample> train;
  std::vector<MultiModalSample> valid;
  std::vector<MultiModalSample> test;
  std::vector<MatchingSample> matching;
};

SyntheticCorpus generate_synthetic_corpus(const SyntheticSpec& spec);

// Pairs each sample's text with its own grid (label 1) or with another
// sample's grid (label 0). Exactly ceil(n/2) positives; a negative prefers a
// sample whose keyphrase set is disjoint from the text's.
std::vector<MatchingSample> make_matching_pairs(const std::vector<MultiModalSample>& samples,
                                                std::mt19937_64& rng);

}  // namespace mkp
