#pragma once

#include "mkp/core/types.hpp"
#include "mkp/data/sample.hpp"
#include "mkp/data/vocabulary.hpp"

#include <cstddef>
#include <memory>
#include <vector>

namespace mkp {

enum class Segment : int { kSource = 0, kOcr = 1, kEntity = 2 };
inline constexpr int kNumSegments = 3;

// Which segments participate in the concatenated text input.
struct TextLayout {
  bool include_ocr = true;
  bool include_entities = true;
};

inline constexpr std::size_t kDefaultMaxInputLength = 200;

// Concatenated text input X_S <seq> X_O <seq> X_E as ids.
struct EncodedInput {
  std::vector<int> token_ids;  // fixed-vocabulary ids; OOV positions hold UNK
  std::vector<int> type_ids;   // Segment per position
  Words words;                 // surface form per position
  std::vector<int> copy_ids;   // extended-vocabulary id per position
  Words oov_words;             // extended id = vocab.size() + index

  std::size_t length() const { return token_ids.size(); }
  // Extended id of a word present in the input, or -1.
  int extended_id(const std::string& word, const Vocabulary& vocab) const;

  friend bool operator==(const EncodedInput&, const EncodedInput&) = default;
};

// Each delimiter takes the type of the segment it opens. Truncation keeps the
// first max_len positions.
EncodedInput concat_input(const MultiModalSample& sample, const Vocabulary& vocab,
                          std::size_t max_len = kDefaultMaxInputLength, TextLayout layout = {});

// Text-encoder input built from a gold keyphrase set: every phrase joined in
// lexicographic order as the source segment, with empty OCR and entities.
EncodedInput keyphrase_input(const std::vector<Words>& keyphrases, const Vocabulary& vocab,
                             std::size_t max_len = kDefaultMaxInputLength, TextLayout layout = {});

// One (input, image, keyphrase) training triple.
struct Triplet {
  std::shared_ptr<const EncodedInput> input;
  std::shared_ptr<const FeatureGrid> image;
  Words target;
  std::shared_ptr<const std::vector<Words>> sample_keyphrases;
  std::size_t sample_index = 0;
};

// One triplet per keyphrase, ordered lexicographically by keyphrase.
std::vector<Triplet> replicate_one2one(const MultiModalSample& sample, const Vocabulary& vocab,
                                       std::size_t max_len = kDefaultMaxInputLength,
                                       TextLayout layout = {}, std::size_t sample_index = 0);

std::vector<Triplet> replicate_corpus(const std::vector<MultiModalSample>& corpus,
                                      const Vocabulary& vocab,
                                      std::size_t max_len = kDefaultMaxInputLength,
                                      TextLayout layout = {});

// Decoder targets: extended ids of the keyphrase words followed by EOS. Words
// outside the vocabulary map to their input OOV id, else UNK.
std::vector<int> target_ids(const Words& keyphrase, const EncodedInput& input,
                            const Vocabulary& vocab);

}  // namespace mkp
