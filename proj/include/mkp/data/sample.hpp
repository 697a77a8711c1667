#pragma once

#include "mkp/core/types.hpp"

#include <memory>
#include <vector>

namespace mkp {

// One post: source text, OCR text, visual entities, 49x512 grid features and
// the gold keyphrase set (sorted, unique; may be empty for prediction-only
// data).
struct MultiModalSample {
  Words source;
  Words ocr;
  std::vector<Words> entities;
  std::shared_ptr<const FeatureGrid> features;
  std::vector<Words> keyphrases;

  friend bool operator==(const MultiModalSample& a, const MultiModalSample& b);
};

// Text/image pair with a relevance label, used by the matching loss.
struct MatchingSample {
  MultiModalSample pair;
  int label = 0;

  friend bool operator==(const MatchingSample& a, const MatchingSample& b) {
    return a.label == b.label && a.pair == b.pair;
  }
};

// Sorts and de-duplicates a keyphrase set in place (lexicographic by words).
void canonicalize_keyphrases(std::vector<Words>& keyphrases);

// Throws ShapeError unless the grid is 49x512.
void require_grid_shape(const FeatureGrid& grid);

}  // namespace mkp
