#include "mkp/data/sample.hpp"

#include "mkp/core/error.hpp"
#include "mkp/data/text.hpp"

#include <algorithm>

namespace mkp {

bool operator==(const MultiModalSample& a, const MultiModalSample& b) {
  if (a.source != b.source || a.ocr != b.ocr || a.entities != b.entities ||
      a.keyphrases != b.keyphrases) {
    return false;
  }
  if (!a.features || !b.features) return a.features == b.features;
  return *a.features == *b.features;
}

void canonicalize_keyphrases(std::vector<Words>& keyphrases) {
  keyphrases.erase(std::remove_if(keyphrases.begin(), keyphrases.end(),
                                  [](const Words& k) { return k.empty(); }),
                   keyphrases.end());
  std::sort(keyphrases.begin(), keyphrases.end(),
            [](const Words& a, const Words& b) { return join(a) < join(b); });
  keyphrases.erase(std::unique(keyphrases.begin(), keyphrases.end()), keyphrases.end());
}

void require_grid_shape(const FeatureGrid& grid) {
  if (grid.rows() != kGridRegions || grid.cols() != kFeatureDim) {
    throw ShapeError("feature grid must be 49x512, got " + std::to_string(grid.rows()) + "x" +
                     std::to_string(grid.cols()));
  }
}

}  // namespace mkp
