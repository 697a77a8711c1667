#include "mkp/model/image_encoder.hpp"

#include "mkp/core/error.hpp"
#include "mkp/data/sample.hpp"

namespace mkp {

template <typename S>
void ImageEncoderWeights<S>::declare(ParameterStore<S>& store, int d1, double range,
                                     std::mt19937_64& rng) {
  store.add_uniform("image.weight", kFeatureDim, d1, range, rng);
  store.add_uniform("image.bias", 1, d1, range, rng);
}

template <typename S>
ImageEncoderWeights<S> ImageEncoderWeights<S>::bind(ParameterStore<S>& store) {
  return {&store.get("image.weight"), &store.get("image.bias")};
}

template <typename S>
Var<S> project_image(Graph<S>& g, const ImageEncoderWeights<S>& w, const FeatureGrid& raw) {
  require_grid_shape(raw);
  if (!raw.allFinite()) throw NumericError("project_image: non-finite feature value");
  Var<S> x = g.constant(raw.cast<S>());
  return affine(g, x, *w.weight, w.bias);
}

#define MKP_INSTANTIATE_IMAGE(S)  \
  template struct ImageEncoderWeights<S>; \
  template Var<S> project_image(Graph<S>&, const ImageEncoderWeights<S>&, const FeatureGrid&);

MKP_INSTANTIATE_IMAGE(float)
MKP_INSTANTIATE_IMAGE(double)
MKP_INSTANTIATE_IMAGE(long double)

}  // namespace mkp
