#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace mkp {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

// Image features as they arrive on disk: 49 regions x 512 channels, float32.
using FeatureGrid = Eigen::MatrixXf;

inline constexpr int kGridSide = 7;
inline constexpr int kGridRegions = kGridSide * kGridSide;
inline constexpr int kFeatureDim = 512;

using Words = std::vector<std::string>;

}  // namespace mkp
