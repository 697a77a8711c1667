#pragma once

// Differentiable primitives over Graph nodes. Every op validates shapes and
// throws ShapeError naming itself on mismatch. Vectors are 1xN rows.

#include "mkp/autodiff/graph.hpp"

#include <vector>

namespace mkp {

template <typename S> Var<S> matmul(Var<S> a, Var<S> b);
template <typename S> Var<S> transpose(Var<S> a);
template <typename S> Var<S> add(Var<S> a, Var<S> b);
template <typename S> Var<S> sub(Var<S> a, Var<S> b);
// a (n x m) + b (1 x m), b broadcast over rows.
template <typename S> Var<S> add_row(Var<S> a, Var<S> b);
// a + s for a 1x1 node s, broadcast over every element.
template <typename S> Var<S> add_scalar(Var<S> a, Var<S> s);
// Elementwise product.
template <typename S> Var<S> cmul(Var<S> a, Var<S> b);
// Elementwise product with a constant mask (dropout).
template <typename S> Var<S> cmul_const(Var<S> a, const Matrix<S>& mask);
template <typename S> Var<S> scale(Var<S> a, S factor);
// s * a for a 1x1 node s.
template <typename S> Var<S> scale_by(Var<S> a, Var<S> s);
// Row i of a (n x m) scaled by w(i) for w (n x 1).
template <typename S> Var<S> scale_rows(Var<S> a, Var<S> w);
// 1 - a.
template <typename S> Var<S> one_minus(Var<S> a);

template <typename S> Var<S> sigmoid(Var<S> a);
template <typename S> Var<S> tanh(Var<S> a);
template <typename S> Var<S> relu(Var<S> a);
// Clamp to [lo, hi]; zero gradient outside.
template <typename S> Var<S> clamp(Var<S> a, S lo, S hi);
// Row-wise softmax.
template <typename S> Var<S> softmax(Var<S> a);
// Row-wise standardization (no affine part).
template <typename S> Var<S> layernorm(Var<S> a, S eps);
// Column-wise max over rows: (n x m) -> (1 x m). Ties go to the lowest row.
template <typename S> Var<S> maxpool_columns(Var<S> a);

template <typename S> Var<S> concat_cols(const std::vector<Var<S>>& parts);
template <typename S> Var<S> concat_rows(const std::vector<Var<S>>& parts);
template <typename S> Var<S> slice_cols(Var<S> a, Eigen::Index start, Eigen::Index count);
template <typename S> Var<S> slice_rows(Var<S> a, Eigen::Index start, Eigen::Index count);

// out(0, i) = a(0, index[i]) for a 1xN row.
template <typename S> Var<S> gather_cols(Var<S> a, const std::vector<int>& index);
// out(0, index[i]) += a(0, i); out is 1 x width.
template <typename S> Var<S> scatter_cols(Var<S> a, const std::vector<int>& index, Eigen::Index width);
// Rows of a parameter table selected by ids; gradient goes straight to the table.
template <typename S> Var<S> embedding(Graph<S>& g, Parameter<S>& table, const std::vector<int>& ids);

template <typename S> Var<S> sum(Var<S> a);
template <typename S> Var<S> mean(Var<S> a);
// Mean of squared differences, 1x1.
template <typename S> Var<S> mse(Var<S> a, Var<S> b);
// -log(a + eps), elementwise.
template <typename S> Var<S> neg_log(Var<S> a, S eps);
// -log(p(0, index) + eps) for a 1xN distribution p.
template <typename S> Var<S> nll(Var<S> p, int index, S eps);

template <typename S> Var<S> operator+(Var<S> a, Var<S> b) { return add(a, b); }
template <typename S> Var<S> operator-(Var<S> a, Var<S> b) { return sub(a, b); }
template <typename S> Var<S> operator*(Var<S> a, Var<S> b) { return matmul(a, b); }

}  // namespace mkp
