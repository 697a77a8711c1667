#include "mkp/autodiff/ops.hpp"

#include "mkp/core/error.hpp"

#include <cmath>
#include <sstream>

namespace mkp {

namespace {

template <typename S>
std::string shape_of(const Matrix<S>& m) {
  std::ostringstream os;
  os << m.rows() << "x" << m.cols();
  return os.str();
}

template <typename S>
void require_same_shape(const char* op, Var<S> a, Var<S> b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_of(a.value()) + " vs " +
                     shape_of(b.value()));
  }
}

template <typename S>
void require_same_graph(const char* op, Var<S> a, Var<S> b) {
  if (a.graph() != b.graph()) throw Error(std::string(op) + ": operands from different graphs");
}

template <typename S>
void require_scalar(const char* op, Var<S> s) {
  if (s.rows() != 1 || s.cols() != 1) {
    throw ShapeError(std::string(op) + ": expected 1x1 operand, got " + shape_of(s.value()));
  }
}

template <typename S>
void require_row(const char* op, Var<S> a) {
  if (a.rows() != 1) throw ShapeError(std::string(op) + ": expected a 1xN row, got " + shape_of(a.value()));
}

}  // namespace

template <typename S>
Var<S> matmul(Var<S> a, Var<S> b) {
  require_same_graph("matmul", a, b);
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: inner dimensions differ " + shape_of(a.value()) + " * " +
                     shape_of(b.value()));
  }
  Graph<S>& g = *a.graph();
  Matrix<S> out = a.value() * b.value();
  const int ia = a.id(), ib = b.id();
  return g.record(std::move(out), {a, b}, [ia, ib](Graph<S>& g, const Matrix<S>& gout) {
    if (g.requires_grad(ia)) g.grad(ia).noalias() += gout * g.value(ib).transpose();
    if (g.requires_grad(ib)) g.grad(ib).noalias() += g.value(ia).transpose() * gout;
  });
}

template <typename S>
Var<S> transpose(Var<S> a) {
  Graph<S>& g = *a.graph();
  const int ia = a.id();
  return g.record(a.value().transpose(), {a}, [ia](Graph<S>& g, const Matrix<S>& gout) {
    g.grad(ia) += gout.transpose();
  });
}

template <typename S>
Var<S> add(Var<S> a, Var<S> b) {
  require_same_graph("add", a, b);
  require_same_shape("add", a, b);
  Graph<S>& g = *a.graph();
  const int ia = a.id(), ib = b.id();
  return g.record(a.value() + b.value(), {a, b}, [ia, ib](Graph<S>& g, const Matrix<S>& gout) {
    if (g.requires_grad(ia)) g.grad(ia) += gout;
    if (g.requires_grad(ib)) g.grad(ib) += gout;
  });
}

template <typename S>
Var<S> sub(Var<S> a, Var<S> b) {
  require_same_graph("sub", a, b);
  require_same_shape("sub", a, b);
  Graph<S>& g = *a.graph();
  const int ia = a.id(), ib = b.id();
  return g.record(a.value() - b.value(), {a, b}, [ia, ib](Graph<S>& g, const Matrix<S>& gout) {
    if (g.requires_grad(ia)) g.grad(ia) += gout;
    if (g.requires_grad(ib)) g.grad(ib) -= gout;
  });
}

template <typename S>
Var<S> add_row(Var<S> a, Var<S> b) {
  require_same_graph("add_row", a, b);
  if (b.rows() != 1 || b.cols() != a.cols()) {
    throw ShapeError("add_row: cannot broadcast " + shape_of(b.value()) + " over " +
                     shape_of(a.value()));
  }
  Graph<S>& g = *a.graph();
  Matrix<S> out = a.value().rowwise() + b.value().row(0);
  const int ia = a.id(), ib = b.id();
  return g.record(std::move(out), {a, b}, [ia, ib](Graph<S>& g, const Matrix<S>& gout) {
    if (g.requires_grad(ia)) g.grad(ia) += gout;
    if (g.requires_grad(ib)) g.grad(ib) += gout.colwise().sum();
  });
}

template <typename S>
Var<S> add_scalar(Var<S> a, Var<S> s) {
  require_same_graph("add_scalar", a, s);
  require_scalar("add_scalar", s);
  Graph<S>& g = *a.graph();
  Matrix<S> out = a.value().array() + s.scalar();
  const int ia = a.id(), is = s.id();
  return g.record(std::move(out), {a, s}, [ia, is](Graph<S>& g, const Matrix<S>& gout) {
    if (g.requires_grad(ia)) g.grad(ia) += gout;
    if (g.requires_grad(is)) g.grad(is)(0, 0) += gout.sum();
  });
}

template <typename S>
Var<S> cmul(Var<S> a, Var<S> b) {
  require_same_graph("cmul", a, b);
  require_same_shape("cmul", a, b);
  Graph<S>& g = *a.graph();
  Matrix<S> out = a.value().cwiseProduct(b.value());
  const int ia = a.id(), ib = b.id();
  return g.record(std::move(out), {a, b}, [ia, ib](Graph<S>& g, const Matrix<S>& gout) {
    if (g.requires_grad(ia)) g.grad(ia) += gout.cwiseProduct(g.value(ib));
    if (g.requires_grad(ib)) g.grad(ib) += gout.cwiseProduct(g.value(ia));
  });
}

template <typename S>
Var<S> cmul_const(Var<S> a, const Matrix<S>& mask) {
  if (mask.rows() != a.rows() || mask.cols() != a.cols()) {
    throw ShapeError("cmul_const: mask " + shape_of(mask) + " vs " + shape_of(a.value()));
  }
  Graph<S>& g = *a.graph();
  const int ia = a.id();
  return g.record(a.value().cwiseProduct(mask), {a}, [ia, mask](Graph<S>& g, const Matrix<S>& gout) {
    g.grad(ia) += gout.cwiseProduct(mask);
  });
}

template <typename S>
Var<S> scale(Var<S> a, S factor) {
  Graph<S>& g = *a.graph();
  const int ia = a.id();
  return g.record(a.value() * factor, {a}, [ia, factor](Graph<S>& g, const Matrix<S>& gout) {
    g.grad(ia) += gout * factor;
  });
}

template <typename S>
Var<S> scale_by(Var<S> a, Var<S> s) {
  require_same_graph("scale_by", a, s);
  require_scalar("scale_by", s);
  Graph<S>& g = *a.graph();
  const int ia = a.id(), is = s.id();
  return g.record(a.value() * s.scalar(), {a, s}, [ia, is](Graph<S>& g, const Matrix<S>& gout) {
    if (g.requires_grad(ia)) g.grad(ia) += gout * g.value(is)(0, 0);
    if (g.requires_grad(is)) g.grad(is)(0, 0) += gout.cwiseProduct(g.value(ia)).sum();
  });
}

template <typename S>
Var<S> scale_rows(Var<S> a, Var<S> w) {
  require_same_graph("scale_rows", a, w);
  if (w.cols() != 1 || w.rows() != a.rows()) {
    throw ShapeError("scale_rows: weights " + shape_of(w.value()) + " vs " + shape_of(a.value()));
  }
  Graph<S>& g = *a.graph();
  Matrix<S> out = w.value().col(0).asDiagonal() * a.value();
  const int ia = a.id(), iw = w.id();
  return g.record(std::move(out), {a, w}, [ia, iw](Graph<S>& g, const Matrix<S>& gout) {
    if (g.requires_grad(ia)) g.grad(ia) += g.value(iw).col(0).asDiagonal() * gout;
    if (g.requires_grad(iw)) g.grad(iw) += gout.cwiseProduct(g.value(ia)).rowwise().sum();
  });
}

template <typename S>
Var<S> one_minus(Var<S> a) {
  Graph<S>& g = *a.graph();
  const int ia = a.id();
  Matrix<S> out = (S(1) - a.value().array()).matrix();
  return g.record(std::move(out), {a}, [ia](Graph<S>& g, const Matrix<S>& gout) {
    g.grad(ia) -= gout;
  });
}

template <typename S>
Var<S> sigmoid(Var<S> a) {
  Graph<S>& g = *a.graph();
  Matrix<S> out = (S(1) / (S(1) + (-a.value().array()).exp())).matrix();
  const int ia = a.id();
  auto y = std::make_shared<Matrix<S>>(out);
  return g.record(std::move(out), {a}, [ia, y](Graph<S>& g, const Matrix<S>& gout) {
    const auto s = y->array();
    g.grad(ia) += (gout.array() * s * (S(1) - s)).matrix();
  });
}

template <typename S>
Var<S> tanh(Var<S> a) {
  Graph<S>& g = *a.graph();
  Matrix<S> out = a.value().array().tanh().matrix();
  const int ia = a.id();
  auto shared = std::make_shared<Matrix<S>>(out);
  return g.record(std::move(out), {a}, [ia, shared](Graph<S>& g, const Matrix<S>& gout) {
    g.grad(ia) += (gout.array() * (S(1) - shared->array().square())).matrix();
  });
}

template <typename S>
Var<S> relu(Var<S> a) {
  Graph<S>& g = *a.graph();
  Matrix<S> out = a.value().cwiseMax(S(0));
  const int ia = a.id();
  return g.record(std::move(out), {a}, [ia](Graph<S>& g, const Matrix<S>& gout) {
    g.grad(ia) += (g.value(ia).array() > S(0)).select(gout, S(0)).matrix();
  });
}

template <typename S>
Var<S> clamp(Var<S> a, S lo, S hi) {
  Graph<S>& g = *a.graph();
  Matrix<S> out = a.value().cwiseMax(lo).cwiseMin(hi);
  const int ia = a.id();
  return g.record(std::move(out), {a}, [ia, lo, hi](Graph<S>& g, const Matrix<S>& gout) {
    const auto& x = g.value(ia).array();
    g.grad(ia) += ((x >= lo) && (x <= hi)).select(gout, S(0)).matrix();
  });
}

template <typename S>
Var<S> softmax(Var<S> a) {
  Graph<S>& g = *a.graph();
  Matrix<S> out(a.rows(), a.cols());
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    auto row = a.value().row(r);
    const S m = row.maxCoeff();
    out.row(r) = (row.array() - m).exp().matrix();
    out.row(r) /= out.row(r).sum();
  }
  const int ia = a.id();
  auto y = std::make_shared<Matrix<S>>(out);
  return g.record(std::move(out), {a}, [ia, y](Graph<S>& g, const Matrix<S>& gout) {
    Matrix<S>& ga = g.grad(ia);
    for (Eigen::Index r = 0; r < y->rows(); ++r) {
      const S dot = gout.row(r).dot(y->row(r));
      ga.row(r) += (y->row(r).array() * (gout.row(r).array() - dot)).matrix();
    }
  });
}

template <typename S>
Var<S> layernorm(Var<S> a, S eps) {
  Graph<S>& g = *a.graph();
  const Eigen::Index n = a.rows(), m = a.cols();
  Matrix<S> xhat(n, m);
  RowVector<S> inv_std(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    auto row = a.value().row(r).array();
    const S mu = row.mean();
    const S var = (row - mu).square().mean();
    inv_std(r) = S(1) / std::sqrt(var + eps);
    xhat.row(r) = ((row - mu) * inv_std(r)).matrix();
  }
  const int ia = a.id();
  auto cache = std::make_shared<std::pair<Matrix<S>, RowVector<S>>>(xhat, inv_std);
  return g.record(std::move(xhat), {a}, [ia, cache](Graph<S>& g, const Matrix<S>& gout) {
    const auto& [xh, istd] = *cache;
    Matrix<S>& ga = g.grad(ia);
    for (Eigen::Index r = 0; r < xh.rows(); ++r) {
      const auto gy = gout.row(r).array();
      const auto x = xh.row(r).array();
      const S mean_g = gy.mean();
      const S mean_gx = (gy * x).mean();
      ga.row(r) += (istd(r) * (gy - mean_g - x * mean_gx)).matrix();
    }
  });
}

template <typename S>
Var<S> maxpool_columns(Var<S> a) {
  if (a.rows() == 0) throw ShapeError("maxpool_columns: empty input");
  Graph<S>& g = *a.graph();
  const Eigen::Index m = a.cols();
  Matrix<S> out(1, m);
  std::vector<Eigen::Index> arg(static_cast<std::size_t>(m));
  for (Eigen::Index j = 0; j < m; ++j) {
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < a.rows(); ++i) {
      if (a.value()(i, j) > a.value()(best, j)) best = i;
    }
    arg[static_cast<std::size_t>(j)] = best;
    out(0, j) = a.value()(best, j);
  }
  const int ia = a.id();
  return g.record(std::move(out), {a}, [ia, arg = std::move(arg)](Graph<S>& g, const Matrix<S>& gout) {
    Matrix<S>& ga = g.grad(ia);
    for (std::size_t j = 0; j < arg.size(); ++j) {
      ga(arg[j], static_cast<Eigen::Index>(j)) += gout(0, static_cast<Eigen::Index>(j));
    }
  });
}

template <typename S>
Var<S> concat_cols(const std::vector<Var<S>>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no operands");
  Graph<S>& g = *parts.front().graph();
  const Eigen::Index rows = parts.front().rows();
  Eigen::Index cols = 0;
  for (const auto& p : parts) {
    if (p.graph() != &g) throw Error("concat_cols: operands from different graphs");
    if (p.rows() != rows) throw ShapeError("concat_cols: row counts differ");
    cols += p.cols();
  }
  Matrix<S> out(rows, cols);
  std::vector<std::pair<int, Eigen::Index>> spans;
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    out.middleCols(at, p.cols()) = p.value();
    spans.emplace_back(p.id(), at);
    at += p.cols();
  }
  return g.record(std::move(out), parts, [spans](Graph<S>& g, const Matrix<S>& gout) {
    for (const auto& [id, start] : spans) {
      if (g.requires_grad(id)) g.grad(id) += gout.middleCols(start, g.value(id).cols());
    }
  });
}

template <typename S>
Var<S> concat_rows(const std::vector<Var<S>>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no operands");
  Graph<S>& g = *parts.front().graph();
  const Eigen::Index cols = parts.front().cols();
  Eigen::Index rows = 0;
  for (const auto& p : parts) {
    if (p.graph() != &g) throw Error("concat_rows: operands from different graphs");
    if (p.cols() != cols) throw ShapeError("concat_rows: column counts differ");
    rows += p.rows();
  }
  Matrix<S> out(rows, cols);
  std::vector<std::pair<int, Eigen::Index>> spans;
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    out.middleRows(at, p.rows()) = p.value();
    spans.emplace_back(p.id(), at);
    at += p.rows();
  }
  return g.record(std::move(out), parts, [spans](Graph<S>& g, const Matrix<S>& gout) {
    for (const auto& [id, start] : spans) {
      if (g.requires_grad(id)) g.grad(id) += gout.middleRows(start, g.value(id).rows());
    }
  });
}

template <typename S>
Var<S> slice_cols(Var<S> a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) {
    throw ShapeError("slice_cols: range out of bounds for " + shape_of(a.value()));
  }
  Graph<S>& g = *a.graph();
  const int ia = a.id();
  return g.record(a.value().middleCols(start, count), {a},
                  [ia, start, count](Graph<S>& g, const Matrix<S>& gout) {
                    g.grad(ia).middleCols(start, count) += gout;
                  });
}

template <typename S>
Var<S> slice_rows(Var<S> a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.rows()) {
    throw ShapeError("slice_rows: range out of bounds for " + shape_of(a.value()));
  }
  Graph<S>& g = *a.graph();
  const int ia = a.id();
  return g.record(a.value().middleRows(start, count), {a},
                  [ia, start, count](Graph<S>& g, const Matrix<S>& gout) {
                    g.grad(ia).middleRows(start, count) += gout;
                  });
}

template <typename S>
Var<S> gather_cols(Var<S> a, const std::vector<int>& index) {
  require_row("gather_cols", a);
  Graph<S>& g = *a.graph();
  Matrix<S> out(1, static_cast<Eigen::Index>(index.size()));
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] < 0 || index[i] >= a.cols()) throw IndexError("gather_cols: index out of range");
    out(0, static_cast<Eigen::Index>(i)) = a.value()(0, index[i]);
  }
  const int ia = a.id();
  return g.record(std::move(out), {a}, [ia, index](Graph<S>& g, const Matrix<S>& gout) {
    Matrix<S>& ga = g.grad(ia);
    for (std::size_t i = 0; i < index.size(); ++i) ga(0, index[i]) += gout(0, static_cast<Eigen::Index>(i));
  });
}

template <typename S>
Var<S> scatter_cols(Var<S> a, const std::vector<int>& index, Eigen::Index width) {
  require_row("scatter_cols", a);
  if (static_cast<Eigen::Index>(index.size()) != a.cols()) {
    throw ShapeError("scatter_cols: index length differs from operand width");
  }
  Graph<S>& g = *a.graph();
  Matrix<S> out = Matrix<S>::Zero(1, width);
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] < 0 || index[i] >= width) throw IndexError("scatter_cols: index out of range");
    out(0, index[i]) += a.value()(0, static_cast<Eigen::Index>(i));
  }
  const int ia = a.id();
  return g.record(std::move(out), {a}, [ia, index](Graph<S>& g, const Matrix<S>& gout) {
    Matrix<S>& ga = g.grad(ia);
    for (std::size_t i = 0; i < index.size(); ++i) ga(0, static_cast<Eigen::Index>(i)) += gout(0, index[i]);
  });
}

template <typename S>
Var<S> embedding(Graph<S>& g, Parameter<S>& table, const std::vector<int>& ids) {
  Matrix<S> out(static_cast<Eigen::Index>(ids.size()), table.value.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= table.value.rows()) {
      throw IndexError("embedding: id " + std::to_string(ids[i]) + " outside table " + table.name);
    }
    out.row(static_cast<Eigen::Index>(i)) = table.value.row(ids[i]);
  }
  Parameter<S>* p = &table;
  return g.record_leaf_op(std::move(out), [p, ids](Graph<S>&, const Matrix<S>& gout) {
    for (std::size_t i = 0; i < ids.size(); ++i) p->grad.row(ids[i]) += gout.row(static_cast<Eigen::Index>(i));
  });
}

template <typename S>
Var<S> sum(Var<S> a) {
  Graph<S>& g = *a.graph();
  Matrix<S> out(1, 1);
  out(0, 0) = a.value().sum();
  const int ia = a.id();
  return g.record(std::move(out), {a}, [ia](Graph<S>& g, const Matrix<S>& gout) {
    g.grad(ia).array() += gout(0, 0);
  });
}

template <typename S>
Var<S> mean(Var<S> a) {
  if (a.value().size() == 0) throw ShapeError("mean: empty operand");
  return scale(sum(a), S(1) / static_cast<S>(a.value().size()));
}

template <typename S>
Var<S> mse(Var<S> a, Var<S> b) {
  require_same_graph("mse", a, b);
  require_same_shape("mse", a, b);
  if (a.value().size() == 0) throw ShapeError("mse: empty operands");
  Graph<S>& g = *a.graph();
  const S n = static_cast<S>(a.value().size());
  Matrix<S> out(1, 1);
  out(0, 0) = (a.value() - b.value()).squaredNorm() / n;
  const int ia = a.id(), ib = b.id();
  return g.record(std::move(out), {a, b}, [ia, ib, n](Graph<S>& g, const Matrix<S>& gout) {
    const Matrix<S> d = (g.value(ia) - g.value(ib)) * (S(2) * gout(0, 0) / n);
    if (g.requires_grad(ia)) g.grad(ia) += d;
    if (g.requires_grad(ib)) g.grad(ib) -= d;
  });
}

template <typename S>
Var<S> neg_log(Var<S> a, S eps) {
  Graph<S>& g = *a.graph();
  Matrix<S> out = (-(a.value().array() + eps).log()).matrix();
  const int ia = a.id();
  return g.record(std::move(out), {a}, [ia, eps](Graph<S>& g, const Matrix<S>& gout) {
    g.grad(ia) -= (gout.array() / (g.value(ia).array() + eps)).matrix();
  });
}

template <typename S>
Var<S> nll(Var<S> p, int index, S eps) {
  require_row("nll", p);
  if (index < 0 || index >= p.cols()) throw IndexError("nll: target index out of range");
  Graph<S>& g = *p.graph();
  Matrix<S> out(1, 1);
  out(0, 0) = -std::log(p.value()(0, index) + eps);
  const int ip = p.id();
  return g.record(std::move(out), {p}, [ip, index, eps](Graph<S>& g, const Matrix<S>& gout) {
    g.grad(ip)(0, index) -= gout(0, 0) / (g.value(ip)(0, index) + eps);
  });
}

#define MKP_INSTANTIATE_OPS(S)                                                              \
  template Var<S> matmul(Var<S>, Var<S>);                                                   \
  template Var<S> transpose(Var<S>);                                                        \
  template Var<S> add(Var<S>, Var<S>);                                                      \
  template Var<S> sub(Var<S>, Var<S>);                                                      \
  template Var<S> add_row(Var<S>, Var<S>);                                                  \
  template Var<S> add_scalar(Var<S>, Var<S>);                                               \
  template Var<S> cmul(Var<S>, Var<S>);                                                     \
  template Var<S> cmul_const(Var<S>, const Matrix<S>&);                                     \
  template Var<S> scale(Var<S>, S);                                                         \
  template Var<S> scale_by(Var<S>, Var<S>);                                                 \
  template Var<S> scale_rows(Var<S>, Var<S>);                                               \
  template Var<S> one_minus(Var<S>);                                                        \
  template Var<S> sigmoid(Var<S>);                                                          \
  template Var<S> tanh(Var<S>);                                                             \
  template Var<S> relu(Var<S>);                                                             \
  template Var<S> clamp(Var<S>, S, S);                                                      \
  template Var<S> softmax(Var<S>);                                                          \
  template Var<S> layernorm(Var<S>, S);                                                     \
  template Var<S> maxpool_columns(Var<S>);                                                  \
  template Var<S> concat_cols(const std::vector<Var<S>>&);                                  \
  template Var<S> concat_rows(const std::vector<Var<S>>&);                                  \
  template Var<S> slice_cols(Var<S>, Eigen::Index, Eigen::Index);                           \
  template Var<S> slice_rows(Var<S>, Eigen::Index, Eigen::Index);                           \
  template Var<S> gather_cols(Var<S>, const std::vector<int>&);                             \
  template Var<S> scatter_cols(Var<S>, const std::vector<int>&, Eigen::Index);              \
  template Var<S> embedding(Graph<S>&, Parameter<S>&, const std::vector<int>&);             \
  template Var<S> sum(Var<S>);                                                              \
  template Var<S> mean(Var<S>);                                                             \
  template Var<S> mse(Var<S>, Var<S>);                                                      \
  template Var<S> neg_log(Var<S>, S);                                                       \
  template Var<S> nll(Var<S>, int, S);

MKP_INSTANTIATE_OPS(float)
MKP_INSTANTIATE_OPS(double)
MKP_INSTANTIATE_OPS(long double)

#undef MKP_INSTANTIATE_OPS

}  // namespace mkp
