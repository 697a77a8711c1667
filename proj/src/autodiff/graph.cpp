#include "mkp/autodiff/graph.hpp"

#include "mkp/core/error.hpp"

namespace mkp {

template <typename Scalar>
Var<Scalar> Graph<Scalar>::append(Node node) {
  nodes_.push_back(std::move(node));
  return Var<Scalar>(this, static_cast<int>(nodes_.size()) - 1);
}

template <typename Scalar>
Var<Scalar> Graph<Scalar>::constant(Mat value) {
  Node n;
  n.owned = std::move(value);
  return append(std::move(n));
}

template <typename Scalar>
Var<Scalar> Graph<Scalar>::parameter(Parameter<Scalar>& p) {
  if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) {
    return Var<Scalar>(this, it->second);
  }
  Node n;
  n.external = &p.value;
  n.requires_grad = tracking_;
  n.param = &p;
  Var<Scalar> v = append(std::move(n));
  param_nodes_.emplace(&p, v.id());
  return v;
}

template <typename Scalar>
Var<Scalar> Graph<Scalar>::record(Mat value, const std::vector<Var<Scalar>>& inputs,
                                  BackwardFn fn) {
  Node n;
  n.owned = std::move(value);
  if (tracking_) {
    for (const auto& in : inputs) {
      if (nodes_[in.id()].requires_grad) {
        n.requires_grad = true;
        break;
      }
    }
  }
  if (n.requires_grad) n.backward = std::move(fn);
  return append(std::move(n));
}

template <typename Scalar>
Var<Scalar> Graph<Scalar>::record(Mat value, std::initializer_list<Var<Scalar>> inputs,
                                  BackwardFn fn) {
  return record(std::move(value), std::vector<Var<Scalar>>(inputs), std::move(fn));
}

template <typename Scalar>
Var<Scalar> Graph<Scalar>::record_leaf_op(Mat value, BackwardFn fn) {
  Node n;
  n.owned = std::move(value);
  n.requires_grad = tracking_;
  if (tracking_) n.backward = std::move(fn);
  return append(std::move(n));
}

template <typename Scalar>
const typename Graph<Scalar>::Mat& Graph<Scalar>::value(int id) const {
  const Node& n = nodes_[id];
  return n.external ? *n.external : n.owned;
}

template <typename Scalar>
typename Graph<Scalar>::Mat& Graph<Scalar>::grad(int id) {
  Node& n = nodes_[id];
  if (n.grad.size() == 0) {
    const Mat& v = value(id);
    n.grad = Mat::Zero(v.rows(), v.cols());
  }
  return n.grad;
}

template <typename Scalar>
void Graph<Scalar>::backward(Var<Scalar> root) {
  if (root.graph() != this) throw Error("backward: root belongs to another graph");
  const Mat& rv = value(root.id());
  if (rv.rows() != 1 || rv.cols() != 1) throw ShapeError("backward: root must be 1x1");
  if (!nodes_[root.id()].requires_grad) return;
  grad(root.id())(0, 0) += Scalar(1);
  for (int id = root.id(); id >= 0; --id) {
    Node& n = nodes_[id];
    if (n.grad.size() == 0) continue;
    if (n.backward) n.backward(*this, n.grad);
    if (n.param) n.param->grad += n.grad;
  }
}

template <typename Scalar>
void Graph<Scalar>::truncate(std::size_t size) {
  if (size >= nodes_.size()) return;
  nodes_.resize(size);
  std::erase_if(param_nodes_, [size](const auto& e) { return e.second >= static_cast<int>(size); });
}

template class Graph<float>;
template class Graph<double>;
template class Graph<long double>;

}  // namespace mkp
