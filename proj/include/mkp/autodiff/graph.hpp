#pragma once

#include "mkp/autodiff/parameters.hpp"
#include "mkp/core/types.hpp"

#include <functional>
#include <unordered_map>
#include <deque>
#include <vector>

namespace mkp {

template <typename Scalar>
class Graph;

// Handle to a node of a Graph. Cheap to copy; valid while the graph lives.
template <typename Scalar>
class Var {
 public:
  Var() = default;
  Var(Graph<Scalar>* graph, int id) : graph_(graph), id_(id) {}

  Graph<Scalar>* graph() const { return graph_; }
  int id() const { return id_; }
  bool valid() const { return graph_ != nullptr; }

  const Matrix<Scalar>& value() const { return graph_->value(id_); }
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  Scalar scalar() const { return value()(0, 0); }

 private:
  Graph<Scalar>* graph_ = nullptr;
  int id_ = -1;
};

// Reverse-mode tape. Nodes are appended in evaluation order, so reverse
// creation order is a valid topological order for backward().
//
// A graph built with track_gradients=false records values only; it is the
// inference path and costs no closures.
template <typename Scalar>
class Graph {
 public:
  using Mat = Matrix<Scalar>;
  // Receives the node's accumulated output gradient and pushes it to inputs.
  using BackwardFn = std::function<void(Graph&, const Mat&)>;

  explicit Graph(bool track_gradients = true) : tracking_(track_gradients) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool tracking() const { return tracking_; }

  Var<Scalar> constant(Mat value);
  // Leaf bound to a parameter; one node per parameter per graph.
  Var<Scalar> parameter(Parameter<Scalar>& p);

  // Op-author API: appends a node whose gradient requirement is inherited
  // from `inputs`. `fn` is dropped when no input requires a gradient.
  Var<Scalar> record(Mat value, std::initializer_list<Var<Scalar>> inputs, BackwardFn fn);
  Var<Scalar> record(Mat value, const std::vector<Var<Scalar>>& inputs, BackwardFn fn);
  // Appends a node that always requires a gradient (parameter-reading ops).
  Var<Scalar> record_leaf_op(Mat value, BackwardFn fn);

  const Mat& value(int id) const;
  bool requires_grad(int id) const { return nodes_[id].requires_grad; }
  // Gradient buffer of a node, zero-allocated on first access.
  Mat& grad(int id);
  bool has_grad(int id) const { return nodes_[id].grad.size() != 0; }

  // Seeds d(root)/d(root) = 1 and propagates; root must be 1x1. Parameter
  // gradients accumulate into Parameter::grad.
  void backward(Var<Scalar> root);

  std::size_t size() const { return nodes_.size(); }

  // Drops every node created after the graph had `size` nodes. Vars to the
  // dropped nodes become dangling.
  void truncate(std::size_t size);

 private:
  struct Node {
    Mat owned;
    const Mat* external = nullptr;
    Mat grad;
    bool requires_grad = false;
    BackwardFn backward;
    Parameter<Scalar>* param = nullptr;
  };

  Var<Scalar> append(Node node);

  bool tracking_;
  std::deque<Node> nodes_;  // stable addresses: values stay valid as the tape grows
  std::unordered_map<Parameter<Scalar>*, int> param_nodes_;
};

}  // namespace mkp
