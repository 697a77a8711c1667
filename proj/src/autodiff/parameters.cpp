#include "mkp/autodiff/parameters.hpp"

#include "mkp/core/error.hpp"

#include <cmath>

namespace mkp {

template <typename Scalar>
ParameterStore<Scalar>::ParameterStore(const ParameterStore& other) {
  *this = other;
}

template <typename Scalar>
ParameterStore<Scalar>& ParameterStore<Scalar>::operator=(const ParameterStore& other) {
  if (this == &other) return *this;
  params_.clear();
  index_ = other.index_;
  params_.reserve(other.params_.size());
  for (const auto& p : other.params_) {
    params_.push_back(std::make_unique<Parameter<Scalar>>(*p));
  }
  return *this;
}

template <typename Scalar>
Parameter<Scalar>& ParameterStore<Scalar>::add(const std::string& name, Eigen::Index rows,
                                               Eigen::Index cols) {
  if (contains(name)) throw ConfigError("duplicate parameter name: " + name);
  if (rows <= 0 || cols <= 0) throw ShapeError("parameter " + name + " has empty shape");
  auto p = std::make_unique<Parameter<Scalar>>();
  p->name = name;
  p->value = Matrix<Scalar>::Zero(rows, cols);
  p->grad = Matrix<Scalar>::Zero(rows, cols);
  index_[name] = params_.size();
  params_.push_back(std::move(p));
  return *params_.back();
}

template <typename Scalar>
Parameter<Scalar>& ParameterStore<Scalar>::add_uniform(const std::string& name, Eigen::Index rows,
                                                       Eigen::Index cols, double range,
                                                       std::mt19937_64& rng) {
  auto& p = add(name, rows, cols);
  std::uniform_real_distribution<double> dist(-range, range);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) p.value(i, j) = static_cast<Scalar>(dist(rng));
  }
  return p;
}

template <typename Scalar>
Parameter<Scalar>& ParameterStore<Scalar>::get(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter: " + name);
  return *params_[it->second];
}

template <typename Scalar>
const Parameter<Scalar>& ParameterStore<Scalar>::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter: " + name);
  return *params_[it->second];
}

template <typename Scalar>
Eigen::Index ParameterStore<Scalar>::num_elements() const {
  Eigen::Index n = 0;
  for (const auto& p : params_) n += p->size();
  return n;
}

template <typename Scalar>
void ParameterStore<Scalar>::zero_grad() {
  for (auto& p : params_) p->grad.setZero();
}

template <typename Scalar>
Scalar ParameterStore<Scalar>::grad_norm() const {
  Scalar sq = 0;
  for (const auto& p : params_) sq += p->grad.squaredNorm();
  return std::sqrt(sq);
}

template <typename Scalar>
void ParameterStore<Scalar>::scale_grad(Scalar factor) {
  for (auto& p : params_) p->grad *= factor;
}

template class ParameterStore<float>;
template class ParameterStore<double>;
template class ParameterStore<long double>;

}  // namespace mkp
