#include "mkp/training/optimizer.hpp"

#include "mkp/core/error.hpp"

#include <cmath>

namespace mkp {

template <typename S>
Adam<S>::Adam(const ParameterStore<S>& store, AdamConfig config) : config_(config) {
  if (!(config.learning_rate > 0) || !(config.beta1 >= 0 && config.beta1 < 1) ||
      !(config.beta2 >= 0 && config.beta2 < 1) || !(config.epsilon > 0)) {
    throw ConfigError("invalid Adam hyper-parameters");
  }
  for (std::size_t i = 0; i < store.size(); ++i) {
    m_.push_back(Matrix<S>::Zero(store[i].value.rows(), store[i].value.cols()));
    v_.push_back(Matrix<S>::Zero(store[i].value.rows(), store[i].value.cols()));
  }
}

template <typename S>
void Adam<S>::step(ParameterStore<S>& store) {
  if (store.size() != m_.size()) throw ShapeError("Adam: parameter store changed size");
  ++t_;
  const S b1 = static_cast<S>(config_.beta1), b2 = static_cast<S>(config_.beta2);
  const S c1 = S(1) - static_cast<S>(std::pow(config_.beta1, static_cast<double>(t_)));
  const S c2 = S(1) - static_cast<S>(std::pow(config_.beta2, static_cast<double>(t_)));
  const S lr = static_cast<S>(config_.learning_rate), eps = static_cast<S>(config_.epsilon);
  for (std::size_t i = 0; i < store.size(); ++i) {
    auto& p = store[i];
    m_[i] = b1 * m_[i] + (S(1) - b1) * p.grad;
    v_[i] = b2 * v_[i] + (S(1) - b2) * p.grad.cwiseAbs2();
    p.value.array() -= lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps);
  }
}

template <typename S>
S clip_grad_norm(ParameterStore<S>& store, S max_norm) {
  const S norm = store.grad_norm();
  if (!std::isfinite(static_cast<double>(norm))) throw NumericError("non-finite gradient norm");
  if (norm > max_norm && norm > S(0)) store.scale_grad(max_norm / norm);
  return norm;
}

template class Adam<float>;
template class Adam<double>;
template float clip_grad_norm(ParameterStore<float>&, float);
template double clip_grad_norm(ParameterStore<double>&, double);

}  // namespace mkp
