#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Core>

namespace cmil {

template <typename Scalar>
Scalar sigmoid(Scalar x) {
  if (x >= Scalar(0)) return Scalar(1) / (Scalar(1) + std::exp(-x));
  const Scalar e = std::exp(x);
  return e / (Scalar(1) + e);
}

/// log(1 + exp(x)) without overflow.
template <typename Scalar>
Scalar softplus(Scalar x) {
  return x > Scalar(0) ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

template <typename Scalar>
Scalar log_sigmoid(Scalar x) {
  return -softplus(-x);
}

// log(sum_i exp(x_i)), shifted by the maximum.
template <typename Derived>
typename Derived::Scalar log_sum_exp(const Eigen::DenseBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  if (x.size() == 0) return -std::numeric_limits<Scalar>::infinity();
  const Scalar top = x.maxCoeff();
  if (!std::isfinite(top)) return top;
  return top + std::log((x.derived().array() - top).exp().sum());
}

// log((1/n) sum_i exp(x_i)). Returns the common value exactly when all
// entries are equal.
template <typename Derived>
typename Derived::Scalar log_mean_exp(const Eigen::DenseBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  if (x.size() == 0) throw std::invalid_argument("log_mean_exp of an empty range");
  const Scalar top = x.maxCoeff();
  if (!std::isfinite(top)) return top;
  const Scalar mean = (x.derived().array() - top).exp().sum() / static_cast<Scalar>(x.size());
  return top + std::log(mean);
}

// Softmax of a vector, shifted by the maximum.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> softmax(
    const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> e = (x.array() - x.maxCoeff()).exp().matrix();
  return e / e.sum();
}

}  // namespace cmil
