#pragma once

#include <stdexcept>

#include <Eigen/Core>

namespace survacc {

/// Composite Simpson weights (1, 4, 2, 4, ..., 4, 1) * h / 3 for an odd
/// number of uniformly spaced samples.
inline Eigen::ArrayXd simpson_weights(Eigen::Index n, double h) {
  if (n < 3 || n % 2 == 0) throw std::invalid_argument("Simpson rule needs an odd sample count >= 3");
  Eigen::ArrayXd w(n);
  for (Eigen::Index i = 0; i < n; ++i) w[i] = (i % 2 == 1) ? 4.0 : 2.0;
  w[0] = w[n - 1] = 1.0;
  return w * (h / 3.0);
}

/// Composite Simpson integral of uniformly sampled values.
template <typename Derived>
typename Derived::Scalar simpson(const Eigen::ArrayBase<Derived>& values, double h) {
  return (simpson_weights(values.size(), h).template cast<typename Derived::Scalar>() * values).sum();
}

}  // namespace survacc
