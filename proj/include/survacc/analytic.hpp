#pragma once

// Closed-form conditional (no-decay) dynamics of a Gaussian momentum state
// under the first-order effective Hamiltonian.
//
// The surviving density stays Gaussian.  With the dimensionless drift
// s = t / t_threshold = sigma^2 gamma0 t / (m^2 c^2):
//
//   sigma_t^2 = sigma^2 / (1 - s),   mu_t = p0 / (1 - s),
//   F(t) = p0 sigma^2 gamma0 / (m^2 c^2 (1 - s)^2).
//
// All functions that divide by (1 - s) refuse times at or past
// (1 - kValidityMargin) * t_threshold.
//
// Note the two normalizations: mean_momentum is the normalized conditional
// expectation, unnormalized_density is the raw |psi(p,t)|^2 whose integral is
// ensemble_survival_probability.

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include <Eigen/Core>

#include "survacc/physics.hpp"

namespace survacc {

inline constexpr double kValidityMargin = 1e-9;

template <typename Scalar = double>
class GaussianMomentumState {
 public:
  GaussianMomentumState(Scalar p0, Scalar sigma) : p0_(p0), sigma_(sigma) {
    if (!std::isfinite(p0)) throw ConfigError("p0 must be finite");
    if (!(sigma > 0) || !std::isfinite(sigma)) throw ConfigError("sigma must be finite and > 0");
  }

  Scalar p0() const { return p0_; }
  Scalar sigma() const { return sigma_; }

 private:
  Scalar p0_;
  Scalar sigma_;
};

template <typename Scalar = double>
struct AnalyticReport {
  Scalar t;
  Scalar sigma_t_sq;
  Scalar mu_t;
  Scalar force;           // time-dependent force at t
  Scalar constant_force;  // t -> 0 value
  Scalar accel;
  Scalar threshold_time;
  Scalar survival_prob;
};

/// m^2 c^2 / (sigma^2 gamma0); +inf for a non-decaying atom.
template <typename Scalar>
Scalar validity_threshold(const GaussianMomentumState<Scalar>& state,
                          const AtomParams<Scalar>& atom,
                          const PhysicalConstants<Scalar>& consts) {
  if (atom.gamma0() == 0) return std::numeric_limits<Scalar>::infinity();
  const Scalar r = atom.mass() * consts.c() / state.sigma();
  return r * r / atom.gamma0();
}

namespace detail {

// Returns s = t / threshold after checking 0 <= t < (1 - margin) threshold.
template <typename Scalar>
Scalar checked_drift(const GaussianMomentumState<Scalar>& state, const AtomParams<Scalar>& atom,
                     const PhysicalConstants<Scalar>& consts, Scalar t) {
  if (!(t >= 0) || !std::isfinite(t)) throw std::invalid_argument("time must be finite and >= 0");
  const Scalar threshold = validity_threshold(state, atom, consts);
  if (!std::isfinite(threshold)) return Scalar(0);
  if (t >= (Scalar(1) - Scalar(kValidityMargin)) * threshold) {
    std::ostringstream msg;
    msg << "t = " << t << " is at or beyond the validity threshold " << threshold
        << " (effective variance diverges)";
    throw ValidityError(msg.str());
  }
  return t / threshold;
}

}  // namespace detail

template <typename Scalar>
Scalar effective_variance(const GaussianMomentumState<Scalar>& state,
                          const AtomParams<Scalar>& atom,
                          const PhysicalConstants<Scalar>& consts, Scalar t) {
  const Scalar s = detail::checked_drift(state, atom, consts, t);
  return state.sigma() * state.sigma() / (Scalar(1) - s);
}

/// Conditional mean momentum <p>_t given no decay up to t.
template <typename Scalar>
Scalar mean_momentum(const GaussianMomentumState<Scalar>& state, const AtomParams<Scalar>& atom,
                     const PhysicalConstants<Scalar>& consts, Scalar t) {
  const Scalar s = detail::checked_drift(state, atom, consts, t);
  return state.p0() / (Scalar(1) - s);
}

/// p0 sigma^2 gamma0 / (m^2 c^2): the force at t = 0.
template <typename Scalar>
Scalar constant_survival_force(const GaussianMomentumState<Scalar>& state,
                               const AtomParams<Scalar>& atom,
                               const PhysicalConstants<Scalar>& consts) {
  const Scalar mc = atom.mass() * consts.c();
  return state.p0() * state.sigma() * state.sigma() * atom.gamma0() / (mc * mc);
}

/// d<p>_t/dt.
template <typename Scalar>
Scalar survival_force(const GaussianMomentumState<Scalar>& state, const AtomParams<Scalar>& atom,
                      const PhysicalConstants<Scalar>& consts, Scalar t) {
  const Scalar s = detail::checked_drift(state, atom, consts, t);
  const Scalar denom = Scalar(1) - s;
  return constant_survival_force(state, atom, consts) / (denom * denom);
}

template <typename Scalar>
Scalar survival_acceleration(const GaussianMomentumState<Scalar>& state,
                             const AtomParams<Scalar>& atom,
                             const PhysicalConstants<Scalar>& consts) {
  return constant_survival_force(state, atom, consts) / atom.mass();
}

/// Non-normalized |psi(p,t)|^2 under first-order dispersion.
template <typename Scalar>
Scalar unnormalized_density(const GaussianMomentumState<Scalar>& state,
                            const AtomParams<Scalar>& atom,
                            const PhysicalConstants<Scalar>& consts, Scalar p, Scalar t) {
  using std::exp;
  using std::sqrt;
  if (!(t >= 0)) throw std::invalid_argument("time must be >= 0");
  const Scalar var = state.sigma() * state.sigma();
  const Scalar dp = p - state.p0();
  const Scalar x = detail::beta_sq(p, atom, consts);
  const Scalar exponent = -dp * dp / (2 * var) + x * atom.gamma0() * t / 2;
  return exp(exponent - atom.gamma0() * t) / sqrt(2 * std::numbers::pi_v<Scalar> * var);
}

/// Vectorized form over an Eigen array of momenta.
template <typename Derived>
auto unnormalized_density(const GaussianMomentumState<typename Derived::Scalar>& state,
                          const AtomParams<typename Derived::Scalar>& atom,
                          const PhysicalConstants<typename Derived::Scalar>& consts,
                          const Eigen::ArrayBase<Derived>& p, typename Derived::Scalar t) {
  using Scalar = typename Derived::Scalar;
  if (!(t >= 0)) throw std::invalid_argument("time must be >= 0");
  const Scalar var = state.sigma() * state.sigma();
  const Scalar mc = atom.mass() * consts.c();
  const Scalar norm = Scalar(1) / std::sqrt(2 * std::numbers::pi_v<Scalar> * var);
  const auto exponent = -(p - state.p0()).square() / (2 * var) +
                        (p / mc).square() * (atom.gamma0() * t / 2) - atom.gamma0() * t;
  return (norm * exponent.exp()).eval();
}

/// Integral of unnormalized_density over p (no-decay probability of the
/// whole wavepacket):
///   exp(-gamma0 t) (sigma_t / sigma) exp((p0^2 / 2 sigma^2)(sigma_t^2 / sigma^2 - 1)).
template <typename Scalar>
Scalar ensemble_survival_probability(const GaussianMomentumState<Scalar>& state,
                                     const AtomParams<Scalar>& atom,
                                     const PhysicalConstants<Scalar>& consts, Scalar t) {
  using std::exp;
  using std::sqrt;
  const Scalar s = detail::checked_drift(state, atom, consts, t);
  const Scalar ratio = Scalar(1) / (Scalar(1) - s);  // sigma_t^2 / sigma^2
  const Scalar z = state.p0() / state.sigma();
  return exp(-atom.gamma0() * t + z * z / 2 * (ratio - 1)) * sqrt(ratio);
}

template <typename Scalar>
AnalyticReport<Scalar> analytic_report(const GaussianMomentumState<Scalar>& state,
                                       const AtomParams<Scalar>& atom,
                                       const PhysicalConstants<Scalar>& consts, Scalar t) {
  return {t,
          effective_variance(state, atom, consts, t),
          mean_momentum(state, atom, consts, t),
          survival_force(state, atom, consts, t),
          constant_survival_force(state, atom, consts),
          survival_acceleration(state, atom, consts),
          validity_threshold(state, atom, consts),
          ensemble_survival_probability(state, atom, consts, t)};
}

}  // namespace survacc
