#pragma once

// Constants, dispersion relations, Lorentz factors and momentum-dependent
// decay rates for a moving two-level atom.
//
// Everything here is a pure function of its arguments and is templated on the
// scalar type so that the same expressions can be evaluated in double for the
// engines and in long double for test oracles.

#include <cmath>
#include <limits>
#include <string>

#include "survacc/errors.hpp"

namespace survacc {

enum class UnitSystem { SI, Natural };
enum class DispersionModel { FirstOrder, ExactRelativistic };

// How the first-order decay rate is treated once it turns non-positive
// (|p| >= sqrt(2) m c).  Strict raises ValidityError.  ContinueFirstOrder
// keeps the expanded expression as written, so exp(-Gamma t) becomes a growth
// factor there; this is what the unnormalized density plots use.
enum class RatePolicy { Strict, ContinueFirstOrder };

inline std::string to_string(DispersionModel model) {
  return model == DispersionModel::FirstOrder ? "first-order" : "exact";
}
inline std::string to_string(UnitSystem units) {
  return units == UnitSystem::SI ? "si" : "natural";
}
inline std::string to_string(RatePolicy policy) {
  return policy == RatePolicy::Strict ? "strict" : "continue-first-order";
}

template <typename Scalar = double>
class PhysicalConstants {
 public:
  PhysicalConstants(Scalar c, Scalar hbar, UnitSystem units = UnitSystem::SI)
      : c_(c), hbar_(hbar), units_(units) {
    if (!(c > 0) || !(hbar > 0) || !std::isfinite(c) || !std::isfinite(hbar)) {
      throw ConfigError("physical constants must be finite and strictly positive");
    }
    if (units == UnitSystem::Natural && (c != Scalar(1) || hbar != Scalar(1))) {
      throw ConfigError("natural units pin c = hbar = 1");
    }
  }

  /// c = hbar = 1 exactly.
  static PhysicalConstants natural() { return {Scalar(1), Scalar(1), UnitSystem::Natural}; }

  /// CODATA c and hbar.
  static PhysicalConstants si() {
    return {Scalar(299792458.0), Scalar(1.054571817e-34L), UnitSystem::SI};
  }

  Scalar c() const { return c_; }
  Scalar hbar() const { return hbar_; }
  UnitSystem units() const { return units_; }

 private:
  Scalar c_;
  Scalar hbar_;
  UnitSystem units_;
};

/// Two-level atom: rest mass and proper (rest-frame) decay rate.
template <typename Scalar = double>
class AtomParams {
 public:
  AtomParams(Scalar mass, Scalar gamma0) : mass_(mass), gamma0_(gamma0) {
    if (!(mass > 0) || !std::isfinite(mass)) throw ConfigError("atom mass must be finite and > 0");
    // gamma0 = 0 is allowed: it is the unitary (non-decaying) limit.
    if (!(gamma0 >= 0) || !std::isfinite(gamma0)) throw ConfigError("gamma0 must be finite and >= 0");
  }

  Scalar mass() const { return mass_; }
  Scalar gamma0() const { return gamma0_; }
  /// Proper lifetime 1/gamma0; +inf when gamma0 == 0.
  Scalar tau0() const {
    return gamma0_ > 0 ? Scalar(1) / gamma0_ : std::numeric_limits<Scalar>::infinity();
  }

 private:
  Scalar mass_;
  Scalar gamma0_;
};

namespace detail {

// (p / mc)^2, formed from the ratio so SI magnitudes neither under- nor overflow.
template <typename Scalar>
Scalar beta_sq(Scalar p, const AtomParams<Scalar>& atom, const PhysicalConstants<Scalar>& consts) {
  const Scalar r = p / (atom.mass() * consts.c());
  return r * r;
}

}  // namespace detail

template <typename Scalar>
Scalar lorentz_factor(Scalar p, const AtomParams<Scalar>& atom,
                      const PhysicalConstants<Scalar>& consts, DispersionModel model) {
  using std::sqrt;
  const Scalar x = detail::beta_sq(p, atom, consts);
  return model == DispersionModel::FirstOrder ? Scalar(1) + x / 2 : sqrt(Scalar(1) + x);
}

/// Lab-frame decay rate Gamma(p).  FirstOrder is the expanded
/// gamma0 (1 - p^2 / 2m^2c^2); ExactRelativistic is gamma0 / gamma(p).
template <typename Scalar>
Scalar lab_decay_rate(Scalar p, const AtomParams<Scalar>& atom,
                      const PhysicalConstants<Scalar>& consts, DispersionModel model,
                      RatePolicy policy = RatePolicy::Strict) {
  using std::sqrt;
  const Scalar x = detail::beta_sq(p, atom, consts);
  if (model == DispersionModel::ExactRelativistic) return atom.gamma0() / sqrt(Scalar(1) + x);

  const Scalar factor = Scalar(1) - x / 2;
  if (policy == RatePolicy::Strict && !(factor > 0)) {
    throw ValidityError("first-order decay rate is non-positive for |p| >= sqrt(2) m c");
  }
  return atom.gamma0() * factor;
}

template <typename Scalar>
Scalar total_energy(Scalar p, const AtomParams<Scalar>& atom,
                    const PhysicalConstants<Scalar>& consts, DispersionModel model) {
  using std::sqrt;
  const Scalar mc2 = atom.mass() * consts.c() * consts.c();
  const Scalar x = detail::beta_sq(p, atom, consts);
  if (model == DispersionModel::FirstOrder) return mc2 * (Scalar(1) + x / 2 - x * x / 8);
  return mc2 * sqrt(Scalar(1) + x);
}

/// exp(-Gamma(p) t) for a single momentum component.
template <typename Scalar>
Scalar survival_probability_single(Scalar p, const AtomParams<Scalar>& atom,
                                   const PhysicalConstants<Scalar>& consts, Scalar t,
                                   DispersionModel model,
                                   RatePolicy policy = RatePolicy::Strict) {
  using std::exp;
  if (!(t >= 0)) throw std::invalid_argument("time must be >= 0");
  return exp(-lab_decay_rate(p, atom, consts, model, policy) * t);
}

}  // namespace survacc
