#pragma once

// Momentum-grid propagation of the conditional state.
//
// The effective Hamiltonian is diagonal in momentum, so evolution is an exact
// pointwise multiplication
//   psi(p,t) = psi(p,0) exp(-i E(p) t / hbar) exp(-Gamma(p) t / 2)
// and no time stepping is involved.  The phase uses E(p) including the rest
// energy; it drops out of every modulus-based quantity.

#include <iosfwd>
#include <optional>

#include <Eigen/Core>

#include "survacc/analytic.hpp"
#include "survacc/physics.hpp"

namespace survacc {

inline constexpr double kMinCoverageSigmas = 6.0;

class MomentumGrid {
 public:
  MomentumGrid(double p_min, double p_max, Eigen::Index n);

  double p_min() const { return p_min_; }
  double p_max() const { return p_max_; }
  Eigen::Index size() const { return n_; }
  double spacing() const { return (p_max_ - p_min_) / static_cast<double>(n_ - 1); }
  double point(Eigen::Index i) const { return p_min_ + static_cast<double>(i) * spacing(); }
  Eigen::ArrayXd points() const;

  bool operator==(const MomentumGrid&) const = default;

 private:
  double p_min_;
  double p_max_;
  Eigen::Index n_;
};

struct ComplexAmplitudeField {
  MomentumGrid grid;
  Eigen::ArrayXcd values;

  ComplexAmplitudeField(MomentumGrid g, Eigen::ArrayXcd v);
  Eigen::ArrayXd abs2() const { return values.abs2(); }
};

struct EvolutionSnapshot {
  double t;
  ComplexAmplitudeField psi;
  ComplexAmplitudeField chi;
  double norm_sq_psi;
  double norm_sq_chi;
  double mean_p;
  DispersionModel model;
};

struct GridSettings {
  Eigen::Index n = 4097;
  double coverage_sigmas = 8.0;
};

/// Uniform grid covering mu_t +- coverage * sigma_t for every t in [0, t_max].
/// Under FirstOrder/Strict the span must stay inside |p| < sqrt(2) m c.
MomentumGrid build_grid(const GaussianMomentumState<double>& state, const AtomParams<double>& atom,
                        const PhysicalConstants<double>& consts, double t_max,
                        double coverage_sigmas, Eigen::Index n,
                        DispersionModel model = DispersionModel::FirstOrder,
                        RatePolicy policy = RatePolicy::Strict);

ComplexAmplitudeField initial_wavefunction(const GaussianMomentumState<double>& state,
                                           const MomentumGrid& grid);

EvolutionSnapshot evolve(const ComplexAmplitudeField& field0, const AtomParams<double>& atom,
                         const PhysicalConstants<double>& consts, double t, DispersionModel model,
                         RatePolicy policy = RatePolicy::Strict);

/// Integral of p |psi|^2 over integral of |psi|^2.
double conditional_mean_momentum(const EvolutionSnapshot& snapshot);
double conditional_mean_momentum(const ComplexAmplitudeField& psi);

/// Detector branch chi(p,t) = psi(p,0) sqrt(1 - exp(-Gamma t)) exp(-i E t / hbar).
/// Points with a non-positive (continued) first-order rate have no open decay
/// channel and get chi = 0.
ComplexAmplitudeField detector_amplitude(const ComplexAmplitudeField& field0,
                                         const AtomParams<double>& atom,
                                         const PhysicalConstants<double>& consts, double t,
                                         DispersionModel model,
                                         RatePolicy policy = RatePolicy::Strict);

/// max_p | |psi|^2 + |chi|^2 - |psi0|^2 | / |psi0|^2 over points with psi0 != 0.
double branch_norm_residual(const ComplexAmplitudeField& field0, const EvolutionSnapshot& snapshot);

struct DispersionComparison {
  double t;
  double mean_p_first_order;
  double mean_p_exact;
  double relative_deviation;
};

DispersionComparison dispersion_comparison(const GaussianMomentumState<double>& state,
                                           const AtomParams<double>& atom,
                                           const PhysicalConstants<double>& consts, double t,
                                           const GridSettings& settings = {},
                                           RatePolicy policy = RatePolicy::Strict);

struct GaussianFit {
  double mean;
  double variance;
  double peak_p;  // grid argmax
  double log_rms_residual;
};

/// Least-squares fit of log(density) to a quadratic in p over the points whose
/// density is at least floor_ratio times the peak.
GaussianFit fit_log_quadratic(const MomentumGrid& grid, const Eigen::ArrayXd& density,
                              double floor_ratio = 1e-12);

/// CSV with header `p,re_psi,im_psi,abs2_psi,abs2_chi`, shortest round-trip
/// scientific notation.
void write_snapshot_csv(std::ostream& out, const EvolutionSnapshot& snapshot);

}  // namespace survacc
