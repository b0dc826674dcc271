#pragma once

// Monte Carlo quantum-jump ensemble.  Each trajectory carries a fixed momentum
// drawn from |psi(p,0)|^2 and decays after an exponential waiting time with its
// own lab-frame rate Gamma(p).  Photon recoil is not modeled: a decayed atom
// keeps its momentum.
//
// Randomness is derived per trajectory from (master_seed, index, stream), and
// all reductions run in index order with compensated summation, so results
// are bit-identical for any thread count.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "survacc/analytic.hpp"
#include "survacc/physics.hpp"

namespace survacc {

struct SeedSpec {
  std::uint64_t master_seed = 0;

  enum Stream : std::uint64_t { kMomentum = 0, kFate = 1 };

  /// Seed for one trajectory's generator on one stream.
  std::uint64_t trajectory_seed(std::uint64_t index, Stream stream) const;
  std::mt19937_64 generator(std::uint64_t index, Stream stream) const {
    return std::mt19937_64(trajectory_seed(index, stream));
  }
};

struct TrajectoryRecord {
  double p;
  std::optional<double> decay_time;  // empty: survived to the horizon

  bool survived_to(double t) const { return !decay_time || *decay_time > t; }
};

struct EnsembleStats {
  double t = 0;
  std::size_t n_total = 0;
  std::size_t n_survived = 0;

  // Plain partition of the fixed sample at time t.
  double survival_fraction = 0;  // n_survived / n_total
  double sample_mean_p = 0;
  double mean_p_survived = 0;
  std::optional<double> se_survived;  // needs >= 2 survivors
  std::optional<double> mean_p_decayed;
  double mean_energy_total = 0;
  double mean_energy_survived = 0;
  std::optional<double> mean_energy_decayed;

  // Estimators of the conditional expectation and of the no-decay
  // probability.  They equal the plain survivor values unless some sampled
  // momenta sit in the continued (negative-rate) first-order region, where a
  // trajectory cannot decay and instead carries the weight exp(-Gamma t).
  std::size_t n_growth = 0;
  double survival_estimate = 0;
  double conditional_mean_p = 0;
  std::optional<double> conditional_se;
};

struct PartitionResiduals {
  double momentum;  // |f m_s + (1 - f) m_d - m|
  double energy;
  double momentum_relative;
  double energy_relative;
};

std::vector<double> sample_momenta(const GaussianMomentumState<double>& state, std::size_t n,
                                   const SeedSpec& seeds, unsigned threads = 1);

std::vector<TrajectoryRecord> simulate_fates(std::span<const double> momenta,
                                             const AtomParams<double>& atom,
                                             const PhysicalConstants<double>& consts,
                                             double horizon, DispersionModel model,
                                             const SeedSpec& seeds,
                                             RatePolicy policy = RatePolicy::Strict,
                                             unsigned threads = 1);

/// Sub-ensemble statistics at time t <= horizon.  Throws ValidityError when
/// nobody survived to t.
EnsembleStats conditional_stats(std::span<const TrajectoryRecord> records,
                                const AtomParams<double>& atom,
                                const PhysicalConstants<double>& consts, double t,
                                DispersionModel model, RatePolicy policy = RatePolicy::Strict);

PartitionResiduals conservation_check(const EnsembleStats& stats);

}  // namespace survacc
