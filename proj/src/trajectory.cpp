#include "survacc/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <thread>

#include <boost/accumulators/accumulators.hpp>
#include <boost/accumulators/statistics/stats.hpp>
#include <boost/accumulators/statistics/sum_kahan.hpp>

namespace survacc {

namespace {

namespace acc = boost::accumulators;
using KahanSum = acc::accumulator_set<double, acc::stats<acc::tag::sum_kahan>>;

double total(const KahanSum& s) { return acc::sum_kahan(s); }

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Runs body(i) for i in [0, n) over contiguous blocks.  Each index writes only
// its own output slot, so the result does not depend on the thread count.
template <typename Body>
void parallel_for(std::size_t n, unsigned threads, Body&& body) {
  threads = std::max(1u, threads);
  if (threads == 1 || n < 2 * threads) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::jthread> workers;
  workers.reserve(threads);
  const std::size_t block = (n + threads - 1) / threads;
  for (unsigned w = 0; w < threads; ++w) {
    const std::size_t begin = w * block;
    const std::size_t end = std::min(n, begin + block);
    if (begin >= end) break;
    workers.emplace_back([&body, begin, end] {
      for (std::size_t i = begin; i < end; ++i) body(i);
    });
  }
}

}  // namespace

std::uint64_t SeedSpec::trajectory_seed(std::uint64_t index, Stream stream) const {
  constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;
  return mix64(mix64(master_seed + kGolden) ^ mix64(index * kGolden + stream + 1));
}

std::vector<double> sample_momenta(const GaussianMomentumState<double>& state, std::size_t n,
                                   const SeedSpec& seeds, unsigned threads) {
  if (n == 0) throw std::invalid_argument("need at least one trajectory");
  std::vector<double> out(n);
  parallel_for(n, threads, [&](std::size_t i) {
    auto gen = seeds.generator(i, SeedSpec::kMomentum);
    std::normal_distribution<double> normal(state.p0(), state.sigma());
    out[i] = normal(gen);
  });
  return out;
}

std::vector<TrajectoryRecord> simulate_fates(std::span<const double> momenta,
                                             const AtomParams<double>& atom,
                                             const PhysicalConstants<double>& consts,
                                             double horizon, DispersionModel model,
                                             const SeedSpec& seeds, RatePolicy policy,
                                             unsigned threads) {
  if (!(horizon > 0) || !std::isfinite(horizon)) throw std::invalid_argument("horizon must be > 0");
  // Validate every rate up front so a Strict violation surfaces as one error
  // instead of inside a worker.
  std::vector<double> rates(momenta.size());
  for (std::size_t i = 0; i < momenta.size(); ++i) {
    rates[i] = lab_decay_rate(momenta[i], atom, consts, model, policy);
  }

  std::vector<TrajectoryRecord> out(momenta.size());
  parallel_for(momenta.size(), threads, [&](std::size_t i) {
    out[i].p = momenta[i];
    if (!(rates[i] > 0)) return;  // no open decay channel
    auto gen = seeds.generator(i, SeedSpec::kFate);
    std::exponential_distribution<double> waiting(rates[i]);
    const double tau = waiting(gen);
    if (tau <= horizon) out[i].decay_time = tau;
  });
  return out;
}

EnsembleStats conditional_stats(std::span<const TrajectoryRecord> records,
                                const AtomParams<double>& atom,
                                const PhysicalConstants<double>& consts, double t,
                                DispersionModel model, RatePolicy policy) {
  if (records.empty()) throw std::invalid_argument("empty ensemble");
  if (!(t >= 0)) throw std::invalid_argument("time must be >= 0");

  KahanSum p_all, e_all, p_surv, e_surv, p_dec, e_dec;
  KahanSum w_surv, wp_surv;
  std::size_t n_surv = 0;
  std::size_t n_growth = 0;
  std::vector<double> weights;
  weights.reserve(records.size());

  for (const auto& rec : records) {
    const double energy = total_energy(rec.p, atom, consts, model);
    p_all(rec.p);
    e_all(energy);
    if (rec.survived_to(t)) {
      ++n_surv;
      p_surv(rec.p);
      e_surv(energy);
      const double rate = lab_decay_rate(rec.p, atom, consts, model, policy);
      double w = 1.0;
      if (rate < 0) {
        w = std::exp(-rate * t);
        ++n_growth;
      }
      weights.push_back(w);
      w_surv(w);
      wp_surv(w * rec.p);
    } else {
      p_dec(rec.p);
      e_dec(energy);
    }
  }
  if (n_surv == 0) throw ValidityError("no trajectory survived to t; conditional statistics undefined");

  const auto n = static_cast<double>(records.size());
  const auto ns = static_cast<double>(n_surv);
  const std::size_t n_dec = records.size() - n_surv;

  EnsembleStats s;
  s.t = t;
  s.n_total = records.size();
  s.n_survived = n_surv;
  s.survival_fraction = ns / n;
  s.sample_mean_p = total(p_all) / n;
  s.mean_energy_total = total(e_all) / n;
  s.mean_p_survived = total(p_surv) / ns;
  s.mean_energy_survived = total(e_surv) / ns;
  if (n_dec > 0) {
    s.mean_p_decayed = total(p_dec) / static_cast<double>(n_dec);
    s.mean_energy_decayed = total(e_dec) / static_cast<double>(n_dec);
  }

  s.n_growth = n_growth;
  const double wsum = total(w_surv);
  s.survival_estimate = wsum / n;
  s.conditional_mean_p = total(wp_surv) / wsum;

  // Second pass for spreads around the final means.
  if (n_surv >= 2) {
    KahanSum sq, wsq;
    std::size_t k = 0;
    for (const auto& rec : records) {
      if (!rec.survived_to(t)) continue;
      const double d = rec.p - s.mean_p_survived;
      const double dw = weights[k++] * (rec.p - s.conditional_mean_p);
      sq(d * d);
      wsq(dw * dw);
    }
    s.se_survived = std::sqrt(total(sq) / (ns - 1) / ns);
    // Ratio-estimator SE; reduces to the plain SE for unit weights.
    s.conditional_se = std::sqrt(total(wsq) * ns / (ns - 1)) / wsum;
  }
  return s;
}

PartitionResiduals conservation_check(const EnsembleStats& stats) {
  const double f = stats.survival_fraction;
  const double p_dec = stats.mean_p_decayed.value_or(0.0);
  const double e_dec = stats.mean_energy_decayed.value_or(0.0);
  const double dp = std::abs(f * stats.mean_p_survived + (1 - f) * p_dec - stats.sample_mean_p);
  const double de = std::abs(f * stats.mean_energy_survived + (1 - f) * e_dec - stats.mean_energy_total);
  auto rel = [](double diff, double ref) { return ref != 0 ? diff / std::abs(ref) : diff; };
  return {dp, de, rel(dp, stats.sample_mean_p), rel(de, stats.mean_energy_total)};
}

}  // namespace survacc
