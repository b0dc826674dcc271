#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <sstream>
#include <string>

#include "survacc/numeric.hpp"
#include "survacc/quadrature.hpp"
#include "test_util.hpp"

using namespace survacc;
using survacc::test::rel_err;

namespace {

const auto kNatural = PhysicalConstants<double>::natural();
const AtomParams<double> kFigureAtom(1.0, 5.0);
const GaussianMomentumState<double> kFigureState(1.0, 0.2);
constexpr auto kFO = DispersionModel::FirstOrder;
constexpr auto kExact = DispersionModel::ExactRelativistic;
constexpr auto kContinue = RatePolicy::ContinueFirstOrder;

const PhysicalConstants<double> kTableConsts(3.00e8, 1.054571817e-34);
const AtomParams<double> kRb87(1.44e-25, 3.70e7);
const GaussianMomentumState<double> kRb87State(1.44e-27, 1.0e-28);

MomentumGrid figure_grid(Eigen::Index n = 4097, double t_max = 1.0) {
  return build_grid(kFigureState, kFigureAtom, kNatural, t_max, 8.0, n, kFO, kContinue);
}

}  // namespace

TEST_CASE("simpson rule") {
  // Exact for cubics.
  const Eigen::ArrayXd x = Eigen::ArrayXd::LinSpaced(5, 0.0, 2.0);
  CHECK(rel_err(simpson((x.cube() - x + 1.0).eval(), 0.5), 4.0 - 2.0 + 2.0) < 1e-15);
  CHECK_THROWS(simpson_weights(4, 1.0));
}

TEST_CASE("grid construction") {
  const MomentumGrid g = figure_grid();
  CHECK(g.size() == 4097);
  // Brute-force envelope of mu_t +- 8 sigma_t on a fine time mesh.
  double lo = 1e9, hi = -1e9;
  for (int k = 0; k <= 10000; ++k) {
    const double t = k / 10000.0;
    const double mu = mean_momentum(kFigureState, kFigureAtom, kNatural, t);
    const double w = 8 * std::sqrt(effective_variance(kFigureState, kFigureAtom, kNatural, t));
    lo = std::min(lo, mu - w);
    hi = std::max(hi, mu + w);
  }
  CHECK(g.p_min() <= lo + 1e-6);
  CHECK(g.p_max() >= hi - 1e-12);
  CHECK(std::abs(g.p_max() - (1.25 + 8 * std::sqrt(0.05))) < 1e-12);
  CHECK(rel_err(g.spacing(), (g.p_max() - g.p_min()) / 4096) < 1e-15);

  const MomentumGrid g0 = build_grid(kFigureState, kFigureAtom, kNatural, 0.0, 8.0, 101, kFO, kContinue);
  CHECK(rel_err(g0.p_min(), 1.0 - 1.6) < 1e-15);
  CHECK(rel_err(g0.p_max(), 1.0 + 1.6) < 1e-15);

  CHECK_THROWS_AS(build_grid(kFigureState, kFigureAtom, kNatural, 1.0, 5.0, 4097, kFO, kContinue), ConfigError);
  CHECK_THROWS_AS(build_grid(kFigureState, kFigureAtom, kNatural, 1.0, 8.0, 4096, kFO, kContinue), ConfigError);
  CHECK_THROWS_AS(build_grid(kFigureState, kFigureAtom, kNatural, 1.0, 8.0, 1, kFO, kContinue), ConfigError);
  CHECK_THROWS_AS(build_grid(kFigureState, kFigureAtom, kNatural, 5.0, 8.0, 4097, kFO, kContinue), ValidityError);
  // Strict first order: the Fig. 1 packet reaches past sqrt(2) m c.
  CHECK_THROWS_AS(build_grid(kFigureState, kFigureAtom, kNatural, 1.0, 8.0, 4097, kFO, RatePolicy::Strict),
                  ValidityError);
  CHECK_NOTHROW(build_grid(kFigureState, kFigureAtom, kNatural, 1.0, 8.0, 4097, kExact, RatePolicy::Strict));
  CHECK_NOTHROW(build_grid(kRb87State, kRb87, kTableConsts, kRb87.tau0(), 8.0, 4097));
  CHECK_THROWS_AS(MomentumGrid(1.0, 0.0, 5), ConfigError);
}

TEST_CASE("initial wavefunction") {
  const MomentumGrid g = build_grid(kFigureState, kFigureAtom, kNatural, 0.0, 8.0, 4097, kFO, kContinue);
  const ComplexAmplitudeField psi0 = initial_wavefunction(kFigureState, g);
  const Eigen::Index mid = g.size() / 2;
  CHECK(g.point(mid) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(rel_err(psi0.values[mid].real(), std::pow(2 * M_PI * 0.04, -0.25)) < 1e-14);
  CHECK(psi0.values.imag().abs().maxCoeff() == 0.0);
  CHECK(std::abs(simpson(psi0.abs2(), g.spacing()) - 1.0) < 1e-8);
  CHECK(std::abs(conditional_mean_momentum(psi0) - 1.0) < 1e-10 * 0.2);
}

TEST_CASE("evolve basics") {
  const MomentumGrid g = figure_grid();
  const ComplexAmplitudeField psi0 = initial_wavefunction(kFigureState, g);

  const EvolutionSnapshot s0 = evolve(psi0, kFigureAtom, kNatural, 0.0, kFO, kContinue);
  CHECK((s0.psi.values - psi0.values).abs().maxCoeff() == 0.0);
  CHECK(std::abs(s0.norm_sq_psi - 1.0) < 1e-8);
  CHECK(s0.chi.values.abs().maxCoeff() == 0.0);
  CHECK(std::abs(conditional_mean_momentum(s0) - 1.0) < 1e-8 * 0.2);

  // Unitary limit.
  const AtomParams<double> stable(1.0, 0.0);
  const EvolutionSnapshot su = evolve(psi0, stable, kNatural, 2.0, kExact);
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    CHECK(std::abs(std::abs(su.psi.values[i]) - std::abs(psi0.values[i])) <= 1e-15 * std::abs(psi0.values[i]));
  }

  CHECK_THROWS_AS(evolve(psi0, kFigureAtom, kNatural, 1.0, kFO, RatePolicy::Strict), ValidityError);
  CHECK_THROWS_AS(evolve(psi0, kFigureAtom, kNatural, -1.0, kFO, kContinue), std::invalid_argument);
}

TEST_CASE("grid density matches the closed-form density") {
  const MomentumGrid g = figure_grid();
  const ComplexAmplitudeField psi0 = initial_wavefunction(kFigureState, g);
  const Eigen::ArrayXd p = g.points();
  for (double t : {0.0, 0.5, 1.0}) {
    const EvolutionSnapshot s = evolve(psi0, kFigureAtom, kNatural, t, kFO, kContinue);
    const Eigen::ArrayXd numeric = s.psi.abs2();
    const Eigen::ArrayXd analytic = unnormalized_density(kFigureState, kFigureAtom, kNatural, p, t);
    CHECK(((numeric - analytic).abs() / analytic).maxCoeff() < 1e-10);
    Eigen::Index arg = 0;
    numeric.maxCoeff(&arg);
    CHECK(std::abs(g.point(arg) - mean_momentum(kFigureState, kFigureAtom, kNatural, t)) <= g.spacing());
    // Nothing leaks past the grid edges.
    CHECK(std::max(numeric[0], numeric[g.size() - 1]) < 1e-12 * numeric.maxCoeff());

    const GaussianFit fit = fit_log_quadratic(g, numeric);
    CHECK(rel_err(fit.mean, mean_momentum(kFigureState, kFigureAtom, kNatural, t)) < 1e-6);
    CHECK(rel_err(fit.variance, effective_variance(kFigureState, kFigureAtom, kNatural, t)) < 1e-6);
  }
}

TEST_CASE("conditional mean momentum") {
  const MomentumGrid g = figure_grid();
  const ComplexAmplitudeField psi0 = initial_wavefunction(kFigureState, g);
  const EvolutionSnapshot s1 = evolve(psi0, kFigureAtom, kNatural, 1.0, kFO, kContinue);
  CHECK(std::abs(conditional_mean_momentum(s1) - 1.25) < 1e-6);
  CHECK(std::abs(conditional_mean_momentum(s1.psi) - 1.25) < 1e-6);

  const GaussianMomentumState<double> rest(0.0, 0.2);
  const MomentumGrid gr = build_grid(rest, kFigureAtom, kNatural, 1.0, 8.0, 4097, kFO, kContinue);
  const ComplexAmplitudeField r0 = initial_wavefunction(rest, gr);
  CHECK(std::abs(conditional_mean_momentum(evolve(r0, kFigureAtom, kNatural, 1.0, kFO, kContinue))) < 1e-10 * 0.2);

  // Global phase does not move the mean.
  const ComplexAmplitudeField shifted(s1.psi.grid, s1.psi.values * std::polar(1.0, 0.731));
  CHECK(rel_err(conditional_mean_momentum(shifted), conditional_mean_momentum(s1.psi)) < 1e-14);

  // Fully decayed.
  const AtomParams<double> fast(1.0, 1e4);
  const GaussianMomentumState<double> narrow(0.0, 0.01);
  const MomentumGrid gn = build_grid(narrow, fast, kNatural, 0.0, 8.0, 101);
  const EvolutionSnapshot dead = evolve(initial_wavefunction(narrow, gn), fast, kNatural, 1.0, kExact);
  CHECK_THROWS_AS(conditional_mean_momentum(dead), ValidityError);
}

TEST_CASE("detector branch") {
  const MomentumGrid g = build_grid(kFigureState, kFigureAtom, kNatural, 1.0, 8.0, 2049, kExact);
  const ComplexAmplitudeField psi0 = initial_wavefunction(kFigureState, g);
  CHECK(detector_amplitude(psi0, kFigureAtom, kNatural, 0.0, kExact).values.abs().maxCoeff() == 0.0);

  const ComplexAmplitudeField late = detector_amplitude(psi0, kFigureAtom, kNatural, 200.0, kExact);
  CHECK(((late.abs2() - psi0.abs2()).abs() / psi0.abs2()).maxCoeff() < 1e-12);

  for (double t : {0.01, 0.3, 1.0, 3.0}) {
    const EvolutionSnapshot s = evolve(psi0, kFigureAtom, kNatural, t, kExact);
    CHECK(branch_norm_residual(psi0, s) < 1e-12);
    CHECK(std::abs(s.norm_sq_psi + s.norm_sq_chi - 1.0) < 1e-8);
    CHECK(s.norm_sq_psi > 0);
    CHECK(s.norm_sq_psi <= 1);
    const ComplexAmplitudeField chi = detector_amplitude(psi0, kFigureAtom, kNatural, t, kExact);
    CHECK((chi.values - s.chi.values).abs().maxCoeff() == 0.0);
  }

  // Continued first order: no decay channel where the rate is negative.
  const MomentumGrid gf = figure_grid(2049);
  const ComplexAmplitudeField f0 = initial_wavefunction(kFigureState, gf);
  const ComplexAmplitudeField chi = detector_amplitude(f0, kFigureAtom, kNatural, 1.0, kFO, kContinue);
  for (Eigen::Index i = 0; i < gf.size(); ++i) {
    if (std::abs(gf.point(i)) >= std::sqrt(2.0)) CHECK(chi.values[i] == std::complex<double>(0.0));
  }
  CHECK_THROWS_AS(detector_amplitude(f0, kFigureAtom, kNatural, 1.0, kFO), ValidityError);
}

TEST_CASE("semigroup and monotone norm") {
  const MomentumGrid g = build_grid(kFigureState, kFigureAtom, kNatural, 2.0, 8.0, 1025, kExact);
  const ComplexAmplitudeField psi0 = initial_wavefunction(kFigureState, g);
  for (auto [t1, t2] : {std::pair{0.3, 0.7}, std::pair{1.0, 1.0}, std::pair{0.05, 1.9}}) {
    const EvolutionSnapshot a = evolve(evolve(psi0, kFigureAtom, kNatural, t1, kExact).psi, kFigureAtom,
                                       kNatural, t2, kExact);
    const EvolutionSnapshot b = evolve(psi0, kFigureAtom, kNatural, t1 + t2, kExact);
    CHECK(((a.psi.values - b.psi.values).abs() / b.psi.values.abs()).maxCoeff() < 1e-12);
  }
  double previous = 2.0;
  for (int k = 0; k <= 40; ++k) {
    const double norm = evolve(psi0, kFigureAtom, kNatural, k * 0.05, kExact).norm_sq_psi;
    CHECK(norm < previous);
    previous = norm;
  }
}

TEST_CASE("first-order grid norm conservation in the valid regime") {
  // Slow packet: the grid stays inside |p| < sqrt(2) m c, so Strict applies.
  const GaussianMomentumState<double> slow(0.3, 0.05);
  const MomentumGrid g = build_grid(slow, kFigureAtom, kNatural, 1.0, 8.0, 2049);
  const ComplexAmplitudeField psi0 = initial_wavefunction(slow, g);
  for (double t : {0.0, 0.5, 1.0}) {
    const EvolutionSnapshot s = evolve(psi0, kFigureAtom, kNatural, t, kFO);
    CHECK(branch_norm_residual(psi0, s) < 1e-12);
    CHECK(std::abs(s.norm_sq_psi + s.norm_sq_chi - 1.0) < 1e-8);
    CHECK(rel_err(conditional_mean_momentum(s), mean_momentum(slow, kFigureAtom, kNatural, t)) < 1e-6);
  }
}

TEST_CASE("quadrature convergence") {
  // Nested grids: each refinement halves the spacing.  Starts where the
  // spacing first resolves sigma (n = 9 has h ~ 2 sigma and is pre-asymptotic).
  double previous_err = -1;
  for (Eigen::Index n : {17, 33, 65}) {
    const MomentumGrid g = figure_grid(n);
    const EvolutionSnapshot s = evolve(initial_wavefunction(kFigureState, g), kFigureAtom, kNatural, 1.0, kFO, kContinue);
    const double err = std::abs(conditional_mean_momentum(s) - 1.25);
    if (previous_err > 0) CHECK(previous_err / err >= 8.0);
    previous_err = err;
  }
}

TEST_CASE("dispersion comparison") {
  const DispersionComparison table = dispersion_comparison(kRb87State, kRb87, kTableConsts, kRb87.tau0());
  CHECK(table.relative_deviation < 1e-20);
  CHECK(rel_err(table.mean_p_first_order, 1.44e-27) < 1e-12);

  const AtomParams<double> stable(1.0, 0.0);
  CHECK(dispersion_comparison(kFigureState, stable, kNatural, 1.0, {}, kContinue).relative_deviation == 0.0);

  const DispersionComparison fig = dispersion_comparison(kFigureState, kFigureAtom, kNatural, 1.0, {}, kContinue);
  CHECK(fig.relative_deviation > 0);
  CHECK(fig.mean_p_exact > 1.0);  // same drift direction
  CHECK(fig.mean_p_exact < fig.mean_p_first_order);
}

TEST_CASE("surviving norm at one proper lifetime, Table I") {
  const MomentumGrid g = build_grid(kRb87State, kRb87, kTableConsts, kRb87.tau0(), 8.0, 4097);
  const EvolutionSnapshot s = evolve(initial_wavefunction(kRb87State, g), kRb87, kTableConsts, kRb87.tau0(), kFO);
  CHECK(rel_err(s.norm_sq_psi, std::exp(-1.0)) < 1e-6);
}

TEST_CASE("snapshot CSV") {
  const MomentumGrid g = build_grid(kFigureState, kFigureAtom, kNatural, 0.0, 8.0, 11, kExact);
  const EvolutionSnapshot s = evolve(initial_wavefunction(kFigureState, g), kFigureAtom, kNatural, 0.5, kExact);
  std::ostringstream out;
  write_snapshot_csv(out, s);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "p,re_psi,im_psi,abs2_psi,abs2_chi");
  int rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    if (rows == 4) {
      const double p = std::stod(line.substr(0, line.find(',')));
      CHECK(p == g.point(3));  // shortest round-trip formatting
    }
  }
  CHECK(rows == 11);
}
