#include "survacc/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <ostream>
#include <sstream>

#include <Eigen/QR>

#include "survacc/format.hpp"
#include "survacc/quadrature.hpp"

namespace survacc {

MomentumGrid::MomentumGrid(double p_min, double p_max, Eigen::Index n)
    : p_min_(p_min), p_max_(p_max), n_(n) {
  if (n < 3 || n % 2 == 0) throw ConfigError("grid point count must be odd and >= 3");
  if (!(p_min < p_max) || !std::isfinite(p_min) || !std::isfinite(p_max)) {
    throw ConfigError("grid bounds must be finite with p_min < p_max");
  }
}

Eigen::ArrayXd MomentumGrid::points() const {
  Eigen::ArrayXd p(n_);
  const double h = spacing();
  for (Eigen::Index i = 0; i < n_; ++i) p[i] = p_min_ + static_cast<double>(i) * h;
  return p;
}

ComplexAmplitudeField::ComplexAmplitudeField(MomentumGrid g, Eigen::ArrayXcd v)
    : grid(std::move(g)), values(std::move(v)) {
  if (values.size() != grid.size()) throw std::invalid_argument("field length must match the grid");
  if (!values.allFinite()) throw std::invalid_argument("field values must be finite");
}

MomentumGrid build_grid(const GaussianMomentumState<double>& state, const AtomParams<double>& atom,
                        const PhysicalConstants<double>& consts, double t_max,
                        double coverage_sigmas, Eigen::Index n, DispersionModel model,
                        RatePolicy policy) {
  if (!(coverage_sigmas >= kMinCoverageSigmas)) {
    throw ConfigError("grid coverage must be at least 6 sigma");
  }
  if (n < 3 || n % 2 == 0) throw ConfigError("grid point count must be odd and >= 3");

  // The mean drifts and the width grows, so take the envelope over the
  // interval rather than only its end point.
  constexpr int kSamples = 64;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (int k = 0; k <= kSamples; ++k) {
    const double t = t_max * k / kSamples;
    const double mu = mean_momentum(state, atom, consts, t);
    const double width = coverage_sigmas * std::sqrt(effective_variance(state, atom, consts, t));
    lo = std::min(lo, mu - width);
    hi = std::max(hi, mu + width);
  }

  if (model == DispersionModel::FirstOrder && policy == RatePolicy::Strict) {
    const double limit = std::sqrt(2.0) * atom.mass() * consts.c();
    if (std::max(std::abs(lo), std::abs(hi)) >= limit) {
      std::ostringstream msg;
      msg << "grid span [" << lo << ", " << hi << "] reaches |p| >= sqrt(2) m c = " << limit
          << " where the first-order decay rate is non-positive";
      throw ValidityError(msg.str());
    }
  }
  return MomentumGrid(lo, hi, n);
}

ComplexAmplitudeField initial_wavefunction(const GaussianMomentumState<double>& state,
                                           const MomentumGrid& grid) {
  const double var = state.sigma() * state.sigma();
  const double norm = std::pow(2.0 * std::numbers::pi * var, -0.25);
  const Eigen::ArrayXd p = grid.points();
  const Eigen::ArrayXd amp = norm * (-(p - state.p0()).square() / (4.0 * var)).exp();
  return {grid, amp.cast<std::complex<double>>()};
}

namespace {

struct PointwiseEvolution {
  Eigen::ArrayXd rate;
  Eigen::ArrayXd phase;  // -E(p) t / hbar
};

PointwiseEvolution pointwise(const MomentumGrid& grid, const AtomParams<double>& atom,
                             const PhysicalConstants<double>& consts, double t,
                             DispersionModel model, RatePolicy policy) {
  if (!(t >= 0) || !std::isfinite(t)) throw std::invalid_argument("time must be finite and >= 0");
  PointwiseEvolution out{Eigen::ArrayXd(grid.size()), Eigen::ArrayXd(grid.size())};
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    const double p = grid.point(i);
    out.rate[i] = lab_decay_rate(p, atom, consts, model, policy);
    out.phase[i] = -total_energy(p, atom, consts, model) * t / consts.hbar();
  }
  return out;
}

Eigen::ArrayXcd unit_phase(const Eigen::ArrayXd& phase) {
  return phase.unaryExpr([](double phi) { return std::polar(1.0, phi); });
}

Eigen::ArrayXd decay_branch_weight(const Eigen::ArrayXd& rate, double t) {
  // 1 - exp(-Gamma t), zero where the continued first-order rate is not positive.
  return rate.unaryExpr([t](double g) { return g > 0 ? -std::expm1(-g * t) : 0.0; });
}

double weighted_mean(const MomentumGrid& grid, const Eigen::ArrayXd& density) {
  const double h = grid.spacing();
  const double norm = simpson(density, h);
  if (!(norm > 1e-30)) throw ValidityError("post-selected ensemble is empty (vanishing norm)");
  return simpson(grid.points() * density, h) / norm;
}

}  // namespace

EvolutionSnapshot evolve(const ComplexAmplitudeField& field0, const AtomParams<double>& atom,
                         const PhysicalConstants<double>& consts, double t, DispersionModel model,
                         RatePolicy policy) {
  const MomentumGrid& grid = field0.grid;
  const PointwiseEvolution ev = pointwise(grid, atom, consts, t, model, policy);
  const Eigen::ArrayXcd phase = unit_phase(ev.phase);

  const Eigen::ArrayXd survive = (-ev.rate * t).exp();
  const Eigen::ArrayXcd psi = field0.values * phase * (0.5 * -ev.rate * t).exp().cast<std::complex<double>>();
  const Eigen::ArrayXcd chi =
      field0.values * phase * decay_branch_weight(ev.rate, t).sqrt().cast<std::complex<double>>();

  if (!psi.allFinite()) {
    throw ValidityError("continued first-order growth overflows on this grid; reduce t or use the exact model");
  }

  // Norms and moments come from |psi0|^2 exp(-Gamma t) directly, which keeps
  // them independent of the phase convention.
  const Eigen::ArrayXd density = field0.abs2() * survive;
  const double h = grid.spacing();
  const double norm_psi = simpson(density, h);
  const double norm_chi = simpson(chi.abs2().eval(), h);
  const double mean = norm_psi > 1e-30 ? simpson((grid.points() * density).eval(), h) / norm_psi
                                       : std::numeric_limits<double>::quiet_NaN();
  return {t,
          ComplexAmplitudeField(grid, psi),
          ComplexAmplitudeField(grid, chi),
          norm_psi,
          norm_chi,
          mean,
          model};
}

double conditional_mean_momentum(const EvolutionSnapshot& snapshot) {
  if (!(snapshot.norm_sq_psi > 1e-30)) {
    throw ValidityError("post-selected ensemble is empty (vanishing norm)");
  }
  return snapshot.mean_p;
}

double conditional_mean_momentum(const ComplexAmplitudeField& psi) {
  return weighted_mean(psi.grid, psi.abs2());
}

ComplexAmplitudeField detector_amplitude(const ComplexAmplitudeField& field0,
                                         const AtomParams<double>& atom,
                                         const PhysicalConstants<double>& consts, double t,
                                         DispersionModel model, RatePolicy policy) {
  const PointwiseEvolution ev = pointwise(field0.grid, atom, consts, t, model, policy);
  return {field0.grid, field0.values * unit_phase(ev.phase) *
                           decay_branch_weight(ev.rate, t).sqrt().cast<std::complex<double>>()};
}

double branch_norm_residual(const ComplexAmplitudeField& field0, const EvolutionSnapshot& snapshot) {
  const Eigen::ArrayXd ref = field0.abs2();
  const Eigen::ArrayXd sum = snapshot.psi.abs2() + snapshot.chi.abs2();
  double worst = 0.0;
  for (Eigen::Index i = 0; i < ref.size(); ++i) {
    if (ref[i] > 0) worst = std::max(worst, std::abs(sum[i] - ref[i]) / ref[i]);
  }
  return worst;
}

DispersionComparison dispersion_comparison(const GaussianMomentumState<double>& state,
                                           const AtomParams<double>& atom,
                                           const PhysicalConstants<double>& consts, double t,
                                           const GridSettings& settings, RatePolicy policy) {
  const MomentumGrid grid = build_grid(state, atom, consts, t, settings.coverage_sigmas, settings.n,
                                       DispersionModel::FirstOrder, policy);
  const ComplexAmplitudeField psi0 = initial_wavefunction(state, grid);
  const double first = conditional_mean_momentum(evolve(psi0, atom, consts, t, DispersionModel::FirstOrder, policy));
  const double exact =
      conditional_mean_momentum(evolve(psi0, atom, consts, t, DispersionModel::ExactRelativistic, policy));
  const double diff = std::abs(first - exact);
  const double deviation = diff == 0.0 ? 0.0 : diff / std::abs(first);
  return {t, first, exact, deviation};
}

GaussianFit fit_log_quadratic(const MomentumGrid& grid, const Eigen::ArrayXd& density,
                              double floor_ratio) {
  if (density.size() != grid.size()) throw std::invalid_argument("density length must match the grid");
  Eigen::Index peak_index = 0;
  const double peak = density.maxCoeff(&peak_index);
  if (!(peak > 0)) throw std::invalid_argument("density has no positive values");

  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < density.size(); ++i) {
    if (density[i] >= floor_ratio * peak) keep.push_back(i);
  }
  if (keep.size() < 3) throw std::invalid_argument("too few points above the fit floor");

  // Center and scale the abscissa for conditioning.
  const double center = grid.point(peak_index);
  const double scale = std::max(center - grid.point(keep.front()), grid.point(keep.back()) - center);
  const auto rows = static_cast<Eigen::Index>(keep.size());
  Eigen::MatrixXd design(rows, 3);
  Eigen::VectorXd rhs(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const double u = (grid.point(keep[r]) - center) / scale;
    design.row(r) << 1.0, u, u * u;
    rhs[r] = std::log(density[keep[r]]);
  }
  const Eigen::Vector3d coeff = design.colPivHouseholderQr().solve(rhs);
  if (!(coeff[2] < 0)) throw std::invalid_argument("log-density is not concave; not a Gaussian");

  const double residual = std::sqrt((design * coeff - rhs).squaredNorm() / static_cast<double>(rows));
  return {center - coeff[1] * scale / (2.0 * coeff[2]), -scale * scale / (2.0 * coeff[2]), center,
          residual};
}

void write_snapshot_csv(std::ostream& out, const EvolutionSnapshot& snapshot) {
  out << "p,re_psi,im_psi,abs2_psi,abs2_chi\n";
  const MomentumGrid& grid = snapshot.psi.grid;
  const Eigen::ArrayXd abs2_psi = snapshot.psi.abs2();
  const Eigen::ArrayXd abs2_chi = snapshot.chi.abs2();
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    const std::complex<double> v = snapshot.psi.values[i];
    out << format_double(grid.point(i)) << ',' << format_double(v.real()) << ','
        << format_double(v.imag()) << ',' << format_double(abs2_psi[i]) << ','
        << format_double(abs2_chi[i]) << '\n';
  }
}

}  // namespace survacc
