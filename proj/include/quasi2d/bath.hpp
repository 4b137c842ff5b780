// Continuous bosonic reservoir: spectral densities, the bath
// autocorrelation function, discretized memory coefficients and the
// influence factors that weight pairs of Liouville path indices.
//
// Units: frequencies in 1/ps with hbar = 1, times in ps, temperature in K.

#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <variant>
#include <vector>

#include "quasi2d/quadrature.hpp"
#include "quasi2d/tensor.hpp"

namespace q2d {

namespace units {
inline constexpr double hbar_si = 1.054571817e-34;      // J s
inline constexpr double kb_si = 1.380649e-23;           // J / K
inline constexpr double electron_mass = 9.1093837015e-31;  // kg
inline constexpr double electron_volt = 1.602176634e-19;   // J
/// hbar / k_B in K ps.
inline constexpr double hbar_over_kb = hbar_si / kb_si * 1e12;
}  // namespace units

/// J(w) = 2 alpha w^s wc^(1-s) exp(-(w/wc)^p).
struct ParametricDensity {
  double alpha = 0.0;
  double s = 1.0;
  double omega_c = 1.0;  // 1/ps
  int cutoff_power = 1;  // 1 exponential, 2 gaussian
};

/// Deformation-potential coupling of a confined carrier pair to bulk
/// acoustic phonons. Index 1 and 2 refer to the two carriers; the coupling
/// element entering J is g22 - g11.
struct GaasBulkDensity {
  double d1_ev = -3.5;        // deformation potentials, eV
  double d2_ev = 7.0;
  double m1 = 0.45;           // effective masses, units of the electron mass
  double m2 = 0.067;
  double hw1_mev = 12.0;      // confinement energies, meV
  double hw2_mev = 25.0;
  double rho = 5370.0;        // mass density, kg / m^3
  double c_s = 5110.0;        // sound velocity, m / s

  /// Coupling element g_q^{ii} in 1/s * m^{3/2} for carrier i in {1, 2}.
  double coupling(int carrier, double q) const {
    const double d = (carrier == 1 ? d1_ev : d2_ev) * units::electron_volt;
    const double m = (carrier == 1 ? m1 : m2) * units::electron_mass;
    const double hw = (carrier == 1 ? hw1_mev : hw2_mev) * 1e-3 * units::electron_volt;
    const double prefactor = std::sqrt(units::hbar_si * q / (2.0 * rho * c_s)) * d / units::hbar_si;
    return prefactor * std::exp(-units::hbar_si * units::hbar_si * q * q / (4.0 * m * hw));
  }
};

class SpectralDensity {
 public:
  SpectralDensity() : model_(ParametricDensity{}) {}
  SpectralDensity(ParametricDensity p) : model_(p) { validate(); }  // NOLINT(implicit)
  SpectralDensity(GaasBulkDensity g) : model_(g) { validate(); }    // NOLINT(implicit)

  static SpectralDensity zero() { return ParametricDensity{0.0, 1.0, 1.0, 1}; }

  const std::variant<ParametricDensity, GaasBulkDensity>& model() const noexcept { return model_; }

  bool is_zero() const {
    if (auto p = std::get_if<ParametricDensity>(&model_)) return p->alpha == 0.0;
    return false;
  }

  /// J(w) in 1/ps for w in 1/ps.
  double operator()(double omega) const {
    if (omega < 0.0) throw std::domain_error("spectral density: negative frequency");
    if (omega == 0.0) return 0.0;
    if (auto p = std::get_if<ParametricDensity>(&model_)) {
      if (p->alpha == 0.0) return 0.0;
      const double x = omega / p->omega_c;
      return 2.0 * p->alpha * std::pow(omega, p->s) * std::pow(p->omega_c, 1.0 - p->s) *
             std::exp(-std::pow(x, p->cutoff_power));
    }
    const auto& g = std::get<GaasBulkDensity>(model_);
    const double q = omega * 1e12 / g.c_s;
    const double gq = g.coupling(2, q) - g.coupling(1, q);
    return 4.0 * std::numbers::pi * q * q * gq * gq / g.c_s * 1e-12;
  }

  /// Frequency above which J(w) coth(w / 2T) stays below `rel` of its peak.
  double suggested_cutoff(double temperature, double rel = 1e-12) const {
    auto weight = [&](double w) {
      double c = 1.0;
      if (temperature > 0.0) c = 1.0 / std::tanh(w * units::hbar_over_kb / (2.0 * temperature));
      return (*this)(w) * c;
    };
    double peak = 0.0, w = 1e-3;
    for (; w < 1e4; w *= 1.02) peak = std::max(peak, weight(w));
    if (peak == 0.0) return 1.0;
    double top = 1e4;
    while (top > 1e-3 && weight(top) < rel * peak) top /= 1.02;
    return top * 1.02;
  }

 private:
  void validate() const {
    if (auto p = std::get_if<ParametricDensity>(&model_)) {
      if (p->alpha < 0.0 || p->omega_c <= 0.0 || p->s <= 0.0) {
        throw std::invalid_argument("parametric density: need alpha >= 0, omega_c > 0, s > 0");
      }
      if (p->cutoff_power != 1 && p->cutoff_power != 2) {
        throw std::invalid_argument("parametric density: cutoff power must be 1 or 2");
      }
    } else {
      const auto& g = std::get<GaasBulkDensity>(model_);
      if (g.m1 <= 0 || g.m2 <= 0 || g.hw1_mev <= 0 || g.hw2_mev <= 0 || g.rho <= 0 || g.c_s <= 0) {
        throw std::invalid_argument("gaas density: masses, energies, density and sound velocity must be positive");
      }
    }
  }

  std::variant<ParametricDensity, GaasBulkDensity> model_;
};

struct KernelSettings {
  double temperature = 0.0;            // K
  std::optional<double> omega_max;     // 1/ps; derived from J when empty
  std::size_t frequency_nodes = 2000;
};

/// phi(t) = int dw J(w) [coth(w / 2T) cos(wt) - i sin(wt)], evaluated with a
/// fixed Gauss-Legendre rule on [0, omega_max]. Immutable after construction.
class CorrelationKernel {
 public:
  CorrelationKernel(SpectralDensity density, KernelSettings settings)
      : density_(std::move(density)), settings_(settings) {
    if (settings_.temperature < 0.0) throw std::invalid_argument("correlation kernel: negative temperature");
    if (settings_.frequency_nodes == 0) throw std::invalid_argument("correlation kernel: zero frequency nodes");
    omega_max_ = settings_.omega_max.value_or(density_.suggested_cutoff(settings_.temperature));
    if (omega_max_ <= 0.0) throw std::invalid_argument("correlation kernel: omega_max must be positive");
    const QuadratureRule rule = gauss_legendre(settings_.frequency_nodes, 0.0, omega_max_);
    omega_ = rule.nodes;
    weight_.resize(omega_.size());
    coth_.resize(omega_.size());
    for (std::size_t k = 0; k < omega_.size(); ++k) {
      weight_[k] = rule.weights[k] * density_(omega_[k]);
      coth_[k] = settings_.temperature > 0.0
                     ? 1.0 / std::tanh(omega_[k] * units::hbar_over_kb / (2.0 * settings_.temperature))
                     : 1.0;
    }
  }

  const SpectralDensity& density() const noexcept { return density_; }
  double temperature() const noexcept { return settings_.temperature; }
  double omega_max() const noexcept { return omega_max_; }
  const KernelSettings& settings() const noexcept { return settings_; }

  cplx operator()(double t) const {
    if (!std::isfinite(t)) throw std::domain_error("correlation: non-finite time");
    double re = 0.0, im = 0.0;
    for (std::size_t k = 0; k < omega_.size(); ++k) {
      const double wt = omega_[k] * t;
      re += weight_[k] * coth_[k] * std::cos(wt);
      im -= weight_[k] * std::sin(wt);
    }
    return {re, im};
  }

  std::span<const double> nodes() const noexcept { return omega_; }
  std::span<const double> weights() const noexcept { return weight_; }  // includes J(w)
  std::span<const double> coth() const noexcept { return coth_; }

 private:
  SpectralDensity density_;
  KernelSettings settings_;
  double omega_max_ = 0.0;
  std::vector<double> omega_, weight_, coth_;
};

inline cplx correlation_phi(const CorrelationKernel& k, double t) { return k(t); }

/// Memory coefficients for one time step dt and lags 0..N, with the
/// cumulative tail used by the improved finite-memory closure.
struct EtaTable {
  double dt = 0.0;
  std::size_t n_c = 1;
  std::vector<cplx> eta;   // eta[k], k = 0..N
  std::vector<cplx> tail;  // tail[n] = sum_{k = n_c+1}^{n-1} eta[k], n = 0..N

  std::size_t steps() const noexcept { return eta.empty() ? 0 : eta.size() - 1; }

  /// Coefficient for the given lag at step n; the boundary lag n_c carries
  /// the folded-in tail.
  cplx effective(std::size_t lag, std::size_t n) const {
    if (lag > n_c) throw std::out_of_range("EtaTable: lag outside memory window");
    if (lag < n_c) return eta.at(lag);
    return eta.at(n_c) + tail.at(std::min(n, tail.size() - 1));
  }

  /// Zero table of the given size.
  static EtaTable zeros(double dt, std::size_t steps, std::size_t n_c) {
    EtaTable t;
    t.dt = dt;
    t.n_c = n_c;
    t.eta.assign(steps + 1, cplx{});
    t.tail.assign(steps + 1, cplx{});
    return t;
  }

  /// Table from explicit coefficients; the tail is rebuilt.
  static EtaTable from_coefficients(double dt, std::vector<cplx> eta, std::size_t n_c) {
    if (eta.size() < 2 || n_c < 1 || n_c > eta.size() - 1) throw std::invalid_argument("EtaTable: bad sizes");
    EtaTable t;
    t.dt = dt;
    t.n_c = n_c;
    t.eta = std::move(eta);
    t.rebuild_tail();
    return t;
  }

  void rebuild_tail() {
    tail.assign(eta.size(), cplx{});
    cplx acc{};
    for (std::size_t n = 0; n < eta.size(); ++n) {
      tail[n] = acc;  // sum over k in [n_c+1, n-1]
      if (n >= n_c + 1) acc += eta[n];
    }
  }
};

/// Builds eta_k for k = 0..steps. Off-diagonal lags integrate phi over the
/// square cell pair with a tensorized Gauss-Legendre rule; lag 0 integrates
/// the time-ordered triangle tau' < tau of the diagonal cell.
inline EtaTable eta_coefficients(const CorrelationKernel& kernel, double dt, std::size_t steps, std::size_t n_c,
                                 std::size_t cell_nodes = 32) {
  if (!(dt > 0.0)) throw std::invalid_argument("eta_coefficients: dt must be positive");
  if (n_c < 1 || n_c > steps) throw std::invalid_argument("eta_coefficients: need 1 <= n_c <= N");
  if (cell_nodes == 0) throw std::invalid_argument("eta_coefficients: zero cell nodes");

  EtaTable table = EtaTable::zeros(dt, steps, n_c);
  const QuadratureRule cell = gauss_legendre(cell_nodes, 0.0, 1.0);
  const auto w = kernel.nodes();
  const auto wj = kernel.weights();
  const auto coth = kernel.coth();

  // Tensorized cell rule collapses to per-frequency sums over node offsets.
  std::vector<double> cell_cos(w.size(), 0.0), cell_sin(w.size(), 0.0);
  for (std::size_t f = 0; f < w.size(); ++f) {
    double c = 0.0, s = 0.0;
    for (std::size_t a = 0; a < cell_nodes; ++a) {
      for (std::size_t b = 0; b < cell_nodes; ++b) {
        const double x = w[f] * dt * (cell.nodes[a] - cell.nodes[b]);
        const double ww = cell.weights[a] * cell.weights[b];
        c += ww * std::cos(x);
        s += ww * std::sin(x);
      }
    }
    cell_cos[f] = c;
    cell_sin[f] = s;
  }
  for (std::size_t k = 1; k <= steps; ++k) {
    double re = 0.0, im = 0.0;
    for (std::size_t f = 0; f < w.size(); ++f) {
      const double x = w[f] * dt * static_cast<double>(k);
      const double ck = std::cos(x), sk = std::sin(x);
      const double cos_sum = ck * cell_cos[f] - sk * cell_sin[f];
      const double sin_sum = sk * cell_cos[f] + ck * cell_sin[f];
      re += wj[f] * coth[f] * cos_sum;
      im -= wj[f] * sin_sum;
    }
    table.eta[k] = cplx{re, im} * (dt * dt);
  }

  // Triangle: int_0^dt dtau int_0^tau du phi(u), with u = tau * y.
  cplx diag{};
  for (std::size_t a = 0; a < cell_nodes; ++a) {
    const double tau = dt * cell.nodes[a];
    cplx inner{};
    for (std::size_t b = 0; b < cell_nodes; ++b) inner += cell.weights[b] * kernel(tau * cell.nodes[b]);
    diag += dt * cell.weights[a] * tau * inner;
  }
  table.eta[0] = diag;
  table.rebuild_tail();
  return table;
}

/// Two-level (or d-level) system with a diagonal bath coupling.
struct SystemModel {
  std::size_t dim = 2;
  std::vector<double> kappa{0.0, 1.0};  // eigenvalues of the coupling operator
  double omega0 = 0.0;                  // bare splitting in the rotating frame, 1/ps
  double rabi = 0.0;                    // Omega_0, 1/ps

  void validate() const {
    if (dim < 2) throw std::invalid_argument("SystemModel: dimension must be at least 2");
    if (kappa.size() != dim) throw std::invalid_argument("SystemModel: coupling eigenvalues must match dimension");
  }

  std::size_t liouville_dim() const noexcept { return dim * dim; }
};

/// Decodes a packed Liouville index j = i * d + i'.
inline std::pair<std::size_t, std::size_t> unpack(std::size_t j, std::size_t d) { return {j / d, j % d}; }

/// exp(S) for the path pair (j at the later time, jp at the earlier one).
inline cplx influence_factor(const EtaTable& table, const SystemModel& model, std::size_t lag, std::size_t j,
                             std::size_t jp, std::size_t n) {
  const std::size_t d = model.dim;
  if (j >= d * d || jp >= d * d) throw std::out_of_range("influence_factor: Liouville index out of range");
  const auto [i, ip] = unpack(j, d);
  const auto [m, mp] = unpack(jp, d);
  const double dk = model.kappa[i] - model.kappa[ip];
  if (dk == 0.0) return 1.0;
  const cplx eta = table.effective(lag, n);
  return std::exp(-dk * (eta * model.kappa[m] - std::conj(eta) * model.kappa[mp]));
}

/// M = exp(-i H dt) with H = omega0 |1><1| + rabi (|0><1| + |1><0|).
inline MatrixC system_propagator(const SystemModel& model, double dt) {
  model.validate();
  if (!(dt > 0.0)) throw std::invalid_argument("system_propagator: dt must be positive");
  const auto d = static_cast<Eigen::Index>(model.dim);
  if (d == 2) {
    // H = h0 + hx sx + hz sz with sz = diag(1, -1)
    const double h0 = 0.5 * model.omega0, hz = -0.5 * model.omega0, hx = model.rabi;
    const double h = std::hypot(hx, hz);
    const cplx phase = std::exp(cplx{0.0, -h0 * dt});
    const double c = std::cos(h * dt);
    const double s = h > 0.0 ? std::sin(h * dt) / h : dt;
    MatrixC m(2, 2);
    const cplx i{0.0, 1.0};
    m(0, 0) = phase * (c - i * s * hz);
    m(1, 1) = phase * (c + i * s * hz);
    m(0, 1) = phase * (-i * s * hx);
    m(1, 0) = phase * (-i * s * hx);
    return m;
  }
  MatrixC hmat = MatrixC::Zero(d, d);
  hmat(1, 1) = model.omega0;
  hmat(0, 1) = hmat(1, 0) = model.rabi;
  Eigen::SelfAdjointEigenSolver<MatrixC> es(hmat);
  VectorC ph = (es.eigenvalues().cast<cplx>() * cplx{0.0, -dt}).array().exp();
  return es.eigenvectors() * ph.asDiagonal() * es.eigenvectors().adjoint();
}

/// Liouville-space propagator: (M rho M^dagger) in the packed basis.
inline MatrixC liouville_propagator(const MatrixC& m) {
  const auto d = m.rows();
  MatrixC out(d * d, d * d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index ip = 0; ip < d; ++ip)
      for (Eigen::Index a = 0; a < d; ++a)
        for (Eigen::Index ap = 0; ap < d; ++ap) out(i * d + ip, a * d + ap) = m(i, a) * std::conj(m(ip, ap));
  return out;
}

}  // namespace q2d
