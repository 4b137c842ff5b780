// Reference solutions used to check the engines. These avoid the
// library's own quadrature and contraction code: frequency integrals use
// adaptive Gauss-Kronrod from Boost, path sums are literal loops and the
// feedback reference evolves the full product-space vector.

#pragma once

#include <cmath>
#include <complex>
#include <cstdio>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "quasi2d/bath.hpp"
#include "quasi2d/feedback.hpp"
#include "quasi2d/timeseries.hpp"

namespace q2d::oracles {

class OracleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {
template <class F>
double integrate(F f, double a, double b) {
  double err = 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 15, 1e-12, &err);
}
}  // namespace detail

/// rho_01(t) of the independent boson model for a diagonal |1><1| coupling.
/// `omega_max` bounds the frequency integral.
inline cplx ibm_analytic(const SpectralDensity& J, double temperature, double omega_max, cplx rho01_0, double t) {
  if (t < 0.0) throw std::domain_error("ibm_analytic: negative time");
  if (t == 0.0 || J.is_zero()) return rho01_0;
  auto coth = [&](double w) {
    return temperature > 0.0 ? 1.0 / std::tanh(w * units::hbar_over_kb / (2.0 * temperature)) : 1.0;
  };
  // Split at multiples of the oscillation period so each panel is smooth.
  const double period = 2.0 * std::numbers::pi / t;
  double re = 0.0, im = 0.0;
  for (double a = 0.0; a < omega_max; a += period) {
    const double b = std::min(a + period, omega_max);
    re += detail::integrate(
        [&](double w) {
          if (w == 0.0) return 0.0;
          const double h = std::sin(0.5 * w * t);
          return -2.0 * J(w) * coth(w) * h * h / (w * w);
        },
        a, b);
    im += detail::integrate(
        [&](double w) {
          if (w == 0.0) return 0.0;
          const double x = w * t;
          // sin x - x without cancellation for small x
          const double d = std::abs(x) < 1e-2 ? -x * x * x / 6.0 * (1.0 - x * x / 20.0) : std::sin(x) - x;
          return J(w) * d / (w * w);
        },
        a, b);
  }
  return std::exp(cplx{re, im}) * rho01_0;
}

inline cplx ibm_analytic(const CorrelationKernel& k, cplx rho01_0, double t) {
  return ibm_analytic(k.density(), k.temperature(), k.omega_max(), rho01_0, t);
}

/// Single-excitation amplitude of a two-level emitter in front of a mirror:
/// sum over round trips n <= t / tau with onset factor (t - n tau)^n.
inline cplx feedback_analytic(double gamma, double tau, double omega0, double t) {
  if (t < 0.0) throw std::domain_error("feedback_analytic: negative time");
  if (gamma == 0.0) return 1.0;
  cplx sum = std::exp(-gamma * t);
  const auto n_max = static_cast<long>(std::floor(t / tau + 1e-12));
  for (long n = 1; n <= n_max; ++n) {
    const double s = t - static_cast<double>(n) * tau;
    if (s <= 0.0) continue;
    const double nn = static_cast<double>(n);
    const double log_mag = -gamma * s + nn * std::log(gamma * s) - std::lgamma(nn + 1.0);
    sum += std::exp(log_mag) * std::exp(cplx{0.0, -nn * omega0 * tau});
  }
  return sum;
}

/// Long-time |c|^2 of dc/dt = -Gamma c(t) + Gamma e^{i 2 pi phi} c(t - tau),
/// c(0) = 1 and no feedback before tau, integrated by RK4 with step tau / steps_per_tau.
inline double delay_steady_state(double gamma, double tau, double phi, std::size_t steps_per_tau = 1000,
                                 double max_time_in_tau = 20000.0, double tol = 1e-8) {
  if (!(tau > 0.0) || gamma < 0.0) throw std::invalid_argument("delay_steady_state: bad parameters");
  if (steps_per_tau < 1000) throw std::invalid_argument("delay_steady_state: need at least 1000 steps per tau");
  if (gamma == 0.0) return 1.0;
  const std::size_t m = steps_per_tau;
  const double h = tau / static_cast<double>(m);
  const cplx fb = gamma * std::exp(cplx{0.0, 2.0 * std::numbers::pi * phi});
  // Ring buffers of c and dc/dt over the last tau.
  std::vector<cplx> c_hist(m + 1, 0.0), d_hist(m + 1, 0.0);
  cplx c = 1.0;
  std::size_t k = 0;  // step index
  auto delayed = [&](std::size_t step, double frac) -> cplx {
    // c(t_step + frac h - tau); zero before the start.
    if (step < m) return 0.0;
    const std::size_t i0 = (step - m) % (m + 1), i1 = (step - m + 1) % (m + 1);
    const cplx y0 = c_hist[i0], y1 = c_hist[i1], d0 = d_hist[i0], d1 = d_hist[i1];
    const double s = frac, s2 = s * s, s3 = s2 * s;
    return (2 * s3 - 3 * s2 + 1) * y0 + (s3 - 2 * s2 + s) * h * d0 + (-2 * s3 + 3 * s2) * y1 + (s3 - s2) * h * d1;
  };
  auto rhs = [&](cplx y, cplx yd) { return -gamma * y + fb * yd; };
  double last_pop = 1.0;
  const auto max_steps = static_cast<std::size_t>(max_time_in_tau * static_cast<double>(m));
  while (k < max_steps) {
    const cplx dly0 = delayed(k, 0.0), dly_half = delayed(k, 0.5), dly1 = delayed(k, 1.0);
    const cplx k1 = rhs(c, dly0);
    c_hist[k % (m + 1)] = c;
    d_hist[k % (m + 1)] = k1;
    const cplx k2 = rhs(c + 0.5 * h * k1, dly_half);
    const cplx k3 = rhs(c + 0.5 * h * k2, dly_half);
    const cplx k4 = rhs(c + h * k3, dly1);
    c += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    ++k;
    if (k % m == 0 && k >= 2 * m) {
      const double pop = std::norm(c);
      if (std::abs(pop - last_pop) < tol) return pop;
      last_pop = pop;
    }
  }
  throw OracleError("delay_steady_state: no convergence within " + std::to_string(max_time_in_tau) + " tau");
}

/// Reduced states rho(t_n), n = 0..N, from the literal sum over all index
/// paths with the same finite-memory closure as the engine.
inline std::vector<MatrixC> brute_force_path_sum(const SystemModel& model, const EtaTable& table,
                                                 const MatrixC& rho0, std::size_t N, std::size_t n_c) {
  model.validate();
  const std::size_t d = model.dim, dd = d * d;
  double paths = std::pow(static_cast<double>(dd), static_cast<double>(N));
  if (paths > std::pow(2.0, 24)) throw std::invalid_argument("brute_force_path_sum: too many paths");
  if (n_c != table.n_c || N >= table.eta.size()) throw std::invalid_argument("brute_force_path_sum: table mismatch");

  const MatrixC m = system_propagator(model, table.dt);
  auto mt = [&](std::size_t j, std::size_t k) {
    return m(static_cast<Eigen::Index>(j / d), static_cast<Eigen::Index>(k / d)) *
           std::conj(m(static_cast<Eigen::Index>(j % d), static_cast<Eigen::Index>(k % d)));
  };
  auto factor = [&](std::size_t n, std::size_t mm, std::size_t jn, std::size_t jm) -> cplx {
    const std::size_t lag = n - mm;
    cplx eta = table.eta[lag];
    if (lag == n_c) {
      for (std::size_t k = n_c + 1; k + 1 <= n; ++k) eta += table.eta[k];
    }
    const double ki = model.kappa[jn / d], kip = model.kappa[jn % d];
    const double km = model.kappa[jm / d], kmp = model.kappa[jm % d];
    return std::exp(-(ki - kip) * (eta * km - std::conj(eta) * kmp));
  };

  std::vector<MatrixC> out;
  out.push_back(rho0);
  for (std::size_t n_final = 1; n_final <= N; ++n_final) {
    MatrixC rho = MatrixC::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
    std::vector<std::size_t> path(n_final + 1, 0);
    std::size_t total = 1;
    for (std::size_t k = 0; k <= n_final; ++k) total *= dd;
    for (std::size_t code = 0; code < total; ++code) {
      std::size_t c = code;
      for (std::size_t k = 0; k <= n_final; ++k) {
        path[k] = c % dd;
        c /= dd;
      }
      cplx w = rho0(static_cast<Eigen::Index>(path[0] / d), static_cast<Eigen::Index>(path[0] % d));
      if (w == cplx{}) continue;
      for (std::size_t n = 1; n <= n_final && w != cplx{}; ++n) {
        w *= mt(path[n], path[n - 1]);
        const std::size_t first = n > n_c ? n - n_c : 1;
        for (std::size_t mm = first; mm <= n; ++mm) w *= factor(n, mm, path[n], path[mm]);
      }
      rho(static_cast<Eigen::Index>(path[n_final] / d), static_cast<Eigen::Index>(path[n_final] % d)) += w;
    }
    out.push_back(rho);
  }
  return out;
}

/// Full Liouville vectors over factors [system, v_1..v_{n_d}, p_1..p_steps]
/// after each step, the per-step gate acting on (system, p_n, bin n).
inline std::vector<VectorC> dense_liouville_evolution(const feedback::FeedbackConfig& cfg, const MatrixC& rho_sys0,
                                                      std::size_t steps) {
  cfg.validate();
  const std::size_t sd = cfg.sys_dim * cfg.sys_dim, bd = cfg.bin_dim();
  const std::size_t factors = 1 + cfg.n_d + steps;
  double size = static_cast<double>(sd) * std::pow(static_cast<double>(bd), static_cast<double>(factors - 1));
  if (size > std::pow(2.0, 20)) throw std::invalid_argument("dense_liouville_evolution: space too large");
  const auto dim = static_cast<std::size_t>(size);
  std::vector<std::size_t> extent(factors, bd);
  extent[0] = sd;
  std::vector<std::size_t> stride(factors, 1);
  for (std::size_t f = factors - 1; f-- > 0;) stride[f] = stride[f + 1] * extent[f + 1];

  VectorC v = VectorC::Zero(static_cast<Eigen::Index>(dim));
  for (std::size_t j = 0; j < sd; ++j) {
    v[static_cast<Eigen::Index>(j * stride[0])] =
        rho_sys0(static_cast<Eigen::Index>(j / cfg.sys_dim), static_cast<Eigen::Index>(j % cfg.sys_dim));
  }
  const MatrixC gate = feedback::taylor_step(feedback::build_step_generator(cfg), cfg.order).matrix;
  std::vector<VectorC> out{v};
  for (std::size_t n = 1; n <= steps; ++n) {
    const std::size_t fs = 0, fp = cfg.n_d + n, fm = n;
    VectorC next = VectorC::Zero(v.size());
    for (std::size_t base = 0; base < dim; ++base) {
      const std::size_t ds = base / stride[fs] % extent[fs], dp = base / stride[fp] % extent[fp],
                        dm = base / stride[fm] % extent[fm];
      if (ds != 0 || dp != 0 || dm != 0) continue;
      for (std::size_t o = 0; o < sd * bd * bd; ++o) {
        const std::size_t os = o / (bd * bd), op = o / bd % bd, om = o % bd;
        const std::size_t out_idx = base + os * stride[fs] + op * stride[fp] + om * stride[fm];
        cplx acc{};
        for (std::size_t i = 0; i < sd * bd * bd; ++i) {
          const std::size_t is = i / (bd * bd), ip = i / bd % bd, im = i % bd;
          const std::size_t in_idx = base + is * stride[fs] + ip * stride[fp] + im * stride[fm];
          acc += gate(static_cast<Eigen::Index>(o), static_cast<Eigen::Index>(i)) * v[static_cast<Eigen::Index>(in_idx)];
        }
        next[static_cast<Eigen::Index>(out_idx)] = acc;
      }
    }
    v = std::move(next);
    out.push_back(v);
  }
  return out;
}

/// Reduced system density matrix of a dense vector from dense_liouville_evolution.
inline MatrixC dense_system_state(const VectorC& v, std::size_t sys_dim, std::size_t n_ph) {
  const std::size_t sd = sys_dim * sys_dim, bd = (n_ph + 1) * (n_ph + 1);
  const std::size_t rest = static_cast<std::size_t>(v.size()) / sd;
  // trace covector over all bins, evaluated digit by digit
  MatrixC rho = MatrixC::Zero(static_cast<Eigen::Index>(sys_dim), static_cast<Eigen::Index>(sys_dim));
  for (std::size_t j = 0; j < sd; ++j) {
    cplx acc{};
    for (std::size_t r = 0; r < rest; ++r) {
      std::size_t x = r;
      bool diag = true;
      while (x > 0 && diag) {
        const std::size_t digit = x % bd;
        diag = digit / (n_ph + 1) == digit % (n_ph + 1);
        x /= bd;
      }
      if (diag) acc += v[static_cast<Eigen::Index>(j * rest + r)];
    }
    rho(static_cast<Eigen::Index>(j / sys_dim), static_cast<Eigen::Index>(j % sys_dim)) = acc;
  }
  return rho;
}

struct OracleReport {
  std::vector<double> grid;
  std::vector<double> reference;
  double max_abs = 0.0;
  double max_rel = 0.0;

  std::string to_csv(const TimeSeries& engine) const {
    std::string s = std::string(TimeSeries::header) + ",reference\n";
    const std::string body = engine.to_csv();
    std::size_t pos = body.find('\n') + 1, row = 0;
    char buf[64];
    while (pos < body.size() && row < reference.size()) {
      const std::size_t end = body.find('\n', pos);
      std::snprintf(buf, sizeof buf, ",%.17g\n", reference[row++]);
      s += body.substr(pos, end - pos) + buf;
      pos = end + 1;
    }
    return s;
  }
};

/// Compares `values` (one per engine row) against `reference` on the same grid.
inline OracleReport compare(const TimeSeries& engine, const std::vector<double>& values,
                            const std::vector<double>& reference) {
  if (values.size() != engine.size() || reference.size() != engine.size()) {
    throw std::invalid_argument("compare: grids do not align");
  }
  OracleReport r;
  r.reference = reference;
  for (std::size_t k = 0; k < engine.size(); ++k) {
    r.grid.push_back(engine.rows[k].time);
    const double dev = std::abs(values[k] - reference[k]);
    r.max_abs = std::max(r.max_abs, dev);
    if (reference[k] != 0.0) r.max_rel = std::max(r.max_rel, dev / std::abs(reference[k]));
  }
  return r;
}

}  // namespace q2d::oracles
