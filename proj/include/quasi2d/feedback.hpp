// Coherent time-delayed feedback through a Liouville-space time-bin chain.
//
// Chain layout, left to right: [system][queue: newest .. oldest][processed].
// The queue holds the n_d bins still waiting to act as a memory bin; the
// processed bins are never touched again. One step inserts a vacuum present
// bin next to the system, swaps the oldest queue bin (the memory bin) next to
// it, applies the three-site gate on (system, present, memory) and swaps the
// memory bin back to the queue end, where it joins the processed bins.
//
// Gate convention: per step the Hamiltonian is
//   H dt = g [ s10 (b_p - e^{i 2 pi phi} b_m) + h.c. ],  cos(sqrt(2) g) = e^{-Gamma dt},
// which yields the delay equation dc/dt = -Gamma c(t) + Gamma e^{i 2 pi phi} c(t - tau)
// in the continuum limit, so integer phi traps population.

#pragma once

#include <cmath>
#include <numbers>
#include <optional>
#include <stdexcept>

#include "quasi2d/liouville.hpp"
#include "quasi2d/mps.hpp"
#include "quasi2d/timeseries.hpp"

namespace q2d::feedback {

struct FeedbackConfig {
  double gamma_rad = 0.9;  // Gamma, 1/ps
  double tau = 1.2;        // ps
  std::size_t n_d = 4;
  double phi = 1.0;        // omega_0 tau / 2 pi
  double dephasing = 0.0;  // gamma, 1/ps
  std::size_t n_ph = 1;
  std::size_t order = 10;
  std::size_t sys_dim = 2;
  TruncationPolicy policy{};
  std::optional<TruncationPolicy> swap_policy;  // defaults to `policy`

  double dt() const { return tau / static_cast<double>(n_d); }
  std::size_t bin_dim() const { return (n_ph + 1) * (n_ph + 1); }
  const TruncationPolicy& swaps() const { return swap_policy ? *swap_policy : policy; }

  void validate() const {
    if (gamma_rad < 0.0) throw std::invalid_argument("feedback: Gamma must be non-negative");
    if (!(tau > 0.0)) throw std::invalid_argument("feedback: tau must be positive");
    if (n_d < 1) throw std::invalid_argument("feedback: n_d must be at least 1");
    if (n_ph < 1) throw std::invalid_argument("feedback: n_ph must be at least 1");
    if (order < 1) throw std::invalid_argument("feedback: order must be at least 1");
    if (dephasing < 0.0) throw std::invalid_argument("feedback: dephasing rate must be non-negative");
    if (sys_dim != 2) throw std::invalid_argument("feedback: only two-level systems are supported");
    if (!std::isfinite(phi)) throw std::invalid_argument("feedback: phase must be finite");
    policy.validate();
    if (swap_policy) swap_policy->validate();
  }
};

/// Superoperator on system (x) present bin (x) memory bin, per-factor packed.
struct StepLiouvillian {
  MatrixC matrix;
  std::size_t sys_dim = 2;
  std::size_t bin_dim = 4;  // Liouville extent of one bin

  std::size_t extent() const { return sys_dim * sys_dim * bin_dim * bin_dim; }
};

/// Coupling g per step such that the bare decay over one step is e^{-Gamma dt}.
inline double step_coupling(const FeedbackConfig& cfg) {
  return std::acos(std::exp(-cfg.gamma_rad * cfg.dt())) / std::numbers::sqrt2;
}

inline StepLiouvillian build_step_generator(const FeedbackConfig& cfg) {
  cfg.validate();
  const std::size_t d = cfg.sys_dim, q = cfg.n_ph + 1;
  const MatrixC id_q = MatrixC::Identity(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(q));
  const MatrixC b = annihilator(cfg.n_ph);
  auto embed = [&](const MatrixC& s, const MatrixC& p, const MatrixC& m) -> MatrixC {
    return Eigen::kroneckerProduct(s, Eigen::kroneckerProduct(p, m).eval()).eval();
  };
  const cplx phase = std::exp(cplx{0.0, 2.0 * std::numbers::pi * cfg.phi});
  const MatrixC s10 = projector(d, 1, 0);
  const MatrixC channel = embed(s10, b, id_q) - phase * embed(s10, id_q, b);
  const MatrixC hdt = step_coupling(cfg) * (channel + MatrixC(channel.adjoint()));
  MatrixC gen = hamiltonian_super(hdt);
  if (cfg.dephasing > 0.0) {
    gen += cfg.dephasing * cfg.dt() * dissipator_super(embed(projector(d, 1, 1), id_q, id_q));
  }
  StepLiouvillian out;
  out.matrix = interleave_factors(gen, {d, q, q});
  out.sys_dim = d;
  out.bin_dim = q * q;
  return out;
}

/// Truncated exponential series sum_{m <= order} G^m / m!.
inline StepLiouvillian taylor_step(const StepLiouvillian& g, std::size_t order) {
  if (order < 1) throw std::invalid_argument("taylor_step: order must be at least 1");
  StepLiouvillian out = g;
  const auto n = g.matrix.rows();
  MatrixC term = MatrixC::Identity(n, n);
  MatrixC sum = term;
  for (std::size_t m = 1; m <= order; ++m) {
    term = (term * g.matrix) / static_cast<double>(m);
    sum += term;
  }
  out.matrix = std::move(sum);
  return out;
}

inline std::vector<cplx> vacuum_bin(std::size_t n_ph) {
  std::vector<cplx> v((n_ph + 1) * (n_ph + 1), 0.0);
  v[0] = 1.0;
  return v;
}

/// Bin labels: 0 is the system, 1..n_d the initial memory bins (bin k acts
/// at step k), n_d + n the present bin created at step n.
struct FeedbackChain {
  std::size_t n_d = 1;
  std::size_t n_ph = 1;
  std::size_t step_count = 0;
  std::vector<std::size_t> labels;  // for sites at and right of the system
  double discarded = 0.0;
  std::size_t link_dim = 1;  // bond between the system and the first bin
};

/// Appends the initial memory bins to the right of site `sys` (which must be
/// the last site of `psi`).
inline FeedbackChain attach(MatrixProductState& psi, std::size_t sys, const FeedbackConfig& cfg) {
  if (sys + 1 != psi.size()) throw std::invalid_argument("feedback attach: system must be the last site");
  FeedbackChain fc;
  fc.n_d = cfg.n_d;
  fc.n_ph = cfg.n_ph;
  fc.labels.push_back(0);
  const auto vac = vacuum_bin(cfg.n_ph);
  for (std::size_t k = 1; k <= cfg.n_d; ++k) {
    insert_identity_site(psi, psi.size(), vac);
    fc.labels.push_back(cfg.n_d + 1 - k);
  }
  return fc;
}

namespace detail {

/// Applies a dense operator to sites (s, s+1, s+2) and splits them back,
/// leaving the center on s+2.
inline double apply_three_site(MatrixProductState& psi, std::size_t s, const MatrixC& op,
                               const TruncationPolicy& policy) {
  if (!psi.center || *psi.center < s || *psi.center > s + 2) move_center(psi, s + 2);
  DenseTensor theta = contract(psi.sites[s], psi.sites[s + 1], {{2, 0}});
  theta = contract(theta, psi.sites[s + 2], {{3, 0}});  // l a b c r
  const std::size_t l = theta.extent(0), a = theta.extent(1), b = theta.extent(2), c = theta.extent(3),
                    r = theta.extent(4);
  if (static_cast<std::size_t>(op.rows()) != a * b * c) throw TensorError("three-site gate: extent mismatch");
  DenseTensor g = DenseTensor::from_matrix(op, {a * b * c, a * b * c});
  DenseTensor t = contract(g, theta.reshaped({l, a * b * c, r}), {{1, 1}});  // (abc, l, r)
  t = t.permuted({1, 0, 2}).reshaped({l, a, b, c, r});
  SvdSplit first = svd_split(t, {0, 1}, policy);
  scale_leading_axis(first.right, first.singulars);
  psi.sites[s] = std::move(first.left);
  psi.center = s + 1;
  double discarded = first.discarded_weight;
  discarded += split_two_site(psi, s + 1, first.right, policy, Sweep::LeftToRight);
  return discarded;
}

}  // namespace detail

/// One feedback step on a chain whose system sits at `sys`.
inline void advance(MatrixProductState& psi, std::size_t sys, FeedbackChain& fc, const StepLiouvillian& gate,
                    const TruncationPolicy& policy, const TruncationPolicy& swap_policy) {
  if (gate.extent() != psi.phys(sys) * gate.bin_dim * gate.bin_dim) {
    throw std::invalid_argument("feedback step: gate does not match the system extent");
  }
  const std::size_t n = fc.step_count + 1;
  const std::size_t n_d = fc.n_d;
  insert_identity_site(psi, sys + 1, vacuum_bin(fc.n_ph));
  fc.labels.insert(fc.labels.begin() + 1, n_d + n);
  const std::size_t mem = sys + 1 + n_d;
  move_center(psi, mem);
  for (std::size_t p = mem; p > sys + 2; --p) {
    fc.discarded += swap_adjacent(psi, p - 1, swap_policy, Sweep::RightToLeft);
    std::swap(fc.labels[p - sys], fc.labels[p - 1 - sys]);
  }
  fc.discarded += detail::apply_three_site(psi, sys, gate.matrix, policy);
  fc.link_dim = psi.right_bond(sys);
  for (std::size_t p = sys + 2; p < mem; ++p) {
    fc.discarded += swap_adjacent(psi, p, swap_policy, Sweep::LeftToRight);
    std::swap(fc.labels[p - sys], fc.labels[p + 1 - sys]);
  }
  fc.step_count = n;
}

/// Covectors that trace out every bin and leave `sys_cov` on the system.
inline std::vector<std::vector<cplx>> bin_trace_covectors(const MatrixProductState& psi, std::size_t sys,
                                                          std::size_t n_ph) {
  std::vector<std::vector<cplx>> cov(psi.size());
  for (std::size_t i = sys + 1; i < psi.size(); ++i) cov[i] = trace_covector(n_ph + 1);
  return cov;
}

struct TimeBinMps {
  MatrixProductState mps;
  FeedbackChain chain;
  std::size_t sys_dim = 2;

  std::size_t system_site() const { return 0; }
};

inline TimeBinMps init(const MatrixC& rho_sys0, const FeedbackConfig& cfg) {
  cfg.validate();
  check_density_matrix(rho_sys0);
  if (static_cast<std::size_t>(rho_sys0.rows()) != cfg.sys_dim) throw std::invalid_argument("feedback init: dimension");
  TimeBinMps st;
  st.sys_dim = cfg.sys_dim;
  st.mps = MatrixProductState::product({vectorize(rho_sys0)});
  st.mps.center = 0;
  st.chain = attach(st.mps, 0, cfg);
  return st;
}

inline void step(TimeBinMps& st, const StepLiouvillian& gate, const TruncationPolicy& policy,
                 const TruncationPolicy& swap_policy) {
  advance(st.mps, 0, st.chain, gate, policy, swap_policy);
}

inline void step(TimeBinMps& st, const StepLiouvillian& gate, const TruncationPolicy& policy) {
  advance(st.mps, 0, st.chain, gate, policy, policy);
}

/// Reduced system density matrix.
inline MatrixC system_state(const TimeBinMps& st) {
  auto cov = bin_trace_covectors(st.mps, 0, st.chain.n_ph);
  cov[0] = std::vector<cplx>(st.sys_dim * st.sys_dim, 0.0);
  return unvectorize(site_marginal(st.mps, 0, cov), st.sys_dim);
}

/// tr(O rho) for an operator on the system (site 0) or on the bin at `site`.
inline cplx expectation(const TimeBinMps& st, std::size_t site, const MatrixC& op) {
  if (site >= st.mps.size()) throw std::out_of_range("expectation: site out of range");
  auto cov = bin_trace_covectors(st.mps, 0, st.chain.n_ph);
  cov[0] = trace_covector(st.sys_dim);
  const auto marg = site_marginal(st.mps, site, cov);
  const std::size_t d = static_cast<std::size_t>(std::sqrt(static_cast<double>(marg.size())) + 0.5);
  if (static_cast<std::size_t>(op.rows()) != d) throw std::invalid_argument("expectation: operator extent");
  const MatrixC rho = unvectorize(marg, d);
  return (op * rho).trace();
}

/// System excitation plus photon number summed over all bins.
inline double total_excitation(const MatrixProductState& psi, std::size_t sys, std::size_t sys_dim,
                               std::size_t n_ph, const std::vector<std::vector<cplx>>& left_covectors) {
  auto cov = bin_trace_covectors(psi, sys, n_ph);
  for (std::size_t i = 0; i < sys; ++i) cov[i] = left_covectors.at(i);
  cov[sys] = trace_covector(sys_dim);
  const auto marg = all_site_marginals(psi, cov);
  double total = unvectorize(marg[sys], sys_dim)(1, 1).real();
  const MatrixC num = annihilator(n_ph).adjoint() * annihilator(n_ph);
  for (std::size_t i = sys + 1; i < psi.size(); ++i) total += (num * unvectorize(marg[i], n_ph + 1)).trace().real();
  return total;
}

inline double total_excitation(const TimeBinMps& st) {
  return total_excitation(st.mps, 0, st.sys_dim, st.chain.n_ph, {});
}

inline TimeSeries run(const FeedbackConfig& cfg, const MatrixC& rho_sys0, std::size_t steps) {
  cfg.validate();
  const StepLiouvillian gate = taylor_step(build_step_generator(cfg), cfg.order);
  TimeBinMps st = init(rho_sys0, cfg);
  TimeSeries ts;
  ts.rows.push_back({0.0, system_state(st), st.chain.link_dim, st.mps.max_bond(), 0.0});
  for (std::size_t n = 1; n <= steps; ++n) {
    step(st, gate, cfg.policy, cfg.swaps());
    ts.rows.push_back({static_cast<double>(n) * cfg.dt(), system_state(st), st.chain.link_dim, st.mps.max_bond(),
                       st.chain.discarded});
  }
  return ts;
}

}  // namespace q2d::feedback
