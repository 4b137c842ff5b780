// Augmented-density-tensor evolution under a continuous bosonic reservoir.
//
// The state is a chain holding the Liouville indices j_{n-k} .. j_n of the
// retained path, oldest on the left. Each step caps the oldest leg once the
// memory window is full, appends a pad site for the new index and applies
// a product of influence factors as an MPO whose bond carries j_n.

#pragma once

#include <algorithm>
#include <stdexcept>

#include "quasi2d/bath.hpp"
#include "quasi2d/liouville.hpp"
#include "quasi2d/mps.hpp"
#include "quasi2d/timeseries.hpp"

namespace q2d::tempo {

struct TempoConfig {
  double dt = 0.1;
  std::size_t n_c = 10;
  TruncationPolicy policy{};
  std::size_t total_steps = 10;

  void validate() const {
    if (!(dt > 0.0)) throw std::invalid_argument("tempo: dt must be positive");
    if (n_c < 1) throw std::invalid_argument("tempo: n_c must be at least 1");
    if (total_steps < 1) throw std::invalid_argument("tempo: total_steps must be at least 1");
    policy.validate();
  }
};

struct AugmentedDensityMps {
  MatrixProductState mps;
  std::size_t dim = 2;
  std::size_t step_count = 0;
  double discarded_lr = 0.0;  // accumulated over left-to-right recompressions
  double discarded_rl = 0.0;

  std::size_t current_site() const { return mps.size() - 1; }
  double discarded_weight() const { return discarded_lr + discarded_rl; }
};

inline AugmentedDensityMps init(const MatrixC& rho0) {
  check_density_matrix(rho0);
  AugmentedDensityMps adt;
  adt.dim = static_cast<std::size_t>(rho0.rows());
  adt.mps = MatrixProductState::product({vectorize(rho0)});
  adt.mps.center = 0;
  return adt;
}

/// Growth MPO for step n, given the Liouville propagator. Site k covers the
/// path index j_m with m = n - (L - 1) + k; the last site is the pad that
/// emits j_n.
inline MatrixProductOperator build_step_mpo(const EtaTable& table, const SystemModel& model,
                                            const MatrixC& liouville_prop, std::size_t n) {
  if (n < 1) throw std::invalid_argument("build_step_mpo: n must be at least 1");
  model.validate();
  const std::size_t dd = model.liouville_dim();
  if (static_cast<std::size_t>(liouville_prop.rows()) != dd) {
    throw std::invalid_argument("build_step_mpo: propagator does not match the model dimension");
  }
  const std::size_t len = std::min(n, table.n_c) + 1;
  MatrixProductOperator op;
  op.sites.reserve(len);
  for (std::size_t k = 0; k + 1 < len; ++k) {
    const std::size_t m = n - (len - 1) + k;
    const std::size_t lag = n - m;
    const std::size_t wl = k == 0 ? 1 : dd;
    DenseTensor w(Shape{wl, dd, dd, dd});
    for (std::size_t a = 0; a < dd; ++a) {
      for (std::size_t i = 0; i < dd; ++i) {
        cplx f = m == 0 ? cplx{1.0} : influence_factor(table, model, lag, a, i, n);
        if (m + 1 == n) f *= liouville_prop(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(i));
        w.at({k == 0 ? 0 : a, i, i, a}) = f;
      }
    }
    op.sites.push_back(std::move(w));
  }
  DenseTensor head(Shape{dd, dd, 1, 1});
  for (std::size_t a = 0; a < dd; ++a) head.at({a, a, 0, 0}) = influence_factor(table, model, 0, a, a, n);
  op.sites.push_back(std::move(head));
  return op;
}

inline MatrixProductOperator build_step_mpo(const EtaTable& table, const SystemModel& model, std::size_t n) {
  return build_step_mpo(table, model, liouville_propagator(system_propagator(model, table.dt)), n);
}

/// Advances the path segment occupying sites [0, head] of `psi` by one step.
/// Sites right of `head` are spectators attached through head's right bond.
/// Returns the new head position.
inline std::size_t advance_segment(MatrixProductState& psi, std::size_t head, std::size_t n_c,
                                   const MatrixProductOperator& op, const TruncationPolicy& policy, Sweep direction,
                                   double& discarded) {
  const std::size_t dd = psi.phys(head);
  if (head + 1 == n_c + 1) {
    move_center(psi, 0);
    contract_out_site(psi, 0, ones_covector(dd));
    --head;
  }
  insert_identity_site(psi, head + 1, {cplx{1.0}});
  ++head;
  if (op.size() != head + 1) throw std::logic_error("tempo: MPO length does not match the stored path");
  discarded += apply_mpo(psi, op, policy, 0, direction);
  return head;
}

inline void step(AugmentedDensityMps& adt, const EtaTable& table, const SystemModel& model,
                 const TruncationPolicy& policy, const MatrixC& liouville_prop) {
  const std::size_t n = adt.step_count + 1;
  if (n >= table.eta.size()) throw std::out_of_range("tempo::step: eta table does not cover this step");
  const auto op = build_step_mpo(table, model, liouville_prop, n);
  const Sweep dir = n % 2 == 1 ? Sweep::LeftToRight : Sweep::RightToLeft;
  double& acc = dir == Sweep::LeftToRight ? adt.discarded_lr : adt.discarded_rl;
  advance_segment(adt.mps, adt.current_site(), table.n_c, op, policy, dir, acc);
  adt.step_count = n;
}

inline void step(AugmentedDensityMps& adt, const EtaTable& table, const SystemModel& model,
                 const TruncationPolicy& policy) {
  step(adt, table, model, policy, liouville_propagator(system_propagator(model, table.dt)));
}

inline MatrixC reduced_state(const AugmentedDensityMps& adt) {
  std::vector<std::vector<cplx>> cov(adt.mps.size(), ones_covector(adt.dim * adt.dim));
  return unvectorize(site_marginal(adt.mps, adt.current_site(), cov), adt.dim);
}

inline TimeSeries run(const SystemModel& model, const EtaTable& table, const TempoConfig& cfg, const MatrixC& rho0) {
  cfg.validate();
  if (table.steps() < cfg.total_steps) throw std::invalid_argument("tempo::run: eta table shorter than the run");
  if (table.n_c != cfg.n_c) throw std::invalid_argument("tempo::run: eta table built for a different n_c");
  const MatrixC prop = liouville_propagator(system_propagator(model, cfg.dt));
  AugmentedDensityMps adt = init(rho0);
  TimeSeries ts;
  ts.rows.push_back({0.0, reduced_state(adt), 1, adt.mps.max_bond(), 0.0});
  for (std::size_t n = 1; n <= cfg.total_steps; ++n) {
    step(adt, table, model, cfg.policy, prop);
    ts.rows.push_back({static_cast<double>(n) * cfg.dt, reduced_state(adt), 1, adt.mps.max_bond(),
                       adt.discarded_weight()});
  }
  return ts;
}

inline TimeSeries run(const SystemModel& model, const CorrelationKernel& kernel, const TempoConfig& cfg,
                      const MatrixC& rho0, std::size_t cell_nodes = 32) {
  cfg.validate();
  if (cfg.n_c > cfg.total_steps) throw std::invalid_argument("tempo::run: n_c exceeds the number of steps");
  return run(model, eta_coefficients(kernel, cfg.dt, cfg.total_steps, cfg.n_c, cell_nodes), cfg, rho0);
}

}  // namespace q2d::tempo
