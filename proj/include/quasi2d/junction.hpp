// Quasi-2D coupling of the path-integral chain and the feedback time-bin
// chain through one shared system tensor.
//
// Both live in a single chain:
//   [path history oldest .. ][system = path head][feedback queue][processed bins]
// The junction leg is the bond between the system site and the first
// feedback bin. The path-integral update sees it as the spectator right
// bond of its segment, the feedback update sees the history as spectators
// to the left of the system.

#pragma once

#include <stdexcept>
#include <string>

#include "quasi2d/bath.hpp"
#include "quasi2d/feedback.hpp"
#include "quasi2d/tempo.hpp"

namespace q2d::quasi2d {

class BudgetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct JunctionConfig {
  feedback::FeedbackConfig fb;
  std::size_t n_c = 4;
  std::size_t memory_budget = 19;  // bound on n_c + n_d
  bool budget_override = false;

  double dt() const { return fb.dt(); }

  void validate() const {
    fb.validate();
    if (n_c < 1) throw std::invalid_argument("quasi2d: n_c must be at least 1");
    if (!budget_override && n_c + fb.n_d > memory_budget) {
      throw BudgetError("quasi2d: n_c + n_d = " + std::to_string(n_c + fb.n_d) + " exceeds the memory budget " +
                        std::to_string(memory_budget) + " (use the budget override to proceed)");
    }
  }
};

struct JunctionState {
  MatrixProductState mps;
  std::size_t sys = 0;  // system site, also the head of the path segment
  std::size_t dim = 2;
  std::size_t step_count = 0;
  feedback::FeedbackChain fb;
  double discarded_tempo = 0.0;
  std::size_t link_after_tempo = 1;
  std::size_t link_after_feedback = 1;

  std::size_t link_dim() const { return mps.right_bond(sys); }
  double discarded_weight() const { return discarded_tempo + fb.discarded; }
};

inline JunctionState init(const MatrixC& rho0, const JunctionConfig& cfg) {
  cfg.validate();
  check_density_matrix(rho0);
  JunctionState st;
  st.dim = static_cast<std::size_t>(rho0.rows());
  st.mps = MatrixProductState::product({vectorize(rho0)});
  st.mps.center = 0;
  st.fb = feedback::attach(st.mps, 0, cfg.fb);
  return st;
}

/// Path-integral half-step followed by the feedback half-step.
inline void combined_step(JunctionState& st, const EtaTable& table, const SystemModel& model,
                          const MatrixC& liouville_prop, const feedback::StepLiouvillian& gate,
                          const JunctionConfig& cfg) {
  if (std::abs(table.dt - cfg.dt()) > 1e-12 * cfg.dt()) {
    throw std::invalid_argument("quasi2d: path-integral dt differs from the feedback dt");
  }
  const std::size_t n = st.step_count + 1;
  if (n >= table.eta.size()) throw std::out_of_range("quasi2d: eta table does not cover this step");
  const auto op = tempo::build_step_mpo(table, model, liouville_prop, n);
  const Sweep dir = n % 2 == 1 ? Sweep::LeftToRight : Sweep::RightToLeft;
  st.sys = tempo::advance_segment(st.mps, st.sys, table.n_c, op, cfg.fb.policy, dir, st.discarded_tempo);
  st.link_after_tempo = st.link_dim();
  feedback::advance(st.mps, st.sys, st.fb, gate, cfg.fb.policy, cfg.fb.swaps());
  st.link_after_feedback = st.link_dim();
  st.step_count = n;
}

inline std::vector<std::vector<cplx>> readout_covectors(const JunctionState& st) {
  auto cov = feedback::bin_trace_covectors(st.mps, st.sys, st.fb.n_ph);
  for (std::size_t i = 0; i < st.sys; ++i) cov[i] = ones_covector(st.dim * st.dim);
  cov[st.sys] = std::vector<cplx>(st.dim * st.dim, 0.0);
  return cov;
}

inline MatrixC system_state(const JunctionState& st) {
  return unvectorize(site_marginal(st.mps, st.sys, readout_covectors(st)), st.dim);
}

struct JunctionRun {
  TimeSeries series;                    // link_dim after the feedback half-step
  std::vector<std::size_t> tempo_link;  // link_dim after the path-integral half-step
};

inline JunctionRun run_experiment(const SystemModel& model, const EtaTable& table, const JunctionConfig& cfg,
                                  const MatrixC& rho0, std::size_t steps) {
  cfg.validate();
  model.validate();
  if (table.n_c != cfg.n_c) throw std::invalid_argument("quasi2d: eta table built for a different n_c");
  if (table.steps() < steps) throw std::invalid_argument("quasi2d: eta table shorter than the run");
  const MatrixC prop = liouville_propagator(system_propagator(model, cfg.dt()));
  const auto gate = feedback::taylor_step(feedback::build_step_generator(cfg.fb), cfg.fb.order);
  JunctionState st = init(rho0, cfg);
  JunctionRun out;
  out.series.rows.push_back({0.0, system_state(st), st.link_dim(), st.mps.max_bond(), 0.0});
  out.tempo_link.push_back(st.link_dim());
  for (std::size_t n = 1; n <= steps; ++n) {
    combined_step(st, table, model, prop, gate, cfg);
    out.series.rows.push_back({static_cast<double>(n) * cfg.dt(), system_state(st), st.link_after_feedback,
                               st.mps.max_bond(), st.discarded_weight()});
    out.tempo_link.push_back(st.link_after_tempo);
  }
  return out;
}

inline JunctionRun run_experiment(const SystemModel& model, const CorrelationKernel& kernel,
                                  const JunctionConfig& cfg, const MatrixC& rho0, std::size_t steps,
                                  std::size_t cell_nodes = 32) {
  cfg.validate();
  if (cfg.n_c > steps) throw std::invalid_argument("quasi2d: n_c exceeds the number of steps");
  return run_experiment(model, eta_coefficients(kernel, cfg.dt(), steps, cfg.n_c, cell_nodes), cfg, rho0, steps);
}

}  // namespace q2d::quasi2d
