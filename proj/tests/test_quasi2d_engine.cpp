#include <gtest/gtest.h>

#include <random>

#include "quasi2d/junction.hpp"
#include "quasi2d/oracles.hpp"

using namespace q2d;
using quasi2d::JunctionConfig;

namespace {

MatrixC excited() {
  MatrixC r = MatrixC::Zero(2, 2);
  r(1, 1) = 1.0;
  return r;
}

MatrixC generic_state() {
  MatrixC r(2, 2);
  r << cplx{0.4, 0.0}, cplx{0.2, 0.15}, cplx{0.2, -0.15}, cplx{0.6, 0.0};
  return r;
}

// The network configuration of the combined-reservoir figure.
JunctionConfig figure_config(double gamma = 0.9, double phi = 1.17) {
  JunctionConfig c;
  c.fb.gamma_rad = gamma;
  c.fb.tau = 1.2;
  c.fb.n_d = 4;
  c.fb.phi = phi;
  c.fb.policy = TruncationPolicy{1e-12, std::nullopt};
  c.n_c = 4;
  return c;
}

CorrelationKernel short_memory_kernel(double temperature) {
  return CorrelationKernel(ParametricDensity{0.05, 3.0, 2.0, 2}, KernelSettings{temperature, std::nullopt, 1500});
}

}  // namespace

TEST(Quasi2dConfig, BudgetGuardsMemorySum) {
  auto c = figure_config();
  c.n_c = 16;
  EXPECT_THROW(c.validate(), quasi2d::BudgetError);
  c.budget_override = true;
  EXPECT_NO_THROW(c.validate());
  c = figure_config();
  c.n_c = 15;  // 15 + 4 = 19 sits on the budget
  EXPECT_NO_THROW(c.validate());
  c.n_c = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(Quasi2dConfig, RejectsMismatchedTimeStep) {
  const auto c = figure_config();
  const auto table = EtaTable::zeros(0.25, 20, 4);
  SystemModel m;
  EXPECT_THROW(quasi2d::run_experiment(m, table, c, excited(), 10), std::invalid_argument);
  auto st = quasi2d::init(excited(), c);
  const MatrixC prop = liouville_propagator(system_propagator(m, 0.25));
  const auto gate = feedback::taylor_step(feedback::build_step_generator(c.fb), 10);
  EXPECT_THROW(quasi2d::combined_step(st, table, m, prop, gate, c), std::invalid_argument);
  EXPECT_THROW(quasi2d::run_experiment(m, EtaTable::zeros(0.3, 20, 3), c, excited(), 10), std::invalid_argument);
  EXPECT_THROW(quasi2d::run_experiment(m, EtaTable::zeros(0.3, 5, 4), c, excited(), 10), std::invalid_argument);
}

TEST(Quasi2dLayout, SystemSiteTracksPathHead) {
  const auto c = figure_config();
  std::mt19937 rng(1);
  const auto k = short_memory_kernel(4.0);
  const auto table = eta_coefficients(k, c.dt(), 12, c.n_c);
  SystemModel m;
  const MatrixC prop = liouville_propagator(system_propagator(m, c.dt()));
  const auto gate = feedback::taylor_step(feedback::build_step_generator(c.fb), 10);
  auto st = quasi2d::init(excited(), c);
  for (std::size_t n = 1; n <= 12; ++n) {
    quasi2d::combined_step(st, table, m, prop, gate, c);
    EXPECT_EQ(st.sys, std::min<std::size_t>(n, 4));
    EXPECT_EQ(st.mps.size(), st.sys + 1 + 4 + n);
    EXPECT_EQ(st.fb.labels.size(), 1 + 4 + n);
  }
}

TEST(Quasi2dReduction, ZeroPhononCouplingGivesFeedbackEngine) {
  const auto c = figure_config();
  const std::size_t steps = 40;
  SystemModel m;
  const auto net = quasi2d::run_experiment(m, EtaTable::zeros(c.dt(), steps, c.n_c), c, excited(), steps);
  const auto fb = feedback::run(c.fb, excited(), steps);
  EXPECT_LT(max_state_deviation(net.series, fb), 1e-8);
}

TEST(Quasi2dReduction, ZeroRadiativeCouplingGivesPathIntegral) {
  auto c = figure_config(0.0);
  const std::size_t steps = 40;
  SystemModel m;
  m.rabi = 0.7;  // populations move, so the test probes more than dephasing
  const auto table = eta_coefficients(short_memory_kernel(4.0), c.dt(), steps, c.n_c);
  const auto net = quasi2d::run_experiment(m, table, c, generic_state(), steps);
  const auto tp = tempo::run(m, table, tempo::TempoConfig{c.dt(), c.n_c, c.fb.policy, steps}, generic_state());
  EXPECT_LT(max_state_deviation(net.series, tp), 1e-8);
}

TEST(Quasi2dEngine, InvariantsHoldWithBothReservoirs) {
  const auto c = figure_config();
  const std::size_t steps = 60;
  const auto run = quasi2d::run_experiment(SystemModel{}, short_memory_kernel(77.0), c, excited(), steps);
  EXPECT_LT(run.series.max_trace_defect(), 1e-6);
  EXPECT_LT(run.series.max_hermiticity_defect(), 1e-8);
  EXPECT_EQ(run.tempo_link.size(), steps + 1);
  for (const auto& r : run.series.rows) {
    EXPECT_GE(r.rho11(), -1e-8);
    EXPECT_LE(r.rho11(), 1.0 + 1e-8);
  }
}

TEST(Quasi2dEngine, PhononsEnlargeTheSystemBinLink) {
  const std::size_t steps = 40;
  auto c = figure_config();
  const auto fb = feedback::run(c.fb, excited(), steps);
  const auto on = quasi2d::run_experiment(SystemModel{}, short_memory_kernel(77.0), c, excited(), steps);
  EXPECT_GT(on.series.peak_link_dim(), fb.peak_link_dim());
  // the link is only written after each feedback half-step; it never shrinks
  // below the single-reservoir value once feedback is active
  EXPECT_GE(on.series.rows.back().link_dim, fb.rows.back().link_dim);
}

TEST(Quasi2dEngine, PhononsPerturbTheFeedbackDynamics) {
  const std::size_t steps = 30;
  const auto c = figure_config(0.9, 1.0);
  const auto fb = feedback::run(c.fb, excited(), steps);
  const auto net = quasi2d::run_experiment(SystemModel{}, short_memory_kernel(77.0), c, excited(), steps);
  EXPECT_GT(max_population_deviation(net.series, fb), 1e-4);
  // before the first round trip the pure-dephasing bath cannot change populations
  for (std::size_t n = 0; n <= c.fb.n_d; ++n) {
    EXPECT_NEAR(net.series.rows[n].rho11(), fb.rows[n].rho11(), 1e-10) << n;
  }
}
