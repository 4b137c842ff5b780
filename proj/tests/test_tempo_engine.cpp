#include <gtest/gtest.h>

#include <random>

#include "quasi2d/oracles.hpp"
#include "quasi2d/tempo.hpp"

using namespace q2d;

namespace {

MatrixC excited() {
  MatrixC r = MatrixC::Zero(2, 2);
  r(1, 1) = 1.0;
  return r;
}

MatrixC plus_state() { return MatrixC::Constant(2, 2, 0.5); }

// Mixed state with coherences, so every Liouville index carries weight.
MatrixC generic_state() {
  MatrixC r(2, 2);
  r << cplx{0.3, 0.0}, cplx{0.2, -0.25}, cplx{0.2, 0.25}, cplx{0.7, 0.0};
  return r;
}

EtaTable random_table(double dt, std::size_t steps, std::size_t n_c, std::mt19937& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<cplx> eta(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k) {
    const double scale = 0.15 / static_cast<double>(k + 1);
    eta[k] = cplx{std::abs(u(rng)) * scale, u(rng) * scale};
  }
  return EtaTable::from_coefficients(dt, std::move(eta), n_c);
}

SystemModel driven(double rabi, double detuning) {
  SystemModel m;
  m.rabi = rabi;
  m.omega0 = detuning;
  return m;
}

TimeSeries run_table(const SystemModel& m, const EtaTable& t, std::size_t steps, const MatrixC& rho0,
                     TruncationPolicy policy = TruncationPolicy::exact()) {
  tempo::TempoConfig cfg{t.dt, t.n_c, policy, steps};
  return tempo::run(m, t, cfg, rho0);
}

}  // namespace

TEST(TempoInit, SingleSiteHoldsVectorizedState) {
  const MatrixC rho = generic_state();
  const auto adt = tempo::init(rho);
  ASSERT_EQ(adt.mps.size(), 1u);
  EXPECT_EQ(adt.mps.phys(0), 4u);
  EXPECT_EQ(adt.step_count, 0u);
  EXPECT_LT((tempo::reduced_state(adt) - rho).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(TempoInit, RejectsInvalidState) {
  MatrixC bad = MatrixC::Identity(2, 2);
  EXPECT_THROW(tempo::init(bad), std::invalid_argument);
}

TEST(TempoMpo, LengthTracksMemoryWindow) {
  std::mt19937 rng(3);
  const auto table = random_table(0.1, 10, 3, rng);
  const SystemModel m = driven(1.0, 0.3);
  for (std::size_t n = 1; n <= 8; ++n) {
    const auto op = tempo::build_step_mpo(table, m, n);
    EXPECT_EQ(op.size(), std::min<std::size_t>(n, 3) + 1) << n;
    EXPECT_NO_THROW(op.validate());
    EXPECT_EQ(op.sites.back().extent(2), 1u);  // pad site takes a trivial leg
    EXPECT_EQ(op.sites.back().extent(1), 4u);
  }
  EXPECT_THROW(tempo::build_step_mpo(table, m, 0), std::invalid_argument);
  EXPECT_THROW(tempo::build_step_mpo(table, m, MatrixC::Identity(9, 9), 1), std::invalid_argument);
}

TEST(TempoMpo, ChainNeverExceedsWindow) {
  std::mt19937 rng(5);
  const auto table = random_table(0.1, 12, 4, rng);
  const SystemModel m = driven(1.0, 0.0);
  auto adt = tempo::init(excited());
  for (std::size_t n = 1; n <= 12; ++n) {
    tempo::step(adt, table, m, TruncationPolicy::exact());
    EXPECT_EQ(adt.mps.size(), std::min<std::size_t>(n, 4) + 1);
  }
}

TEST(TempoEngine, ZeroBathReproducesRabiOscillation) {
  const double omega = 1.3, dt = 0.05;
  const auto table = EtaTable::zeros(dt, 200, 5);
  const auto ts = run_table(driven(omega, 0.0), table, 200, excited());
  for (const auto& r : ts.rows) {
    EXPECT_NEAR(r.rho11(), std::pow(std::cos(omega * r.time), 2), 1e-12) << r.time;
  }
  EXPECT_EQ(ts.size(), 201u);
}

TEST(TempoEngine, ZeroBathIsIndependentOfMemory) {
  const SystemModel m = driven(0.8, 0.4);
  const auto a = run_table(m, EtaTable::zeros(0.1, 40, 1), 40, generic_state());
  const auto b = run_table(m, EtaTable::zeros(0.1, 40, 7), 40, generic_state());
  EXPECT_LT(max_state_deviation(a, b), 1e-13);
}

class PathSumEquivalence : public ::testing::TestWithParam<std::size_t> {};

TEST_P(PathSumEquivalence, MatchesLiteralSumOverPaths) {
  const std::size_t n_c = GetParam(), N = 6;
  std::mt19937 rng(100 + static_cast<unsigned>(n_c));
  const auto table = random_table(0.2, N, n_c, rng);
  SystemModel m = driven(1.1, 0.7);
  m.kappa = {0.0, 1.0};
  const MatrixC rho0 = generic_state();
  const auto ts = run_table(m, table, N, rho0);
  const auto ref = oracles::brute_force_path_sum(m, table, rho0, N, n_c);
  for (std::size_t n = 0; n <= N; ++n) {
    EXPECT_LT((ts.rows[n].rho - ref[n]).cwiseAbs().maxCoeff(), 1e-12) << "n = " << n;
  }
}

TEST_P(PathSumEquivalence, MatchesWithAsymmetricCoupling) {
  const std::size_t n_c = GetParam(), N = 5;
  std::mt19937 rng(200 + static_cast<unsigned>(n_c));
  const auto table = random_table(0.15, N, n_c, rng);
  SystemModel m = driven(0.9, -0.5);
  m.kappa = {-0.4, 0.9};
  const auto ts = run_table(m, table, N, plus_state());
  const auto ref = oracles::brute_force_path_sum(m, table, plus_state(), N, n_c);
  for (std::size_t n = 0; n <= N; ++n) {
    EXPECT_LT((ts.rows[n].rho - ref[n]).cwiseAbs().maxCoeff(), 1e-12) << "n = " << n;
  }
}

INSTANTIATE_TEST_SUITE_P(Windows, PathSumEquivalence, ::testing::Values(1, 2, 3, 4));

TEST(TempoEngine, IndependentBosonMatchesClosedForm) {
  // Pure dephasing: the improved closure keeps every lag, so the only error
  // is in the memory coefficients themselves.
  const SpectralDensity j = ParametricDensity{0.1, 1.0, 2.0, 1};
  const CorrelationKernel k(j, KernelSettings{77.0, std::nullopt, 2000});
  const double dt = 0.1;
  const std::size_t N = 40;
  tempo::TempoConfig cfg{dt, 3, TruncationPolicy{1e-12, std::nullopt}, N};
  const auto ts = tempo::run(SystemModel{}, k, cfg, plus_state());
  for (std::size_t n = 0; n <= N; n += 4) {
    const cplx ref = oracles::ibm_analytic(k, 0.5, ts.rows[n].time);
    EXPECT_LT(std::abs(ts.rows[n].rho01() - ref), 1e-8) << ts.rows[n].time;
    EXPECT_NEAR(ts.rows[n].rho11(), 0.5, 1e-13);
  }
  // coherence decays
  EXPECT_LT(std::abs(ts.rows.back().rho01()), 0.5);
}

TEST(TempoEngine, PreservesTraceAndHermiticity) {
  const SpectralDensity j = ParametricDensity{0.05, 3.0, 2.0, 2};
  const CorrelationKernel k(j, KernelSettings{4.0, std::nullopt, 1500});
  tempo::TempoConfig cfg{0.05, 8, TruncationPolicy{1e-9, std::nullopt}, 80};
  const auto ts = tempo::run(driven(2.0, 0.0), k, cfg, excited());
  EXPECT_LT(ts.max_trace_defect(), 1e-6);
  EXPECT_LT(ts.max_hermiticity_defect(), 1e-8);
  for (const auto& r : ts.rows) {
    EXPECT_GE(r.rho11(), -1e-9);
    EXPECT_LE(r.rho11(), 1.0 + 1e-9);
    EXPECT_EQ(r.link_dim, 1u);
  }
}

TEST(TempoEngine, TruncationStaysCloseToExact) {
  std::mt19937 rng(9);
  const auto table = random_table(0.1, 30, 5, rng);
  const SystemModel m = driven(1.0, 0.2);
  const auto exact = run_table(m, table, 30, excited());
  const auto trunc = run_table(m, table, 30, excited(), TruncationPolicy{1e-7, std::nullopt});
  EXPECT_LT(max_state_deviation(exact, trunc), 1e-5);
  EXPECT_GE(trunc.rows.back().discarded_weight, 0.0);
  EXPECT_EQ(exact.rows.back().discarded_weight, 0.0);
}

TEST(TempoEngine, DiscardedWeightSplitsBySweepDirection) {
  std::mt19937 rng(11);
  const auto table = random_table(0.1, 20, 6, rng);
  auto adt = tempo::init(excited());
  const SystemModel m = driven(1.0, 0.0);
  for (int n = 0; n < 20; ++n) tempo::step(adt, table, m, TruncationPolicy{1e-4, std::nullopt});
  EXPECT_GE(adt.discarded_lr, 0.0);
  EXPECT_GE(adt.discarded_rl, 0.0);
  EXPECT_DOUBLE_EQ(adt.discarded_weight(), adt.discarded_lr + adt.discarded_rl);
}

TEST(TempoEngine, RejectsInconsistentSetup) {
  const auto table = EtaTable::zeros(0.1, 10, 3);
  const SystemModel m;
  EXPECT_THROW(tempo::run(m, table, tempo::TempoConfig{0.1, 4, {}, 10}, excited()), std::invalid_argument);
  EXPECT_THROW(tempo::run(m, table, tempo::TempoConfig{0.1, 3, {}, 11}, excited()), std::invalid_argument);
  EXPECT_THROW(tempo::run(m, table, tempo::TempoConfig{0.0, 3, {}, 10}, excited()), std::invalid_argument);
  EXPECT_THROW(tempo::run(m, table, tempo::TempoConfig{0.1, 0, {}, 10}, excited()), std::invalid_argument);
  auto adt = tempo::init(excited());
  const auto small = EtaTable::zeros(0.1, 2, 1);
  tempo::step(adt, small, m, {});
  tempo::step(adt, small, m, {});
  EXPECT_THROW(tempo::step(adt, small, m, {}), std::out_of_range);
}
