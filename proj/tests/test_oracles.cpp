#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <numbers>
#include <random>

#include "quasi2d/oracles.hpp"

using namespace q2d;

namespace {

const SpectralDensity ohmic = ParametricDensity{0.05, 1.0, 2.0, 1};
constexpr double kTwoPi = 2.0 * std::numbers::pi;

EtaTable random_table(std::size_t steps, std::size_t n_c, std::mt19937& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<cplx> eta(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k) {
    eta[k] = {0.2 * std::abs(u(rng)) / static_cast<double>(k + 1), 0.1 * u(rng) / static_cast<double>(k + 1)};
  }
  return EtaTable::from_coefficients(0.1, eta, n_c);
}

/// Path sum by depth-first recursion over the newest index, the opposite
/// loop order of the oracle.
std::vector<MatrixC> recursive_path_sum(const SystemModel& model, const EtaTable& t, const MatrixC& rho0,
                                        std::size_t N) {
  const std::size_t d = model.dim, dd = d * d;
  const MatrixC m = system_propagator(model, t.dt);
  std::vector<MatrixC> out(N + 1, MatrixC::Zero(2, 2));
  out[0] = rho0;
  std::vector<std::size_t> path;
  std::function<void(cplx)> grow = [&](cplx w) {
    const std::size_t n = path.size() - 1;
    if (n >= 1) {
      const std::size_t j = path.back();
      out[n](static_cast<Eigen::Index>(j / d), static_cast<Eigen::Index>(j % d)) += w;
    }
    if (n == N) return;
    for (std::size_t j = 0; j < dd; ++j) {
      const std::size_t prev = path.back();
      cplx f = m(static_cast<Eigen::Index>(j / d), static_cast<Eigen::Index>(prev / d)) *
               std::conj(m(static_cast<Eigen::Index>(j % d), static_cast<Eigen::Index>(prev % d)));
      path.push_back(j);
      const std::size_t step = n + 1;
      for (std::size_t mm = step > t.n_c ? step - t.n_c : 1; mm <= step; ++mm) {
        f *= influence_factor(t, model, step - mm, j, path[mm], step);
      }
      if (f != cplx{}) grow(w * f);
      path.pop_back();
    }
  };
  for (std::size_t j0 = 0; j0 < dd; ++j0) {
    const cplx w = rho0(static_cast<Eigen::Index>(j0 / d), static_cast<Eigen::Index>(j0 % d));
    if (w == cplx{}) continue;
    path = {j0};
    grow(w);
  }
  return out;
}

}  // namespace

TEST(IbmAnalytic, StartsAtInitialCoherence) {
  EXPECT_EQ(oracles::ibm_analytic(ohmic, 77.0, 40.0, cplx{0.0, 0.5}, 0.0), cplx(0.0, 0.5));
}

TEST(IbmAnalytic, ZeroDensityKeepsCoherence) {
  for (double t : {0.3, 2.0, 11.0}) {
    EXPECT_EQ(oracles::ibm_analytic(SpectralDensity::zero(), 4.0, 10.0, cplx{0.0, 0.5}, t), cplx(0.0, 0.5));
  }
}

TEST(IbmAnalytic, MatchesIndependentHighPrecisionIntegral) {
  // values from tests/scripts/reference_values.py
  const std::vector<std::tuple<double, cplx>> ref{
      {4.0, {0.039885115642630566, 0.4455285468465035}},
      {77.0, {0.010737485838512729, 0.11994089487619132}},
      {300.0, {0.00017559152007562843, 0.001961409250478577}}};
  for (const auto& [temp, value] : ref) {
    const cplx v = oracles::ibm_analytic(ohmic, temp, 80.0, cplx{0.0, 0.5}, 1.0);
    EXPECT_NEAR(std::abs(v - value), 0.0, 1e-9) << "T = " << temp;
  }
}

TEST(IbmAnalytic, ResolutionDoublingAgrees) {
  // extending the frequency range changes nothing once J has decayed
  const cplx a = oracles::ibm_analytic(ohmic, 77.0, 80.0, cplx{0.0, 0.5}, 1.0);
  const cplx b = oracles::ibm_analytic(ohmic, 77.0, 160.0, cplx{0.0, 0.5}, 1.0);
  EXPECT_LT(std::abs(a - b), 1e-9);
}

TEST(IbmAnalytic, ModulusNeverIncreasesAtFiniteTemperature) {
  for (double temp : {4.0, 77.0}) {
    double prev = 0.5;
    for (double t = 0.1; t <= 6.0; t += 0.1) {
      const double m = std::abs(oracles::ibm_analytic(ohmic, temp, 80.0, cplx{0.0, 0.5}, t));
      EXPECT_LE(m, prev + 1e-14) << "T = " << temp << " t = " << t;
      EXPECT_LE(m, 0.5);
      prev = m;
    }
  }
}

TEST(IbmAnalytic, RejectsNegativeTime) {
  EXPECT_THROW(oracles::ibm_analytic(ohmic, 4.0, 10.0, 0.5, -1.0), std::domain_error);
}

TEST(FeedbackAnalytic, BareDecayBeforeFirstReturn) {
  for (double t : {0.0, 0.4, 1.1, 2.99}) {
    EXPECT_NEAR(std::abs(oracles::feedback_analytic(0.7, 3.0, 1.3, t)), std::exp(-0.7 * t), 1e-15);
  }
  EXPECT_EQ(oracles::feedback_analytic(0.7, 3.0, 1.3, 0.0), cplx(1.0));
}

TEST(FeedbackAnalytic, FirstRoundTripTerm) {
  // n = 0 and n = 1 terms with omega_0 tau = 2 pi, independent script value
  const cplx v = oracles::feedback_analytic(1.0, 3.0, kTwoPi / 3.0, 4.0);
  EXPECT_NEAR(v.real(), 0.3861950800601765, 1e-14);
  EXPECT_NEAR(v.imag(), 0.0, 1e-14);
}

TEST(FeedbackAnalytic, ContinuousAtEveryOnset) {
  for (int n = 1; n <= 6; ++n) {
    const double t = 1.2 * n;
    const cplx l = oracles::feedback_analytic(0.9, 1.2, 2.3, t - 1e-10);
    const cplx r = oracles::feedback_analytic(0.9, 1.2, 2.3, t + 1e-10);
    EXPECT_LT(std::abs(l - r), 1e-8) << "onset " << n;
  }
}

TEST(FeedbackAnalytic, SeriesTerminatesAtFloorOfTOverTau) {
  // beyond t/tau the terms would contribute through their onset factor only
  const double t = 2.5;
  cplx manual = std::exp(-0.9 * t);
  for (int n = 1; n <= 2; ++n) {
    const double s = t - 1.2 * n;
    manual += std::exp(-0.9 * s) * std::pow(0.9 * s, n) / std::tgamma(n + 1.0) * std::exp(cplx{0.0, -n * 1.7 * 1.2});
  }
  EXPECT_LT(std::abs(oracles::feedback_analytic(0.9, 1.2, 1.7, t) - manual), 1e-15);
}

TEST(DelaySteadyState, NoDecayWithoutCoupling) { EXPECT_EQ(oracles::delay_steady_state(0.0, 1.0, 1.0), 1.0); }

TEST(DelaySteadyState, IntegerPhasePlateau) {
  const double p = oracles::delay_steady_state(1.0, 1.0, 1.0);
  // bound state weight 1 / (1 + Gamma tau)^2
  EXPECT_NEAR(p, 0.25, 1e-6);
  // partial sums of the round-trip series approach it
  const double late = std::norm(oracles::feedback_analytic(1.0, 1.0, kTwoPi, 20.0));
  EXPECT_NEAR(late, p, 1e-6);
}

TEST(DelaySteadyState, AntiPhaseVanishes) { EXPECT_NEAR(oracles::delay_steady_state(1.0, 1.0, 0.5), 0.0, 1e-6); }

TEST(DelaySteadyState, StableUnderStepHalving) {
  const double a = oracles::delay_steady_state(0.9, 1.2, 1.0, 1000);
  const double b = oracles::delay_steady_state(0.9, 1.2, 1.0, 2000);
  EXPECT_NEAR(a, b, 1e-7);
  EXPECT_NEAR(a, 1.0 / std::pow(1.0 + 0.9 * 1.2, 2), 1e-6);
}

TEST(DelaySteadyState, ReportsNonConvergence) {
  EXPECT_THROW(oracles::delay_steady_state(0.9, 1.2, 1.17, 1000, 3.0), oracles::OracleError);
  EXPECT_THROW(oracles::delay_steady_state(0.9, 1.2, 1.0, 10), std::invalid_argument);
}

TEST(BruteForcePathSum, SingleStep) {
  std::mt19937 rng(5);
  const auto table = random_table(3, 2, rng);
  SystemModel model;
  model.rabi = 0.8;
  MatrixC rho0(2, 2);
  rho0 << 0.7, cplx(0.1, 0.2), cplx(0.1, -0.2), 0.3;
  const auto out = oracles::brute_force_path_sum(model, table, rho0, 1, 2);
  const MatrixC m = system_propagator(model, table.dt);
  MatrixC expect = MatrixC::Zero(2, 2);
  for (std::size_t j = 0; j < 4; ++j) {
    cplx acc{};
    for (std::size_t k = 0; k < 4; ++k) {
      acc += m(j / 2, k / 2) * std::conj(m(j % 2, k % 2)) * rho0(k / 2, k % 2);
    }
    expect(j / 2, j % 2) = acc * influence_factor(table, model, 0, j, j, 1);
  }
  EXPECT_LT((out[1] - expect).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(BruteForcePathSum, ZeroKernelIsRepeatedPropagation) {
  SystemModel model;
  model.rabi = 1.1;
  model.omega0 = 0.4;
  const auto table = EtaTable::zeros(0.2, 5, 3);
  MatrixC rho0 = MatrixC::Zero(2, 2);
  rho0(1, 1) = 1.0;
  const auto out = oracles::brute_force_path_sum(model, table, rho0, 5, 3);
  const MatrixC u = system_propagator(model, 0.2);
  MatrixC r = rho0;
  for (std::size_t n = 1; n <= 5; ++n) {
    r = u * r * u.adjoint();
    EXPECT_LT((out[n] - r).cwiseAbs().maxCoeff(), 1e-13) << "step " << n;
  }
}

TEST(BruteForcePathSum, AgreesWithRecursiveLoopOrder) {
  std::mt19937 rng(17);
  SystemModel model;
  model.rabi = 0.9;
  model.kappa = {-0.3, 0.8};
  MatrixC rho0(2, 2);
  rho0 << 0.4, cplx(0.2, -0.1), cplx(0.2, 0.1), 0.6;
  for (std::size_t n_c : {1u, 3u}) {
    const auto table = random_table(5, n_c, rng);
    const auto a = oracles::brute_force_path_sum(model, table, rho0, 5, n_c);
    const auto b = recursive_path_sum(model, table, rho0, 5);
    for (std::size_t n = 0; n <= 5; ++n) {
      EXPECT_LT((a[n] - b[n]).cwiseAbs().maxCoeff(), 1e-12) << "n_c " << n_c << " step " << n;
    }
  }
}

TEST(BruteForcePathSum, EnforcesSizeBound) {
  const auto table = EtaTable::zeros(0.1, 20, 2);
  EXPECT_THROW(oracles::brute_force_path_sum(SystemModel{}, table, MatrixC::Identity(2, 2) / 2.0, 13, 2),
               std::invalid_argument);
}

TEST(DenseLiouville, ZeroCouplingKeepsState) {
  feedback::FeedbackConfig cfg;
  cfg.gamma_rad = 0.0;
  cfg.n_d = 2;
  MatrixC rho0(2, 2);
  rho0 << 0.3, cplx(0.1, 0.2), cplx(0.1, -0.2), 0.7;
  const auto out = oracles::dense_liouville_evolution(cfg, rho0, 4);
  for (const auto& v : out) {
    EXPECT_LT((oracles::dense_system_state(v, 2, 1) - rho0).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(DenseLiouville, TraceIsConstant) {
  feedback::FeedbackConfig cfg;
  cfg.gamma_rad = 1.3;
  cfg.n_d = 2;
  cfg.dephasing = 0.2;
  MatrixC rho0 = MatrixC::Zero(2, 2);
  rho0(1, 1) = 1.0;
  for (const auto& v : oracles::dense_liouville_evolution(cfg, rho0, 5)) {
    EXPECT_NEAR(std::abs(oracles::dense_system_state(v, 2, 1).trace() - cplx{1.0}), 0.0, 1e-12);
  }
}

TEST(DenseLiouville, MatchesFeedbackEngine) {
  feedback::FeedbackConfig cfg;
  cfg.gamma_rad = 0.9;
  cfg.tau = 0.6;
  cfg.n_d = 2;
  cfg.phi = 0.3;
  cfg.policy = TruncationPolicy{1e-14, std::nullopt};
  MatrixC rho0 = MatrixC::Zero(2, 2);
  rho0(1, 1) = 1.0;
  const auto dense = oracles::dense_liouville_evolution(cfg, rho0, 5);
  const auto ts = feedback::run(cfg, rho0, 5);
  for (std::size_t n = 0; n <= 5; ++n) {
    EXPECT_LT((oracles::dense_system_state(dense[n], 2, 1) - ts.rows[n].rho).cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(DenseLiouville, EnforcesSizeBound) {
  feedback::FeedbackConfig cfg;
  cfg.n_d = 6;
  EXPECT_THROW(oracles::dense_liouville_evolution(cfg, MatrixC::Identity(2, 2) / 2.0, 6), std::invalid_argument);
}

TEST(OracleReport, AppendsReferenceColumn) {
  TimeSeries ts;
  MatrixC r = MatrixC::Zero(2, 2);
  r(1, 1) = 1.0;
  ts.rows.push_back({0.0, r, 1, 1, 0.0});
  r(1, 1) = 0.5;
  r(0, 0) = 0.5;
  ts.rows.push_back({0.1, r, 1, 1, 0.0});
  const auto rep = oracles::compare(ts, ts.column_rho11(), {1.0, 0.25});
  EXPECT_DOUBLE_EQ(rep.max_abs, 0.25);
  EXPECT_DOUBLE_EQ(rep.max_rel, 1.0);
  const std::string csv = rep.to_csv(ts);
  EXPECT_NE(csv.find("discarded_weight,reference\n"), std::string::npos);
  EXPECT_NE(csv.find(",0.25\n"), std::string::npos);
  EXPECT_THROW(oracles::compare(ts, {1.0}, {1.0, 2.0}), std::invalid_argument);
}
