// Experiment registry: maps a validated configuration to an engine run,
// optional oracle comparisons and, for the convergence family, deviation
// summaries across a parameter sweep.

#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <mutex>
#include <numbers>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "quasi2d/config.hpp"
#include "quasi2d/junction.hpp"
#include "quasi2d/oracles.hpp"
#include "quasi2d/tempo.hpp"

namespace q2d::experiments {

using config::SimulationConfig;

/// A named comparison with its bound.
struct Check {
  std::string name;
  double value = 0.0;
  double bound = 0.0;
  bool passed = false;
};

inline Check check_le(std::string name, double value, double bound) {
  return {std::move(name), value, bound, value <= bound};
}

enum class Engine { Tempo, Feedback, Quasi2d };

inline const char* engine_name(Engine e) {
  switch (e) {
    case Engine::Tempo: return "tempo";
    case Engine::Feedback: return "feedback";
    case Engine::Quasi2d: return "quasi2d";
  }
  return "";
}

struct RunOutcome {
  std::string label;
  Engine engine = Engine::Tempo;
  TimeSeries series;
  std::optional<std::vector<double>> reference;  // oracle column aligned with series rows
  std::vector<Check> checks;
  std::map<std::string, double> metrics;
  double wall_seconds = 0.0;
};

struct SuiteOutcome {
  std::vector<RunOutcome> runs;
  std::vector<Check> checks;                     // cross-run checks
  std::vector<std::vector<std::string>> table;   // deviation summary rows, first row is the header
};

/// Experiment-specific requirements on the configuration.
inline void check_requirements(const SimulationConfig& c, std::vector<std::string>& errors) {
  const std::string& e = c.experiment;
  const bool bath = c.bath != config::BathType::None && !c.density().is_zero();
  auto need = [&](bool ok, const std::string& what) {
    if (!ok) errors.push_back((c.label.empty() ? "" : "[" + c.label + "] ") + e + ": " + what);
  };
  if (e == "ibm-benchmark") {
    need(c.bath != config::BathType::None, "requires a [bath] section");
    need(!c.feedback_active, "does not take a [feedback] section");
    need(c.system.rabi == 0.0, "requires system.rabi = 0 (pure dephasing)");
  } else if (e == "spin-boson") {
    need(c.bath != config::BathType::None, "requires a [bath] section");
    need(!c.feedback_active, "does not take a [feedback] section");
  } else if (e == "feedback" || e == "feedback-dephasing" || e == "lindblad-sweep") {
    need(c.feedback_active, "requires a [feedback] section");
    need(!bath, "takes no phonon bath (use quasi2d)");
  } else if (e == "quasi2d") {
    need(c.feedback_active, "requires a [feedback] section");
    need(c.bath != config::BathType::None, "requires a [bath] section");
  }
}

inline CorrelationKernel make_kernel(const SimulationConfig& c) {
  return CorrelationKernel(c.density(), KernelSettings{c.temperature, c.omega_max, c.frequency_nodes});
}

inline EtaTable make_table(const SimulationConfig& c) {
  return eta_coefficients(make_kernel(c), c.dt, c.steps(), c.n_c, c.cell_nodes);
}

inline quasi2d::JunctionConfig junction_config(const SimulationConfig& c, bool budget_override) {
  quasi2d::JunctionConfig j;
  j.fb = c.feedback_config();
  j.n_c = c.n_c;
  j.memory_budget = c.memory_budget;
  j.budget_override = budget_override;
  return j;
}

/// Which engine a configuration needs. Feedback with a system Hamiltonian
/// goes through the junction, whose path half-step carries the propagator.
inline Engine select_engine(const SimulationConfig& c) {
  if (!c.feedback_active) return Engine::Tempo;
  const bool bath = c.bath != config::BathType::None;
  const bool hamiltonian = c.system.rabi != 0.0 || c.system.omega0 != 0.0;
  return bath || hamiltonian || c.experiment == "quasi2d" ? Engine::Quasi2d : Engine::Feedback;
}

inline TimeSeries run_tempo(const SimulationConfig& c, const EtaTable& table) {
  tempo::TempoConfig t;
  t.dt = c.dt;
  t.n_c = c.n_c;
  t.policy = c.policy;
  t.total_steps = c.steps();
  return tempo::run(c.system, table, t, config::initial_density(c.initial_state));
}

inline TimeSeries run_engine(const SimulationConfig& c, bool budget_override, Engine engine) {
  const MatrixC rho0 = config::initial_density(c.initial_state);
  switch (engine) {
    case Engine::Tempo: return run_tempo(c, make_table(c));
    case Engine::Feedback: return feedback::run(c.feedback_config(), rho0, c.steps());
    case Engine::Quasi2d: {
      const auto j = junction_config(c, budget_override);
      j.validate();
      const EtaTable table = c.bath == config::BathType::None
                                 ? EtaTable::zeros(c.dt, c.steps(), c.n_c)
                                 : make_table(c);
      return quasi2d::run_experiment(c.system, table, j, rho0, c.steps()).series;
    }
  }
  return {};
}

namespace detail {

inline double feedback_phase_frequency(const SimulationConfig& c) {
  return 2.0 * std::numbers::pi * c.fb.phi / c.fb.tau;
}

inline bool near_integer(double x) { return std::abs(x - std::round(x)) < 1e-12; }

/// Mean over the last feedback period, the plateau estimate.
inline double tail_mean(const TimeSeries& s, std::size_t window) {
  window = std::max<std::size_t>(1, std::min(window, s.size()));
  double acc = 0.0;
  for (std::size_t k = s.size() - window; k < s.size(); ++k) acc += s.rows[k].rho11();
  return acc / static_cast<double>(window);
}

/// Linear interpolation of rho11 of `fine` at time t.
inline double interpolate_rho11(const TimeSeries& fine, double t) {
  const auto& r = fine.rows;
  if (t <= r.front().time) return r.front().rho11();
  for (std::size_t k = 1; k < r.size(); ++k) {
    if (r[k].time >= t - 1e-12) {
      const double a = r[k - 1].time, b = r[k].time;
      const double w = b > a ? (t - a) / (b - a) : 1.0;
      return (1.0 - w) * r[k - 1].rho11() + w * r[k].rho11();
    }
  }
  return r.back().rho11();
}

/// Max |rho11| deviation on the grid of `coarse` up to `t_max`.
inline double deviation_on_grid(const TimeSeries& coarse, const TimeSeries& fine, double t_max) {
  double m = 0.0;
  for (const auto& row : coarse.rows) {
    if (row.time > t_max + 1e-12) break;
    m = std::max(m, std::abs(row.rho11() - interpolate_rho11(fine, row.time)));
  }
  return m;
}

inline std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace detail

/// Oracle comparisons for a single run; empty when none applies.
inline void attach_oracles(const SimulationConfig& c, RunOutcome& out) {
  const TimeSeries& s = out.series;
  const MatrixC rho0 = config::initial_density(c.initial_state);
  const std::string& e = c.experiment;

  if (e == "ibm-benchmark") {
    const auto kernel = make_kernel(c);
    std::vector<double> ref;
    double dev = 0.0;
    for (const auto& row : s.rows) {
      const cplx a = oracles::ibm_analytic(kernel, rho0(0, 1), row.time);
      dev = std::max(dev, std::abs(row.rho01() - a));
      ref.push_back(std::abs(a));
    }
    out.reference = ref;
    out.checks.push_back(check_le("max |rho01 - analytic|", dev, 1e-3));
    return;
  }

  if (e == "spin-boson") {
    // literal path sum over the first steps
    const std::size_t n = std::min<std::size_t>({c.steps(), 6, c.n_c + 2});
    if (n < 1 || c.n_c > n) return;
    SimulationConfig shortc = c;
    shortc.total_time = static_cast<double>(n) * c.dt;
    const EtaTable table = make_table(shortc);
    const auto brute = oracles::brute_force_path_sum(c.system, table, rho0, n, c.n_c);
    const auto engine = run_tempo(shortc, table);
    double dev = 0.0;
    for (std::size_t k = 0; k <= n; ++k) dev = std::max(dev, (engine.rows[k].rho - brute[k]).cwiseAbs().maxCoeff());
    out.checks.push_back(check_le("path sum, first " + std::to_string(n) + " steps", dev, 1e-8));
    return;
  }

  if (e == "feedback" && c.fb.dephasing == 0.0 && c.initial_state == "excited") {
    const double w0 = detail::feedback_phase_frequency(c);
    std::vector<double> ref;
    double dev = 0.0;
    for (const auto& row : s.rows) {
      const double r = std::norm(oracles::feedback_analytic(c.fb.gamma_rad, c.fb.tau, w0, row.time));
      ref.push_back(r);
      if (row.time <= 3.0 * c.fb.tau + 1e-9) dev = std::max(dev, std::abs(row.rho11() - r));
    }
    out.reference = ref;
    out.checks.push_back(check_le("max |rho11 - round-trip series| on [0, 3 tau]", dev, 1e-2));
    return;
  }

  if (e == "feedback-dephasing" && c.initial_state == "excited") {
    // before the first return the population ignores the dephasing
    std::vector<double> ref;
    double dev = 0.0;
    for (const auto& row : s.rows) {
      const double r = std::exp(-2.0 * c.fb.gamma_rad * std::min(row.time, c.fb.tau));
      ref.push_back(r);
      if (row.time <= c.fb.tau + 1e-9) dev = std::max(dev, std::abs(row.rho11() - r));
    }
    out.reference = ref;
    out.checks.push_back(check_le("max |rho11 - exp(-2 Gamma t)| for t <= tau", dev, 1e-6));
    return;
  }

  if (e == "lindblad-sweep" && c.fb.dephasing == 0.0 && c.initial_state == "excited" &&
      detail::near_integer(c.fb.phi)) {
    const double plateau = oracles::delay_steady_state(c.fb.gamma_rad, c.fb.tau, c.fb.phi);
    const double engine = detail::tail_mean(s, c.fb.n_d);
    out.metrics["plateau_oracle"] = plateau;
    out.metrics["plateau_engine"] = engine;
    out.checks.push_back(check_le("relative plateau deviation", std::abs(engine - plateau) / plateau, 1e-2));
    return;
  }

  if (e == "quasi2d") {
    if (c.density().is_zero() || c.bath == config::BathType::None) {
      const auto ref = feedback::run(c.feedback_config(), rho0, c.steps());
      if (c.system.rabi == 0.0 && c.system.omega0 == 0.0) {
        out.checks.push_back(check_le("max |quasi2d - feedback engine|", max_state_deviation(s, ref), 1e-8));
      }
    } else if (c.fb.gamma_rad == 0.0 && c.fb.dephasing == 0.0) {
      const auto ref = run_tempo(c, make_table(c));
      out.checks.push_back(check_le("max |quasi2d - path integral|", max_state_deviation(s, ref), 1e-8));
    }
  }
}

inline bool is_convergence(const std::string& e) { return e.rfind("convergence-", 0) == 0; }

/// The swept key of a convergence experiment and its default values.
inline std::pair<std::string, std::vector<std::string>> convergence_axis(const std::string& e) {
  if (e == "convergence-nc") return {"numerics.n_c", {"2", "3", "4", "5"}};
  if (e == "convergence-dcut") return {"numerics.d_cut", {"1e-8", "1e-12", "1e-14"}};
  if (e == "convergence-dt") return {"feedback.n_d", {"4", "5"}};
  return {"feedback.order", {"8", "9", "10"}};
}

/// Expands the default sweep when a convergence config carries none.
inline std::vector<SimulationConfig> convergence_runs(const config::ParsedConfig& parsed) {
  if (parsed.runs.size() > 1) return parsed.runs;
  const auto [key, values] = convergence_axis(parsed.base.experiment);
  std::vector<SimulationConfig> runs;
  std::vector<std::string> errors;
  for (const auto& v : values) {
    SimulationConfig c = parsed.base;
    config::detail::assign(c, key, v, errors);
    if (key == "feedback.n_d") {
      if (!c.feedback_active) errors.push_back(key + ": convergence-dt sweeps n_d and needs a [feedback] section");
      c.dt = c.fb.tau / static_cast<double>(c.fb.n_d);
    }
    c.label = key.substr(key.find('.') + 1) + "=" + v;
    config::validate(c, errors);
    runs.push_back(std::move(c));
  }
  if (!errors.empty()) throw config::ConfigError(errors);
  return runs;
}

/// Consecutive-pair deviations and the pass rule of each convergence family.
inline void convergence_summary(const std::string& e, SuiteOutcome& suite) {
  const auto& r = suite.runs;
  if (r.size() < 2) return;
  suite.table.push_back({"first", "second", "max_deviation_rho11", "t_max"});
  std::vector<double> dev;
  for (std::size_t k = 0; k + 1 < r.size(); ++k) {
    double d = 0.0, t_max = 0.0;
    if (e == "convergence-dt") {
      const TimeSeries& a = r[k].series;
      const TimeSeries& b = r[k + 1].series;
      t_max = std::min({a.rows.back().time, b.rows.back().time, 10.0});
      const bool a_coarse = a.rows[1].time >= b.rows[1].time;
      d = a_coarse ? detail::deviation_on_grid(a, b, t_max) : detail::deviation_on_grid(b, a, t_max);
    } else {
      d = max_population_deviation(r[k].series, r[k + 1].series);
      t_max = std::min(r[k].series.rows.back().time, r[k + 1].series.rows.back().time);
    }
    dev.push_back(d);
    suite.table.push_back({r[k].label, r[k + 1].label, detail::fmt(d), detail::fmt(t_max)});
  }
  if (e == "convergence-nc" && dev.size() >= 2) {
    suite.checks.push_back({"deviation(last pair) < deviation(first pair)", dev.back(), dev.front(),
                            dev.back() < dev.front()});
  } else if (e == "convergence-dt") {
    suite.checks.push_back(check_le("deviation(" + r[0].label + ", " + r[1].label + ") up to 10 ps", dev.front(), 2e-2));
  } else if (e == "convergence-dcut" || e == "convergence-order") {
    suite.checks.push_back(check_le("deviation(" + r[r.size() - 2].label + ", " + r.back().label + ")", dev.back(), 1e-6));
  }
}

/// Runs every configuration, `jobs` at a time. Exceptions from a run are
/// rethrown after all workers finish, the first one wins.
inline SuiteOutcome run_suite(const config::ParsedConfig& parsed, bool with_oracles, bool budget_override,
                              std::size_t jobs = 1) {
  const std::string& e = parsed.base.experiment;
  const std::vector<SimulationConfig> runs = is_convergence(e) ? convergence_runs(parsed) : parsed.runs;
  {
    std::vector<std::string> errors;
    for (const auto& c : runs) check_requirements(c, errors);
    if (!errors.empty()) throw config::ConfigError(errors);
  }
  // budget violations surface before any work starts
  for (const auto& c : runs) {
    if (select_engine(c) == Engine::Quasi2d) junction_config(c, budget_override).validate();
  }

  SuiteOutcome suite;
  suite.runs.resize(runs.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_lock;
  auto worker = [&] {
    for (std::size_t k = next++; k < runs.size(); k = next++) {
      try {
        const auto& c = runs[k];
        RunOutcome& out = suite.runs[k];
        out.label = c.label;
        out.engine = select_engine(c);
        const auto t0 = std::chrono::steady_clock::now();
        out.series = run_engine(c, budget_override, out.engine);
        if (with_oracles) attach_oracles(c, out);
        if (c.feedback_active && c.fb.n_ph >= 2) {
          // photon cutoff sensitivity against the single-photon truncation
          SimulationConfig one = c;
          one.fb.n_ph = 1;
          out.metrics["photon_cutoff_sensitivity"] =
              max_population_deviation(out.series, run_engine(one, budget_override, out.engine));
        }
        out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      } catch (...) {
        std::lock_guard<std::mutex> g(failure_lock);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const std::size_t n_workers = std::max<std::size_t>(1, std::min(jobs, runs.size()));
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < n_workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);

  if (is_convergence(e)) {
    convergence_summary(e, suite);
    if (!with_oracles) suite.checks.clear();
  }
  return suite;
}

inline bool all_passed(const SuiteOutcome& s) {
  for (const auto& c : s.checks) if (!c.passed) return false;
  for (const auto& r : s.runs)
    for (const auto& c : r.checks) if (!c.passed) return false;
  return true;
}

}  // namespace q2d::experiments
