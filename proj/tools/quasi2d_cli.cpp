// Command-line runner for the experiment registry.
//
// Exit codes: 0 success, 2 invalid configuration, 3 oracle assertion
// failure, 4 memory budget violation, 1 anything else.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "quasi2d/experiments.hpp"

namespace fs = std::filesystem;
using namespace q2d;

namespace {

enum Exit { Ok = 0, Failure = 1, Invalid = 2, OracleFailed = 3, OverBudget = 4 };

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw config::ConfigError({path + ": cannot open file"});
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::string csv_name(const std::string& experiment, const std::string& label) {
  std::string name = experiment;
  if (!label.empty()) name += "_" + label;
  for (char& ch : name) {
    if (ch == '/' || ch == ' ' || ch == ',') ch = '_';
  }
  return name + ".csv";
}

nlohmann::json check_json(const experiments::Check& c) {
  return {{"name", c.name}, {"value", c.value}, {"bound", c.bound}, {"passed", c.passed}};
}

void write_outputs(const experiments::SuiteOutcome& suite, const std::string& experiment, const fs::path& out,
                   bool asserted) {
  fs::create_directories(out);
  nlohmann::json summary;
  summary["experiment"] = experiment;
  summary["oracle_asserted"] = asserted;
  summary["runs"] = nlohmann::json::array();
  for (const auto& r : suite.runs) {
    const std::string file = csv_name(experiment, r.label);
    std::ofstream f(out / file, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + (out / file).string());
    if (r.reference) {
      oracles::OracleReport rep;
      rep.reference = *r.reference;
      f << rep.to_csv(r.series);
    } else {
      f << r.series.to_csv();
    }
    const auto& last = r.series.rows.back();
    nlohmann::json j{{"label", r.label},
                     {"engine", experiments::engine_name(r.engine)},
                     {"csv", file},
                     {"steps", r.series.size() - 1},
                     {"final_time", last.time},
                     {"final_rho11", last.rho11()},
                     {"final_abs_rho01", std::abs(last.rho01())},
                     {"max_trace_defect", r.series.max_trace_defect()},
                     {"max_hermiticity_defect", r.series.max_hermiticity_defect()},
                     {"peak_link_dim", r.series.peak_link_dim()},
                     {"discarded_weight", last.discarded_weight},
                     {"wall_seconds", r.wall_seconds}};
    j["checks"] = nlohmann::json::array();
    for (const auto& c : r.checks) j["checks"].push_back(check_json(c));
    for (const auto& [k, v] : r.metrics) j["metrics"][k] = v;
    summary["runs"].push_back(j);
  }
  summary["checks"] = nlohmann::json::array();
  for (const auto& c : suite.checks) summary["checks"].push_back(check_json(c));
  if (!suite.table.empty()) {
    std::ofstream f(out / "deviations.csv", std::ios::binary);
    for (const auto& row : suite.table) {
      for (std::size_t k = 0; k < row.size(); ++k) f << (k ? "," : "") << row[k];
      f << "\n";
    }
    summary["deviations"] = "deviations.csv";
  }
  summary["passed"] = experiments::all_passed(suite);
  std::ofstream(out / "summary.json", std::ios::binary) << summary.dump(2) << "\n";
}

void report(const experiments::SuiteOutcome& suite) {
  for (const auto& r : suite.runs) {
    const auto& last = r.series.rows.back();
    std::printf("%-24s engine=%-8s steps=%zu rho11(end)=%.6f trace_defect=%.2e link=%zu %.1fs\n",
                r.label.empty() ? "(base)" : r.label.c_str(), experiments::engine_name(r.engine),
                r.series.size() - 1, last.rho11(), r.series.max_trace_defect(), r.series.peak_link_dim(),
                r.wall_seconds);
    for (const auto& c : r.checks) {
      std::printf("  %s %s = %.3e (bound %.1e)\n", c.passed ? "ok  " : "FAIL", c.name.c_str(), c.value, c.bound);
    }
  }
  for (const auto& row : suite.table) {
    std::printf(" ");
    for (const auto& cell : row) std::printf(" %-14s", cell.c_str());
    std::printf("\n");
  }
  for (const auto& c : suite.checks) {
    std::printf("  %s %s = %.3e (bound %.3e)\n", c.passed ? "ok  " : "FAIL", c.name.c_str(), c.value, c.bound);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Open-system simulations with a phonon bath and time-delayed feedback"};
  std::string config_path, experiment, out_dir;
  std::vector<std::string> overrides;
  bool assert_oracle = false, budget_override = false;
  std::size_t jobs = 1;
  app.add_option("--config", config_path, "configuration file")->required()->check(CLI::ExistingFile);
  app.add_option("--experiment", experiment, "experiment name, overrides experiment.name");
  app.add_option("--out", out_dir, "output directory (default: experiment.output or ./out)");
  app.add_flag("--assert-oracle", assert_oracle, "exit with status 3 when an oracle comparison fails");
  app.add_option("--override", overrides, "section.key=value, repeatable")->take_all();
  app.add_flag("--budget-override", budget_override, "allow n_c + n_d beyond the memory budget");
  app.add_option("--jobs", jobs, "sweep entries run concurrently")->check(CLI::PositiveNumber);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? Ok : Invalid;
  }

  try {
    std::vector<std::string> all = overrides;
    if (!experiment.empty()) all.push_back("experiment.name=" + experiment);
    const std::string text = config::apply_overrides(read_file(config_path), all);
    const config::ParsedConfig parsed = config::parse_config_text(text, config_path);
    const std::string name = parsed.base.experiment;
    const fs::path out = !out_dir.empty() ? fs::path(out_dir)
                         : !parsed.base.output.empty() ? fs::path(parsed.base.output)
                                                       : fs::path("out");
    const auto suite = experiments::run_suite(parsed, assert_oracle, budget_override, jobs);
    write_outputs(suite, name, out, assert_oracle);
    report(suite);
    if (assert_oracle && !experiments::all_passed(suite)) {
      std::fprintf(stderr, "oracle assertion failed\n");
      return OracleFailed;
    }
    return Ok;
  } catch (const config::ConfigError& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return Invalid;
  } catch (const quasi2d::BudgetError& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return OverBudget;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return Failure;
  }
}
