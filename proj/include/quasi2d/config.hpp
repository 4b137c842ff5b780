// Experiment configuration: flat key = value files with section headers.
//
// Dimensioned values carry a mandatory unit suffix (ps^-1, ps, K, eV, meV,
// m_e, kg/m^3, m/s) which is checked and stripped on parse. Sections whose
// name starts with "sweep" list parameters to vary; lists inside one sweep
// block are zipped, separate blocks form a Cartesian product. Comments start
// with ';' or '#', at line start or after whitespace.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "quasi2d/bath.hpp"
#include "quasi2d/feedback.hpp"

namespace q2d::config {

/// Every violation found in a configuration, in file order.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> problems)
      : std::runtime_error(join(problems)), problems_(std::move(problems)) {}
  const std::vector<std::string>& problems() const noexcept { return problems_; }

 private:
  static std::string join(const std::vector<std::string>& p) {
    std::string s = "invalid configuration:";
    for (const auto& x : p) s += "\n  " + x;
    return s;
  }
  std::vector<std::string> problems_;
};

enum class Unit { None, Frequency, Time, Temperature, ElectronVolt, MilliElectronVolt, ElectronMass, Density, Velocity };

inline const char* unit_suffix(Unit u) {
  switch (u) {
    case Unit::None: return "";
    case Unit::Frequency: return "ps^-1";
    case Unit::Time: return "ps";
    case Unit::Temperature: return "K";
    case Unit::ElectronVolt: return "eV";
    case Unit::MilliElectronVolt: return "meV";
    case Unit::ElectronMass: return "m_e";
    case Unit::Density: return "kg/m^3";
    case Unit::Velocity: return "m/s";
  }
  return "";
}

enum class Kind { Real, Count, Text };

struct KeySpec {
  Kind kind;
  Unit unit;
};

/// Recognised keys, "section.key".
inline const std::map<std::string, KeySpec>& key_table() {
  static const std::map<std::string, KeySpec> table{
      {"experiment.name", {Kind::Text, Unit::None}},
      {"experiment.total_time", {Kind::Real, Unit::Time}},
      {"experiment.output", {Kind::Text, Unit::None}},
      {"system.rabi", {Kind::Real, Unit::Frequency}},
      {"system.omega0", {Kind::Real, Unit::Frequency}},
      {"system.initial_state", {Kind::Text, Unit::None}},
      {"feedback.gamma", {Kind::Real, Unit::Frequency}},
      {"feedback.tau", {Kind::Real, Unit::Time}},
      {"feedback.n_d", {Kind::Count, Unit::None}},
      {"feedback.phi", {Kind::Real, Unit::None}},
      {"feedback.dephasing", {Kind::Real, Unit::Frequency}},
      {"feedback.n_ph", {Kind::Count, Unit::None}},
      {"feedback.order", {Kind::Count, Unit::None}},
      {"bath.type", {Kind::Text, Unit::None}},
      {"bath.alpha", {Kind::Real, Unit::None}},
      {"bath.s", {Kind::Real, Unit::None}},
      {"bath.omega_c", {Kind::Real, Unit::Frequency}},
      {"bath.cutoff_power", {Kind::Count, Unit::None}},
      {"bath.temperature", {Kind::Real, Unit::Temperature}},
      {"bath.omega_max", {Kind::Real, Unit::Frequency}},
      {"bath.frequency_nodes", {Kind::Count, Unit::None}},
      {"bath.cell_nodes", {Kind::Count, Unit::None}},
      {"bath.d1", {Kind::Real, Unit::ElectronVolt}},
      {"bath.d2", {Kind::Real, Unit::ElectronVolt}},
      {"bath.m1", {Kind::Real, Unit::ElectronMass}},
      {"bath.m2", {Kind::Real, Unit::ElectronMass}},
      {"bath.hw1", {Kind::Real, Unit::MilliElectronVolt}},
      {"bath.hw2", {Kind::Real, Unit::MilliElectronVolt}},
      {"bath.mass_density", {Kind::Real, Unit::Density}},
      {"bath.sound_velocity", {Kind::Real, Unit::Velocity}},
      {"numerics.dt", {Kind::Real, Unit::Time}},
      {"numerics.n_c", {Kind::Count, Unit::None}},
      {"numerics.d_cut", {Kind::Real, Unit::None}},
      {"numerics.max_bond", {Kind::Count, Unit::None}},
      {"numerics.memory_budget", {Kind::Count, Unit::None}},
  };
  return table;
}

inline const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names{"ibm-benchmark", "spin-boson",     "feedback",       "feedback-dephasing",
                                              "lindblad-sweep", "quasi2d",        "convergence-nc", "convergence-dcut",
                                              "convergence-dt", "convergence-order"};
  return names;
}

enum class BathType { None, Parametric, Gaas };

struct SimulationConfig {
  std::string experiment;
  std::string label;  // sweep tag, empty for the base run
  double total_time = 0.0;
  std::string output;

  SystemModel system;
  std::string initial_state = "excited";

  bool feedback_active = false;
  feedback::FeedbackConfig fb;

  BathType bath = BathType::None;
  ParametricDensity parametric{};
  GaasBulkDensity gaas{};
  double temperature = 0.0;
  std::optional<double> omega_max;
  std::size_t frequency_nodes = 2000;
  std::size_t cell_nodes = 32;

  double dt = 0.0;
  std::size_t n_c = 4;
  TruncationPolicy policy{1e-12, std::nullopt};
  std::size_t memory_budget = 19;

  std::size_t steps() const { return static_cast<std::size_t>(std::llround(total_time / dt)); }

  SpectralDensity density() const {
    if (bath == BathType::Parametric) return parametric;
    if (bath == BathType::Gaas) return gaas;
    return SpectralDensity::zero();
  }

  /// The feedback block with the numerical policy applied.
  feedback::FeedbackConfig feedback_config() const {
    feedback::FeedbackConfig c = fb;
    c.policy = policy;
    return c;
  }
};

/// A sweep axis: one or more parameters varied together.
struct SweepBlock {
  std::vector<std::string> keys;
  std::vector<std::vector<std::string>> values;  // values[i][k] for key i, entry k

  std::size_t size() const { return values.empty() ? 0 : values.front().size(); }
};

struct ParsedConfig {
  SimulationConfig base;
  std::vector<SweepBlock> sweeps;
  std::vector<SimulationConfig> runs;  // expanded and validated
};

namespace detail {

// Drops trailing "; ..." or "# ..." comments that follow whitespace.
inline std::string strip_inline_comments(const std::string& text) {
  std::istringstream in(text);
  std::string line, out;
  while (std::getline(in, line)) {
    for (std::size_t k = 1; k < line.size(); ++k) {
      if ((line[k] == ';' || line[k] == '#') && (line[k - 1] == ' ' || line[k - 1] == '\t')) {
        line.erase(k);
        break;
      }
    }
    out += line;
    out += '\n';
  }
  return out;
}

inline std::string trim(std::string s) {
  boost::algorithm::trim(s);
  return s;
}

/// Splits "1.5 ps^-1" into a number and checks the suffix.
inline std::optional<double> parse_quantity(const std::string& raw, Unit unit, const std::string& key,
                                            std::vector<std::string>& errors) {
  const std::string text = trim(raw);
  const std::string want = unit_suffix(unit);
  std::string number = text, suffix;
  const auto space = text.find_first_of(" \t");
  if (space != std::string::npos) {
    number = text.substr(0, space);
    suffix = trim(text.substr(space));
  }
  if (suffix != want) {
    if (want.empty()) {
      errors.push_back(key + ": dimensionless value must not carry a unit (got '" + suffix + "')");
    } else {
      errors.push_back(key + ": expected unit '" + want + "', got '" + (suffix.empty() ? "<none>" : suffix) + "'");
    }
    return std::nullopt;
  }
  try {
    std::size_t used = 0;
    const double v = std::stod(number, &used);
    if (used != number.size() || !std::isfinite(v)) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    errors.push_back(key + ": '" + number + "' is not a number");
    return std::nullopt;
  }
}

inline std::optional<std::size_t> parse_count(const std::string& raw, const std::string& key,
                                              std::vector<std::string>& errors) {
  const std::string text = trim(raw);
  if (text.empty() || !std::all_of(text.begin(), text.end(), [](char c) { return c >= '0' && c <= '9'; })) {
    errors.push_back(key + ": '" + text + "' is not a non-negative integer");
    return std::nullopt;
  }
  return static_cast<std::size_t>(std::stoull(text));
}

inline std::vector<std::string> split_list(const std::string& raw) {
  std::vector<std::string> parts;
  boost::algorithm::split(parts, raw, boost::algorithm::is_any_of(","));
  for (auto& p : parts) p = trim(p);
  return parts;
}

/// Applies one key to the config; errors are appended, never thrown.
inline void assign(SimulationConfig& c, const std::string& key, const std::string& raw,
                   std::vector<std::string>& errors) {
  const auto it = key_table().find(key);
  if (it == key_table().end()) {
    errors.push_back(key + ": unknown key");
    return;
  }
  const KeySpec spec = it->second;
  if (spec.kind == Kind::Text) {
    const std::string v = trim(raw);
    if (key == "experiment.name") c.experiment = v;
    else if (key == "experiment.output") c.output = v;
    else if (key == "system.initial_state") c.initial_state = v;
    else if (key == "bath.type") {
      if (v == "none") c.bath = BathType::None;
      else if (v == "parametric") c.bath = BathType::Parametric;
      else if (v == "gaas") c.bath = BathType::Gaas;
      else errors.push_back(key + ": expected none, parametric or gaas, got '" + v + "'");
    }
    return;
  }
  if (spec.kind == Kind::Count) {
    const auto v = parse_count(raw, key, errors);
    if (!v) return;
    if (key == "feedback.n_d") c.fb.n_d = *v;
    else if (key == "feedback.n_ph") c.fb.n_ph = *v;
    else if (key == "feedback.order") c.fb.order = *v;
    else if (key == "bath.cutoff_power") c.parametric.cutoff_power = static_cast<int>(*v);
    else if (key == "bath.frequency_nodes") c.frequency_nodes = *v;
    else if (key == "bath.cell_nodes") c.cell_nodes = *v;
    else if (key == "numerics.n_c") c.n_c = *v;
    else if (key == "numerics.max_bond") c.policy.max_bond = *v;
    else if (key == "numerics.memory_budget") c.memory_budget = *v;
    return;
  }
  const auto v = parse_quantity(raw, spec.unit, key, errors);
  if (!v) return;
  const double x = *v;
  if (key == "experiment.total_time") c.total_time = x;
  else if (key == "system.rabi") c.system.rabi = x;
  else if (key == "system.omega0") c.system.omega0 = x;
  else if (key == "feedback.gamma") c.fb.gamma_rad = x;
  else if (key == "feedback.tau") c.fb.tau = x;
  else if (key == "feedback.phi") c.fb.phi = x;
  else if (key == "feedback.dephasing") c.fb.dephasing = x;
  else if (key == "bath.alpha") c.parametric.alpha = x;
  else if (key == "bath.s") c.parametric.s = x;
  else if (key == "bath.omega_c") c.parametric.omega_c = x;
  else if (key == "bath.temperature") c.temperature = x;
  else if (key == "bath.omega_max") c.omega_max = x;
  else if (key == "bath.d1") c.gaas.d1_ev = x;
  else if (key == "bath.d2") c.gaas.d2_ev = x;
  else if (key == "bath.m1") c.gaas.m1 = x;
  else if (key == "bath.m2") c.gaas.m2 = x;
  else if (key == "bath.hw1") c.gaas.hw1_mev = x;
  else if (key == "bath.hw2") c.gaas.hw2_mev = x;
  else if (key == "bath.mass_density") c.gaas.rho = x;
  else if (key == "bath.sound_velocity") c.gaas.c_s = x;
  else if (key == "numerics.dt") c.dt = x;
  else if (key == "numerics.d_cut") c.policy.schmidt_cutoff = x;
}

inline bool known_state(const std::string& s) {
  return s == "excited" || s == "ground" || s == "plus" || s == "plus-i";
}

}  // namespace detail

/// Density matrix named by `initial_state`.
inline MatrixC initial_density(const std::string& name) {
  MatrixC r = MatrixC::Zero(2, 2);
  if (name == "excited") r(1, 1) = 1.0;
  else if (name == "ground") r(0, 0) = 1.0;
  else if (name == "plus") r.setConstant(0.5);
  else if (name == "plus-i") {
    r(0, 0) = r(1, 1) = 0.5;
    r(0, 1) = cplx{0.0, 0.5};
    r(1, 0) = cplx{0.0, -0.5};
  } else {
    throw std::invalid_argument("unknown initial state '" + name + "'");
  }
  return r;
}

/// Cross-field checks; appends every violation.
inline void validate(const SimulationConfig& c, std::vector<std::string>& errors) {
  const std::string where = c.label.empty() ? "" : "[" + c.label + "] ";
  auto fail = [&](const std::string& msg) { errors.push_back(where + msg); };
  const auto& names = experiment_names();
  if (std::find(names.begin(), names.end(), c.experiment) == names.end()) {
    fail("experiment.name: unknown experiment '" + c.experiment + "'");
  }
  if (!detail::known_state(c.initial_state)) fail("system.initial_state: unknown state '" + c.initial_state + "'");
  if (!(c.dt > 0.0)) fail("numerics.dt: must be positive");
  if (!(c.total_time > 0.0)) fail("experiment.total_time: must be positive");
  if (c.dt > 0.0 && c.total_time > 0.0) {
    const double ratio = c.total_time / c.dt;
    if (std::abs(ratio - std::round(ratio)) > 1e-9 * std::max(1.0, ratio)) {
      fail("experiment.total_time: must be an integer multiple of numerics.dt");
    }
  }
  if (c.feedback_active) {
    if (c.fb.gamma_rad < 0.0) fail("feedback.gamma: must be non-negative");
    if (!(c.fb.tau > 0.0)) fail("feedback.tau: must be positive");
    if (c.fb.n_d < 1) fail("feedback.n_d: must be at least 1");
    if (c.fb.n_ph < 1) fail("feedback.n_ph: must be at least 1");
    if (c.fb.order < 1) fail("feedback.order: must be at least 1");
    if (c.fb.dephasing < 0.0) fail("feedback.dephasing: must be non-negative");
    if (c.fb.tau > 0.0 && c.dt > 0.0 && c.fb.n_d >= 1 &&
        std::abs(c.dt * static_cast<double>(c.fb.n_d) - c.fb.tau) > 1e-9 * c.fb.tau) {
      fail("numerics.dt * feedback.n_d must equal feedback.tau");
    }
  }
  if (c.bath == BathType::Parametric) {
    if (c.parametric.alpha < 0.0) fail("bath.alpha: must be non-negative");
    if (!(c.parametric.s > 0.0)) fail("bath.s: must be positive");
    if (!(c.parametric.omega_c > 0.0)) fail("bath.omega_c: must be positive");
    if (c.parametric.cutoff_power != 1 && c.parametric.cutoff_power != 2) fail("bath.cutoff_power: must be 1 or 2");
  }
  if (c.bath == BathType::Gaas) {
    if (c.gaas.m1 <= 0 || c.gaas.m2 <= 0) fail("bath.m1, bath.m2: masses must be positive");
    if (c.gaas.hw1_mev <= 0 || c.gaas.hw2_mev <= 0) fail("bath.hw1, bath.hw2: confinement energies must be positive");
    if (c.gaas.rho <= 0) fail("bath.mass_density: must be positive");
    if (c.gaas.c_s <= 0) fail("bath.sound_velocity: must be positive");
  }
  if (c.bath != BathType::None) {
    if (c.temperature < 0.0) fail("bath.temperature: must be non-negative");
    if (c.omega_max && !(*c.omega_max > 0.0)) fail("bath.omega_max: must be positive");
    if (c.frequency_nodes < 16) fail("bath.frequency_nodes: need at least 16");
    if (c.cell_nodes < 1) fail("bath.cell_nodes: need at least 1");
    if (c.n_c < 1) fail("numerics.n_c: must be at least 1");
    if (c.dt > 0.0 && c.total_time > 0.0 && c.n_c > c.steps()) fail("numerics.n_c: exceeds the number of steps");
  }
  if (!(c.policy.schmidt_cutoff >= 0.0 && c.policy.schmidt_cutoff < 1.0)) fail("numerics.d_cut: must lie in [0, 1)");
  if (c.policy.max_bond && *c.policy.max_bond < 1) fail("numerics.max_bond: must be at least 1");
}

/// Parses configuration text. `source` names the origin in messages.
inline ParsedConfig parse_config_text(const std::string& text, const std::string& source = "<config>") {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    std::istringstream in(detail::strip_inline_comments(text));
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError({source + ": " + e.message() + " (line " + std::to_string(e.line()) + ")"});
  }

  std::vector<std::string> errors;
  ParsedConfig out;
  SimulationConfig& c = out.base;
  std::set<std::string> seen_sections;
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) {
      errors.push_back(section + ": key outside of a section");
      continue;
    }
    if (boost::algorithm::starts_with(section, "sweep")) {
      SweepBlock block;
      for (const auto& [key, value] : body) {
        if (key_table().find(key) == key_table().end()) {
          errors.push_back(section + "." + key + ": unknown sweep parameter");
          continue;
        }
        if (key == "experiment.name") {
          errors.push_back(section + "." + key + ": the experiment cannot be swept");
          continue;
        }
        block.keys.push_back(key);
        block.values.push_back(detail::split_list(value.data()));
      }
      for (std::size_t i = 1; i < block.keys.size(); ++i) {
        if (block.values[i].size() != block.values[0].size()) {
          errors.push_back(section + ": lists of " + block.keys[0] + " and " + block.keys[i] + " differ in length");
        }
      }
      if (!block.keys.empty()) out.sweeps.push_back(std::move(block));
      continue;
    }
    seen_sections.insert(section);
    for (const auto& [key, value] : body) detail::assign(c, section + "." + key, value.data(), errors);
  }
  c.feedback_active = seen_sections.count("feedback") > 0;
  if (seen_sections.count("bath") && c.bath == BathType::None && !tree.get_child("bath").count("type")) {
    errors.push_back("bath.type: required when a bath section is present");
  }
  if (c.feedback_active && c.dt == 0.0 && c.fb.n_d >= 1) c.dt = c.fb.tau / static_cast<double>(c.fb.n_d);

  if (out.sweeps.empty()) {
    validate(c, errors);
    if (!errors.empty()) throw ConfigError(errors);
    out.runs.push_back(c);
    return out;
  }

  // Cartesian product over sweep blocks, zipped inside each block.
  std::vector<std::size_t> index(out.sweeps.size(), 0);
  bool empty = false;
  for (const auto& b : out.sweeps) empty = empty || b.size() == 0;
  while (!empty && errors.empty()) {
    SimulationConfig run = c;
    std::string label;
    for (std::size_t b = 0; b < out.sweeps.size(); ++b) {
      const auto& block = out.sweeps[b];
      for (std::size_t k = 0; k < block.keys.size(); ++k) {
        const std::string& v = block.values[k][index[b]];
        detail::assign(run, block.keys[k], v, errors);
        std::string tag = block.keys[k].substr(block.keys[k].find('.') + 1) + "=" + v;
        tag.erase(std::remove(tag.begin(), tag.end(), ' '), tag.end());
        label += (label.empty() ? "" : "_") + tag;
      }
    }
    // keep dt consistent when only the delay discretisation is swept
    if (run.feedback_active && run.dt == c.dt && c.dt == c.fb.tau / static_cast<double>(c.fb.n_d) &&
        run.fb.n_d != c.fb.n_d) {
      bool dt_swept = false;
      for (const auto& b : out.sweeps)
        for (const auto& k : b.keys) dt_swept = dt_swept || k == "numerics.dt";
      if (!dt_swept) run.dt = run.fb.tau / static_cast<double>(run.fb.n_d);
    }
    run.label = label;
    validate(run, errors);
    out.runs.push_back(std::move(run));
    std::size_t b = 0;
    for (; b < index.size(); ++b) {
      if (++index[b] < out.sweeps[b].size()) break;
      index[b] = 0;
    }
    if (b == index.size()) break;
  }
  if (!errors.empty()) throw ConfigError(errors);
  return out;
}

inline ParsedConfig parse_config(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError({path + ": cannot open file"});
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_config_text(ss.str(), path);
}

/// Applies KEY=VALUE overrides (section.key = value with unit) to the text
/// form of a configuration, replacing or adding the entry.
inline std::string apply_overrides(const std::string& text, const std::vector<std::string>& overrides) {
  namespace pt = boost::property_tree;
  std::vector<std::string> errors;
  pt::ptree tree;
  try {
    std::istringstream in(detail::strip_inline_comments(text));
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError({"<config>: " + e.message() + " (line " + std::to_string(e.line()) + ")"});
  }
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) {
      errors.push_back("--override " + o + ": expected KEY=VALUE");
      continue;
    }
    const std::string key = detail::trim(o.substr(0, eq)), value = detail::trim(o.substr(eq + 1));
    const auto dot = key.find('.');
    if (dot == std::string::npos || key_table().find(key) == key_table().end()) {
      errors.push_back("--override " + key + ": unknown key");
      continue;
    }
    // keys are addressed by section and name; '.' is not a path separator here
    const std::string sec = key.substr(0, dot), name = key.substr(dot + 1);
    auto found = tree.find(sec);
    auto& body = found == tree.not_found() ? tree.push_back({sec, pt::ptree{}})->second : found->second;
    auto slot = body.find(name);
    if (slot == body.not_found()) body.push_back({name, pt::ptree{value}});
    else slot->second.data() = value;
  }
  if (!errors.empty()) throw ConfigError(errors);
  std::ostringstream out;
  pt::write_ini(out, tree);
  return out.str();
}

}  // namespace q2d::config
